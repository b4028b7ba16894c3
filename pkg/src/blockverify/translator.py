"""Model -> logic theory, rendered as Why3 text or SMT-LIB2 scripts."""

from __future__ import annotations

from dataclasses import dataclass, field

from . import logic
from .graph import DEFAULT_TIME_FROM, build_dataflow, extract_requirements, name_signals
from .library import Axiom, TheorySchema, block_theory, instantiate, library_why3, schema_params
from .logic import Forall, Implies, Sig, Time, is_true, to_smt, to_why3, why3_real
from .model import SPECIFICATION, Model, Port, SignalType, flatten, num_inputs, signal_type_of


class UnknownGoalError(KeyError):
    pass


@dataclass(frozen=True)
class Clone:
    alias: str
    block_id: str
    schema: TheorySchema
    bindings: dict[str, str]
    params: dict[str, float]


@dataclass(frozen=True)
class Goal:
    name: str
    pre: str
    post: str
    time_from: int | None = DEFAULT_TIME_FROM

    @property
    def formula(self):
        return Forall("k", self.time_from, Implies(is_true(self.pre), is_true(self.post)))


@dataclass
class LogicTheory:
    name: str
    declarations: dict[str, SignalType] = field(default_factory=dict)
    clones: list[Clone] = field(default_factory=list)
    axioms: list[Axiom] = field(default_factory=list)
    goals: list[Goal] = field(default_factory=list)

    def goal(self, name: str) -> Goal:
        for g in self.goals:
            if g.name == name:
                return g
        raise UnknownGoalError(name)


@dataclass(frozen=True)
class Quantified:
    name = "quantified"


@dataclass(frozen=True)
class Bounded:
    depth: int = 20
    symbolic_init: bool = True
    name = "bounded"


def alias_for(block_id: str) -> str:
    return block_id[:1].upper() + block_id[1:]


def translate(model: Model, time_from: int | None = DEFAULT_TIME_FROM) -> LogicTheory:
    """Build the theory ``M_<name>``: one declaration per signal, one clone
    per functional block (dataflow order), one goal per Require block.

    ``time_from=None`` quantifies goals over all integers.
    """
    flat = flatten(model)
    graph = build_dataflow(flat)
    names = name_signals(flat)
    blocks = flat.block_map()
    theory = LogicTheory(f"M_{model.name}")

    functional = [bid for bid in graph.eval_order if blocks[bid].kind not in SPECIFICATION]
    for bid in functional:
        b = blocks[bid]
        for port, name in names.items():
            if port.block == bid:
                theory.declarations[name] = signal_type_of(b, port.port)
    for bid in functional:
        b = blocks[bid]
        schema = block_theory(b)
        bindings = {f"in{p}": names[src] for p, src in
                    enumerate(graph.inputs(bid, num_inputs(b)), start=1)}
        bindings["out1"] = names[Port(bid, 1)]
        params = schema_params(schema, b)
        alias = alias_for(bid)
        theory.clones.append(Clone(alias, bid, schema, bindings, params))
        theory.axioms.extend(instantiate(schema, alias, bindings, params, theory.declarations))
    for req in extract_requirements(flat):
        theory.goals.append(Goal(req.goal_name, req.pre, req.post, time_from))
    return theory


# ---------------------------------------------------------------------------
# Why3

# parameters describing initial state are left abstract in the Why3 clone
WHY3_STATE_PARAMS = {"initial"}


def emit_why3(theory: LogicTheory) -> str:
    lines = [f"theory {theory.name}",
             " use import int.Int",
             " use import real.RealInfix",
             " use import bool.Bool"]
    if theory.declarations:
        lines.append("")
    for name, typ in theory.declarations.items():
        lines.append(f" function {name} int: {typ.value}")
    for c in theory.clones:
        with_ = ", ".join(f"function {slot} = {sig}" for slot, sig in c.bindings.items())
        lines.append("")
        lines.append(f"  clone simulink.{c.schema.name} as {c.alias} with {with_}")
        for q, v in c.params.items():
            if q in WHY3_STATE_PARAMS:
                continue
            lines.append(f"  axiom {c.alias.lower()}_{q}: {c.alias}.{q} = {why3_real(v)}")
    if theory.goals:
        lines.append("")
    for g in theory.goals:
        lines.append(f"  goal {g.name} : {to_why3(g.formula, quant_space=True)}")
    lines.append("end")
    return "\n".join(lines) + "\n"


def emit_why3_library(theory: LogicTheory | None = None) -> str:
    """Text of the ``simulink`` library the theory's clones refer to."""
    return library_why3([c.schema for c in theory.clones] if theory is not None else None)


# ---------------------------------------------------------------------------
# SMT-LIB2

_SORT = {SignalType.REAL: "Real", SignalType.BOOL: "Bool"}


def emit_smtlib(theory: LogicTheory, goal: str | None, mode=Quantified(),
                get_model: bool = True) -> str:
    """SMT-LIB2 script whose ``unsat`` answer means the goal holds.

    Quantified: signals are functions Int -> sort, axioms universally
    quantified, and the negated goal asserted.
    Bounded: one constant per signal per step 0..depth, axioms unrolled, and
    a violation at some step in the goal's domain asserted. With
    ``goal=None`` no violation is asserted (the script only pins down the
    unrolled model, which is handy for extracting values).
    """
    g = theory.goal(goal) if goal is not None else None
    out = [f"; {theory.name} goal={goal or '-'} mode={mode.name}"]
    if isinstance(mode, Bounded):
        out += _bounded_body(theory, g, mode, get_model)
    else:
        out += _quantified_body(theory, g)
    out.append("(exit)")
    return "\n".join(out) + "\n"


def _quantified_body(theory, g):
    out = ["(set-logic UFNIRA)"]
    for name, typ in theory.declarations.items():
        out.append(f"(declare-fun {name} (Int) {_SORT[typ]})")
    for ax in theory.axioms:
        out.append(f"; {ax.name}")
        out.append(f"(assert {to_smt(ax.formula)})")
    if g is not None:
        out.append(f"; negated goal {g.name}")
        out.append(f"(assert (not {to_smt(g.formula)}))")
    out.append("(check-sat)")
    return out


def emit_signal_query(theory: LogicTheory, signal: str, depth: int,
                      time_from: int | None = DEFAULT_TIME_FROM) -> str:
    """Bounded script (symbolic initial state) that is sat iff the Boolean
    ``signal`` can be true at some step in ``time_from..depth``."""
    lo = 0 if time_from is None else max(time_from, 0)
    steps = [logic.step_symbol(signal, k) for k in range(lo, depth + 1)]
    extra = [f"; can {signal} hold?", f"(assert (or false {' '.join(steps)}))"]
    out = [f"; {theory.name} reachability of {signal} depth={depth}"]
    out += _bounded_body(theory, None, Bounded(depth, True), False, extra)
    out.append("(exit)")
    return "\n".join(out) + "\n"


def _bounded_body(theory, g, mode, get_model, extra=()):
    depth = mode.depth
    out = ["(set-option :produce-models true)", "(set-logic QF_NRA)"]
    consts = []
    for name, typ in theory.declarations.items():
        for k in range(depth + 1):
            sym = logic.step_symbol(name, k)
            consts.append(sym)
            out.append(f"(declare-const {sym} {_SORT[typ]})")
    for ax in theory.axioms:
        if ax.initial and mode.symbolic_init:
            continue
        out.append(f"; {ax.name}")
        for k, body in logic.unroll(ax.formula, depth):
            out.append(f"(assert {to_smt(body, step=0 if k is None else k)})")
    if g is not None:
        viol = [f"(and {to_smt(is_true(g.pre), k)} (not {to_smt(is_true(g.post), k)}))"
                for k in goal_steps(g, depth)]
        out.append(f"; violation of {g.name} within depth {depth}")
        if not viol:
            out.append("(assert false)")
        elif len(viol) == 1:
            out.append(f"(assert {viol[0]})")
        else:
            out.append("(assert (or " + " ".join(viol) + "))")
    out.extend(extra)
    out.append("(check-sat)")
    if get_model:
        out.append("(get-value (" + " ".join(consts) + "))" if consts else "(get-model)")
    return out


def goal_steps(g: Goal, depth: int) -> range:
    lo = 0 if g.time_from is None else max(g.time_from, 0)
    return range(lo, depth + 1)


# ---------------------------------------------------------------------------
# direct evaluation of the unrolled axioms

class EvaluationError(Exception):
    pass


def evaluate_bounded(theory: LogicTheory, depth: int,
                     initial: dict[str, float] | None = None) -> dict[str, list]:
    """Values of every signal at steps 0..depth implied by the unrolled axioms.

    Works on the formulas alone: an instance ``s(k) = term`` assigns s once
    the term is known, and a pair ``s(k) = True -> c`` / ``s(k) = False -> not c``
    fixes a Boolean s once c is known. ``initial`` overrides the UnitDelay
    initial-condition axioms (signal name -> value). Raises EvaluationError if
    the axioms leave something undetermined or contradict each other.
    """
    vals: dict[tuple[str, int], object] = {}

    def lookup(name, k):
        try:
            return vals[(name, k)]
        except KeyError:
            raise logic.Unknown(name, k) from None

    def known(term, k):
        try:
            return True, logic.evaluate(term, lookup, k)
        except logic.Unknown:
            return False, None

    instances: dict[int, list] = {k: [] for k in range(depth + 1)}
    for ax in theory.axioms:
        for k, body in logic.unroll(ax.formula, depth):
            if ax.initial and initial is not None:
                sig = body.left
                if sig.name in initial:
                    body = logic.Rel("=", sig, logic.RealLit(initial[sig.name]))
            step = k if k is not None else body.left.time.offset
            instances[step].append((k, body))

    for step in range(depth + 1):
        pending = list(instances[step])
        progress = True
        while pending and progress:
            progress = False
            rest = []
            for k, body in pending:
                target = _assignment(body, k, known)
                if target is None:
                    rest.append((k, body))
                    continue
                key, value = target
                if key in vals:
                    rest.append((k, body))
                    continue
                vals[key] = value
                progress = True
            # drop instances that are now fully evaluable
            pending = []
            for k, body in rest:
                ok, v = known(body, k)
                if ok:
                    if not v:
                        raise EvaluationError(f"axiom instance violated at step {step}: {to_smt(body, step)}")
                else:
                    pending.append((k, body))
        if pending:
            raise EvaluationError(f"signals undetermined at step {step}: "
                                  f"{sorted(logic.symbols(pending[0][1]))}")

    out: dict[str, list] = {}
    for name in theory.declarations:
        out[name] = [vals.get((name, k)) for k in range(depth + 1)]
        if any(v is None for v in out[name]):
            raise EvaluationError(f"{name} undetermined")
    return out


def _assignment(body, k, known):
    """(key, value) forced by this instance, or None."""
    if isinstance(body, logic.Rel) and body.op == "=" and isinstance(body.left, Sig):
        sig = body.left
        ok, v = known(body.right, k)
        if ok:
            return (sig.name, sig.time.at(k) if k is not None else sig.time.offset), v
        return None
    if isinstance(body, Implies) and isinstance(body.left, logic.Rel):
        lhs = body.left
        if (lhs.op == "=" and isinstance(lhs.left, Sig) and isinstance(lhs.right, logic.BoolLit)):
            ok, cond = known(body.right, k)
            if ok and not cond:
                # the antecedent must be false, so the Boolean takes the other value
                return (lhs.left.name, lhs.left.time.at(k)), not lhs.right.value
    return None
