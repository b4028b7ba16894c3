"""Axiom schemas for the functional block kinds.

Each schema mirrors one theory of the Why3 ``simulink`` library: named
input/output function slots over integer time, constant parameters, and
axioms quantified over time. ``instantiate`` binds a schema to concrete
signal names and parameter values for one block.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .logic import (NEGATED_REL, Add, And, BoolLit, Forall, Implies, Mul, Neg, Not, Or, Param,
                    RealLit, Rel, Sig, Time, params_of, substitute, symbols, to_why3)
from .model import Block, BlockKind, SignalType

K = Time("k")
PREV = Time("k", -1)
ORIGIN = Time(None, 0)

# relation in the model vocabulary -> (IR op, schema name suffix)
RELATION_OPS = {
    "==": ("=", "eq"),
    "~=": ("!=", "neq"),
    ">": (">", "g"),
    "<": ("<", "l"),
    ">=": (">=", "geq"),
    "<=": ("<=", "leq"),
}


class UnsupportedBlockError(Exception):
    pass


class BindingError(Exception):
    pass


@dataclass(frozen=True)
class Axiom:
    name: str
    formula: object
    # initial-condition axioms are dropped when the initial state is left symbolic
    initial: bool = False


@dataclass(frozen=True)
class TheorySchema:
    name: str
    inputs: tuple[tuple[str, SignalType], ...]
    outputs: tuple[tuple[str, SignalType], ...]
    parameters: tuple[str, ...] = ()
    axioms: tuple[Axiom, ...] = ()
    # block parameter name -> schema constant name
    param_map: dict = field(default_factory=dict)

    @property
    def slots(self):
        return self.inputs + self.outputs

    @property
    def uses_bool(self):
        return any(t is SignalType.BOOL for _, t in self.slots)


def _check(schema: TheorySchema) -> TheorySchema:
    slots = {s for s, _ in schema.slots}
    for ax in schema.axioms:
        assert symbols(ax.formula) <= slots, (schema.name, ax.name)
        assert params_of(ax.formula) <= set(schema.parameters), (schema.name, ax.name)
    return schema


def _bool_pair(out, cond):
    """out = True -> cond and out = False -> not cond (cond's negation pushed
    into relations where possible)."""
    if isinstance(cond, Rel):
        neg = Rel(NEGATED_REL[cond.op], cond.left, cond.right)
    else:
        neg = Not(cond)
    return (
        Axiom("v1", Forall("k", None, Implies(Rel("=", Sig(out, K), BoolLit(True)), cond))),
        Axiom("v2", Forall("k", None, Implies(Rel("=", Sig(out, K), BoolLit(False)), neg))),
    )


R, B = SignalType.REAL, SignalType.BOOL


def product_schema():
    in1, in2, out = Sig("in1", K), Sig("in2", K), Sig("out1", K)
    zero = RealLit(0.0)
    return TheorySchema(
        "Product_int", (("in1", R), ("in2", R)), (("out1", R),),
        axioms=(
            Axiom("v", Forall("k", None, Rel("=", out, Mul(in1, in2)))),
            Axiom("c1", Forall("k", None, Implies(And((Rel(">", in1, zero), Rel(">", in2, zero))),
                                                 Rel(">", out, zero)))),
            Axiom("c2", Forall("k", None, Implies(And((Rel("<", in1, zero), Rel("<", in2, zero))),
                                                 Rel(">", out, zero)))),
        ))


def gain_schema():
    return TheorySchema(
        "Gain_int", (("in1", R),), (("out1", R),), ("gain",),
        axioms=(Axiom("v", Forall("k", None, Rel("=", Sig("out1", K), Mul(Param("gain"), Sig("in1", K))))),),
        param_map={"gain": "gain"})


def sum_schema(signs: str):
    n = len(signs)
    terms = []
    for i, s in enumerate(signs, start=1):
        t = Sig(f"in{i}", K)
        terms.append(t if s == "+" else Neg(t))
    suffix = "" if signs == "++" else "_" + signs.replace("+", "p").replace("-", "m")
    return TheorySchema(
        f"Sum{suffix}_int", tuple((f"in{i}", R) for i in range(1, n + 1)), (("out1", R),),
        axioms=(Axiom("v", Forall("k", None, Rel("=", Sig("out1", K), Add(tuple(terms))))),))


def unit_delay_schema():
    return TheorySchema(
        "UnitDelay_int", (("in1", R),), (("out1", R),), ("initial",),
        axioms=(
            Axiom("v", Forall("k", 1, Rel("=", Sig("out1", K), Sig("in1", PREV)))),
            Axiom("init", Rel("=", Sig("out1", ORIGIN), Param("initial")), initial=True),
        ),
        param_map={"initial": "initial"})


def constant_schema():
    return TheorySchema(
        "Constant_int", (), (("out1", R),), ("value",),
        axioms=(Axiom("v", Forall("k", None, Rel("=", Sig("out1", K), Param("value")))),),
        param_map={"value": "value"})


def compare_to_zero_schema(relation: str):
    op, suffix = RELATION_OPS[relation]
    return TheorySchema(
        f"CompareToZero_{suffix}_int", (("in1", R),), (("out1", B),),
        axioms=_bool_pair("out1", Rel(op, Sig("in1", K), RealLit(0.0))))


def compare_to_constant_schema(relation: str):
    op, suffix = RELATION_OPS[relation]
    # ``constant`` is a Why3 keyword, so the schema constant is ``c``
    return TheorySchema(
        f"CompareToConstant_{suffix}_int", (("in1", R),), (("out1", B),), ("c",),
        axioms=_bool_pair("out1", Rel(op, Sig("in1", K), Param("c"))),
        param_map={"constant": "c"})


def logical_schema(op: str, arity: int):
    ins = [Rel("=", Sig(f"in{i}", K), BoolLit(True)) for i in range(1, arity + 1)]
    if op == "NOT":
        cond, name = Not(ins[0]), "Logical_not_int"
    else:
        cond = (And if op == "AND" else Or)(tuple(ins))
        name = f"Logical_{op.lower()}{'' if arity == 2 else arity}_int"
    return TheorySchema(
        name, tuple((f"in{i}", B) for i in range(1, arity + 1)), (("out1", B),),
        axioms=_bool_pair("out1", cond))


def block_theory(block: Block) -> TheorySchema:
    """The schema for a functional block, chosen by kind and structural params."""
    k, p = block.kind, block.params
    if k is BlockKind.PRODUCT:
        s = product_schema()
    elif k is BlockKind.GAIN:
        s = gain_schema()
    elif k is BlockKind.SUM:
        s = sum_schema(p["signs"])
    elif k is BlockKind.UNIT_DELAY:
        s = unit_delay_schema()
    elif k is BlockKind.CONSTANT:
        s = constant_schema()
    elif k is BlockKind.COMPARE_TO_ZERO:
        s = compare_to_zero_schema(p["relation"])
    elif k is BlockKind.COMPARE_TO_CONSTANT:
        s = compare_to_constant_schema(p["relation"])
    elif k is BlockKind.LOGICAL:
        s = logical_schema(p["op"], p["arity"])
    else:
        raise UnsupportedBlockError(f"{block.id}: {k.value} has no theory (not a functional block)")
    return _check(s)


def schema_params(schema: TheorySchema, block: Block) -> dict[str, float]:
    return {const: block.params[key] for key, const in schema.param_map.items()}


def instantiate(schema: TheorySchema, alias: str, bindings: dict[str, str],
                params: dict[str, float], types: dict[str, SignalType] | None = None) -> list[Axiom]:
    """Axioms of ``schema`` with slots renamed to signals and parameters fixed.

    Axiom names become ``<alias>_<name>``. ``types`` (signal -> type), when
    given, is checked against the slot types.
    """
    missing = [s for s, _ in schema.slots if s not in bindings]
    if missing:
        raise BindingError(f"{alias}: no binding for slot(s) {', '.join(missing)}")
    missing = [q for q in schema.parameters if q not in params]
    if missing:
        raise BindingError(f"{alias}: no value for parameter(s) {', '.join(missing)}")
    if types is not None:
        for slot, typ in schema.slots:
            have = types.get(bindings[slot])
            if have is not None and have is not typ:
                raise BindingError(f"{alias}: slot {slot} is {typ.value}, bound to {have.value} signal")
    return [Axiom(f"{alias}_{ax.name}", substitute(ax.formula, bindings, params), ax.initial)
            for ax in schema.axioms]


# ---------------------------------------------------------------------------
# Why3 library text

def schema_why3(schema: TheorySchema) -> str:
    lines = [f"theory {schema.name}", " use import int.Int", " use import real.RealInfix"]
    if schema.uses_bool:
        lines.append(" use import bool.Bool")
    lines.append("")
    for q in schema.parameters:
        lines.append(f" constant {q}: real")
    for slot, typ in schema.slots:
        lines.append(f" function {slot} int: {typ.value}")
    lines.append("")
    for ax in schema.axioms:
        lines.append(f" axiom {ax.name}: {to_why3(ax.formula)}")
    lines.append("end")
    return "\n".join(lines) + "\n"


def all_schemas() -> list[TheorySchema]:
    out = [constant_schema(), gain_schema(), sum_schema("++"), sum_schema("+-"),
           product_schema(), unit_delay_schema()]
    out += [compare_to_zero_schema(r) for r in RELATION_OPS]
    out += [compare_to_constant_schema(r) for r in RELATION_OPS]
    out += [logical_schema("AND", 2), logical_schema("OR", 2), logical_schema("NOT", 1)]
    return out


def library_why3(schemas: list[TheorySchema] | None = None) -> str:
    """The ``simulink`` library file: every schema the given theories clone."""
    seen, parts = set(), []
    for s in schemas if schemas is not None else all_schemas():
        if s.name not in seen:
            seen.add(s.name)
            parts.append(schema_why3(s))
    return "\n".join(parts)
