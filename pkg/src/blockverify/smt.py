"""Driving an external SMT-LIB2 solver and interpreting its answers."""

from __future__ import annotations

import enum
import os
import shutil
import signal
import subprocess
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from fractions import Fraction

import numpy as np

from . import logic
from .graph import DEFAULT_TIME_FROM
from .model import BlockKind, Model, flatten, set_param
from .simulator import CheckResult, check_requirement, simulate
from .translator import (Bounded, LogicTheory, Quantified, emit_signal_query, emit_smtlib,
                         goal_steps, translate)

SOLVER_ENV = "BLOCKVERIFY_SOLVER"
DEFAULT_TIMEOUT = 150.0
KNOWN_SOLVERS = ("z3", "cvc5", "cvc4", "yices-smt2")

# per-solver argument templates; {script} is the script path
DEFAULT_ARGS = {
    # e-matching alone settles the stable cases; MBQI only spins on the rest
    "z3": ("-smt2", "smt.mbqi=false", "{script}"),
    "cvc5": ("--lang=smt2", "--produce-models", "{script}"),
    "cvc4": ("--lang=smt2", "--produce-models", "{script}"),
}


class SolverNotFoundError(Exception):
    pass


class SExprError(ValueError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    executable: str | None = None
    args: tuple[str, ...] | None = None
    timeout: float = DEFAULT_TIMEOUT
    mode: Quantified | Bounded = Quantified()

    def __post_init__(self):
        if not self.timeout > 0:
            raise ValueError("timeout must be positive")
        if self.args is not None and not any("{script}" in a for a in self.args):
            raise ValueError("argument template needs a {script} placeholder")

    def resolve(self) -> tuple[str, tuple[str, ...]]:
        exe = self.executable or os.environ.get(SOLVER_ENV)
        if exe:
            path = shutil.which(exe)
            if path is None:
                raise SolverNotFoundError(f"solver executable {exe!r} not found")
        else:
            for cand in KNOWN_SOLVERS:
                path = shutil.which(cand)
                if path:
                    break
            else:
                raise SolverNotFoundError(
                    f"no SMT solver found; install z3 (pip install z3-solver) or set {SOLVER_ENV}")
        args = self.args
        if args is None:
            args = DEFAULT_ARGS.get(os.path.basename(path), ("{script}",))
        return path, args


def find_solver() -> str | None:
    try:
        return SolverConfig().resolve()[0]
    except SolverNotFoundError:
        return None


@dataclass(frozen=True)
class SolverOutcome:
    status: str  # sat | unsat | unknown | timeout | error
    stdout: str
    stderr: str
    wall_time: float
    returncode: int | None = None


def run_solver(script: str, config: SolverConfig = SolverConfig()) -> SolverOutcome:
    """Run the solver on ``script`` (written to a temp file) under a wall-clock
    limit; the whole process group is killed on timeout."""
    exe, template = config.resolve()
    fd, path = tempfile.mkstemp(suffix=".smt2", prefix="blockverify_")
    try:
        with os.fdopen(fd, "w") as f:
            f.write(script)
        argv = [exe] + [a.replace("{script}", path) for a in template]
        start = time.monotonic()
        try:
            proc = subprocess.Popen(argv, stdout=subprocess.PIPE, stderr=subprocess.PIPE,
                                    stdin=subprocess.DEVNULL, text=True, start_new_session=True)
        except OSError as exc:
            raise SolverNotFoundError(f"cannot start {exe}: {exc}") from exc
        try:
            out, err = proc.communicate(timeout=config.timeout)
        except subprocess.TimeoutExpired:
            _kill_group(proc)
            out, err = proc.communicate()
            return SolverOutcome("timeout", out, err, time.monotonic() - start, proc.returncode)
        elapsed = time.monotonic() - start
    finally:
        os.unlink(path)
    return SolverOutcome(_status(out), out, err, elapsed, proc.returncode)


def _kill_group(proc):
    try:
        os.killpg(proc.pid, signal.SIGKILL)
    except (ProcessLookupError, PermissionError):
        proc.kill()


def _status(out: str) -> str:
    for line in out.splitlines():
        tok = line.strip()
        if tok in ("sat", "unsat", "unknown"):
            return tok
        if tok.startswith("(error"):
            return "error"
    return "error"


# ---------------------------------------------------------------------------
# s-expressions

def parse_sexprs(text: str) -> list:
    """All s-expressions in ``text``; atoms stay strings, ``|x|`` is unquoted."""
    toks = []
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c.isspace():
            i += 1
        elif c == ";":
            while i < n and text[i] != "\n":
                i += 1
        elif c in "()":
            toks.append(c)
            i += 1
        elif c == "|":
            j = text.find("|", i + 1)
            if j < 0:
                raise SExprError("unterminated |symbol|")
            toks.append(("sym", text[i + 1:j]))
            i = j + 1
        elif c == '"':
            j = i + 1
            while j < n and not (text[j] == '"' and (j + 1 >= n or text[j + 1] != '"')):
                j += 2 if text[j] == '"' else 1
            toks.append(("str", text[i + 1:j]))
            i = j + 1
        else:
            j = i
            while j < n and not text[j].isspace() and text[j] not in "();|\"":
                j += 1
            toks.append(text[i:j])
            i = j

    out, stack = [], []
    for t in toks:
        if t == "(":
            stack.append([])
        elif t == ")":
            if not stack:
                raise SExprError("unbalanced ')'")
            done = stack.pop()
            (stack[-1] if stack else out).append(done)
        else:
            atom = t[1] if isinstance(t, tuple) else t
            (stack[-1] if stack else out).append(atom)
    if stack:
        raise SExprError("unbalanced '('")
    return out


def sexpr_value(e):
    """Numeric/Boolean value of a solver-printed constant."""
    if isinstance(e, str):
        if e == "true":
            return True
        if e == "false":
            return False
        try:
            return Fraction(e)
        except ValueError:
            raise SExprError(f"not a value: {e!r}") from None
    if not e:
        raise SExprError("empty expression")
    head, *args = e
    if head == "-" and len(args) == 1:
        return -sexpr_value(args[0])
    if head == "-" and len(args) > 1:
        v = sexpr_value(args[0])
        for a in args[1:]:
            v -= sexpr_value(a)
        return v
    if head == "+":
        return sum((sexpr_value(a) for a in args), Fraction(0))
    if head == "*":
        v = Fraction(1)
        for a in args:
            v *= sexpr_value(a)
        return v
    if head == "/" and len(args) == 2:
        return sexpr_value(args[0]) / sexpr_value(args[1])
    if head == "root-obj" and len(args) == 2:
        return _root_obj(args[0], int(args[1]))
    raise SExprError(f"unsupported value expression {e!r}")


def _poly(e) -> dict[int, Fraction]:
    """Univariate polynomial in the bound variable as {degree: coefficient}."""
    if isinstance(e, str):
        try:
            return {0: Fraction(e)}
        except ValueError:
            return {1: Fraction(1)}
    head, *args = e
    if head == "+":
        acc: dict[int, Fraction] = {}
        for a in args:
            for d, c in _poly(a).items():
                acc[d] = acc.get(d, 0) + c
        return acc
    if head == "-" and len(args) == 1:
        return {d: -c for d, c in _poly(args[0]).items()}
    if head == "-":
        acc = dict(_poly(args[0]))
        for a in args[1:]:
            for d, c in _poly(a).items():
                acc[d] = acc.get(d, 0) - c
        return acc
    if head == "*":
        acc = {0: Fraction(1)}
        for a in args:
            acc = _pmul(acc, _poly(a))
        return acc
    if head == "^":
        base, acc = _poly(args[0]), {0: Fraction(1)}
        for _ in range(int(args[1])):
            acc = _pmul(acc, base)
        return acc
    if head == "/":
        num, den = _poly(args[0]), sexpr_value(args[1])
        return {d: c / den for d, c in num.items()}
    raise SExprError(f"unsupported polynomial {e!r}")


def _pmul(a, b):
    out: dict[int, Fraction] = {}
    for d1, c1 in a.items():
        for d2, c2 in b.items():
            out[d1 + d2] = out.get(d1 + d2, 0) + c1 * c2
    return out


def _root_obj(poly, index: int) -> float:
    p = _poly(poly)
    deg = max(p)
    coeffs = [float(p.get(d, 0)) for d in range(deg, -1, -1)]
    roots = sorted(r.real for r in np.roots(coeffs) if abs(r.imag) < 1e-9)
    return roots[index - 1]


def parse_values(text: str) -> dict[str, object]:
    """Constant values from ``get-value`` or ``get-model`` output."""
    vals: dict[str, object] = {}
    for e in parse_sexprs(text):
        if not isinstance(e, list):
            continue
        items = e[1:] if e and e[0] == "model" else e
        for item in items:
            if not isinstance(item, list) or not item:
                continue
            if item[0] == "define-fun" and len(item) == 5 and item[2] == []:
                vals[item[1]] = sexpr_value(item[4])
            elif len(item) == 2 and isinstance(item[0], str):
                vals[item[0]] = sexpr_value(item[1])
    return vals


# ---------------------------------------------------------------------------
# proving

class Verdict(enum.Enum):
    VALID = "Valid"
    BOUNDED_VALID = "BoundedValid"
    FALSIFIABLE = "Falsifiable"
    UNKNOWN = "Unknown"
    TIMEOUT = "Timeout"
    SOLVER_ERROR = "SolverError"


@dataclass(frozen=True)
class Witness:
    step: int
    initial: dict[str, float]  # UnitDelay block id -> initial value
    values: dict[str, list]  # signal -> values for k = 0..depth


@dataclass(frozen=True)
class ProveResult:
    goal_name: str
    verdict: Verdict
    wall_time: float
    witness: Witness | None = None
    depth: int | None = None
    note: str = ""

    def __str__(self):
        text = f"{self.goal_name} {self.verdict.value}"
        if self.verdict is Verdict.BOUNDED_VALID:
            text += f" (depth {self.depth})"
        if self.witness is not None:
            text += f" at k={self.witness.step}"
        return text


def prove(theory: LogicTheory, goal: str, config: SolverConfig = SolverConfig(),
          delay_ids: dict[str, str] | None = None) -> ProveResult:
    """Decide one goal. ``delay_ids`` maps UnitDelay output signals to block
    ids (used to report witness initial conditions); defaults to the
    ``<id>_op1`` convention over the theory's UnitDelay clones."""
    mode = config.mode
    script = emit_smtlib(theory, goal, mode)
    res = run_solver(script, config)
    depth = mode.depth if isinstance(mode, Bounded) else None
    base = dict(goal_name=goal, wall_time=res.wall_time, depth=depth)
    if res.status == "timeout":
        return ProveResult(verdict=Verdict.TIMEOUT, note=f"no answer within {config.timeout:g} s", **base)
    if res.status == "unsat":
        return ProveResult(verdict=Verdict.BOUNDED_VALID if depth is not None else Verdict.VALID, **base)
    if res.status == "unknown":
        return ProveResult(verdict=Verdict.UNKNOWN, note="solver answered unknown", **base)
    if res.status == "sat" and depth is None:
        return ProveResult(verdict=Verdict.UNKNOWN,
                           note="sat over uninterpreted time functions; not a system trace", **base)
    if res.status == "sat":
        try:
            witness = _witness(theory, theory.goal(goal), res.stdout, depth, delay_ids)
        except (SExprError, KeyError, IndexError, ValueError) as exc:
            return ProveResult(verdict=Verdict.SOLVER_ERROR,
                               note=f"unreadable model: {exc}\n{res.stdout}", **base)
        return ProveResult(verdict=Verdict.FALSIFIABLE, witness=witness, **base)
    diag = (res.stdout + res.stderr).strip()
    return ProveResult(verdict=Verdict.SOLVER_ERROR, note=diag[:2000], **base)


def _witness(theory, goal, stdout, depth, delay_ids) -> Witness:
    lines = stdout.splitlines()
    start = next(i for i, line in enumerate(lines) if line.strip() == "sat")
    raw = parse_values("\n".join(lines[start + 1:]))
    values = {}
    for name in theory.declarations:
        series = []
        for k in range(depth + 1):
            v = raw[logic.step_symbol(name, k)]
            series.append(v if isinstance(v, bool) else float(v))
        values[name] = series
    step = next(k for k in goal_steps(goal, depth)
                if values[goal.pre][k] and not values[goal.post][k])
    if delay_ids is None:
        delay_ids = {c.bindings["out1"]: c.block_id for c in theory.clones
                     if c.schema.name == "UnitDelay_int"}
    initial = {bid: values[sig][0] for sig, bid in delay_ids.items()}
    return Witness(step, initial, values)


def replay_witness(model: Model, goal: str, witness: Witness,
                   time_from: int | None = DEFAULT_TIME_FROM) -> CheckResult:
    """Simulate ``model`` from the witness initial conditions and check ``goal``."""
    from .graph import extract_requirements

    flat = flatten(model)
    for bid, v in witness.initial.items():
        flat = set_param(flat, f"{bid}.initial", v)
    req = next(r for r in extract_requirements(flat) if r.goal_name == goal)
    trace = simulate(flat, max(witness.step, 1))
    return check_requirement(trace, goal, req.pre, req.post, time_from or 0)


def prove_all(theory: LogicTheory, config: SolverConfig = SolverConfig(),
              goals: list[str] | None = None, workers: int | None = None) -> list[ProveResult]:
    """Prove several goals concurrently, one solver process each."""
    names = goals if goals is not None else [g.name for g in theory.goals]
    if not names:
        return []
    with ThreadPoolExecutor(max_workers=workers or len(names)) as pool:
        results = list(pool.map(lambda g: prove(theory, g, config), names))
    return sorted(results, key=lambda r: goal_sort_key(r.goal_name))


def goal_sort_key(name):
    digits = name.lstrip("G")
    return (0, int(digits)) if digits.isdigit() else (1, name)


# ---------------------------------------------------------------------------
# parameter sweeps

@dataclass(frozen=True)
class SweepRow:
    value: float
    results: list[ProveResult]
    pre: dict[str, bool | None] = field(default_factory=dict)
    post: dict[str, bool | None] = field(default_factory=dict)


AUX_DEPTH = 2


def _satisfiable(theory, signal, time_from, config) -> bool | None:
    """Can ``signal`` be true at some step in the goal domain (bounded,
    symbolic initial state)?"""
    script = emit_signal_query(theory, signal, AUX_DEPTH, time_from)
    res = run_solver(script, replace(config, mode=Bounded(AUX_DEPTH, True)))
    return {"sat": True, "unsat": False}.get(res.status)


def sweep(model: Model, parameter: str, values: list[float],
          config: SolverConfig = SolverConfig(), goals: list[str] | None = None,
          time_from: int | None = DEFAULT_TIME_FROM, workers: int | None = None) -> list[SweepRow]:
    """Prove the goals for each value of ``parameter`` (``block.param``).

    Pre/post columns report whether each goal's precondition and
    postcondition signal can hold at all under that value.
    """
    if not values:
        return []

    def row(v):
        th = translate(set_param(model, parameter, v), time_from)
        names = goals if goals is not None else [g.name for g in th.goals]
        results = [prove(th, g, config) for g in names]
        pre = {g: _satisfiable(th, th.goal(g).pre, time_from, config) for g in names}
        post = {g: _satisfiable(th, th.goal(g).post, time_from, config) for g in names}
        return SweepRow(v, results, pre, post)

    set_param(model, parameter, values[0])  # fail fast on a bad path
    with ThreadPoolExecutor(max_workers=workers or len(values)) as pool:
        return list(pool.map(row, values))


def delay_blocks(model: Model) -> list[str]:
    return sorted(b.id for b in flatten(model).blocks if b.kind is BlockKind.UNIT_DELAY)
