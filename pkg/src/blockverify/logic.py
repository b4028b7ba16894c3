"""Solver-neutral formula terms over time-indexed signals.

Terms are small frozen dataclasses. The same tree renders to SMT-LIB2 (with
the time index either symbolic or unrolled to a concrete step) and to Why3
logic syntax, and can be evaluated directly against concrete signal values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from decimal import Decimal
from typing import Callable, Union


@dataclass(frozen=True)
class Time:
    """``var + offset``, or the absolute step ``offset`` when var is None."""
    var: str | None = "k"
    offset: int = 0

    def at(self, k: int) -> int:
        return self.offset if self.var is None else k + self.offset


@dataclass(frozen=True)
class RealLit:
    value: float


@dataclass(frozen=True)
class BoolLit:
    value: bool


@dataclass(frozen=True)
class Param:
    name: str


@dataclass(frozen=True)
class Sig:
    name: str
    time: Time = Time()


@dataclass(frozen=True)
class Add:
    args: tuple


@dataclass(frozen=True)
class Neg:
    arg: object


@dataclass(frozen=True)
class Mul:
    left: object
    right: object


# relation ops: = != < > <= >=
@dataclass(frozen=True)
class Rel:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class Not:
    arg: object


@dataclass(frozen=True)
class And:
    args: tuple


@dataclass(frozen=True)
class Or:
    args: tuple


@dataclass(frozen=True)
class Implies:
    left: object
    right: object


@dataclass(frozen=True)
class Forall:
    """Universal quantification over integer time, optionally from ``lower``."""
    var: str
    lower: int | None
    body: object


Term = Union[RealLit, BoolLit, Param, Sig, Add, Neg, Mul]
Formula = Union[Rel, Not, And, Or, Implies, Forall, BoolLit]

NEGATED_REL = {"=": "!=", "!=": "=", "<": ">=", ">=": "<", ">": "<=", "<=": ">"}


def is_true(sig: str, time: Time = Time()) -> Rel:
    return Rel("=", Sig(sig, time), BoolLit(True))


def substitute(f, signals: dict[str, str] | None = None, params: dict[str, float] | None = None):
    """Rename signal symbols and replace parameters by literal values."""
    signals = signals or {}
    params = params or {}

    def go(t):
        if isinstance(t, Sig):
            return Sig(signals.get(t.name, t.name), t.time)
        if isinstance(t, Param):
            return RealLit(params[t.name]) if t.name in params else t
        if isinstance(t, (RealLit, BoolLit)):
            return t
        if isinstance(t, (Add, And, Or)):
            return type(t)(tuple(go(a) for a in t.args))
        if isinstance(t, (Neg, Not)):
            return type(t)(go(t.arg))
        if isinstance(t, (Mul, Implies)):
            return type(t)(go(t.left), go(t.right))
        if isinstance(t, Rel):
            return Rel(t.op, go(t.left), go(t.right))
        if isinstance(t, Forall):
            return Forall(t.var, t.lower, go(t.body))
        raise TypeError(f"not a formula node: {t!r}")

    return go(f)


def symbols(f) -> set[str]:
    """Signal names referenced anywhere in ``f``."""
    out: set[str] = set()

    def go(t):
        if isinstance(t, Sig):
            out.add(t.name)
        elif isinstance(t, (Add, And, Or)):
            for a in t.args:
                go(a)
        elif isinstance(t, (Neg, Not)):
            go(t.arg)
        elif isinstance(t, (Mul, Implies)):
            go(t.left)
            go(t.right)
        elif isinstance(t, Rel):
            go(t.left)
            go(t.right)
        elif isinstance(t, Forall):
            go(t.body)

    go(f)
    return out


def params_of(f) -> set[str]:
    out: set[str] = set()

    def go(t):
        if isinstance(t, Param):
            out.add(t.name)
        elif isinstance(t, (Add, And, Or)):
            for a in t.args:
                go(a)
        elif isinstance(t, (Neg, Not)):
            go(t.arg)
        elif isinstance(t, (Mul, Implies, Rel)):
            go(t.left)
            go(t.right)
        elif isinstance(t, Forall):
            go(t.body)

    go(f)
    return out


# ---------------------------------------------------------------------------
# SMT-LIB2

def smt_real(value: float) -> str:
    """Exact decimal for a finite double, shortest round-trip digits."""
    if not math.isfinite(value):
        raise ValueError(f"cannot encode {value!r} in SMT-LIB")
    text = format(Decimal(repr(abs(value))), "f")
    if "." not in text:
        text += ".0"
    return f"(- {text})" if value < 0 else text


_SMT_REL = {"=": "=", "<": "<", ">": ">", "<=": "<=", ">=": ">="}


def step_symbol(name: str, k: int) -> str:
    return f"{name}@{k}"


def to_smt(f, step: int | None = None) -> str:
    """Render ``f``; with ``step`` given, the free time variable is that step
    and signals become per-step constants (``name@k``)."""

    def time(t: Time):
        if step is not None:
            return str(t.at(step))
        if t.var is None:
            return str(t.offset)
        if t.offset == 0:
            return t.var
        return f"({'+' if t.offset > 0 else '-'} {t.var} {abs(t.offset)})"

    def go(t):
        if isinstance(t, RealLit):
            return smt_real(t.value)
        if isinstance(t, BoolLit):
            return "true" if t.value else "false"
        if isinstance(t, Param):
            raise ValueError(f"unbound parameter {t.name!r}")
        if isinstance(t, Sig):
            if step is not None:
                return step_symbol(t.name, t.time.at(step))
            return f"({t.name} {time(t.time)})"
        if isinstance(t, Add):
            return "(+ " + " ".join(go(a) for a in t.args) + ")"
        if isinstance(t, Neg):
            return f"(- {go(t.arg)})"
        if isinstance(t, Mul):
            return f"(* {go(t.left)} {go(t.right)})"
        if isinstance(t, Rel):
            if t.op == "!=":
                return f"(not (= {go(t.left)} {go(t.right)}))"
            return f"({_SMT_REL[t.op]} {go(t.left)} {go(t.right)})"
        if isinstance(t, Not):
            return f"(not {go(t.arg)})"
        if isinstance(t, And):
            return "(and " + " ".join(go(a) for a in t.args) + ")"
        if isinstance(t, Or):
            return "(or " + " ".join(go(a) for a in t.args) + ")"
        if isinstance(t, Implies):
            return f"(=> {go(t.left)} {go(t.right)})"
        if isinstance(t, Forall):
            if step is not None:
                raise ValueError("quantifier cannot be rendered at a fixed step; unroll it first")
            body = go(t.body)
            if t.lower is not None:
                body = f"(=> (>= {t.var} {t.lower}) {body})"
            return f"(forall (({t.var} Int)) {body})"
        raise TypeError(f"not a formula node: {t!r}")

    return go(f)


def unroll(f, depth: int) -> list[tuple[int | None, object]]:
    """Ground instances of ``f`` for steps 0..depth as ``(step, body)`` pairs.

    A quantifier-free ``f`` yields one pair with step None.
    """
    if not isinstance(f, Forall):
        return [(None, f)]
    lo = 0 if f.lower is None else max(f.lower, 0)
    return [(k, f.body) for k in range(lo, depth + 1)]


# ---------------------------------------------------------------------------
# Why3

def why3_real(value: float) -> str:
    """Six fractional digits, negatives as Why3 prefix negation ``-.``."""
    text = f"{abs(value):.6f}"
    return f"-.{text}" if value < 0 else text


_WHY3_REL = {"=": "=", "!=": "<>.", "<": "<.", ">": ">.", "<=": "<=.", ">=": ">=."}


def to_why3(f, quant_space: bool = False) -> str:
    """Why3 logic syntax; ``quant_space`` writes ``forall k: int.`` as in goals."""

    def time(t: Time):
        if t.var is None:
            return str(t.offset)
        if t.offset == 0:
            return t.var
        return f"({t.var} {'+' if t.offset > 0 else '-'} {abs(t.offset)})"

    def atom(t):
        s = go(t)
        return f"({s})" if isinstance(t, (Add, Mul, Neg)) else s

    def go(t):
        if isinstance(t, RealLit):
            text = format(Decimal(repr(abs(t.value))), "f")
            text = text if "." in text else text + ".0"
            return f"-.{text}" if t.value < 0 else text
        if isinstance(t, BoolLit):
            return "True" if t.value else "False"
        if isinstance(t, Param):
            return t.name
        if isinstance(t, Sig):
            return f"{t.name} {time(t.time)}"
        if isinstance(t, Add):
            parts = [atom(t.args[0])]
            for a in t.args[1:]:
                if isinstance(a, Neg):
                    parts.append(f"-. {atom(a.arg)}")
                else:
                    parts.append(f"+. {atom(a)}")
            return " ".join(parts)
        if isinstance(t, Neg):
            return f"-. {atom(t.arg)}"
        if isinstance(t, Mul):
            return f"{atom(t.left)} *. {atom(t.right)}"
        if isinstance(t, Rel):
            return f"{go(t.left)} {_WHY3_REL[t.op]} {go(t.right)}"
        if isinstance(t, Not):
            return f"not ({go(t.arg)})"
        if isinstance(t, And):
            return " /\\ ".join(_paren_conn(a, go) for a in t.args)
        if isinstance(t, Or):
            return " \\/ ".join(_paren_conn(a, go) for a in t.args)
        if isinstance(t, Implies):
            left = go(t.left)
            if isinstance(t.left, (Implies, Forall)):
                left = f"({left})"
            return f"{left} -> {go(t.right)}"
        if isinstance(t, Forall):
            head = f"forall {t.var}: int." if quant_space else f"forall {t.var}:int."
            body = go(t.body)
            if t.lower is not None:
                body = f"{t.var} >= {t.lower} -> {body}"
            return f"{head} {body}"
        raise TypeError(f"not a formula node: {t!r}")

    return go(f)


def _paren_conn(a, go):
    s = go(a)
    return f"({s})" if isinstance(a, (And, Or, Implies, Forall)) else s


# ---------------------------------------------------------------------------
# evaluation

Lookup = Callable[[str, int], object]


class Unknown(Exception):
    """Raised by a lookup when a signal value is not (yet) known."""


def evaluate(f, lookup: Lookup, k: int | None = None, horizon: int | None = None,
             rel_tol: float = 0.0):
    """Evaluate ``f`` with signal values from ``lookup(name, step)``.

    Quantifiers range over ``max(lower, 0)..horizon``. ``rel_tol`` loosens
    real equality only.
    """

    def go(t):
        if isinstance(t, (RealLit, BoolLit)):
            return t.value
        if isinstance(t, Param):
            raise ValueError(f"unbound parameter {t.name!r}")
        if isinstance(t, Sig):
            return lookup(t.name, t.time.at(k) if k is not None else t.time.offset)
        if isinstance(t, Add):
            acc = go(t.args[0])
            for a in t.args[1:]:
                if isinstance(a, Neg):
                    acc = acc - go(a.arg)
                else:
                    acc = acc + go(a)
            return acc
        if isinstance(t, Neg):
            return -go(t.arg)
        if isinstance(t, Mul):
            return go(t.left) * go(t.right)
        if isinstance(t, Rel):
            a, b = go(t.left), go(t.right)
            if t.op in ("=", "!="):
                if isinstance(a, bool) or isinstance(b, bool):
                    eq = a == b
                elif rel_tol:
                    eq = math.isclose(a, b, rel_tol=rel_tol, abs_tol=rel_tol)
                else:
                    eq = a == b
                return eq if t.op == "=" else not eq
            return {"<": a < b, ">": a > b, "<=": a <= b, ">=": a >= b}[t.op]
        if isinstance(t, Not):
            return not go(t.arg)
        if isinstance(t, And):
            return all(go(a) for a in t.args)
        if isinstance(t, Or):
            return any(go(a) for a in t.args)
        if isinstance(t, Implies):
            return (not go(t.left)) or go(t.right)
        if isinstance(t, Forall):
            if horizon is None:
                raise ValueError("quantified formula needs a horizon")
            lo = 0 if t.lower is None else max(t.lower, 0)
            return all(evaluate(t.body, lookup, j, horizon, rel_tol) for j in range(lo, horizon + 1))
        raise TypeError(f"not a formula node: {t!r}")

    return go(f)
