"""Fixed-step discrete-time simulation with runtime assertion checks."""

from __future__ import annotations

import enum
import io
import operator
from dataclasses import dataclass

import numpy as np

from .graph import DEFAULT_TIME_FROM, Requirement, build_dataflow, name_signals
from .model import BlockKind, Model, Port, SignalType, flatten, num_inputs, signal_type_of

DEFAULT_STEPS = 100

COMPARE = {
    "==": operator.eq, "~=": operator.ne, ">": operator.gt,
    "<": operator.lt, ">=": operator.ge, "<=": operator.le,
}


class UnknownSignalError(KeyError):
    pass


@dataclass
class Trace:
    steps: int
    values: dict[str, np.ndarray]

    def __getitem__(self, name: str) -> np.ndarray:
        try:
            return self.values[name]
        except KeyError:
            raise UnknownSignalError(name) from None

    def to_columns(self) -> str:
        """One row per step, one column per signal (comma separated)."""
        names = list(self.values)
        out = io.StringIO()
        out.write(",".join(["k"] + names) + "\n")
        for k in range(self.steps + 1):
            row = [str(k)]
            for n in names:
                v = self.values[n][k]
                row.append(str(int(v)) if self.values[n].dtype == bool else repr(float(v)))
            out.write(",".join(row) + "\n")
        return out.getvalue()


class CheckVerdict(enum.Enum):
    PASS = "Pass"
    FAIL = "Fail"
    NOT_CHECKED = "Not checked"


@dataclass(frozen=True)
class CheckResult:
    goal_name: str
    verdict: CheckVerdict
    first_step: int | None
    checked_steps: int

    def __str__(self):
        if self.verdict is CheckVerdict.FAIL:
            return f"{self.goal_name} Fail at k={self.first_step}"
        return f"{self.goal_name} {self.verdict.value}"


def simulate(model: Model, steps: int = DEFAULT_STEPS) -> Trace:
    """Run ``model`` for steps k = 0..steps and record every output signal.

    UnitDelay outputs are fixed at the start of a step (initial value at
    k = 0, the previous input afterwards); other blocks follow the dataflow
    order. Overflow to inf/nan is recorded as is.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    flat = flatten(model)
    graph = build_dataflow(flat)
    names = name_signals(flat)
    blocks = flat.block_map()

    values: dict[str, np.ndarray] = {}
    for port, name in names.items():
        typ = signal_type_of(blocks[port.block], port.port)
        values[name] = np.zeros(steps + 1, dtype=bool if typ is SignalType.BOOL else float)

    delays = [b for b in flat.blocks if b.kind is BlockKind.UNIT_DELAY]
    state = {b.id: b.params["initial"] for b in delays}
    # resolved evaluation program: (block, output array, input arrays)
    program = []
    for bid in graph.eval_order:
        b = blocks[bid]
        ins = [values[names[src]] for src in graph.inputs(bid, num_inputs(b))]
        out = values.get(f"{bid}_op1")
        program.append((b, out, ins))

    for k in range(steps + 1):
        for b in delays:
            values[f"{b.id}_op1"][k] = state[b.id]
        for b, out, ins in program:
            kind, p = b.kind, b.params
            if kind is BlockKind.UNIT_DELAY:
                state[b.id] = float(ins[0][k])
            elif kind is BlockKind.CONSTANT:
                out[k] = p["value"]
            elif kind is BlockKind.GAIN:
                out[k] = p["gain"] * float(ins[0][k])
            elif kind is BlockKind.SUM:
                acc = 0.0
                for i, (sign, x) in enumerate(zip(p["signs"], ins)):
                    v = float(x[k])
                    if i == 0:
                        acc = v if sign == "+" else -v
                    else:
                        acc = acc + v if sign == "+" else acc - v
                out[k] = acc
            elif kind is BlockKind.PRODUCT:
                out[k] = float(ins[0][k]) * float(ins[1][k])
            elif kind is BlockKind.COMPARE_TO_ZERO:
                out[k] = COMPARE[p["relation"]](float(ins[0][k]), 0.0)
            elif kind is BlockKind.COMPARE_TO_CONSTANT:
                out[k] = COMPARE[p["relation"]](float(ins[0][k]), p["constant"])
            elif kind is BlockKind.LOGICAL:
                bits = [bool(x[k]) for x in ins]
                op = p["op"]
                out[k] = all(bits) if op == "AND" else any(bits) if op == "OR" else not bits[0]
    return Trace(steps, values)


def check_requirement(trace: Trace, goal_name: str, pre: str, post: str,
                      time_from: int = DEFAULT_TIME_FROM) -> CheckResult:
    pre_v = trace[pre][time_from:]
    post_v = trace[post][time_from:]
    enabled = pre_v.astype(bool)
    checked = int(enabled.sum())
    if checked == 0:
        return CheckResult(goal_name, CheckVerdict.NOT_CHECKED, None, 0)
    bad = np.flatnonzero(enabled & ~post_v.astype(bool))
    if bad.size:
        return CheckResult(goal_name, CheckVerdict.FAIL, int(bad[0]) + time_from, checked)
    return CheckResult(goal_name, CheckVerdict.PASS, None, checked)


def check_assertions(trace: Trace, reqs: list[Requirement],
                     time_from: int = DEFAULT_TIME_FROM) -> list[CheckResult]:
    """Check each requirement at every step k >= time_from where its
    precondition holds."""
    return [check_requirement(trace, r.goal_name, r.pre, r.post, time_from) for r in reqs]


def check_asserts(model: Model, trace: Trace) -> list[CheckResult]:
    """Standalone Assert blocks: input must be true at every step."""
    flat = flatten(model)
    pred = {c.dst: c.src for c in flat.connections}
    out = []
    for b in sorted((b for b in flat.blocks if b.kind is BlockKind.ASSERT), key=lambda b: b.id):
        src = pred[Port(b.id, 1)]
        vals = trace[f"{src.block}_op{src.port}"].astype(bool)
        bad = np.flatnonzero(~vals)
        if bad.size:
            out.append(CheckResult(b.id, CheckVerdict.FAIL, int(bad[0]), trace.steps + 1))
        else:
            out.append(CheckResult(b.id, CheckVerdict.PASS, None, trace.steps + 1))
    return out
