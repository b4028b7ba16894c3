"""Dataflow structure of a flattened model: wiring maps, evaluation order,
signal names and the requirements carried by Require blocks."""

from __future__ import annotations

import heapq
from dataclasses import dataclass

from .model import (BlockKind, Model, ModelError, Port, SignalType,
                    num_outputs, signal_type_of)

# first time step at which requirement goals are checked/proved; earlier
# steps see UnitDelay outputs that are initial conditions, not model history
DEFAULT_TIME_FROM = 1


class AlgebraicLoopError(ModelError):
    def __init__(self, cycle: list[str]):
        self.cycle = cycle
        super().__init__(f"algebraic loop through blocks: {', '.join(cycle)}")


class RequirementTypeError(ModelError):
    pass


@dataclass(frozen=True)
class DataflowGraph:
    nodes: tuple[str, ...]
    pred: dict[Port, Port]
    succ: dict[Port, list[Port]]
    eval_order: tuple[str, ...]

    def inputs(self, block_id: str, n: int) -> list[Port]:
        return [self.pred[Port(block_id, p)] for p in range(1, n + 1)]


@dataclass(frozen=True)
class Requirement:
    goal_name: str
    pre: str
    post: str
    source_block: str


def signal_name(block_id: str, port: int) -> str:
    return f"{block_id}_op{port}"


def name_signals(model: Model) -> dict[Port, str]:
    """``<block>_op<n>`` for every output port, in block declaration order."""
    return {Port(b.id, p): signal_name(b.id, p)
            for b in model.blocks for p in range(1, num_outputs(b) + 1)}


def _find_cycle(edges: dict[str, set[str]], remaining: set[str]) -> list[str]:
    # every remaining node has a remaining predecessor; walk backwards until a repeat
    start = min(remaining)
    path, seen = [start], {start: 0}
    node = start
    while True:
        node = min(p for p in edges[node] if p in remaining)
        if node in seen:
            cycle = path[seen[node]:]
            cycle.reverse()
            i = cycle.index(min(cycle))
            return cycle[i:] + cycle[:i]
        seen[node] = len(path)
        path.append(node)


def build_dataflow(model: Model) -> DataflowGraph:
    """Predecessor/successor maps and a delay-aware topological order.

    Edges leaving a UnitDelay are dropped for ordering: its output at step k
    is state from step k-1. Ties go to the smallest block id.
    """
    blocks = model.block_map()
    if any(b.kind is BlockKind.SUBSYSTEM for b in model.blocks):
        raise ModelError("build_dataflow needs a flattened model")
    pred: dict[Port, Port] = {}
    succ: dict[Port, list[Port]] = {
        Port(b.id, p): [] for b in model.blocks for p in range(1, num_outputs(b) + 1)}
    deps: dict[str, set[str]] = {bid: set() for bid in blocks}
    for c in model.connections:
        pred[c.dst] = c.src
        succ.setdefault(c.src, []).append(c.dst)
        if blocks[c.src.block].kind is not BlockKind.UNIT_DELAY:
            deps[c.dst.block].add(c.src.block)
    for sinks in succ.values():
        sinks.sort(key=lambda p: (p.block, p.port))

    users: dict[str, set[str]] = {bid: set() for bid in blocks}
    for bid, ds in deps.items():
        for d in ds:
            users[d].add(bid)
    indeg = {bid: len(ds) for bid, ds in deps.items()}
    ready = [bid for bid, n in indeg.items() if n == 0]
    heapq.heapify(ready)
    order = []
    while ready:
        bid = heapq.heappop(ready)
        order.append(bid)
        for u in users[bid]:
            indeg[u] -= 1
            if indeg[u] == 0:
                heapq.heappush(ready, u)
    if len(order) != len(blocks):
        raise AlgebraicLoopError(_find_cycle(deps, set(blocks) - set(order)))
    return DataflowGraph(tuple(sorted(blocks)), pred, succ, tuple(order))


def extract_requirements(model: Model) -> list[Requirement]:
    """One requirement per Require block, named G1, G2, ... by ascending id."""
    blocks = model.block_map()
    pred = {c.dst: c.src for c in model.connections}
    reqs = []
    requires = sorted(b.id for b in model.blocks if b.kind is BlockKind.REQUIRE)
    for i, rid in enumerate(requires, start=1):
        ends = []
        for port in (1, 2):
            src = pred.get(Port(rid, port))
            if src is None:
                raise RequirementTypeError(f"{rid}/{port} is not connected")
            if signal_type_of(blocks[src.block], src.port) is not SignalType.BOOL:
                role = "precondition" if port == 1 else "postcondition"
                raise RequirementTypeError(f"{rid}: {role} {signal_name(src.block, src.port)} is not Boolean")
            ends.append(signal_name(src.block, src.port))
        reqs.append(Requirement(f"G{i}", ends[0], ends[1], rid))
    return reqs
