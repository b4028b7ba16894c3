"""Block-diagram data model: blocks, wiring, the supported vocabulary and
structural validation."""

from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass, field, replace

IDENT = re.compile(r"[a-z][a-z0-9_]*\Z")

RELATIONS = ("==", "~=", ">", "<", ">=", "<=")
LOGICAL_OPS = ("AND", "OR", "NOT")


class SignalType(enum.Enum):
    REAL = "real"
    BOOL = "bool"


class BlockKind(str, enum.Enum):
    CONSTANT = "Constant"
    GAIN = "Gain"
    SUM = "Sum"
    PRODUCT = "Product"
    UNIT_DELAY = "UnitDelay"
    COMPARE_TO_ZERO = "CompareToZero"
    COMPARE_TO_CONSTANT = "CompareToConstant"
    LOGICAL = "Logical"
    ASSERT = "Assert"
    REQUIRE = "Require"
    SUBSYSTEM = "Subsystem"
    INPORT = "Inport"
    OUTPORT = "Outport"


STRUCTURAL = frozenset({BlockKind.SUBSYSTEM, BlockKind.INPORT, BlockKind.OUTPORT})
SPECIFICATION = frozenset({BlockKind.ASSERT, BlockKind.REQUIRE})


class ModelError(Exception):
    """Base class for structural errors raised by model operations."""


class PortError(ModelError):
    pass


class FlattenCollisionError(ModelError):
    def __init__(self, first, second):
        self.blocks = (first, second)
        super().__init__(f"block id collision after flattening: {first!r} and {second!r}")


class ParamError(ModelError):
    pass


@dataclass(frozen=True)
class Port:
    block: str
    port: int

    def __str__(self):
        return f"{self.block}/{self.port}"


@dataclass(frozen=True)
class Connection:
    src: Port
    dst: Port

    def __str__(self):
        return f"{self.src} -> {self.dst}"


@dataclass(frozen=True)
class Block:
    id: str
    kind: BlockKind
    params: dict = field(default_factory=dict)
    children: Model | None = None


@dataclass(frozen=True)
class Model:
    name: str
    sample_time: float = 1.0
    blocks: tuple[Block, ...] = ()
    connections: tuple[Connection, ...] = ()

    def block(self, block_id: str) -> Block:
        for b in self.blocks:
            if b.id == block_id:
                return b
        raise KeyError(block_id)

    def block_map(self) -> dict[str, Block]:
        return {b.id: b for b in self.blocks}


def conn(src: str, dst: str) -> Connection:
    """Build a connection from ``"block/port"`` endpoint strings."""
    return Connection(parse_endpoint(src), parse_endpoint(dst))


def parse_endpoint(text: str) -> Port:
    block, sep, port = text.rpartition("/")
    if not sep or not block or not port.isdigit():
        raise ValueError(f"malformed endpoint {text!r}, expected 'block/port'")
    return Port(block, int(port))


# ---------------------------------------------------------------------------
# parameter schemas

def _real(value):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParamError(f"expected a real number, got {value!r}")
    value = float(value)
    if not math.isfinite(value):
        raise ParamError(f"expected a finite number, got {value!r}")
    return value


def _count(value):
    if isinstance(value, bool) or not isinstance(value, int) or value < 1:
        raise ParamError(f"expected a positive integer, got {value!r}")
    return value


def _relation(value):
    if value not in RELATIONS:
        raise ParamError(f"relation must be one of {', '.join(RELATIONS)}; got {value!r}")
    return value


def _signs(value):
    if not isinstance(value, str) or len(value) < 2 or set(value) - {"+", "-"}:
        raise ParamError(f"signs must be a string over '+-' of length >= 2; got {value!r}")
    return value


def _logical_op(value):
    if value not in LOGICAL_OPS:
        raise ParamError(f"op must be one of {', '.join(LOGICAL_OPS)}; got {value!r}")
    return value


def _signal_type(value):
    try:
        return SignalType(value).value
    except ValueError:
        raise ParamError(f"type must be 'real' or 'bool'; got {value!r}") from None


# kind -> (required params, optional params with defaults)
PARAM_SCHEMA = {
    BlockKind.CONSTANT: ({"value": _real}, {}),
    BlockKind.GAIN: ({"gain": _real}, {}),
    BlockKind.SUM: ({"signs": _signs}, {}),
    BlockKind.PRODUCT: ({}, {}),
    BlockKind.UNIT_DELAY: ({"initial": _real}, {}),
    BlockKind.COMPARE_TO_ZERO: ({"relation": _relation}, {}),
    BlockKind.COMPARE_TO_CONSTANT: ({"relation": _relation, "constant": _real}, {}),
    BlockKind.LOGICAL: ({"op": _logical_op}, {"arity": (_count, None)}),
    BlockKind.ASSERT: ({}, {}),
    BlockKind.REQUIRE: ({}, {}),
    BlockKind.SUBSYSTEM: ({}, {}),
    BlockKind.INPORT: ({"index": _count}, {"type": (_signal_type, "real")}),
    BlockKind.OUTPORT: ({"index": _count}, {}),
}


def normalize_params(kind: BlockKind, params: dict) -> dict:
    """Check ``params`` against the kind's schema and return a normalised copy.

    Raises ParamError naming the offending key.
    """
    required, optional = PARAM_SCHEMA[kind]
    extra = set(params) - set(required) - set(optional)
    if extra:
        raise ParamError(f"{kind.value}: unexpected parameter(s) {', '.join(sorted(extra))}")
    out = {}
    for key, check in required.items():
        if key not in params:
            raise ParamError(f"{kind.value}: missing parameter {key!r}")
        try:
            out[key] = check(params[key])
        except ParamError as exc:
            raise ParamError(f"{kind.value}.{key}: {exc}") from None
    for key, (check, default) in optional.items():
        if key in params:
            try:
                out[key] = check(params[key])
            except ParamError as exc:
                raise ParamError(f"{kind.value}.{key}: {exc}") from None
        elif default is not None:
            out[key] = default
    if kind is BlockKind.LOGICAL:
        arity = out.get("arity", 1 if out["op"] == "NOT" else 2)
        if out["op"] == "NOT" and arity != 1:
            raise ParamError("Logical NOT must have arity 1")
        if out["op"] != "NOT" and arity < 2:
            raise ParamError(f"Logical {out['op']} needs arity >= 2")
        out["arity"] = arity
    return out


def make_block(id: str, kind, children: Model | None = None, **params) -> Block:
    kind = BlockKind(kind)
    return Block(id, kind, normalize_params(kind, params), children)


# ---------------------------------------------------------------------------
# arity and typing

def _ports(model: Model | None, kind: BlockKind) -> list[Block]:
    if model is None:
        return []
    return sorted((b for b in model.blocks if b.kind is kind), key=lambda b: b.params["index"])


def num_inputs(block: Block) -> int:
    k = block.kind
    if k in (BlockKind.CONSTANT, BlockKind.INPORT):
        return 0
    if k in (BlockKind.GAIN, BlockKind.UNIT_DELAY, BlockKind.COMPARE_TO_ZERO,
             BlockKind.COMPARE_TO_CONSTANT, BlockKind.ASSERT, BlockKind.OUTPORT):
        return 1
    if k in (BlockKind.PRODUCT, BlockKind.REQUIRE):
        return 2
    if k is BlockKind.SUM:
        return len(block.params["signs"])
    if k is BlockKind.LOGICAL:
        return block.params["arity"]
    return len(_ports(block.children, BlockKind.INPORT))


def num_outputs(block: Block) -> int:
    k = block.kind
    if k in (BlockKind.ASSERT, BlockKind.REQUIRE, BlockKind.OUTPORT):
        return 0
    if k is BlockKind.SUBSYSTEM:
        return len(_ports(block.children, BlockKind.OUTPORT))
    return 1


def signal_type_of(block: Block, port: int) -> SignalType:
    """Type of the signal leaving output ``port`` (1-based) of ``block``."""
    if not 1 <= port <= num_outputs(block):
        raise PortError(f"{block.id} ({block.kind.value}) has no output port {port}")
    k = block.kind
    if k in (BlockKind.COMPARE_TO_ZERO, BlockKind.COMPARE_TO_CONSTANT, BlockKind.LOGICAL):
        return SignalType.BOOL
    if k is BlockKind.INPORT:
        return SignalType(block.params.get("type", "real"))
    if k is BlockKind.SUBSYSTEM:
        outport = _ports(block.children, BlockKind.OUTPORT)[port - 1]
        inner = block.children
        for c in inner.connections:
            if c.dst == Port(outport.id, 1):
                return signal_type_of(inner.block(c.src.block), c.src.port)
        return SignalType.REAL
    return SignalType.REAL


def input_type_of(block: Block, port: int) -> SignalType | None:
    """Expected type at input ``port``; None means any type is accepted."""
    k = block.kind
    if k in (BlockKind.ASSERT, BlockKind.REQUIRE, BlockKind.LOGICAL):
        return SignalType.BOOL
    if k is BlockKind.OUTPORT:
        return None
    if k is BlockKind.SUBSYSTEM:
        inport = _ports(block.children, BlockKind.INPORT)[port - 1]
        return SignalType(inport.params.get("type", "real"))
    return SignalType.REAL


# ---------------------------------------------------------------------------
# validation

@dataclass(frozen=True)
class Violation:
    locus: str
    message: str

    def __str__(self):
        return f"{self.locus}: {self.message}"


def validate_model(model: Model, _prefix: str = "") -> list[Violation]:
    """Return every structural violation of ``model``; empty means valid.

    Violations are reported per block (sorted by id), then per connection in
    declaration order; nested subsystem models are checked recursively with
    their locus prefixed by the subsystem id.
    """
    per_block: dict[str, list[Violation]] = {}
    conn_issues: list[Violation] = []
    model_issues: list[Violation] = []

    def loc(text):
        return f"{_prefix}{text}"

    if not isinstance(model.sample_time, (int, float)) or not model.sample_time > 0:
        model_issues.append(Violation(loc("model"), f"sample_time must be positive, got {model.sample_time!r}"))

    blocks: dict[str, Block] = {}
    for b in model.blocks:
        issues = per_block.setdefault(b.id, [])
        if not IDENT.match(b.id):
            issues.append(Violation(loc(b.id), f"invalid identifier {b.id!r}"))
        if b.id in blocks:
            issues.append(Violation(loc(b.id), f"duplicate block id {b.id!r}"))
            continue
        blocks[b.id] = b
        try:
            if normalize_params(b.kind, b.params) != b.params:
                issues.append(Violation(loc(b.id), "parameters not in normal form"))
        except ParamError as exc:
            issues.append(Violation(loc(b.id), str(exc)))
            continue
        if b.kind is BlockKind.SUBSYSTEM:
            if b.children is None:
                issues.append(Violation(loc(b.id), "subsystem without children"))
                continue
            for kind in (BlockKind.INPORT, BlockKind.OUTPORT):
                idx = [p.params["index"] for p in _ports(b.children, kind)]
                if idx != list(range(1, len(idx) + 1)):
                    issues.append(Violation(loc(b.id), f"{kind.value} indices must be 1..n, got {idx}"))
            issues.extend(validate_model(b.children, _prefix=f"{_prefix}{b.id}__"))
        elif b.children is not None:
            issues.append(Violation(loc(b.id), f"{b.kind.value} cannot have children"))

    # a block with broken ports cannot be type-checked further
    broken = {bid for bid, issues in per_block.items() if issues}

    fed: dict[Port, int] = {}
    for c in model.connections:
        src_b, dst_b = blocks.get(c.src.block), blocks.get(c.dst.block)
        ok = True
        if src_b is None:
            conn_issues.append(Violation(loc(str(c)), f"unknown source block {c.src.block!r}"))
            ok = False
        elif src_b.id not in broken and not 1 <= c.src.port <= num_outputs(src_b):
            conn_issues.append(Violation(loc(str(c)), f"output port {c.src} out of range"))
            ok = False
        if dst_b is None:
            conn_issues.append(Violation(loc(str(c)), f"unknown sink block {c.dst.block!r}"))
            ok = False
        elif dst_b.id not in broken and not 1 <= c.dst.port <= num_inputs(dst_b):
            conn_issues.append(Violation(loc(str(c)), f"input port {c.dst} out of range"))
            ok = False
        if not ok:
            continue
        fed[c.dst] = fed.get(c.dst, 0) + 1
        if src_b.id in broken or dst_b.id in broken:
            continue
        have = signal_type_of(src_b, c.src.port)
        want = input_type_of(dst_b, c.dst.port)
        if want is not None and have is not want:
            conn_issues.append(Violation(
                loc(str(c)), f"type mismatch: {have.value} signal into {want.value} input"))

    for bid, b in blocks.items():
        if bid in broken:
            continue
        for p in range(1, num_inputs(b) + 1):
            n = fed.get(Port(bid, p), 0)
            if n == 0:
                per_block[bid].append(Violation(loc(bid), f"unconnected input {bid}/{p}"))
            elif n > 1:
                per_block[bid].append(Violation(loc(bid), f"input {bid}/{p} driven {n} times"))

    out = list(model_issues)
    for bid in sorted(per_block):
        out.extend(per_block[bid])
    out.extend(conn_issues)
    return out


# ---------------------------------------------------------------------------
# flattening

def flatten(model: Model) -> Model:
    """Inline every Subsystem, prefixing child ids with ``<subsystem>__``.

    Inport/Outport blocks disappear; signals are rewired straight through.
    """
    if not any(b.kind is BlockKind.SUBSYSTEM for b in model.blocks):
        return model

    blocks: list[Block] = []
    origin: dict[int, str] = {}  # index in blocks -> where the block came from
    # port of a subsystem input -> the inner sinks it feeds
    inner_sinks: dict[Port, list[Port]] = {}
    # subsystem output port -> inner source driving it
    inner_src: dict[Port, Port] = {}
    inner_conns: list[Connection] = []

    for b in model.blocks:
        if b.kind is not BlockKind.SUBSYSTEM:
            blocks.append(b)
            continue
        child = flatten(b.children)
        pre = f"{b.id}__"
        inports = {p.id: p.params["index"] for p in child.blocks if p.kind is BlockKind.INPORT}
        outports = {p.id: p.params["index"] for p in child.blocks if p.kind is BlockKind.OUTPORT}
        for cb in child.blocks:
            if cb.kind not in (BlockKind.INPORT, BlockKind.OUTPORT):
                origin[len(blocks)] = f"{b.id}/{cb.id}"
                blocks.append(replace(cb, id=pre + cb.id))
        for c in child.connections:
            src, dst = c.src, c.dst
            if dst.block in outports:
                # outport fed straight from an inport is resolved below
                inner_src[Port(b.id, outports[dst.block])] = (
                    Port(b.id, -inports[src.block]) if src.block in inports
                    else Port(pre + src.block, src.port))
            elif src.block in inports:
                inner_sinks.setdefault(Port(b.id, inports[src.block]), []).append(
                    Port(pre + dst.block, dst.port))
            else:
                inner_conns.append(Connection(Port(pre + src.block, src.port),
                                              Port(pre + dst.block, dst.port)))

    seen: dict[str, str] = {}
    for i, b in enumerate(blocks):
        where = origin.get(i, b.id)
        if b.id in seen:
            raise FlattenCollisionError(seen[b.id], where)
        seen[b.id] = where
    sub_ids = {b.id for b in model.blocks if b.kind is BlockKind.SUBSYSTEM}

    outer_src = {c.dst: c.src for c in model.connections}

    def resolve(src: Port) -> Port | None:
        # follow subsystem outputs (and pass-through inport->outport) to a real source
        while src.block in sub_ids:
            nxt = inner_src.get(src)
            if nxt is None:
                return None
            if nxt.port < 0:
                nxt = outer_src.get(Port(nxt.block, -nxt.port))
                if nxt is None:
                    return None
            src = nxt
        return src

    conns: list[Connection] = []
    for c in model.connections:
        src = resolve(c.src)
        if src is None:
            continue
        if c.dst.block in sub_ids:
            for sink in inner_sinks.get(c.dst, []):
                conns.append(Connection(src, sink))
        else:
            conns.append(Connection(src, c.dst))
    conns.extend(inner_conns)
    return Model(model.name, model.sample_time, tuple(blocks), tuple(conns))


def kind_counts(model: Model) -> dict[BlockKind, int]:
    counts: dict[BlockKind, int] = {}
    for b in model.blocks:
        if b.kind in (BlockKind.INPORT, BlockKind.OUTPORT):
            continue
        if b.kind is BlockKind.SUBSYSTEM:
            for k, n in kind_counts(b.children).items():
                counts[k] = counts.get(k, 0) + n
            continue
        counts[b.kind] = counts.get(b.kind, 0) + 1
    return counts


# ---------------------------------------------------------------------------
# parameter overrides

def set_param(model: Model, path: str, value) -> Model:
    """Return a copy of ``model`` with ``block.param`` set to ``value``.

    Blocks inside subsystems are addressed by their flattened id
    (``sub__inner.param``).
    """
    block_id, sep, key = path.rpartition(".")
    if not sep or not block_id or not key:
        raise ParamError(f"malformed parameter path {path!r}, expected 'block.param'")
    return _set_param(model, block_id, key, value, path)


def _set_param(model, block_id, key, value, path):
    blocks = list(model.blocks)
    for i, b in enumerate(blocks):
        if b.id == block_id:
            if key not in PARAM_SCHEMA[b.kind][0] and key not in PARAM_SCHEMA[b.kind][1]:
                raise ParamError(f"{path}: {b.kind.value} has no parameter {key!r}")
            params = normalize_params(b.kind, {**b.params, key: value})
            blocks[i] = replace(b, params=params)
            return replace(model, blocks=tuple(blocks))
    for i, b in enumerate(blocks):
        if b.kind is BlockKind.SUBSYSTEM and block_id.startswith(b.id + "__"):
            child = _set_param(b.children, block_id[len(b.id) + 2:], key, value, path)
            blocks[i] = replace(b, children=child)
            return replace(model, blocks=tuple(blocks))
    raise ParamError(f"{path}: no block {block_id!r}")


def canonical(model: Model) -> Model:
    """Same model with blocks sorted by id and connections by sink port.

    Two models are structurally equal iff their canonical forms compare equal.
    """
    blocks = tuple(
        replace(b, children=canonical(b.children)) if b.children is not None else b
        for b in sorted(model.blocks, key=lambda b: b.id))
    conns = tuple(sorted(model.connections,
                         key=lambda c: (c.dst.block, c.dst.port, c.src.block, c.src.port)))
    return Model(model.name, float(model.sample_time), blocks, conns)
