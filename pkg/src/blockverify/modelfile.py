"""Reading and writing ``.bdm`` model documents (JSON text)."""

from __future__ import annotations

import json
import re
from importlib import resources

from .model import (Block, BlockKind, Connection, Model, ParamError, Violation,
                    normalize_params, parse_endpoint, validate_model)

SCHEMA_VERSION = "1"


class ModelFormatError(Exception):
    """A document could not be turned into a valid Model."""

    def __init__(self, message, line=None, column=None, path=None):
        self.message = message
        self.line = line
        self.column = column
        self.path = path
        where = []
        if line is not None:
            where.append(f"line {line}" + (f", column {column}" if column is not None else ""))
        if path:
            where.append(path)
        super().__init__(f"{'; '.join(where)}: {message}" if where else message)


class ModelSyntaxError(ModelFormatError):
    pass


class UnknownBlockKindError(ModelFormatError):
    pass


class ParameterSchemaError(ModelFormatError):
    pass


class DuplicateIdError(ModelFormatError):
    pass


class InvalidModelError(ModelFormatError):
    def __init__(self, violations: list[Violation]):
        self.violations = violations
        super().__init__("; ".join(str(v) for v in violations))


def _no_duplicate_keys(pairs):
    out = {}
    for k, v in pairs:
        if k in out:
            raise ValueError(f"duplicate key {k!r}")
        out[k] = v
    return out


def _reject_constant(name):
    raise ValueError(f"non-finite number {name} not allowed")


def _line_of(text, needle, occurrence=1):
    pos = -1
    for _ in range(occurrence):
        pos = text.find(needle, pos + 1)
        if pos < 0:
            return None
    return text.count("\n", 0, pos) + 1


class _Reader:
    def __init__(self, text):
        self.text = text
        self.id_seen: dict[str, int] = {}

    def locate_id(self, block_id):
        n = self.id_seen[block_id] = self.id_seen.get(block_id, 0) + 1
        return _line_of(self.text, f'"{block_id}"', n)

    def expect(self, obj, key, typ, path, optional=False):
        if key not in obj:
            if optional:
                return None
            raise ParameterSchemaError(f"missing key {key!r}", path=path)
        val = obj[key]
        if typ is float:
            ok = isinstance(val, (int, float)) and not isinstance(val, bool)
        else:
            ok = isinstance(val, typ)
        if not ok:
            raise ParameterSchemaError(f"{key!r} has wrong type {type(val).__name__}", path=path)
        return float(val) if typ is float else val

    def model(self, obj, path):
        if not isinstance(obj, dict):
            raise ModelSyntaxError("model must be an object", path=path)
        extra = set(obj) - {"schema_version", "name", "sample_time", "blocks", "connections"}
        if extra:
            raise ParameterSchemaError(f"unexpected key(s) {', '.join(sorted(extra))}", path=path)
        version = obj.get("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise ParameterSchemaError(f"unsupported schema_version {version!r}", path=path)
        name = self.expect(obj, "name", str, path)
        sample_time = self.expect(obj, "sample_time", float, path)
        blocks = []
        ids = set()
        for i, bobj in enumerate(self.expect(obj, "blocks", list, path, optional=True) or []):
            b = self.block(bobj, f"{path}.blocks[{i}]")
            if b.id in ids:
                raise DuplicateIdError(f"duplicate block id {b.id!r}",
                                       line=self.locate_id(b.id), path=f"{path}.blocks[{i}]")
            self.locate_id(b.id)
            ids.add(b.id)
            blocks.append(b)
        conns = []
        for i, cobj in enumerate(self.expect(obj, "connections", list, path, optional=True) or []):
            cpath = f"{path}.connections[{i}]"
            if not isinstance(cobj, dict) or set(cobj) != {"from", "to"}:
                raise ParameterSchemaError("connection must have exactly 'from' and 'to'", path=cpath)
            try:
                conns.append(Connection(parse_endpoint(self.expect(cobj, "from", str, cpath)),
                                        parse_endpoint(self.expect(cobj, "to", str, cpath))))
            except ValueError as exc:
                raise ParameterSchemaError(str(exc), path=cpath) from None
        return Model(name, sample_time, tuple(blocks), tuple(conns))

    def block(self, obj, path):
        if not isinstance(obj, dict):
            raise ModelSyntaxError("block must be an object", path=path)
        extra = set(obj) - {"id", "kind", "params", "children"}
        if extra:
            raise ParameterSchemaError(f"unexpected key(s) {', '.join(sorted(extra))}", path=path)
        bid = self.expect(obj, "id", str, path)
        kind_name = self.expect(obj, "kind", str, path)
        try:
            kind = BlockKind(kind_name)
        except ValueError:
            raise UnknownBlockKindError(f"unknown block kind {kind_name!r}",
                                        line=_line_of(self.text, f'"{kind_name}"'), path=path) from None
        params = self.expect(obj, "params", dict, path, optional=True) or {}
        try:
            params = normalize_params(kind, params)
        except ParamError as exc:
            raise ParameterSchemaError(str(exc), line=_line_of(self.text, f'"{bid}"'),
                                       path=f"{path}.params") from None
        children = None
        if "children" in obj:
            if kind is not BlockKind.SUBSYSTEM:
                raise ParameterSchemaError(f"{kind.value} cannot have children", path=path)
            children = self.model(obj["children"], f"{path}.children")
        elif kind is BlockKind.SUBSYSTEM:
            raise ParameterSchemaError("Subsystem requires 'children'", path=path)
        return Block(bid, kind, params, children)


def parse_model(text: str, validate: bool = True) -> Model:
    """Parse a ``.bdm`` document.

    Every failure surfaces as a ModelFormatError subclass; with ``validate``
    the structural checks of validate_model run too and raise
    InvalidModelError listing the violations.
    """
    try:
        obj = json.loads(text, object_pairs_hook=_no_duplicate_keys,
                         parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise ModelSyntaxError(exc.msg, line=exc.lineno, column=exc.colno) from None
    except ValueError as exc:
        raise ModelSyntaxError(str(exc)) from None
    except RecursionError:
        raise ModelSyntaxError("document nested too deeply") from None
    model = _Reader(text).model(obj, "$")
    if validate:
        violations = validate_model(model)
        if violations:
            raise InvalidModelError(violations)
    return model


def _model_obj(model: Model, top: bool):
    obj = {}
    if top:
        obj["schema_version"] = SCHEMA_VERSION
    obj["name"] = model.name
    obj["sample_time"] = float(model.sample_time)
    if model.blocks:
        obj["blocks"] = [_block_obj(b) for b in sorted(model.blocks, key=lambda b: b.id)]
    if model.connections:
        ordered = sorted(model.connections, key=lambda c: (c.dst.block, c.dst.port, c.src.block, c.src.port))
        obj["connections"] = [{"from": str(c.src), "to": str(c.dst)} for c in ordered]
    return obj


def _block_obj(b: Block):
    obj = {"id": b.id, "kind": b.kind.value}
    if b.params:
        obj["params"] = {k: b.params[k] for k in sorted(b.params)}
    if b.children is not None:
        obj["children"] = _model_obj(b.children, top=False)
    return obj


_SHORT_OBJ = re.compile(r"\{\n\s*(\"from\": \"[^\"]*\"),\n\s*(\"to\": \"[^\"]*\")\n\s*\}")


def serialize_model(model: Model) -> str:
    """Canonical text: fixed key order, blocks by id, connections by sink."""
    text = json.dumps(_model_obj(model, top=True), indent=2)
    # one line per connection keeps diffs readable
    text = _SHORT_OBJ.sub(lambda m: "{" + m.group(1) + ", " + m.group(2) + "}", text)
    return text + "\n"


def load_model(path, validate: bool = True) -> Model:
    with open(path, encoding="utf-8") as f:
        return parse_model(f.read(), validate=validate)


def bundled_text(name: str) -> str:
    """Text of a model shipped with the package (``firstorder``, ``firstorder3``)."""
    return resources.files("blockverify.data").joinpath(f"{name}.bdm").read_text(encoding="utf-8")


def bundled_model(name: str) -> Model:
    return parse_model(bundled_text(name))
