"""Complex-object values, their types, and output schemas.

Wrapper runs produce nested sets, records, and strings.  Sets compare and
hash with genuine set semantics (order-free, duplicate-free); for stable
output each element also remembers the document position of the node it
came from, and JSON rendering lists elements in that order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass


@dataclass(frozen=True)
class StrVal:
    s: str


@dataclass(frozen=True)
class NodeVal:
    node: int


@dataclass(frozen=True)
class RecordVal:
    entries: tuple


class SetVal:
    """A set of values keyed by originating document position.

    Built from (key, value) pairs; duplicates collapse to the smallest key.
    Equality and hashing ignore keys entirely.
    """

    __slots__ = ("keyed", "_values")

    def __init__(self, keyed_items=()):
        best: dict = {}
        for key, value in keyed_items:
            old = best.get(value)
            if old is None or key < old:
                best[value] = key
        self.keyed = tuple(
            sorted(((k, v) for v, k in best.items()), key=_sort_key)
        )
        self._values = frozenset(best)

    def values(self) -> tuple:
        return tuple(v for _, v in self.keyed)

    def __iter__(self):
        return iter(self.values())

    def __len__(self) -> int:
        return len(self._values)

    def __contains__(self, value) -> bool:
        return value in self._values

    def __eq__(self, other) -> bool:
        if not isinstance(other, SetVal):
            return NotImplemented
        return self._values == other._values

    def __hash__(self) -> int:
        return hash(self._values)

    def __repr__(self) -> str:
        return f"SetVal({list(self.values())!r})"


def _sort_key(item):
    key, value = item
    return (key, json_text(value))


Value = object  # StrVal | NodeVal | RecordVal | SetVal


def to_jsonable(value: Value):
    if isinstance(value, StrVal):
        return value.s
    if isinstance(value, NodeVal):
        return value.node
    if isinstance(value, RecordVal):
        return [to_jsonable(e) for e in value.entries]
    if isinstance(value, SetVal):
        return [to_jsonable(v) for v in value.values()]
    raise TypeError(f"not a value: {value!r}")


def json_text(value: Value) -> str:
    return json.dumps(to_jsonable(value), ensure_ascii=False)


def contained_in(a: Value, b: Value) -> bool:
    """Recursive containment: sets by element-wise coverage, records
    entry-wise, leaves by equality."""
    if isinstance(a, SetVal) and isinstance(b, SetVal):
        return all(any(contained_in(x, y) for y in b) for x in a)
    if isinstance(a, RecordVal) and isinstance(b, RecordVal):
        return len(a.entries) == len(b.entries) and all(
            contained_in(x, y) for x, y in zip(a.entries, b.entries)
        )
    return a == b


# ---------------------------------------------------------------------------
# value types


@dataclass(frozen=True)
class TStr:
    pass


@dataclass(frozen=True)
class TSet:
    elem: object


@dataclass(frozen=True)
class TRecord:
    entries: tuple


RpnType = object  # TStr | TSet | TRecord


def type_to_text(t: RpnType) -> str:
    if isinstance(t, TStr):
        return "Str"
    if isinstance(t, TSet):
        return f"SetOf({type_to_text(t.elem)})"
    if isinstance(t, TRecord):
        return f"RecordOf({', '.join(type_to_text(e) for e in t.entries)})"
    raise TypeError(f"not a type: {t!r}")


# ---------------------------------------------------------------------------
# output schemas: the type tree with a predicate attached to each set

@dataclass(frozen=True)
class StrSchema:
    pass


@dataclass(frozen=True)
class SetSchema:
    pred: str | None  # None: render a singleton around the current anchor
    elem: object  # StrSchema | RecordSchema


@dataclass(frozen=True)
class RecordSchema:
    entries: tuple  # of SetSchema


ObjectSchema = object  # SetSchema at the top level


def schema_type(schema) -> RpnType:
    if isinstance(schema, StrSchema):
        return TStr()
    if isinstance(schema, SetSchema):
        return TSet(schema_type(schema.elem))
    if isinstance(schema, RecordSchema):
        return TRecord(tuple(schema_type(e) for e in schema.entries))
    raise TypeError(f"not a schema: {schema!r}")


def schema_predicates(schema) -> list[str]:
    """Predicates in schema order (record entries left to right)."""
    out: list[str] = []

    def walk(node) -> None:
        if isinstance(node, SetSchema):
            if node.pred is not None:
                out.append(node.pred)
            walk(node.elem)
        elif isinstance(node, RecordSchema):
            for e in node.entries:
                walk(e)

    walk(schema)
    return out


def schema_to_text(schema) -> str:
    if isinstance(schema, StrSchema):
        return "str"
    if isinstance(schema, SetSchema):
        pred = schema.pred if schema.pred is not None else "_"
        return f"set({pred}, {schema_to_text(schema.elem)})"
    if isinstance(schema, RecordSchema):
        return "record(" + ", ".join(schema_to_text(e) for e in schema.entries) + ")"
    raise TypeError(f"not a schema: {schema!r}")


class SchemaSyntaxError(Exception):
    pass


def parse_schema(text: str) -> ObjectSchema:
    pos = 0
    n = len(text)

    def ws() -> None:
        nonlocal pos
        while pos < n and text[pos] in " \t":
            pos += 1

    def expect(s: str) -> None:
        nonlocal pos
        ws()
        if not text.startswith(s, pos):
            raise SchemaSyntaxError(f"expected {s!r} at {pos} in {text!r}")
        pos += len(s)

    def ident() -> str:
        nonlocal pos
        ws()
        start = pos
        while pos < n and (text[pos].isalnum() or text[pos] in "_'"):
            pos += 1
        if start == pos:
            raise SchemaSyntaxError(f"expected name at {pos} in {text!r}")
        return text[start:pos]

    def parse_set():
        expect("set")
        expect("(")
        name = ident()
        expect(",")
        elem = parse_elem()
        expect(")")
        return SetSchema(None if name == "_" else name, elem)

    def parse_elem():
        nonlocal pos
        ws()
        if text.startswith("str", pos):
            pos += 3
            return StrSchema()
        if text.startswith("record", pos):
            expect("record")
            expect("(")
            entries = [parse_set()]
            ws()
            while pos < n and text[pos] == ",":
                pos += 1
                entries.append(parse_set())
            expect(")")
            return RecordSchema(tuple(entries))
        raise SchemaSyntaxError(f"expected 'str' or 'record' at {pos} in {text!r}")

    node = parse_set()
    ws()
    if pos != n:
        raise SchemaSyntaxError(f"trailing input at {pos} in {text!r}")
    return node
