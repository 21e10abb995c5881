"""Binary datalog over document trees.

A program is a set of rules of three shapes.  The chain rule

    p(X0, X) :- p0(_, X0), subelem[pi][rho](X0, X), conds, refs.

navigates from every node X0 in the parent predicate's image to the
range-selected path matches X and keeps the pairs whose conditions and
references are satisfiable.  The dom rule

    p(X0, X) :- dom(X0, X), conds, refs.

constrains only X, leaving the first argument universally free; predicates
defined solely by dom rules are kept as node sets and never materialized as
pairs.  The copy rule ``p'(_, X) :- p(_, X).`` projects another predicate
onto a fixed dummy parent; the monadic collapse transformation emits these.

Evaluation is a least fixpoint, run stratum by stratum over the predicate
dependency graph; strongly connected components are iterated until stable.
A trailing rule range ``[rho]`` selects among each parent's derived targets
in document order and forces the whole program to be nonrecursive.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, replace

from . import objects as ob
from .doctree import DocTree
from .pathrange import (
    Range,
    StarRange,
    apply_range,
    parse_path,
    parse_range,
    path_to_text,
    range_to_text,
    subelem,
)

BUILTINS = ("root", "dom")


class ElogError(Exception):
    pass


class ElogSyntaxError(ElogError):
    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class UnsafeRule(ElogError):
    pass


class UnknownPredicate(ElogError):
    pass


class NotStratified(ElogError):
    pass


class UngroundedProgram(ElogError):
    pass


class HasRuleRanges(ElogError):
    pass


class AuxCycle(ElogError):
    pass


class CycleDetected(ElogError):
    pass


class SchemaMismatch(ElogError):
    pass


# ---------------------------------------------------------------------------
# conditions


@dataclass(frozen=True)
class Contains:
    """contains[pi][rho](x, y): y is a range-selected path match below x."""

    x: str
    y: str
    path: object
    rng: Range


@dataclass(frozen=True)
class ContainsStr:
    """contains_s(x, s): the text below x concatenates to exactly s."""

    x: str
    s: str


@dataclass(frozen=True)
class FirstChild:
    x: str
    y: str  # y is the first child of x


@dataclass(frozen=True)
class NextSibling:
    x: str
    y: str  # y immediately follows x under the same parent


@dataclass(frozen=True)
class LastSibling:
    x: str


@dataclass(frozen=True)
class Label:
    x: str
    tag: str


@dataclass(frozen=True)
class Root:
    x: str


@dataclass(frozen=True)
class Ref:
    """p(_, x): x lies in the predicate's image (existential first arg)."""

    pred: str
    var: str


# ---------------------------------------------------------------------------
# rules and programs


@dataclass(frozen=True)
class ChainRule:
    head: str
    v0var: str
    xvar: str
    parent: str  # "root" | "dom" | pattern predicate
    path: object
    rng: Range
    conds: tuple = ()
    refs: tuple = ()
    rule_range: Range | None = None


@dataclass(frozen=True)
class DomRule:
    head: str
    v0var: str
    xvar: str
    conds: tuple = ()
    refs: tuple = ()
    rule_range: Range | None = None


@dataclass(frozen=True)
class CopyRule:
    head: str
    src: str
    xvar: str = "X"


Rule = object


@dataclass(frozen=True)
class Predicate:
    name: str
    kind: str  # pattern | aux-pattern | builtin
    universal: bool = False
    ordinal: int | None = None


@dataclass(frozen=True)
class ElogProgram:
    rules: tuple
    aux: frozenset = frozenset()
    record_order: tuple = ()
    schema: object = None

    def head_preds(self) -> list[str]:
        seen = []
        for r in self.rules:
            if r.head not in seen:
                seen.append(r.head)
        return seen

    def rules_for(self, pred: str) -> list:
        return [r for r in self.rules if r.head == pred]

    def universal_preds(self) -> frozenset:
        out = set()
        for p in self.head_preds():
            rs = self.rules_for(p)
            if rs and all(isinstance(r, DomRule) for r in rs):
                out.add(p)
        return frozenset(out)

    def has_rule_ranges(self) -> bool:
        return any(
            getattr(r, "rule_range", None) is not None for r in self.rules
        )

    def ordinals(self) -> dict:
        order: list[str] = list(self.record_order)
        if self.schema is not None:
            for p in ob.schema_predicates(self.schema):
                if p not in order:
                    order.append(p)
        for p in self.head_preds():
            if p not in order:
                order.append(p)
        return {p: i for i, p in enumerate(order)}

    def predicates(self) -> dict:
        ordinals = self.ordinals()
        universal = self.universal_preds()
        out = {
            b: Predicate(b, "builtin") for b in BUILTINS
        }
        for p in self.head_preds():
            kind = "aux-pattern" if p in self.aux else "pattern"
            out[p] = Predicate(p, kind, p in universal, ordinals.get(p))
        return out

    def to_text(self) -> str:
        return serialize_elog(self)


def _dep_edges(program: ElogProgram):
    for r in program.rules:
        if isinstance(r, ChainRule) and r.parent not in BUILTINS:
            yield r.head, r.parent
        if isinstance(r, CopyRule):
            yield r.head, r.src
        for ref in getattr(r, "refs", ()):
            yield r.head, ref.pred


def _sccs(nodes, edges) -> list:
    """Tarjan; returns components in reverse topological order."""
    adj: dict = {n: [] for n in nodes}
    for a, b in edges:
        adj[a].append(b)
    index: dict = {}
    low: dict = {}
    on: set = set()
    stack: list = []
    comps: list = []
    counter = [0]

    def visit(v):
        index[v] = low[v] = counter[0]
        counter[0] += 1
        stack.append(v)
        on.add(v)
        for w in adj[v]:
            if w not in index:
                visit(w)
                low[v] = min(low[v], low[w])
            elif w in on:
                low[v] = min(low[v], index[w])
        if low[v] == index[v]:
            comp = []
            while True:
                w = stack.pop()
                on.discard(w)
                comp.append(w)
                if w == v:
                    break
            comps.append(frozenset(comp))

    for n in nodes:
        if n not in index:
            visit(n)
    return comps


def _cond_vars(c) -> tuple:
    if isinstance(c, (Contains, FirstChild, NextSibling)):
        return (c.x, c.y)
    return (c.x,)


def validate_program(program: ElogProgram) -> None:
    heads = set(program.head_preds())
    for r in program.rules:
        where = f"rule for {r.head!r}"
        if r.head in BUILTINS:
            raise UnsafeRule(f"{where}: builtin predicates cannot be defined")
        if isinstance(r, CopyRule):
            if r.src not in heads:
                raise UnknownPredicate(f"{where}: no rules for {r.src!r}")
            continue
        if isinstance(r, ChainRule):
            if r.parent not in BUILTINS and r.parent not in heads:
                raise UnknownPredicate(f"{where}: no rules for parent {r.parent!r}")
        for ref in r.refs:
            if ref.pred in BUILTINS:
                raise UnknownPredicate(
                    f"{where}: builtin {ref.pred!r} cannot be referenced"
                )
            if ref.pred not in heads:
                raise UnknownPredicate(f"{where}: no rules for {ref.pred!r}")
        if isinstance(r, DomRule):
            used = {v for c in r.conds for v in _cond_vars(c)}
            used |= {ref.var for ref in r.refs}
            if r.v0var in used:
                raise UnsafeRule(
                    f"{where}: the first argument of a dom rule is free and "
                    "cannot appear in conditions"
                )
        # every variable must be linked to the head variables
        seeds = {r.xvar} if isinstance(r, DomRule) else {r.v0var, r.xvar}
        linked = set(seeds)
        pending = list(r.conds)
        while True:
            rest = []
            grew = False
            for c in pending:
                vs = set(_cond_vars(c))
                if vs & linked:
                    linked |= vs
                    grew = True
                else:
                    rest.append(c)
            if not grew:
                break
            pending = rest
        allvars = {v for c in r.conds for v in _cond_vars(c)}
        allvars |= {ref.var for ref in r.refs}
        stray = allvars - linked
        if stray:
            raise UnsafeRule(
                f"{where}: variable {sorted(stray)[0]!r} is not connected to "
                "the head variables"
            )
    # one predicate, one shape: dom rules do not mix with chain rules
    for p in heads:
        rs = program.rules_for(p)
        if any(isinstance(r, DomRule) for r in rs) and not all(
            isinstance(r, DomRule) for r in rs
        ):
            raise UnsafeRule(
                f"predicate {p!r} mixes dom rules with other rule shapes"
            )
    # groundedness: some rule must bottom out in a builtin parent
    if program.rules:
        grounded: set = set()
        changed = True
        while changed:
            changed = False
            for r in program.rules:
                if r.head in grounded:
                    continue
                ok = (
                    isinstance(r, DomRule)
                    or (isinstance(r, ChainRule) and r.parent in BUILTINS)
                    or (isinstance(r, ChainRule) and r.parent in grounded)
                    or (isinstance(r, CopyRule) and r.src in grounded)
                )
                if ok:
                    grounded.add(r.head)
                    changed = True
        if not grounded:
            raise UngroundedProgram("no rule is grounded in root or dom")
    if program.has_rule_ranges():
        comps = _sccs(program.head_preds(), list(_dep_edges(program)))
        looped = {a for a, b in _dep_edges(program) if a == b}
        for comp in comps:
            if len(comp) > 1 or comp & looped:
                raise NotStratified(
                    "rule ranges require a nonrecursive program; cycle "
                    f"through {sorted(comp)}"
                )


# ---------------------------------------------------------------------------
# concrete syntax

_IDENT = re.compile(r"[a-z#][a-z0-9_#-]*'*")
_VAR = re.compile(r"[A-Z][A-Za-z0-9_]*")


def _strip_comment(line: str) -> str:
    out = []
    in_str = False
    i = 0
    while i < len(line):
        c = line[i]
        if in_str:
            out.append(c)
            if c == "\\" and i + 1 < len(line):
                out.append(line[i + 1])
                i += 1
            elif c == '"':
                in_str = False
        elif c == '"':
            in_str = True
            out.append(c)
        elif c == "%":
            break
        else:
            out.append(c)
        i += 1
    return "".join(out)


def _split_top(text: str, sep: str) -> list[str]:
    parts = []
    depth = 0
    in_str = False
    cur = []
    i = 0
    while i < len(text):
        c = text[i]
        if in_str:
            cur.append(c)
            if c == "\\" and i + 1 < len(text):
                cur.append(text[i + 1])
                i += 1
            elif c == '"':
                in_str = False
        elif c == '"':
            in_str = True
            cur.append(c)
        elif c in "([":
            depth += 1
            cur.append(c)
        elif c in ")]":
            depth -= 1
            cur.append(c)
        elif c == sep and depth == 0:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(c)
        i += 1
    parts.append("".join(cur))
    return parts


@dataclass
class _Atom:
    name: str
    brackets: list  # raw bracket texts
    args: list  # raw argument tokens


def _parse_atom(text: str, line: int) -> _Atom:
    text = text.strip()
    m = _IDENT.match(text)
    if not m or (text[: m.end()] != text[: m.end()].lower()):
        raise ElogSyntaxError(f"expected an atom, got {text!r}", line)
    name = m.group(0)
    i = m.end()
    brackets = []
    while i < len(text) and text[i] == "[":
        j = text.index("]", i) if "]" in text[i:] else -1
        if j < 0:
            raise ElogSyntaxError(f"unterminated '[' in {text!r}", line)
        brackets.append(text[i + 1 : j])
        i = j + 1
    if i >= len(text) or text[i] != "(":
        raise ElogSyntaxError(f"expected '(' in atom {text!r}", line)
    if not text.endswith(")"):
        raise ElogSyntaxError(f"expected ')' in atom {text!r}", line)
    args = [a.strip() for a in _split_top(text[i + 1 : -1], ",")]
    return _Atom(name, brackets, args)


def _unquote(token: str, line: int) -> str:
    try:
        value = json.loads(token)
    except ValueError:
        raise ElogSyntaxError(f"bad string literal {token}", line) from None
    if not isinstance(value, str):
        raise ElogSyntaxError(f"bad string literal {token}", line)
    return value


def _bracket_path(atom: _Atom, line: int):
    if not atom.brackets:
        raise ElogSyntaxError(f"{atom.name} needs a [path] bracket", line)
    raw = atom.brackets[0].strip()
    if raw.startswith('"'):
        raw = _unquote(raw, line)
    return parse_path(raw)


def _bracket_range(atom: _Atom, line: int) -> Range:
    if len(atom.brackets) < 2:
        return StarRange()
    return parse_range(atom.brackets[1].strip())


def _var_arg(atom: _Atom, idx: int, line: int) -> str:
    tok = atom.args[idx]
    if not _VAR.fullmatch(tok):
        raise ElogSyntaxError(
            f"{atom.name}: expected a variable, got {tok!r}", line
        )
    return tok


_COND_NAMES = {
    "contains",
    "contains_s",
    "firstchild",
    "nextsibling",
    "lastsibling",
    "label",
    "root",
}


def _parse_cond(atom: _Atom, line: int):
    n = atom.name
    argc = len(atom.args)
    if n == "contains":
        if argc != 2:
            raise ElogSyntaxError("contains takes (x, y)", line)
        return Contains(
            _var_arg(atom, 0, line),
            _var_arg(atom, 1, line),
            _bracket_path(atom, line),
            _bracket_range(atom, line),
        )
    if atom.brackets:
        raise ElogSyntaxError(f"{n} takes no brackets", line)
    if n == "contains_s":
        if argc != 2:
            raise ElogSyntaxError("contains_s takes (x, s)", line)
        return ContainsStr(_var_arg(atom, 0, line), _unquote(atom.args[1], line))
    if n == "firstchild":
        if argc != 2:
            raise ElogSyntaxError("firstchild takes (x, y)", line)
        return FirstChild(_var_arg(atom, 0, line), _var_arg(atom, 1, line))
    if n == "nextsibling":
        if argc != 2:
            raise ElogSyntaxError("nextsibling takes (x, y)", line)
        return NextSibling(_var_arg(atom, 0, line), _var_arg(atom, 1, line))
    if n == "lastsibling":
        if argc != 1:
            raise ElogSyntaxError("lastsibling takes (x)", line)
        return LastSibling(_var_arg(atom, 0, line))
    if n == "label":
        if argc != 2:
            raise ElogSyntaxError("label takes (x, tag)", line)
        tag = atom.args[1]
        if not _IDENT.fullmatch(tag):
            raise ElogSyntaxError(f"label: bad tag {tag!r}", line)
        return Label(_var_arg(atom, 0, line), tag)
    if n == "root":
        if argc != 1:
            raise ElogSyntaxError("root condition takes (x)", line)
        return Root(_var_arg(atom, 0, line))
    raise ElogSyntaxError(f"unknown condition {n}", line)


def _trailing_range(body: str, line: int):
    """Split an optional rule range off the end of the body text."""
    s = body.rstrip()
    if not s.endswith("]"):
        return body, None
    depth = 0
    for i in range(len(s) - 1, -1, -1):
        if s[i] == "]":
            depth += 1
        elif s[i] == "[":
            depth -= 1
            if depth == 0:
                return s[:i], parse_range(s[i + 1 : -1].strip())
    raise ElogSyntaxError("unbalanced rule range bracket", line)


def _parse_rule(text: str, line: int):
    head_s, sep, body_s = text.partition(":-")
    if not sep:
        raise ElogSyntaxError("missing ':-'", line)
    head = _parse_atom(head_s, line)
    if head.brackets or len(head.args) != 2:
        raise ElogSyntaxError("head must be p(V0, V)", line)
    body_s, rule_range = _trailing_range(body_s, line)
    atoms = [_parse_atom(a, line) for a in _split_top(body_s, ",")]
    if not atoms:
        raise ElogSyntaxError("empty body", line)
    first = atoms[0]

    if head.args[0] == "_":
        # copy rule: p'(_, X) :- p(_, X).
        xvar = _var_arg(head, 1, line)
        if (
            len(atoms) != 1
            or rule_range is not None
            or first.brackets
            or first.args != ["_", xvar]
        ):
            raise ElogSyntaxError(
                "a rule with head p(_, X) must have the single body atom "
                "q(_, X)", line
            )
        return CopyRule(head.name, first.name, xvar)

    v0var = _var_arg(head, 0, line)
    xvar = _var_arg(head, 1, line)
    if len(first.args) != 2 or first.brackets:
        raise ElogSyntaxError("first body atom must bind the parent", line)

    if first.name == "dom" and first.args == [v0var, xvar]:
        conds, refs = _conds_and_refs(atoms[1:], line)
        return DomRule(head.name, v0var, xvar, conds, refs, rule_range)

    if first.args[0] != "_" or first.args[1] != v0var:
        raise ElogSyntaxError(
            f"parent atom must be {first.name}(_, {v0var}) or dom({v0var}, "
            f"{xvar})", line
        )
    if len(atoms) < 2:
        raise ElogSyntaxError("chain rule needs a subelem atom", line)
    step = atoms[1]
    if step.name != "subelem":
        raise ElogSyntaxError(f"expected subelem, got {step.name}", line)
    if step.args != [v0var, xvar]:
        raise ElogSyntaxError(
            f"subelem must be subelem[...]({v0var}, {xvar})", line
        )
    path = _bracket_path(step, line)
    rng = _bracket_range(step, line)
    conds, refs = _conds_and_refs(atoms[2:], line)
    return ChainRule(
        head.name, v0var, xvar, first.name, path, rng, conds, refs, rule_range
    )


def _conds_and_refs(atoms: list, line: int):
    conds = []
    refs = []
    for a in atoms:
        if a.name in _COND_NAMES:
            conds.append(_parse_cond(a, line))
        elif len(a.args) == 2 and a.args[0] == "_" and not a.brackets:
            refs.append(Ref(a.name, _var_arg(a, 1, line)))
        else:
            raise ElogSyntaxError(f"unrecognized body atom {a.name}", line)
    return tuple(conds), tuple(refs)


def parse_elog(text: str) -> ElogProgram:
    rules = []
    aux: list[str] = []
    record_order: list[str] = []
    schema = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw).strip()
        if not line:
            continue
        if line.startswith("@aux"):
            aux.extend(line[4:].split())
            continue
        if line.startswith("@record"):
            record_order.extend(line[7:].split())
            continue
        if line.startswith("@schema"):
            try:
                schema = ob.parse_schema(line[7:].strip())
            except ob.SchemaSyntaxError as exc:
                raise ElogSyntaxError(str(exc), lineno) from None
            continue
        if not line.endswith("."):
            raise ElogSyntaxError("rule must end with '.'", lineno)
        rules.append(_parse_rule(line[:-1], lineno))
    program = ElogProgram(
        tuple(rules), frozenset(aux), tuple(record_order), schema
    )
    validate_program(program)
    return program


def _quote(s: str) -> str:
    return json.dumps(s, ensure_ascii=False)


def _cond_text(c) -> str:
    if isinstance(c, Contains):
        return (
            f"contains[{path_to_text(c.path)}][{range_to_text(c.rng)}]"
            f"({c.x}, {c.y})"
        )
    if isinstance(c, ContainsStr):
        return f"contains_s({c.x}, {_quote(c.s)})"
    if isinstance(c, FirstChild):
        return f"firstchild({c.x}, {c.y})"
    if isinstance(c, NextSibling):
        return f"nextsibling({c.x}, {c.y})"
    if isinstance(c, LastSibling):
        return f"lastsibling({c.x})"
    if isinstance(c, Label):
        return f"label({c.x}, {c.tag})"
    if isinstance(c, Root):
        return f"root({c.x})"
    raise TypeError(f"not a condition: {c!r}")


def _rule_text(r) -> str:
    if isinstance(r, CopyRule):
        return f"{r.head}(_, {r.xvar}) :- {r.src}(_, {r.xvar})."
    parts = []
    if isinstance(r, ChainRule):
        parts.append(f"{r.parent}(_, {r.v0var})")
        parts.append(
            f"subelem[{path_to_text(r.path)}][{range_to_text(r.rng)}]"
            f"({r.v0var}, {r.xvar})"
        )
    else:
        parts.append(f"dom({r.v0var}, {r.xvar})")
    parts.extend(_cond_text(c) for c in r.conds)
    parts.extend(f"{ref.pred}(_, {ref.var})" for ref in r.refs)
    tail = ""
    if r.rule_range is not None:
        tail = f" [{range_to_text(r.rule_range)}]"
    return f"{r.head}({r.v0var}, {r.xvar}) :- {', '.join(parts)}{tail}."


def serialize_elog(program: ElogProgram) -> str:
    lines = []
    if program.aux:
        lines.append("@aux " + " ".join(sorted(program.aux)))
    if program.record_order:
        lines.append("@record " + " ".join(program.record_order))
    if program.schema is not None:
        lines.append("@schema " + ob.schema_to_text(program.schema))
    lines.extend(_rule_text(r) for r in program.rules)
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# evaluation


class AtomStore:
    """Derived atoms: pair sets per materialized predicate, node sets per
    universal (dom-rule) predicate."""

    def __init__(self, ordinals: dict, aux: frozenset, schema=None):
        self.pairs: dict[str, set] = {}
        self.unary: dict[str, frozenset] = {}
        self.ordinals = dict(ordinals)
        self.aux = frozenset(aux)
        self.schema = schema

    def add(self, pred: str, v0: int, v: int) -> bool:
        bucket = self.pairs.setdefault(pred, set())
        before = len(bucket)
        bucket.add((v0, v))
        return len(bucket) != before

    def atoms(self):
        for pred in sorted(self.pairs):
            for v0, v in sorted(self.pairs[pred]):
                yield pred, v0, v

    def copy(self) -> "AtomStore":
        out = AtomStore(self.ordinals, self.aux, self.schema)
        out.pairs = {p: set(s) for p, s in self.pairs.items()}
        out.unary = dict(self.unary)
        return out


def unary_query(store: AtomStore, pred: str) -> frozenset:
    if pred in store.unary:
        return store.unary[pred]
    if pred in store.pairs:
        return frozenset(v for _, v in store.pairs[pred])
    raise UnknownPredicate(f"no predicate {pred!r} in this store")


def dump_atoms(store: AtomStore) -> str:
    lines = sorted(
        f"{p}({v0},{v})" for p in store.pairs for v0, v in store.pairs[p]
    )
    return "\n".join(lines)


class _Eval:
    def __init__(self, program: ElogProgram, tree: DocTree):
        self.program = program
        self.tree = tree
        self.universal = program.universal_preds()
        self.store = AtomStore(program.ordinals(), program.aux, program.schema)
        self._sub: dict = {}
        self._proj2: dict[str, set] = {}

    # -- relation access ----------------------------------------------------

    def subelem_hits(self, v0: int, path) -> tuple:
        key = (v0, path)
        hits = self._sub.get(key)
        if hits is None:
            hits = tuple(subelem(self.tree, v0, path))
            self._sub[key] = hits
        return hits

    def image(self, pred: str) -> frozenset:
        if pred in self.universal:
            return self.store.unary.get(pred, frozenset())
        return frozenset(self._proj2.get(pred, ()))

    def parents_of(self, rule: ChainRule) -> list[int]:
        if rule.parent == "root":
            return [self.tree.root()]
        if rule.parent == "dom":
            return list(self.tree.nodes())
        return sorted(self.image(rule.parent))

    # -- condition solving --------------------------------------------------

    def _check(self, c, env: dict) -> bool:
        t = self.tree
        if isinstance(c, Contains):
            hits = self.subelem_hits(env[c.x], c.path)
            return env[c.y] in apply_range(list(hits), c.rng)
        if isinstance(c, ContainsStr):
            return t.txt(env[c.x]) == c.s
        if isinstance(c, FirstChild):
            return t.firstchild(env[c.x]) == env[c.y]
        if isinstance(c, NextSibling):
            return t.nextsibling(env[c.x]) == env[c.y]
        if isinstance(c, LastSibling):
            return t.lastsibling(env[c.x])
        if isinstance(c, Label):
            return t.label(env[c.x]) == c.tag
        if isinstance(c, Root):
            return env[c.x] == t.root()
        if isinstance(c, Ref):
            return env[c.var] in self.image(c.pred)
        raise TypeError(f"not a condition: {c!r}")

    def _candidates(self, c, env: dict):
        """(var, values) for one unbound variable, or None."""
        t = self.tree
        if isinstance(c, Contains) and c.x in env and c.y not in env:
            hits = self.subelem_hits(env[c.x], c.path)
            return c.y, apply_range(list(hits), c.rng)
        if isinstance(c, FirstChild):
            if c.x in env and c.y not in env:
                fc = t.firstchild(env[c.x])
                return c.y, [] if fc is None else [fc]
            if c.y in env and c.x not in env:
                p = t.parent(env[c.y])
                ok = p is not None and t.firstchild(p) == env[c.y]
                return c.x, [p] if ok else []
        if isinstance(c, NextSibling):
            if c.x in env and c.y not in env:
                ns = t.nextsibling(env[c.x])
                return c.y, [] if ns is None else [ns]
            if c.y in env and c.x not in env:
                p = t.parent(env[c.y])
                if p is None:
                    return c.x, []
                kids = t.children(p)
                i = kids.index(env[c.y])
                return c.x, [kids[i - 1]] if i > 0 else []
        if isinstance(c, Label) and c.x not in env:
            return c.x, t.nodes_labeled(c.tag)
        if isinstance(c, Root) and c.x not in env:
            return c.x, [t.root()]
        if isinstance(c, Ref) and c.var not in env:
            return c.var, sorted(self.image(c.pred))
        return None

    def solve(self, env: dict, atoms: list) -> bool:
        """Satisfiability of the remaining condition and reference atoms."""
        if not atoms:
            return True
        for i, c in enumerate(atoms):
            vs = (c.var,) if isinstance(c, Ref) else _cond_vars(c)
            if all(v in env for v in vs):
                if not self._check(c, env):
                    return False
                return self.solve(env, atoms[:i] + atoms[i + 1 :])
        for i, c in enumerate(atoms):
            cand = self._candidates(c, env)
            if cand is None:
                continue
            var, values = cand
            rest = atoms[:i] + atoms[i + 1 :]
            return any(self.solve({**env, var: v}, rest) for v in values)
        raise UnsafeRule(
            f"cannot orient conditions {atoms!r} from bound variables"
        )

    # -- rule application ---------------------------------------------------

    def _chain_once(self, rule: ChainRule) -> bool:
        grew = False
        body = list(rule.conds) + list(rule.refs)
        for v0 in self.parents_of(rule):
            hits = apply_range(list(self.subelem_hits(v0, rule.path)), rule.rng)
            sat = [
                v
                for v in hits
                if self.solve({rule.v0var: v0, rule.xvar: v}, body)
            ]
            if rule.rule_range is not None:
                sat = apply_range(sat, rule.rule_range)
            for v in sat:
                if self.store.add(rule.head, v0, v):
                    self._proj2.setdefault(rule.head, set()).add(v)
                    grew = True
        return grew

    def _copy_once(self, rule: CopyRule) -> bool:
        grew = False
        for v in sorted(self.image(rule.src)):
            if self.store.add(rule.head, self.tree.root(), v):
                self._proj2.setdefault(rule.head, set()).add(v)
                grew = True
        return grew

    def _universal_set(self, pred: str) -> frozenset:
        out: set = set()
        for rule in self.program.rules_for(pred):
            body = list(rule.conds) + list(rule.refs)
            sat = [
                v for v in self.tree.nodes() if self.solve({rule.xvar: v}, body)
            ]
            if rule.rule_range is not None:
                sat = apply_range(sat, rule.rule_range)
            out.update(sat)
        return frozenset(out)

    def run(self) -> AtomStore:
        heads = self.program.head_preds()
        comps = _sccs(heads, list(_dep_edges(self.program)))  # reverse topo
        self_loop = {a for a, b in _dep_edges(self.program) if a == b}
        for comp in comps:
            recursive = len(comp) > 1 or (comp & self_loop)
            while True:
                grew = False
                for pred in sorted(comp):
                    if pred in self.universal:
                        new = self._universal_set(pred)
                        if new != self.store.unary.get(pred, frozenset()):
                            self.store.unary[pred] = new
                            grew = True
                        continue
                    for rule in self.program.rules_for(pred):
                        if isinstance(rule, CopyRule):
                            grew |= self._copy_once(rule)
                        else:
                            grew |= self._chain_once(rule)
                if not recursive or not grew:
                    break
        for pred in heads:
            if pred not in self.universal:
                self.store.pairs.setdefault(pred, set())
            else:
                self.store.unary.setdefault(pred, frozenset())
        return self.store


def eval_fixpoint(program: ElogProgram, tree: DocTree) -> AtomStore:
    validate_program(program)
    return _Eval(program, tree).run()


# ---------------------------------------------------------------------------
# transformations


def monadic_collapse(program: ElogProgram) -> ElogProgram:
    """Add a companion p'(_, x) per predicate and point every body reference
    at the companions; the evaluator then only ever joins on second
    arguments, which is what makes the program monadic in spirit."""
    if program.has_rule_ranges():
        raise HasRuleRanges("collapse is defined for range-free programs")
    heads = program.head_preds()
    taken = set(heads)
    comp = {}
    for p in heads:
        c = p + "'"
        while c in taken:
            c += "'"
        taken.add(c)
        comp[p] = c

    def rewrite(r):
        if isinstance(r, CopyRule):
            return replace(r, src=comp[r.src])
        refs = tuple(Ref(comp[ref.pred], ref.var) for ref in r.refs)
        if isinstance(r, ChainRule) and r.parent not in BUILTINS:
            return replace(r, parent=comp[r.parent], refs=refs)
        return replace(r, refs=refs)

    rules = [rewrite(r) for r in program.rules]
    rules.extend(CopyRule(comp[p], p) for p in heads)
    aux = program.aux | frozenset(comp[p] for p in program.aux if p in comp)
    return ElogProgram(tuple(rules), aux, program.record_order, None)


def eliminate_aux(store: AtomStore, aux=None) -> AtomStore:
    """Close derivations across auxiliary atoms, then drop them along with
    the atoms left hanging from parents that only auxiliary edges reached."""
    if aux is None:
        aux = store.aux
    aux = frozenset(aux)
    triples = {(p, a, b) for p in store.pairs for a, b in store.pairs[p]}

    aux_edges = [(a, b) for p, a, b in triples if p in aux]
    _reject_cycles(aux_edges)

    by_source: dict[int, set] = {}
    for t in triples:
        by_source.setdefault(t[1], set()).add(t)
    queue = [t for t in triples if t[0] in aux]
    while queue:
        q, a, b = queue.pop()
        for t in list(by_source.get(b, ())):
            s, _, c = t
            new = (s, a, c)
            if new not in triples:
                triples.add(new)
                by_source.setdefault(a, set()).add(new)
                if s in aux:
                    queue.append(new)
                # a non-aux copy still composes with aux atoms ending at a
                queue.extend(
                    t2 for t2 in triples if t2[0] in aux and t2[2] == a
                )

    retained = {t for t in triples if t[0] not in aux}
    aux_targets = {b for p, a, b in triples if p in aux}
    kept_targets = {b for p, a, b in retained}
    orphaned = aux_targets - kept_targets
    retained = {(p, a, b) for p, a, b in retained if a not in orphaned}

    out = AtomStore(store.ordinals, frozenset(), store.schema)
    out.unary = dict(store.unary)
    out.pairs = {p: set() for p in store.pairs if p not in aux}
    for p, a, b in retained:
        out.pairs.setdefault(p, set()).add((a, b))
    return out


def _reject_cycles(edges: list) -> None:
    adj: dict = {}
    for a, b in edges:
        if a == b:
            raise AuxCycle(f"auxiliary atom loops at node {a}")
        adj.setdefault(a, []).append(b)
    state: dict = {}

    def visit(v):
        state[v] = 1
        for w in adj.get(v, ()):
            if state.get(w) == 1:
                raise AuxCycle(f"auxiliary atoms form a cycle through node {w}")
            if w not in state:
                visit(w)
        state[v] = 2

    for v in list(adj):
        if v not in state:
            visit(v)


# ---------------------------------------------------------------------------
# output graphs


@dataclass(frozen=True)
class OutputGraph:
    node_count: int
    edges: frozenset  # of (v0, v)
    labels: dict  # pred -> frozenset of nodes (the unary queries)
    edge_preds: dict  # (v0, v) -> frozenset of preds
    ordinals: dict


def output_graph(store: AtomStore, tree: DocTree) -> OutputGraph:
    edges: set = set()
    edge_preds: dict = {}
    labels: dict = {}
    for pred, pairs in store.pairs.items():
        labels[pred] = frozenset(v for _, v in pairs)
        for e in pairs:
            edges.add(e)
            edge_preds[e] = edge_preds.get(e, frozenset()) | {pred}
    for pred, nodes in store.unary.items():
        labels[pred] = nodes
    return OutputGraph(
        len(tree), frozenset(edges), labels, edge_preds, dict(store.ordinals)
    )


@dataclass(frozen=True)
class UnfoldNode:
    node: int
    preds: tuple
    children: tuple


def unfold(graph: OutputGraph, root: int = 0) -> UnfoldNode:
    """Expand the graph into the tree of paths out of the document root;
    shared targets are duplicated, cycles are an error."""
    succ: dict[int, list] = {}
    for v0, v in graph.edges:
        succ.setdefault(v0, []).append(v)
    big = len(graph.ordinals) + 1

    def edge_key(v0: int, v: int):
        preds = graph.edge_preds.get((v0, v), frozenset())
        first = min((graph.ordinals.get(p, big) for p in preds), default=big)
        return (first, v)

    def labels_at(v: int) -> tuple:
        named = [p for p, ns in graph.labels.items() if v in ns]
        return tuple(sorted(named, key=lambda p: graph.ordinals.get(p, big)))

    def walk(v: int, on_path: frozenset) -> UnfoldNode:
        if v in on_path:
            raise CycleDetected(f"unfolding revisits node {v}")
        kids = sorted(succ.get(v, ()), key=lambda w: edge_key(v, w))
        return UnfoldNode(
            v,
            labels_at(v),
            tuple(walk(w, on_path | {v}) for w in kids),
        )

    return walk(root, frozenset())


def to_dot(graph: OutputGraph, tree: DocTree) -> str:
    shown = {0}
    for v0, v in graph.edges:
        shown.update((v0, v))
    for ns in graph.labels.values():
        shown.update(ns)
    lines = ["digraph atoms {", "  rankdir=TB;"]
    for v in sorted(shown):
        marks = sorted(p for p, ns in graph.labels.items() if v in ns)
        tag = tree.label(v)
        label = f"{v}:{tag}" + ("\\n" + ",".join(marks) if marks else "")
        lines.append(f'  n{v} [label="{label}"];')
    for v0, v in sorted(graph.edges):
        preds = ",".join(sorted(graph.edge_preds.get((v0, v), ())))
        lines.append(f'  n{v0} -> n{v} [label="{preds}"];')
    lines.append("}")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# complex-object rendering


def to_complex_object(
    store: AtomStore, schema, tree: DocTree, emit: str = "text"
):
    """Read the canonical complex object off the atom store, top down from
    the document root.  Every materialized atom must belong to a schema
    predicate; run eliminate_aux first."""
    allowed = set(ob.schema_predicates(schema))
    for pred, pairs in store.pairs.items():
        if pairs and pred not in allowed:
            raise SchemaMismatch(
                f"atoms of {pred!r} have no place in the schema"
            )
    index: dict = {}
    for pred in allowed:
        for v0, v in store.pairs.get(pred, ()):
            index.setdefault((pred, v0), []).append(v)
    for k in index:
        index[k].sort()

    def leaf(anchor: int):
        if emit == "text":
            return ob.StrVal(tree.txt(anchor))
        return ob.NodeVal(anchor)

    def render(anchor: int, node):
        if isinstance(node, ob.StrSchema):
            return leaf(anchor)
        if isinstance(node, ob.RecordSchema):
            return ob.RecordVal(tuple(render(anchor, e) for e in node.entries))
        if isinstance(node, ob.SetSchema):
            if node.pred is None:
                return ob.SetVal([(anchor, render(anchor, node.elem))])
            members = index.get((node.pred, anchor), ())
            return ob.SetVal([(w, render(w, node.elem)) for w in members])
        raise TypeError(f"not a schema node: {node!r}")

    return render(tree.root(), schema)


def run_pipeline(program: ElogProgram, tree: DocTree, emit: str = "text"):
    """Evaluate, eliminate auxiliaries, and render if a schema is attached.
    Returns (store, value-or-None)."""
    store = eval_fixpoint(program, tree)
    if store.aux:
        store = eliminate_aux(store)
    if program.schema is not None:
        return store, to_complex_object(store, program.schema, tree, emit)
    return store, None
