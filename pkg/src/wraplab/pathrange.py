"""Regular path expressions and position ranges over document trees.

subelem is the single navigation primitive every wrapper language here is
built on: from a start node v0 it selects descendants v whose downward label
word (labels strictly below v0 along the unique path, ending at v's own
label) belongs to a regular language, then a range picks positions out of
the document-ordered hit list.  The start node itself is selected exactly
when the empty word is in the language.

Ranges come in structured forms (star, index, interval, unions, last) that
select by direct indexing and never fail, and as raw regular expressions
over {0,1} that must mark positions deterministically: at most one word per
length (checked up to a probe bound at compile time).  The word for length
k has a 1 at each selected position.  Matching a range against the reverse
of the sequence gives backward selection; ``last`` is the structured
shorthand for the backward word ``1.0*``.
"""

from __future__ import annotations

from dataclasses import dataclass

from .doctree import DocTree

DENSITY_PROBE = 64  # lengths 0..63 are checked for at-most-one word


class PathSyntaxError(Exception):
    pass


class RangeSyntaxError(Exception):
    pass


class RangeError(Exception):
    pass


class NoWordOfLength(RangeError):
    def __init__(self, length: int):
        super().__init__(f"range regex has no word of length {length}")
        self.length = length


class MultipleWords(RangeError):
    def __init__(self, length: int):
        super().__init__(f"range regex has several words of length {length}")
        self.length = length


# ---------------------------------------------------------------------------
# path regex AST


@dataclass(frozen=True)
class Atom:
    tag: str


@dataclass(frozen=True)
class Wildcard:
    pass


@dataclass(frozen=True)
class Epsilon:
    pass


@dataclass(frozen=True)
class Concat:
    items: tuple


@dataclass(frozen=True)
class Alt:
    items: tuple


@dataclass(frozen=True)
class Star:
    item: object


PathRegex = object  # union of the six node classes above


def concat(*items) -> PathRegex:
    flat = []
    for it in items:
        if isinstance(it, Concat):
            flat.extend(it.items)
        elif not isinstance(it, Epsilon):
            flat.append(it)
    if not flat:
        return Epsilon()
    if len(flat) == 1:
        return flat[0]
    return Concat(tuple(flat))


def alt(*items) -> PathRegex:
    flat = []
    for it in items:
        if isinstance(it, Alt):
            flat.extend(it.items)
        else:
            flat.append(it)
    if len(flat) == 1:
        return flat[0]
    return Alt(tuple(flat))


def descendant_of(tag: str) -> PathRegex:
    """The path ``_*.tag``: any node below with that label."""
    return Concat((Star(Wildcard()), Atom(tag)))


# ---------------------------------------------------------------------------
# textual syntax: tags, '.', '|', '*', '_', parentheses

_TAG_START = set("abcdefghijklmnopqrstuvwxyz#")
_TAG_CHARS = set("abcdefghijklmnopqrstuvwxyz0123456789-")


class _PathParser:
    """Recursive descent over the path syntax; '.' binds tighter than '|'."""

    def __init__(self, text: str, binary: bool = False):
        self.text = text
        self.pos = 0
        self.binary = binary  # atoms are the digits 0/1 instead of tags

    def parse(self) -> PathRegex:
        node = self._alt()
        if self.pos != len(self.text):
            raise PathSyntaxError(
                f"trailing input at {self.pos} in path {self.text!r}"
            )
        return node

    def _ws(self) -> None:
        while self.pos < len(self.text) and self.text[self.pos] in " \t":
            self.pos += 1

    def _peek(self) -> str:
        self._ws()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def _alt(self) -> PathRegex:
        parts = [self._concat()]
        while self._peek() == "|":
            self.pos += 1
            parts.append(self._concat())
        return alt(*parts)

    def _concat(self) -> PathRegex:
        parts = [self._starred()]
        while True:
            c = self._peek()
            if c == ".":
                self.pos += 1
                parts.append(self._starred())
            elif self.binary and c != "" and c in "01(":
                parts.append(self._starred())  # 01-regexes also juxtapose
            else:
                break
        return concat(*parts)

    def _starred(self) -> PathRegex:
        node = self._primary()
        while self._peek() == "*":
            self.pos += 1
            node = Star(node)
        return node

    def _primary(self) -> PathRegex:
        c = self._peek()
        if c == "(":
            self.pos += 1
            if self._peek() == ")":  # '()' names the empty word
                self.pos += 1
                return Epsilon()
            node = self._alt()
            if self._peek() != ")":
                raise PathSyntaxError(f"missing ')' at {self.pos} in {self.text!r}")
            self.pos += 1
            return node
        if c == "_" and not self.binary:
            self.pos += 1
            return Wildcard()
        if self.binary:
            if c != "" and c in "01":
                self.pos += 1
                return Atom(c)
            raise PathSyntaxError(
                f"expected 0 or 1 at {self.pos} in range regex {self.text!r}"
            )
        if c.lower() in _TAG_START:
            start = self.pos
            self.pos += 1
            while self.pos < len(self.text) and self.text[self.pos].lower() in _TAG_CHARS:
                self.pos += 1
            return Atom(self.text[start : self.pos].lower())
        raise PathSyntaxError(f"unexpected {c!r} at {self.pos} in path {self.text!r}")


def parse_path(text: str) -> PathRegex:
    if not text.strip():
        raise PathSyntaxError("empty path expression")
    return _PathParser(text).parse()


def parse_binary_regex(text: str) -> PathRegex:
    if not text.strip():
        raise PathSyntaxError("empty range regex")
    return _PathParser(text, binary=True).parse()


def path_to_text(node: PathRegex, sep: str = ".") -> str:
    """Render a path AST back to the textual syntax (parses to an equal AST).
    01-regexes render with sep="" since their atoms juxtapose."""

    def prec(n) -> int:
        if isinstance(n, Alt):
            return 1
        if isinstance(n, Concat):
            return 2
        return 3

    def render(n, parent: int) -> str:
        if isinstance(n, Atom):
            s = n.tag
        elif isinstance(n, Wildcard):
            s = "_"
        elif isinstance(n, Epsilon):
            s = "()"
        elif isinstance(n, Star):
            s = render(n.item, 3) + "*"
        elif isinstance(n, Concat):
            s = sep.join(render(it, 2) for it in n.items)
        elif isinstance(n, Alt):
            s = "|".join(render(it, 1) for it in n.items)
        else:
            raise TypeError(f"not a path node: {n!r}")
        if prec(n) < parent and not isinstance(n, (Atom, Wildcard, Epsilon)):
            s = f"({s})"
        return s

    return render(node, 0)


# ---------------------------------------------------------------------------
# Thompson construction + subset stepping


class PathAutomaton:
    """NFA with per-state epsilon closures; stepped with frozen state sets."""

    def __init__(self, ast: PathRegex):
        self.ast = ast
        self._eps: list[list[int]] = []
        self._moves: list[list[tuple[str | None, int]]] = []
        start, accept = self._build(ast)
        self.accept_state = accept
        closures = self._closures()
        self._closure = closures
        self.start = closures[start]

    def _new_state(self) -> int:
        self._eps.append([])
        self._moves.append([])
        return len(self._eps) - 1

    def _build(self, ast) -> tuple[int, int]:
        if isinstance(ast, Atom):
            s, t = self._new_state(), self._new_state()
            self._moves[s].append((ast.tag, t))
            return s, t
        if isinstance(ast, Wildcard):
            s, t = self._new_state(), self._new_state()
            self._moves[s].append((None, t))
            return s, t
        if isinstance(ast, Epsilon):
            s, t = self._new_state(), self._new_state()
            self._eps[s].append(t)
            return s, t
        if isinstance(ast, Concat):
            first, last = None, None
            for item in ast.items:
                s, t = self._build(item)
                if first is None:
                    first = s
                else:
                    self._eps[last].append(s)
                last = t
            if first is None:
                return self._build(Epsilon())
            return first, last
        if isinstance(ast, Alt):
            s, t = self._new_state(), self._new_state()
            for item in ast.items:
                a, b = self._build(item)
                self._eps[s].append(a)
                self._eps[b].append(t)
            return s, t
        if isinstance(ast, Star):
            s, t = self._new_state(), self._new_state()
            a, b = self._build(ast.item)
            self._eps[s] += [a, t]
            self._eps[b] += [a, t]
            return s, t
        raise TypeError(f"not a path node: {ast!r}")

    def _closures(self) -> list[frozenset]:
        out = []
        for s in range(len(self._eps)):
            seen = {s}
            stack = [s]
            while stack:
                for d in self._eps[stack.pop()]:
                    if d not in seen:
                        seen.add(d)
                        stack.append(d)
            out.append(frozenset(seen))
        return out

    def step(self, states: frozenset, tag: str) -> frozenset:
        nxt: set = set()
        for s in states:
            for lab, d in self._moves[s]:
                if lab is None or lab == tag:
                    nxt |= self._closure[d]
        return frozenset(nxt)

    def accepting(self, states: frozenset) -> bool:
        return self.accept_state in states

    @property
    def nullable(self) -> bool:
        """True iff the empty word is in the language."""
        return self.accepting(self.start)


_automata: dict = {}


def compile_path(path) -> PathAutomaton:
    if isinstance(path, PathAutomaton):
        return path
    if isinstance(path, str):
        path = parse_path(path)
    aut = _automata.get(path)
    if aut is None:
        aut = PathAutomaton(path)
        _automata[path] = aut
    return aut


# ---------------------------------------------------------------------------
# ranges


@dataclass(frozen=True)
class StarRange:
    pass


@dataclass(frozen=True)
class Index:
    i: int


@dataclass(frozen=True)
class Interval:
    lo: int
    hi: int  # inclusive, 0-based


@dataclass(frozen=True)
class IntervalUnion:
    intervals: tuple  # of (lo, hi) pairs


@dataclass(frozen=True)
class Last:
    pass


@dataclass(frozen=True)
class RawRegex:
    pattern: object  # path AST over the atoms "0" and "1"


Range = object  # union of the six range classes


def parse_range(text: str) -> Range:
    """Parse the surface range syntax: '*', 'i', 'i-j', unions, 'last', 'regex:..'."""
    body = text.strip()
    if not body:
        raise RangeSyntaxError("empty range")
    if body == "*":
        return StarRange()
    if body == "last":
        return Last()
    if body.startswith("regex:"):
        try:
            pattern = parse_binary_regex(body[len("regex:") :])
        except PathSyntaxError as exc:
            raise RangeSyntaxError(str(exc)) from None
        rng = RawRegex(pattern)
        validate_raw_range(rng)
        return rng
    pairs = []
    for part in body.split(","):
        part = part.strip()
        m = part.split("-")
        try:
            if len(m) == 1:
                lo = hi = int(m[0])
            elif len(m) == 2:
                lo, hi = int(m[0]), int(m[1])
            else:
                raise ValueError
        except ValueError:
            raise RangeSyntaxError(f"bad range item {part!r}") from None
        if lo < 0 or hi < lo:
            raise RangeSyntaxError(f"bad range bounds {part!r}")
        pairs.append((lo, hi))
    if len(pairs) == 1:
        lo, hi = pairs[0]
        return Index(lo) if lo == hi else Interval(lo, hi)
    return IntervalUnion(tuple(pairs))


def range_to_text(rng: Range) -> str:
    if isinstance(rng, StarRange):
        return "*"
    if isinstance(rng, Index):
        return str(rng.i)
    if isinstance(rng, Interval):
        return f"{rng.lo}-{rng.hi}"
    if isinstance(rng, IntervalUnion):
        return ",".join(str(l) if l == h else f"{l}-{h}" for l, h in rng.intervals)
    if isinstance(rng, Last):
        return "last"
    if isinstance(rng, RawRegex):
        return "regex:" + path_to_text(rng.pattern, sep="")
    raise TypeError(f"not a range: {rng!r}")


# a DFA over {0,1} per raw regex, for word counting and reconstruction


class _BinaryDfa:
    def __init__(self, pattern):
        nfa = PathAutomaton(pattern)
        states = {nfa.start: 0}
        order = [nfa.start]
        trans: list[list[int]] = []
        accept: list[bool] = []
        i = 0
        while i < len(order):
            cur = order[i]
            row = []
            for sym in "01":
                nxt = nfa.step(cur, sym)
                if nxt not in states:
                    states[nxt] = len(order)
                    order.append(nxt)
                row.append(states[nxt])
            trans.append(row)
            accept.append(nfa.accepting(cur))
            i += 1
        self.trans = trans
        self.accept = accept
        self._counts: list[list[int]] = [
            [1 if a else 0 for a in accept]
        ]  # counts[m][s], saturated at 2

    def counts_at(self, length: int) -> list[int]:
        while len(self._counts) <= length:
            prev = self._counts[-1]
            self._counts.append(
                [min(2, prev[row[0]] + prev[row[1]]) for row in self.trans]
            )
        return self._counts[length]

    def word(self, length: int) -> str:
        """The unique accepted word of this length."""
        total = self.counts_at(length)[0]
        if total == 0:
            raise NoWordOfLength(length)
        if total > 1:
            raise MultipleWords(length)
        out = []
        state = 0
        for m in range(length, 0, -1):
            row = self.trans[state]
            if self.counts_at(m - 1)[row[1]] >= 1:
                out.append("1")
                state = row[1]
            else:
                out.append("0")
                state = row[0]
        return "".join(out)


_dfas: dict = {}


def _binary_dfa(rng: RawRegex) -> _BinaryDfa:
    dfa = _dfas.get(rng.pattern)
    if dfa is None:
        dfa = _BinaryDfa(rng.pattern)
        _dfas[rng.pattern] = dfa
    return dfa


def validate_raw_range(rng: RawRegex) -> None:
    """Reject regexes with two marking words of one length (probe 0..63)."""
    dfa = _binary_dfa(rng)
    for k in range(DENSITY_PROBE):
        if dfa.counts_at(k)[0] > 1:
            raise MultipleWords(k)


def unique_word(rng: RawRegex, k: int) -> str:
    """The single {0,1}-word of length k, or NoWordOfLength / MultipleWords."""
    return _binary_dfa(rng).word(k)


def _positions(rng: Range, k: int) -> list[int]:
    if isinstance(rng, StarRange):
        return list(range(k))
    if isinstance(rng, Index):
        return [rng.i] if rng.i < k else []
    if isinstance(rng, Interval):
        return list(range(rng.lo, min(rng.hi, k - 1) + 1))
    if isinstance(rng, IntervalUnion):
        picked = set()
        for lo, hi in rng.intervals:
            picked.update(range(lo, min(hi, k - 1) + 1))
        return sorted(picked)
    if isinstance(rng, Last):
        return [k - 1] if k else []
    if isinstance(rng, RawRegex):
        try:
            word = unique_word(rng, k)
        except NoWordOfLength:
            if k >= DENSITY_PROBE:
                return []  # beyond the validated probe: select nothing
            raise
        return [i for i, c in enumerate(word) if c == "1"]
    raise TypeError(f"not a range: {rng!r}")


def apply_range(seq: list, rng: Range, backward: bool = False) -> list:
    """Select positions of a duplicate-free document-ordered sequence.

    backward matches the range against the reversed sequence, then restores
    the original order in the result.  Structured ranges never raise; raw
    regexes raise NoWordOfLength / MultipleWords on density violations.
    """
    k = len(seq)
    if backward:
        picked = _positions(rng, k)
        return [seq[j] for j in sorted(k - 1 - i for i in picked)]
    return [seq[i] for i in _positions(rng, k)]


# ---------------------------------------------------------------------------
# the navigation primitive


def subelem(tree: DocTree, v0: int, path) -> list[int]:
    """Descendants of v0 (and v0 itself on the empty word) whose downward
    label word matches, in document order."""
    aut = compile_path(path)
    out: list[int] = []
    if aut.accepting(aut.start):
        out.append(v0)
    stack = [
        (c, aut.step(aut.start, tree.label(c)))
        for c in reversed(tree.children(v0))
    ]
    while stack:
        v, states = stack.pop()
        if not states:
            continue
        if aut.accepting(states):
            out.append(v)
        stack.extend(
            (c, aut.step(states, tree.label(c))) for c in reversed(tree.children(v))
        )
    return out  # preorder emission, which is document order


def subelem_range(
    tree: DocTree, v0: int, path, rng: Range, backward: bool = False
) -> list[int]:
    return apply_range(subelem(tree, v0, path), rng, backward)


def contains_string(tree: DocTree, v: int, s: str) -> bool:
    """Exact byte equality of the node's concatenated text."""
    return tree.txt(v) == s
