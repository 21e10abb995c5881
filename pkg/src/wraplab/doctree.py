"""Ordered, tag-labeled document trees.

This is the shared document model every other module works against.  A
document is parsed from a small HTML-like surface syntax into an immutable
tree whose nodes are numbered densely in preorder, so node ids double as
document order: ``v < w`` iff v starts before w in the source text.

Two tag names are reserved: the synthetic root is labeled ``#doc`` and text
is stored in leaf nodes labeled ``#text``.  Text content is kept verbatim;
no whitespace trimming or entity decoding happens anywhere.
"""

from __future__ import annotations

from dataclasses import dataclass, field

ROOT_TAG = "#doc"
TEXT_TAG = "#text"


class MalformedInput(Exception):
    """Raised by parse_document, carries the byte offset of the problem."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (offset {offset})")
        self.offset = offset


@dataclass
class Node:
    id: int
    tag: str
    parent: int | None
    children: list[int] = field(default_factory=list)
    text: str = ""  # payload, nonempty only for #text nodes


class DocTree:
    """Immutable ordered tree; node ids are dense ints in document order."""

    def __init__(self, nodes: list[Node]):
        self._nodes = nodes
        self._txt_cache: dict[int, str] = {}
        by_label: dict[str, list[int]] = {}
        for n in nodes:
            by_label.setdefault(n.tag, []).append(n.id)
        self._by_label = by_label

    def __len__(self) -> int:
        return len(self._nodes)

    def __eq__(self, other) -> bool:
        if not isinstance(other, DocTree):
            return NotImplemented
        return [(n.tag, n.text, tuple(n.children)) for n in self._nodes] == [
            (n.tag, n.text, tuple(n.children)) for n in other._nodes
        ]

    def node(self, v: int) -> Node:
        return self._nodes[v]

    def nodes(self) -> range:
        """All node ids in document order."""
        return range(len(self._nodes))

    def label(self, v: int) -> str:
        return self._nodes[v].tag

    def text_of(self, v: int) -> str:
        return self._nodes[v].text

    def children(self, v: int) -> list[int]:
        return self._nodes[v].children

    def parent(self, v: int) -> int | None:
        return self._nodes[v].parent

    def is_root(self, v: int) -> bool:
        return v == 0

    def root(self) -> int:
        return 0

    def top_element(self) -> int:
        # the single child of the synthetic root
        return self._nodes[0].children[0]

    def firstchild(self, v: int) -> int | None:
        ch = self._nodes[v].children
        return ch[0] if ch else None

    def nextsibling(self, v: int) -> int | None:
        p = self._nodes[v].parent
        if p is None:
            return None
        sibs = self._nodes[p].children
        i = sibs.index(v)
        return sibs[i + 1] if i + 1 < len(sibs) else None

    def lastsibling(self, v: int) -> bool:
        """True iff v has no following sibling."""
        return self.nextsibling(v) is None

    def precedes(self, v: int, w: int) -> bool:
        """Strict document order; a node precedes its descendants."""
        return v < w

    def nodes_labeled(self, tag: str) -> list[int]:
        return self._by_label.get(tag, [])

    def descendants(self, v: int) -> list[int]:
        """Nodes strictly below v, in document order."""
        out: list[int] = []
        stack = list(reversed(self._nodes[v].children))
        while stack:
            w = stack.pop()
            out.append(w)
            stack.extend(reversed(self._nodes[w].children))
        return out

    def txt(self, v: int) -> str:
        """Concatenation of all text below v (and at v), in document order."""
        cached = self._txt_cache.get(v)
        if cached is None:
            n = self._nodes[v]
            if n.tag == TEXT_TAG:
                cached = n.text
            else:
                cached = "".join(self.txt(c) for c in n.children)
            self._txt_cache[v] = cached
        return cached


def txt(tree: DocTree, v: int) -> str:
    return tree.txt(v)


_TAG_START = set("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ")
_TAG_CHARS = _TAG_START | set("0123456789-")


def parse_document(source: str) -> DocTree:
    """Parse one top-level element into a DocTree.

    Supported surface: nested ``<tag ...>``/``</tag>`` pairs, self-closing
    ``<tag/>``, attributes (parsed and discarded), ``<!-- -->`` comments and
    ``<!...>`` declarations (skipped).  Tags are case-normalized to lower
    case.  Text runs between tags become #text leaves, kept verbatim.
    Whitespace-only text outside the top element is ignored.
    """
    nodes: list[Node] = [Node(0, ROOT_TAG, None)]
    stack = [0]  # open elements, root at bottom
    i = 0
    n = len(source)

    def add_node(tag: str, text: str = "") -> int:
        nid = len(nodes)
        parent = stack[-1]
        nodes.append(Node(nid, tag, parent, text=text))
        nodes[parent].children.append(nid)
        return nid

    def read_tag_name(j: int) -> tuple[str, int]:
        if j >= n or source[j] not in _TAG_START:
            raise MalformedInput("expected tag name", j)
        k = j
        while k < n and source[k] in _TAG_CHARS:
            k += 1
        return source[j:k].lower(), k

    while i < n:
        if source[i] == "<":
            if source.startswith("<!--", i):
                end = source.find("-->", i + 4)
                if end < 0:
                    raise MalformedInput("unterminated comment", i)
                i = end + 3
                continue
            if source.startswith("<!", i):
                end = source.find(">", i)
                if end < 0:
                    raise MalformedInput("unterminated declaration", i)
                i = end + 1
                continue
            if source.startswith("</", i):
                tag, j = read_tag_name(i + 2)
                j = _skip_ws(source, j)
                if j >= n or source[j] != ">":
                    raise MalformedInput("malformed close tag", i)
                if len(stack) == 1:
                    raise MalformedInput(f"unmatched close tag </{tag}>", i)
                open_tag = nodes[stack[-1]].tag
                if open_tag != tag:
                    raise MalformedInput(
                        f"close tag </{tag}> does not match open <{open_tag}>", i
                    )
                stack.pop()
                i = j + 1
                continue
            tag, j = read_tag_name(i + 1)
            j, self_closing = _skip_attrs(source, j)
            if len(stack) == 1 and nodes[0].children:
                raise MalformedInput("more than one top-level element", i)
            nid = add_node(tag)
            if not self_closing:
                stack.append(nid)
            i = j
        else:
            j = source.find("<", i)
            if j < 0:
                j = n
            run = source[i:j]
            if len(stack) == 1:
                if run.strip():
                    raise MalformedInput("text outside the top-level element", i)
            elif run:
                add_node(TEXT_TAG, text=run)
            i = j

    if len(stack) > 1:
        raise MalformedInput(f"unclosed element <{nodes[stack[-1]].tag}>", n)
    if not nodes[0].children:
        raise MalformedInput("empty document", 0)
    return DocTree(nodes)


def _skip_ws(s: str, i: int) -> int:
    while i < len(s) and s[i].isspace():
        i += 1
    return i


def _skip_attrs(s: str, i: int) -> tuple[int, bool]:
    """Scan from the end of a tag name to past '>'; attribute text is discarded."""
    n = len(s)
    while i < n:
        c = s[i]
        if c == ">":
            return i + 1, False
        if c == "/" and i + 1 < n and s[i + 1] == ">":
            return i + 2, True
        if c in "\"'":
            end = s.find(c, i + 1)
            if end < 0:
                raise MalformedInput("unterminated attribute value", i)
            i = end + 1
            continue
        i += 1
    raise MalformedInput("unterminated tag", i)


def serialize(tree: DocTree) -> str:
    """Inverse of parse_document on its supported subset."""
    out: list[str] = []

    def emit(v: int) -> None:
        node = tree.node(v)
        if node.tag == TEXT_TAG:
            out.append(node.text)
        elif not node.children:
            out.append(f"<{node.tag}/>")
        else:
            out.append(f"<{node.tag}>")
            for c in node.children:
                emit(c)
            out.append(f"</{node.tag}>")

    emit(tree.top_element())
    return "".join(out)


def dump_sexpr(tree: DocTree, v: int | None = None) -> str:
    """S-expression rendering ``(tag child... "text")`` for goldens."""
    if v is None:
        v = tree.root()
    node = tree.node(v)
    if node.tag == TEXT_TAG:
        escaped = node.text.replace("\\", "\\\\").replace('"', '\\"')
        return f'"{escaped}"'
    parts = [node.tag] + [dump_sexpr(tree, c) for c in node.children]
    return "(" + " ".join(parts) + ")"
