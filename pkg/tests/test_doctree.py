"""Document model: parsing, node order, text, serialization."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wraplab.doctree import (
    ROOT_TAG,
    TEXT_TAG,
    DocTree,
    MalformedInput,
    dump_sexpr,
    parse_document,
    serialize,
    txt,
)
from wraplab.testkit import DOC1, TreeGenSpec, gen_tree


@pytest.fixture
def doc1() -> DocTree:
    return parse_document(DOC1)


def test_ids_are_preorder_and_dense(doc1):
    assert list(doc1.nodes()) == list(range(len(doc1)))
    assert len(doc1) == 19
    for v in doc1.nodes():
        for w in doc1.children(v):
            assert w > v
    # children ascend left to right
    for v in doc1.nodes():
        kids = doc1.children(v)
        assert kids == sorted(kids)


def test_root_and_top(doc1):
    assert doc1.root() == 0
    assert doc1.label(0) == ROOT_TAG
    assert doc1.is_root(0)
    assert doc1.top_element() == 1
    assert doc1.label(1) == "html"


def test_structure_of_doc1(doc1):
    assert dump_sexpr(doc1) == (
        '(#doc (html (body (table (tr (td "item") (td "A")) '
        '(tr (td "x") (td "B")) (tr (td "item") (td "C"))))))'
    )
    assert doc1.nodes_labeled("tr") == [4, 9, 14]
    assert doc1.nodes_labeled("td") == [5, 7, 10, 12, 15, 17]


def test_txt_concatenates_in_document_order(doc1):
    assert txt(doc1, 4) == "itemA"
    assert txt(doc1, 3) == "itemAxBitemC"
    assert txt(doc1, 0) == "itemAxBitemC"
    assert txt(doc1, 6) == "item"
    assert doc1.txt(17) == "C"


def test_text_nodes_are_leaves(doc1):
    for v in doc1.nodes():
        if doc1.label(v) == TEXT_TAG:
            assert doc1.children(v) == []
            assert doc1.text_of(v) != ""


def test_navigation(doc1):
    assert doc1.firstchild(3) == 4
    assert doc1.nextsibling(4) == 9
    assert doc1.nextsibling(9) == 14
    assert doc1.nextsibling(14) is None
    assert doc1.lastsibling(14)
    assert not doc1.lastsibling(4)
    assert doc1.firstchild(6) is None
    assert doc1.parent(4) == 3
    assert doc1.parent(0) is None
    assert doc1.precedes(4, 9)
    assert not doc1.precedes(9, 4)
    assert not doc1.precedes(4, 4)


def test_descendants_in_document_order(doc1):
    assert doc1.descendants(4) == [5, 6, 7, 8]
    assert doc1.descendants(0) == list(range(1, 19))


def test_serialize_round_trip(doc1):
    again = parse_document(serialize(doc1))
    assert again == doc1
    assert serialize(again) == serialize(doc1)


def test_text_is_verbatim():
    t = parse_document("<a>  two  spaces </a>")
    assert txt(t, 1) == "  two  spaces "
    t2 = parse_document("<a>\n  <b>x</b>\n</a>")
    # whitespace runs between elements are real text nodes
    assert txt(t2, 1) == "\n  x\n"
    assert len(t2.children(1)) == 3


def test_attributes_and_comments_are_skipped():
    t = parse_document('<a href="u>v" id=7><!-- note --><b/>tail</a>')
    assert dump_sexpr(t) == '(#doc (a (b) "tail"))'
    t2 = parse_document("<!DOCTYPE html><a>x</a>")
    assert dump_sexpr(t2) == '(#doc (a "x"))'


def test_tags_lowercased_and_self_closing():
    t = parse_document("<A><Br/></A>")
    assert serialize(t) == "<a><br/></a>"


def test_sexpr_escapes():
    t = parse_document('<a>say "hi" \\ bye</a>')
    assert dump_sexpr(t) == '(#doc (a "say \\"hi\\" \\\\ bye"))'


@pytest.mark.parametrize(
    "source",
    [
        "",
        "   ",
        "<a><b></a>",
        "<a>",
        "</a>",
        "<a/><b/>",
        "free text",
        "<a></a>tail",
        "<a",
        "<1tag></1tag>",
    ],
)
def test_malformed_inputs_rejected(source):
    with pytest.raises(MalformedInput):
        parse_document(source)


def test_trees_compare_by_shape_and_text():
    a = parse_document("<a><b>x</b></a>")
    b = parse_document("<a><b>x</b></a>")
    c = parse_document("<a><b>y</b></a>")
    assert a == b
    assert a != c


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6))
def test_generated_trees_round_trip(seed):
    t = gen_tree(TreeGenSpec(seed=seed, max_nodes=25))
    if len(t) < 2:
        return  # no top element, nothing to serialize
    assert parse_document(serialize(t)) == t


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6))
def test_generated_trees_are_well_formed(seed):
    t = gen_tree(TreeGenSpec(seed=seed, max_nodes=25))
    assert list(t.nodes()) == list(range(len(t)))
    for v in t.nodes():
        n = t.node(v)
        for w in n.children:
            assert t.parent(w) == v
        if n.tag == TEXT_TAG:
            assert not n.children
        else:
            assert n.text == ""
