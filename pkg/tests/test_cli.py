"""wrapctl command surface: routing, output formats, exit codes."""

import pathlib

import pytest

from wraplab import elog
from wraplab.cli import detect_language, main, _styled
from wraplab.doctree import parse_document
from wraplab.hel import SingleValueWarning

CORPUS = pathlib.Path(__file__).resolve().parents[1] / "corpus"


@pytest.fixture
def wrapctl(capsys):
    def call(*argv):
        rc = main([str(a) for a in argv])
        cap = capsys.readouterr()
        return rc, cap.out, cap.err

    return call


def corpus(*parts) -> str:
    return str(CORPUS.joinpath(*parts))


# ---------------------------------------------------------------------------
# run


def test_run_rpn_prints_json(wrapctl):
    rc, out, _ = wrapctl(
        "run", corpus("items_table", "second_cols.rpn"), corpus("items_table", "page.doc")
    )
    assert rc == 0
    assert out == '["A", "C"]\n'


def test_run_hel_desugars_before_evaluating(wrapctl):
    rc, out, _ = wrapctl(
        "run", corpus("items_table", "pairs.hel"), corpus("items_table", "page.doc")
    )
    assert rc == 0
    assert out == '[[["item"], ["A", "C"]]]\n'


def test_run_cut_flag_switches_the_evaluator(wrapctl):
    args = ("run", corpus("cuts", "first_items.vhel"), corpus("cuts", "page.doc"))
    assert wrapctl(*args) == (0, '["A", "C"]\n', "")
    assert wrapctl(*args, "--cut") == (0, '["A"]\n', "")


def test_run_program_defaults_to_atoms(wrapctl):
    rc, out, _ = wrapctl(
        "run", corpus("programs", "quad.elog"), corpus("programs", "chain.doc")
    )
    assert rc == 0
    lines = out.strip().splitlines()
    assert len(lines) == 6
    assert lines[0] == "p(1,4)"


def test_run_program_with_schema_prints_json(wrapctl):
    rc, out, _ = wrapctl(
        "run", corpus("pipeline", "cells.elog"), corpus("pipeline", "page.doc"),
        "--out", "json",
    )
    assert rc == 0
    assert out == '["A", "B", "C"]\n'


def test_run_program_dot_output(wrapctl):
    rc, out, _ = wrapctl(
        "run", corpus("pipeline", "cells.elog"), corpus("pipeline", "page.doc"),
        "--out", "dot",
    )
    assert rc == 0
    assert out.startswith("digraph atoms {")
    assert '[label="p2"]' in out


def test_run_strict_rejects_ambiguous_condition_paths(wrapctl, tmp_path):
    w = tmp_path / "amb.vhel"
    w.write_text('a{b.txt = "1"}.txt;\n')
    d = tmp_path / "two.doc"
    d.write_text("<a><b>1</b><b>2</b></a>")
    rc, _, err = wrapctl("run", w, d)
    assert rc == 1
    assert "at most one" in err
    with pytest.warns(SingleValueWarning):
        rc, out, _ = wrapctl("run", w, d, "--lenient")
    assert rc == 0
    assert out == '["12"]\n'


def test_run_exit_codes_for_bad_inputs(wrapctl, tmp_path):
    good_w = corpus("items_table", "second_cols.rpn")
    good_d = corpus("items_table", "page.doc")
    bad_doc = tmp_path / "bad.doc"
    bad_doc.write_text("text outside")
    odd = tmp_path / "w.txt"
    odd.write_text("txt")

    rc, _, err = wrapctl("run", tmp_path / "missing.rpn", good_d)
    assert rc == 1
    rc, _, err = wrapctl("run", odd, good_d)
    assert rc == 1 and "unknown wrapper extension" in err
    rc, _, err = wrapctl("run", good_w, tmp_path / "missing.doc")
    assert rc == 2
    rc, _, err = wrapctl("run", good_w, bad_doc)
    assert rc == 2 and "top-level element" in err


def test_run_flag_misuse_is_a_wrapper_error(wrapctl):
    w = corpus("items_table", "second_cols.rpn")
    d = corpus("items_table", "page.doc")
    rc, _, err = wrapctl("run", w, d, "--cut")
    assert rc == 1 and "--cut" in err
    rc, _, err = wrapctl("run", w, d, "--out", "atoms")
    assert rc == 1 and "--out" in err
    rc, _, err = wrapctl(
        "run", corpus("programs", "quad.elog"), corpus("programs", "chain.doc"),
        "--out", "json",
    )
    assert rc == 1 and "no output schema" in err


def test_run_rejects_wrapper_parse_errors(wrapctl, tmp_path):
    w = tmp_path / "broken.rpn"
    w.write_text("a..txt")
    rc, _, err = wrapctl("run", w, corpus("items_table", "page.doc"))
    assert rc == 1
    assert "broken.rpn" in err


# ---------------------------------------------------------------------------
# translate


def test_translate_hel_to_vhel_matches_the_checked_in_twin(wrapctl):
    rc, out, _ = wrapctl("translate", corpus("items_table", "pairs.hel"), "--to", "vhel")
    assert rc == 0
    twin = (CORPUS / "items_table" / "pairs.vhel").read_text().strip()
    assert out.strip() == twin


def test_translate_rpn_to_vhel_makes_ranges_explicit(wrapctl):
    rc, out, _ = wrapctl(
        "translate", corpus("items_table", "second_cols.rpn"), "--to", "vhel"
    )
    assert rc == 0
    assert out.strip() == 'html.body.table.tr[*]{td[0].txt = "item"}.td[1].txt;'


def test_translate_to_elog_output_reparses(wrapctl):
    rc, out, _ = wrapctl(
        "translate", corpus("items_table", "second_cols.rpn"), "--to", "elog"
    )
    assert rc == 0
    prog = elog.parse_elog(out)
    assert elog.serialize_elog(prog) == out
    assert "@schema set(p5, str)" in out


def test_translate_trivial_statement(wrapctl, tmp_path):
    w = tmp_path / "t.rpn"
    w.write_text("txt")
    rc, out, _ = wrapctl("translate", w, "--to", "elog")
    assert rc == 0
    assert out == "@schema set(_, str)\n"
    assert elog.parse_elog(out).rules == ()


def test_translate_cut_marks_have_no_program_form(wrapctl):
    rc, _, err = wrapctl("translate", corpus("cuts", "first_items.vhel"), "--to", "elog")
    assert rc == 1
    assert "cut marks" in err


def test_translate_rejects_program_sources(wrapctl):
    rc, _, err = wrapctl("translate", corpus("programs", "quad.elog"), "--to", "vhel")
    assert rc == 1
    assert "target, not a source" in err


# ---------------------------------------------------------------------------
# check


def test_check_reports_types_and_cut_marks(wrapctl):
    rc, out, _ = wrapctl("check", corpus("items_table", "second_cols.rpn"))
    assert (rc, out) == (0, "OK: type SetOf(Str)\n")
    rc, out, _ = wrapctl("check", corpus("cuts", "first_items.vhel"))
    assert (rc, out) == (0, "OK: type SetOf(Str) with cut marks\n")


def test_check_shows_the_desugared_statement(wrapctl):
    rc, out, _ = wrapctl("check", corpus("items_table", "pairs.hel"))
    assert rc == 0
    twin = (CORPUS / "items_table" / "pairs.vhel").read_text().strip()
    assert out == f"OK: desugars to {twin}\n"


def test_check_summarizes_programs(wrapctl):
    rc, out, _ = wrapctl("check", corpus("parity", "parity.elog"))
    assert rc == 0
    assert out == "OK: 5 rules, predicates odd, even, evenmark\n"


def test_check_flags_ranged_recursion(wrapctl, tmp_path):
    w = tmp_path / "rec.elog"
    w.write_text(
        "p(X0, X) :- root(_, X0), subelem[a][*](X0, X) [0].\n"
        "p(X0, X) :- p(_, X0), subelem[a][*](X0, X) [0].\n"
    )
    rc, _, err = wrapctl("check", w)
    assert rc == 1
    assert "nonrecursive" in err


# ---------------------------------------------------------------------------
# diff


def test_diff_equivalent_pair_has_no_divergence(wrapctl):
    rc, out, _ = wrapctl(
        "diff", corpus("items_table", "pairs.hel"), corpus("items_table", "pairs.vhel"),
        corpus("items_table", "page.doc"),
    )
    assert rc == 0
    assert out == "no divergence\n"


def test_diff_reports_both_values_on_divergence(wrapctl):
    rc, out, _ = wrapctl(
        "diff", corpus("divergence", "row2_path.rpn"),
        corpus("divergence", "row2_scan.vhel"), corpus("divergence", "page.doc"),
    )
    assert rc == 1
    assert "row2_path.rpn: []" in out
    assert 'row2_scan.vhel: ["C"]' in out


def test_diff_generate_finds_and_shrinks_a_witness(wrapctl, tmp_path):
    # range-before-conditions versus conditions-before-range over the
    # generator's own tag alphabet, so random documents can separate them
    a = tmp_path / "probe.rpn"
    a.write_text('(_*._)[2]{txt = "x"}.txt')
    b = tmp_path / "probe.vhel"
    b.write_text('->_[2]{txt = "x"}.txt;\n')
    rc, out, _ = wrapctl("diff", a, b, "--generate", 50, "--seed", 0)
    assert rc == 1
    assert "divergence on seed" in out
    doc_line = next(line for line in out.splitlines() if line.startswith("seed "))
    witness = doc_line.split("document ", 1)[1].strip().strip("'")
    parse_document(witness)
    assert len(witness) < 120


def test_diff_generate_passes_translated_twins(wrapctl, tmp_path):
    src = tmp_path / "walk.rpn"
    src.write_text("(_*.a).b.txt")
    rc, out, _ = wrapctl("translate", src, "--to", "elog")
    assert rc == 0
    twin = tmp_path / "walk.elog"
    twin.write_text(out)
    rc, out, _ = wrapctl("diff", src, twin, "--generate", 120, "--seed", 7)
    assert rc == 0
    assert out == "no divergence (120 documents, seeds 7..126)\n"


def test_diff_needs_a_document_or_a_budget(wrapctl):
    rc, _, err = wrapctl(
        "diff", corpus("items_table", "pairs.hel"), corpus("items_table", "pairs.vhel")
    )
    assert rc == 1
    assert "--generate" in err


def test_diff_rejects_schemaless_programs(wrapctl):
    rc, _, err = wrapctl(
        "diff", corpus("programs", "quad.elog"), corpus("programs", "quad.elog"),
        corpus("programs", "chain.doc"),
    )
    assert rc == 1
    assert "no output schema" in err


# ---------------------------------------------------------------------------
# bench


def test_bench_counts_quadratic_atoms(wrapctl):
    rc, out, _ = wrapctl("bench", "-m", 3, "-n", 2)
    assert rc == 0
    assert out.startswith("quadratic m=3 n=2: 6 atoms in ")
    rc, out, _ = wrapctl("bench", "-m", 1, "-n", 1)
    assert rc == 0
    assert out.startswith("quadratic m=1 n=1: 1 atoms in ")


def test_bench_rejects_bad_parameters(wrapctl):
    rc, _, err = wrapctl("bench", "--family", "cubic")
    assert rc == 1 and "cubic" in err
    rc, _, err = wrapctl("bench", "-m", 0)
    assert rc == 1 and "at least 1" in err


# ---------------------------------------------------------------------------
# plumbing


def test_language_comes_from_the_extension_alone():
    assert detect_language("x/y.rpn") == "rpn"
    assert detect_language("deep.path.vhel") == "vhel"


def test_color_kill_switch(monkeypatch):
    class Tty:
        def isatty(self):
            return True

    monkeypatch.setattr("sys.stdout", Tty())
    monkeypatch.delenv("WRAPCTL_COLOR", raising=False)
    assert _styled("hi", "31") == "\x1b[31mhi\x1b[0m"
    monkeypatch.setenv("WRAPCTL_COLOR", "0")
    assert _styled("hi", "31") == "hi"


def test_output_is_plain_when_not_a_terminal(wrapctl):
    rc, out, _ = wrapctl(
        "diff", corpus("divergence", "row2_path.rpn"),
        corpus("divergence", "row2_scan.vhel"), corpus("divergence", "page.doc"),
    )
    assert rc == 1
    assert "\x1b[" not in out


def test_usage_errors_come_from_argparse():
    with pytest.raises(SystemExit):
        main(["translate", "x.rpn"])
