import re
from pathlib import Path

import pytest
from hypothesis import given, settings, strategies as st

from groupconv.conversation import standard_ruleset
from groupconv.dsl import (
    Program, ProgramError, check_program, parse_atom, parse_program, pretty_print, tokenize,
    validate,
)
from groupconv.terms import Atom, Const, Fn, Succ, Var

from support import random_program

FIXTURES = Path(__file__).parent / "fixtures"
SHIPPED = Path(__file__).parents[1] / "src" / "groupconv" / "data" / "rules" / "conversation.cvl"
VERBATIM = ["interrupt", "upset_from_interruption", "agree_to_please", "negative_to_neutral_opinion"]
INVALID = sorted((FIXTURES / "invalid").glob("*.cvl"))


def declarations() -> str:
    return "\n".join(l for l in SHIPPED.read_text().splitlines() if l.startswith(("pred ", "perm ")))


def reference_program() -> Program:
    return parse_program(declarations() + "\n" + (FIXTURES / "reference_rules.cvl").read_text())


def errors(diags):
    return [d for d in diags if d.severity == "error"]


def A(text: str) -> Atom:
    return parse_atom(text)


def test_interrupt_rule_splits_into_three_precondition_kinds():
    r = reference_program().rule("interrupt")
    assert r.linear_pre == (Atom("turns", (Succ(Var("N")),)), A("is_speaking C'"))
    assert r.persistent_pre == (A("is C Type"), A("listening C C'"))
    assert r.permanent_pre == (A("interruptive Type"),)
    assert r.post == (A("interrupts C C'"), A("is_speaking C"), A("feels C' miffed"),
                      Atom("turns", (Var("N"),)))


def test_all_reference_rules_parse():
    prog = reference_program()
    assert [r.name for r in prog.rules] == [
        "change_topic", "begin_speaking", "interrupt", "upset_from_interruption",
        "agree_to_please", "negative_to_neutral_opinion"]
    assert not errors(validate(prog))


@pytest.mark.parametrize("name", VERBATIM)
def test_shipped_rules_match_reference_text(name):
    assert standard_ruleset().rule(name) == reference_program().rule(name)


def test_successor_spellings_agree():
    a = A("turns (N + 1)")
    assert a == A("turns (N+1)") == A("turns (s N)") == Atom("turns", (Succ(Var("N")),))
    assert A("turns (N + 2)") == Atom("turns", (Succ(Succ(Var("N"))),))


def test_glued_compound_argument():
    assert A("hears C C'(opinion T positive)") == Atom(
        "hears", (Var("C"), Var("C'"), Fn("opinion", (Var("T"), Const("positive")))))


def test_identity_rule_round_trips():
    src = "pred a.\n\nr : a -o a.\n"
    prog = parse_program(src)
    assert pretty_print(prog) == src
    assert parse_program(pretty_print(prog)) == prog


def test_empty_program_prints_newline():
    assert pretty_print(parse_program("")) == "\n"


def test_unbound_variable_is_reported():
    prog, diags = check_program("pred a thing.\npred b thing.\nr : a X -o b Y.\n")
    assert prog is None
    (d,) = errors(diags)
    assert d.code == "unbound-var" and "variable Y unbound on left-hand side" in d.message
    assert d.span[0] == 3


def test_permanent_precondition_without_dollar_warns():
    prog, diags = check_program("pred a.\nperm k.\nr : a * k -o a.\n")
    assert prog is not None
    (w,) = diags
    assert w.severity == "warning" and w.code == "perm-read"
    assert w.message.startswith("permanent predicate matched linearly; will be treated as read-only")


def test_nonground_initial_context_is_rejected():
    prog, diags = check_program("pred a thing.\ninit { a X }\n")
    assert prog is None
    assert "initial context must be ground" in errors(diags)[0].message


def test_shipped_ruleset_has_single_warning():
    diags = validate(standard_ruleset())
    assert not errors(diags)
    assert [(d.code, d.message.split(": ")[-1]) for d in diags] == [("perm-read", "interruptive Type")]


def test_shipped_ruleset_round_trips():
    prog = standard_ruleset()
    text = pretty_print(prog)
    assert parse_program(text) == prog
    assert pretty_print(parse_program(text)) == text


def test_comments_and_lex_errors():
    tokens, diags = tokenize("pred a. % trailing comment\n")
    assert not diags and [t.text for t in tokens if t.kind != "eof"] == ["pred", "a", "."]
    _, diags = tokenize("pred a. #")
    assert diags and diags[0].span[:2] == (1, 9)


def test_parse_program_raises_with_diagnostics():
    with pytest.raises(ProgramError) as exc:
        parse_program("pred a.\nr : a -o")
    assert exc.value.diagnostics


def test_parser_recovers_and_reports_several_errors():
    src = "pred a thing.\nr : a X -o a X\ns : a ( -o a X.\nt : a X -o a X.\n"
    _, diags = check_program(src)
    assert len(errors(diags)) >= 2


@pytest.mark.parametrize("path", INVALID, ids=lambda p: p.stem)
def test_invalid_fixture_reports_located_error(path):
    src = path.read_text()
    expected = re.search(r"expect: (\S+)", src).group(1)
    prog, diags = check_program(src)
    assert prog is None
    errs = errors(diags)
    assert expected in {d.code for d in errs}
    nlines = src.count("\n") + 1
    for d in errs:
        line, col, end_line, end_col = d.span
        assert 1 <= line <= end_line <= nlines and col >= 1


@settings(max_examples=300, deadline=None)
@given(st.randoms(use_true_random=False))
def test_pretty_print_round_trip(rng):
    prog = random_program(rng)
    assert not errors(validate(prog))
    text = pretty_print(prog)
    reparsed = parse_program(text)
    assert reparsed == prog
    assert pretty_print(reparsed) == text
