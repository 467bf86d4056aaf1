import csv
import io
import json
from pathlib import Path

import pytest

from groupconv import tracefile
from groupconv.cli import dispatch
from groupconv.conversation import build_scenario, load_scenario
from groupconv.dsl import parse_program
from groupconv.engine import all_candidates, apply_firing

ROOT = Path(__file__).parents[1]
RULES = str(ROOT / "rules" / "conversation.cvl")
SCENARIO = str(ROOT / "scenarios" / "scooby.json")
FIXTURES = Path(__file__).parent / "fixtures"


def cli(*argv, stdin=""):
    out, err = io.StringIO(), io.StringIO()
    code = dispatch([str(a) for a in argv], io.StringIO(stdin), out, err)
    return code, out.getvalue(), err.getvalue()


def test_simulate_matches_golden_trace():
    code, out, _ = cli("simulate", "--rules", RULES, "--scenario", SCENARIO, "--seed", 42)
    assert code == 0
    assert out == (FIXTURES / "golden_seed42.json").read_text()


def test_simulate_is_byte_stable(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for p in (a, b):
        assert cli("simulate", "--rules", RULES, "--scenario", SCENARIO, "--seed", 7,
                   "--trace", p)[0] == 0
    assert a.read_bytes() == b.read_bytes()
    assert tracefile.dumps(tracefile.loads(a.read_text())) == a.read_text()


def test_analyze_writes_csv_and_summary(tmp_path):
    out, summ = tmp_path / "runs.csv", tmp_path / "summary.json"
    code, _, err = cli("analyze", "--rules", RULES, "--scenario", SCENARIO, "--runs", 15,
                       "--seed", 3, "--out", out, "--summary", summ)
    assert code == 0, err
    rows = list(csv.DictReader(out.open()))
    assert len(rows) == 405
    doc = json.loads(summ.read_text())
    assert len(doc) == 9 and "P/PP/R" in doc


def test_analyze_with_composition_file(tmp_path):
    comps = tmp_path / "comps.json"
    comps.write_text('["P/P/P", ["reticent", "reticent", "contrarian"]]')
    out = tmp_path / "runs.csv"
    assert cli("analyze", "--rules", RULES, "--scenario", SCENARIO, "--compositions", comps,
               "--runs", 2, "--out", out)[0] == 0
    assert {r["composition"] for r in csv.DictReader(out.open())} == {"P/P/P", "R/R/C"}


def test_graph_writes_dot(tmp_path):
    dot = tmp_path / "g.dot"
    assert cli("graph", "--trace", FIXTURES / "golden_seed42.json", "--dot", dot)[0] == 0
    text = dot.read_text()
    assert text.startswith("digraph causal {") and "shape=box" in text


def test_check_reports_warning_and_rule_count():
    code, out, _ = cli("check", "--rules", RULES, "--scenario", SCENARIO)
    assert code == 0
    assert "warning[perm-read]" in out and out.rstrip().endswith("ok: 18 rules")


def test_check_reports_errors(tmp_path):
    bad = tmp_path / "bad.cvl"
    bad.write_text("pred a thing.\nr : a X -o a Y.\n")
    code, out, _ = cli("check", "--rules", bad)
    assert code == 1 and "unbound-var" in out


@pytest.mark.parametrize("argv", [
    ["simulate", "--bogus"],
    [],
    ["simulate", "--rules", RULES],
    ["simulate", "--rules", RULES, "--scenario", SCENARIO, "--seed", "x"],
    ["analyze", "--rules", RULES, "--scenario", SCENARIO, "--runs", "0", "--out", "x.csv"],
])
def test_usage_errors_exit_2(argv):
    code, out, err = cli(*argv)
    assert code == 2 and "usage:" in err


def test_help_exits_0(capsys):
    assert cli("--help")[0] == 0


def test_malformed_inputs_exit_1(tmp_path):
    broken = tmp_path / "broken.json"
    broken.write_text("{not json")
    assert cli("simulate", "--rules", RULES, "--scenario", broken)[0] == 1
    assert cli("graph", "--trace", broken, "--dot", tmp_path / "g.dot")[0] == 1
    assert cli("simulate", "--rules", tmp_path / "missing.cvl", "--scenario", SCENARIO)[0] == 1
    bad_rules = tmp_path / "bad.cvl"
    bad_rules.write_text("pred a.\nr : a -o\n")
    code, _, err = cli("simulate", "--rules", bad_rules, "--scenario", SCENARIO)
    assert code == 1 and "error" in err
    assert not (tmp_path / "g.dot").exists()


def test_interactive_reproduces_simulation(tmp_path):
    code, sim, _ = cli("simulate", "--rules", RULES, "--scenario", SCENARIO, "--seed", 0)
    expected = tracefile.loads(sim)
    prog = parse_program(Path(RULES).read_text())
    state = build_scenario(load_scenario(SCENARIO), prog)
    picks = []
    for f in expected.firings:
        cands = all_candidates(prog.rules, state)
        k = next(i for i, c in enumerate(cands) if c.rule == f.rule and c.binding == f.binding)
        picks.append(str(k + 1))
        _, state = apply_firing(state, cands[k])
    out = tmp_path / "t.json"
    code, menu, _ = cli("interactive", "--rules", RULES, "--scenario", SCENARIO, "--trace", out,
                        stdin="\n".join(["oops", "999"] + picks) + "\n")
    assert code == 0
    assert "enter 1-" in menu
    assert out.read_text() == sim


def test_interactive_quit_records_partial_trace(tmp_path):
    out = tmp_path / "t.json"
    code, menu, _ = cli("interactive", "--rules", RULES, "--scenario", SCENARIO, "--trace", out,
                        stdin="1\nq\n")
    assert code == 0 and "1) initiate" in menu
    trace = tracefile.loads(out.read_text())
    assert [f.rule for f in trace.firings] == ["initiate"]
