"""Command-line entry point.

Exit codes: 0 success, 1 runtime or input error, 2 usage error.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from pathlib import Path
from typing import Sequence, TextIO

from . import analysis, tracefile
from .conversation import build_scenario, load_scenario
from .dsl import Program, ProgramError, check_program
from .engine import SimState, Trace, all_candidates, apply_firing, run

DEFAULT_STEP_LIMIT = 200


class _Usage(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # raise instead of exiting so dispatch owns the exit code
        raise _Usage(f"{self.format_usage()}{self.prog}: error: {message}\n")


def write_atomic(path: str | Path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent or Path("."))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="groupconv", description="Group conversation simulator.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="run one seeded simulation")
    s.add_argument("--rules", required=True)
    s.add_argument("--scenario", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--max-steps", type=int, default=DEFAULT_STEP_LIMIT)
    s.add_argument("--trace", help="write the trace JSON here (default: stdout)")

    a = sub.add_parser("analyze", help="batch runs over archetype compositions")
    a.add_argument("--rules", required=True)
    a.add_argument("--scenario", required=True)
    a.add_argument("--compositions", help="JSON list of compositions, e.g. [\"P/PP/R\", ...]")
    a.add_argument("--runs", type=int, default=15)
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--max-steps", type=int, default=DEFAULT_STEP_LIMIT)
    a.add_argument("--workers", type=int, default=1)
    a.add_argument("--exclude-initiation", action="store_true",
                   help="do not count the opening line as speaking")
    a.add_argument("--out", required=True)
    a.add_argument("--summary")

    g = sub.add_parser("graph", help="causal graph of a trace as DOT")
    g.add_argument("--trace", required=True)
    g.add_argument("--dot", required=True)

    i = sub.add_parser("interactive", help="pick each transition by hand")
    i.add_argument("--rules", required=True)
    i.add_argument("--scenario", required=True)
    i.add_argument("--max-steps", type=int, default=DEFAULT_STEP_LIMIT)
    i.add_argument("--trace", help="write the resulting trace JSON here")

    c = sub.add_parser("check", help="parse and validate a ruleset")
    c.add_argument("--rules", required=True)
    c.add_argument("--scenario")
    return p


def _load_program(path: str) -> Program:
    source = Path(path).read_text(encoding="utf-8")
    prog, diags = check_program(source)
    if prog is None:
        raise ProgramError([d for d in diags if d.severity == "error"])
    return prog


def _load_compositions(path: str) -> list[tuple]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(doc, list) or not doc:
        raise ValueError("compositions file must hold a non-empty JSON list")
    return [analysis.parse_composition(c) for c in doc]


def _positive(value: int, flag: str) -> None:
    if value < 1:
        raise _Usage(f"{flag} must be at least 1\n")


def cmd_simulate(args, out: TextIO, err: TextIO) -> int:
    _positive(args.max_steps, "--max-steps")
    prog = _load_program(args.rules)
    state = build_scenario(load_scenario(args.scenario), prog)
    trace = run(prog, state, args.seed, args.max_steps)
    text = tracefile.dumps(trace)
    if args.trace:
        write_atomic(args.trace, text)
        print(f"{len(trace.firings)} firings, {trace.termination}", file=err)
    else:
        out.write(text)
    return 0


def cmd_analyze(args, out: TextIO, err: TextIO) -> int:
    _positive(args.runs, "--runs")
    _positive(args.max_steps, "--max-steps")
    _positive(args.workers, "--workers")
    prog = _load_program(args.rules)
    scenario = load_scenario(args.scenario)
    comps = (_load_compositions(args.compositions) if args.compositions
             else list(analysis.DEFAULT_COMPOSITIONS))
    result = analysis.run_batch(comps, scenario, args.runs, args.seed, prog, args.max_steps,
                                args.workers, count_initiation=not args.exclude_initiation)
    write_atomic(args.out, analysis.to_csv(result))
    if args.summary:
        write_atomic(args.summary, analysis.summary_json(result))
    print(f"{len(result.rows)} runs over {len(comps)} compositions", file=err)
    return 0


def cmd_graph(args, out: TextIO, err: TextIO) -> int:
    trace = tracefile.loads(Path(args.trace).read_text(encoding="utf-8"))
    write_atomic(args.dot, analysis.to_dot(analysis.causal_graph(trace)))
    return 0


def describe(f) -> str:
    binding = " ".join(f"{k}={f.binding[k]}" for k in sorted(f.binding))
    return f"{f.rule}  {binding}"


def cmd_interactive(args, out: TextIO, err: TextIO, inp: TextIO) -> int:
    _positive(args.max_steps, "--max-steps")
    prog = _load_program(args.rules)
    initial: SimState = build_scenario(load_scenario(args.scenario), prog)
    state = initial
    firings = []
    termination = "step_limit"
    while len(firings) < args.max_steps:
        cands = all_candidates(prog.rules, state)
        if not cands:
            termination = "quiescent"
            print("quiescent", file=out)
            break
        print(f"step {len(firings)}:", file=out)
        for n, c in enumerate(cands, 1):
            print(f"  {n}) {describe(c)}", file=out)
        choice = None
        while choice is None:
            out.write("> ")
            out.flush()
            line = inp.readline()
            if not line or line.strip() == "q":
                break
            try:
                k = int(line.strip())
            except ValueError:
                print(f"enter 1-{len(cands)} or q", file=out)
                continue
            if 1 <= k <= len(cands):
                choice = cands[k - 1]
            else:
                print(f"enter 1-{len(cands)} or q", file=out)
        if choice is None:
            break
        fired, state = apply_firing(state, choice, step=len(firings))
        firings.append(fired)
    if args.trace:
        trace = Trace(initial, tuple(firings), state, 0, termination)
        write_atomic(args.trace, tracefile.dumps(trace))
    return 0


def cmd_check(args, out: TextIO, err: TextIO) -> int:
    prog, diags = check_program(Path(args.rules).read_text(encoding="utf-8"))
    for d in diags:
        print(f"{args.rules}:{d}", file=out)
    if prog is None:
        return 1
    if args.scenario:
        build_scenario(load_scenario(args.scenario), prog)
    print(f"ok: {len(prog.rules)} rules", file=out)
    return 0


def dispatch(argv: Sequence[str], stdin: TextIO | None = None, stdout: TextIO | None = None,
             stderr: TextIO | None = None) -> int:
    inp = stdin or sys.stdin
    out = stdout or sys.stdout
    err = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(list(argv))
    except _Usage as e:
        err.write(str(e))
        return 2
    except SystemExit as e:  # --help
        return int(e.code or 0)
    try:
        if args.command == "simulate":
            return cmd_simulate(args, out, err)
        if args.command == "analyze":
            return cmd_analyze(args, out, err)
        if args.command == "graph":
            return cmd_graph(args, out, err)
        if args.command == "interactive":
            return cmd_interactive(args, out, err, inp)
        return cmd_check(args, out, err)
    except _Usage as e:
        err.write(parser.format_usage() + str(e))
        return 2
    except ProgramError as e:
        for d in e.diagnostics:
            print(f"error: {d}", file=err)
        return 1
    except (OSError, ValueError, KeyError) as e:
        print(f"error: {e}", file=err)
        return 1


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))
