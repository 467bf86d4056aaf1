"""Expressive-range experiments over archetype compositions, and causal
graphs of individual traces."""
from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from statistics import fmean, pvariance
from typing import Sequence

from .conversation import (
    BELIEF_RULES, SPEECH_RULES, Archetype, BeliefChange, EmotionChange, Initiation, Interruption, Scenario,
    SpeechAct, TopicShift, build_scenario, classify_firing, standard_ruleset,
)
from .dsl import Program
from .engine import Firing, Trace, run
from .rng import derive_seed
from .terms import Atom

Composition = tuple[Archetype, ...]

_P, _PP, _C, _R = (Archetype.PARTICIPANT, Archetype.PEOPLE_PLEASER,
                   Archetype.CONTRARIAN, Archetype.RETICENT)

DEFAULT_COMPOSITIONS: tuple[Composition, ...] = (
    (_P, _PP, _R),
    (_C, _C, _C),
    (_P, _PP, _C),
    (_P, _P, _P),
    (_PP, _PP, _PP),
    (_R, _R, _R),
    (_P, _C, _R),
    (_PP, _C, _R),
    (_P, _R, _R),
)


def composition_label(comp: Sequence[Archetype]) -> str:
    return "/".join(Archetype(a).code for a in comp)


def parse_composition(text: str | Sequence[str]) -> Composition:
    parts = text.split("/") if isinstance(text, str) else text
    return tuple(Archetype.parse(p) for p in parts)


# ---------------------------------------------------------------- tallies

@dataclass
class Tally:
    times_spoken: dict[str, int] = field(default_factory=dict)
    belief_changes: dict[str, int] = field(default_factory=dict)
    belief_changes_total: int = 0
    interruptions: int = 0
    emotion_events: int = 0
    topic_shifts: int = 0


def trace_characters(trace: Trace) -> list[str]:
    return sorted(str(a.args[0]) for a in trace.initial.permanent if a.pred == "is")


def tally_trace(trace: Trace, characters: Sequence[str] | None = None,
                count_initiation: bool = True) -> Tally:
    """Count the classified firings of ``trace``.

    ``characters`` fixes the keys (and their order) of the per-character
    maps; by default every character with an archetype fact is listed.
    """
    names = list(characters) if characters is not None else trace_characters(trace)
    t = Tally({c: 0 for c in names}, {c: 0 for c in names})
    for f in trace.firings:
        classes = classify_firing(f)
        initiation = any(isinstance(c, Initiation) for c in classes)
        for c in classes:
            if isinstance(c, SpeechAct):
                if initiation and not count_initiation:
                    continue
                t.times_spoken[c.speaker] = t.times_spoken.get(c.speaker, 0) + 1
            elif isinstance(c, BeliefChange):
                t.belief_changes[c.character] = t.belief_changes.get(c.character, 0) + 1
                t.belief_changes_total += 1
            elif isinstance(c, Interruption):
                t.interruptions += 1
            elif isinstance(c, EmotionChange):
                t.emotion_events += 1
            elif isinstance(c, TopicShift):
                t.topic_shifts += 1
    return t


# ---------------------------------------------------------------- batches

@dataclass(frozen=True)
class BatchRow:
    composition: Composition
    run: int
    seed: int
    tally: Tally


@dataclass
class BatchResult:
    characters: tuple[str, ...]
    rows: list[BatchRow]

    def by_composition(self) -> dict[Composition, list[BatchRow]]:
        out: dict[Composition, list[BatchRow]] = {}
        for r in self.rows:
            out.setdefault(r.composition, []).append(r)
        return out


def _one_run(args) -> tuple[int, int, int, Tally]:
    ci, ri, seed, scenario, program, step_limit, count_initiation = args
    trace = run(program, build_scenario(scenario, program), seed, step_limit)
    return ci, ri, seed, tally_trace(trace, scenario.names, count_initiation)


def run_batch(compositions: Sequence[Sequence[Archetype]], base_scenario: Scenario, runs: int,
              master_seed: int, program: Program | None = None, step_limit: int = 200,
              workers: int = 1, count_initiation: bool = True) -> BatchResult:
    """Run every composition ``runs`` times with derived per-run seeds.

    Rows come back ordered by (composition index, run index) whatever the
    worker count.
    """
    if runs < 1:
        raise ValueError("runs must be at least 1")
    program = standard_ruleset() if program is None else program
    jobs = []
    comps = [tuple(Archetype(a) for a in c) for c in compositions]
    for ci, comp in enumerate(comps):
        sc = base_scenario.with_archetypes(comp)
        for ri in range(runs):
            jobs.append((ci, ri, derive_seed(master_seed, ci, ri), sc, program, step_limit,
                         count_initiation))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            done = list(pool.map(_one_run, jobs, chunksize=16))
    else:
        done = [_one_run(j) for j in jobs]
    done.sort(key=lambda r: (r[0], r[1]))
    rows = [BatchRow(comps[ci], ri, seed, tally) for ci, ri, seed, tally in done]
    return BatchResult(tuple(base_scenario.names), rows)


def to_csv(result: BatchResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["composition", "run", "seed", "character", "times_spoken", "belief_changes"])
    for r in result.rows:
        label = composition_label(r.composition)
        for c in result.characters:
            w.writerow([label, r.run, r.seed, c, r.tally.times_spoken.get(c, 0),
                        r.tally.belief_changes.get(c, 0)])
    return buf.getvalue()


@dataclass(frozen=True)
class CompositionStats:
    composition: Composition
    mean_times_spoken: dict[str, float]
    mean_belief_changes: float

    @property
    def speaking_variance(self) -> float:
        """Spread of the per-character mean participation (lower = more balanced)."""
        return pvariance(self.mean_times_spoken.values())


def composition_stats(result: BatchResult) -> list[CompositionStats]:
    out = []
    for comp, rows in result.by_composition().items():
        spoken = {c: fmean(r.tally.times_spoken.get(c, 0) for r in rows) for c in result.characters}
        beliefs = fmean(r.tally.belief_changes_total for r in rows)
        out.append(CompositionStats(comp, spoken, beliefs))
    return out


def summary(result: BatchResult) -> dict:
    doc = {}
    for s in composition_stats(result):
        doc[composition_label(s.composition)] = {
            "archetypes": [a.value for a in s.composition],
            "mean_times_spoken": {c: round(v, 6) for c, v in s.mean_times_spoken.items()},
            "mean_belief_changes": round(s.mean_belief_changes, 6),
        }
    return doc


def summary_json(result: BatchResult) -> str:
    return json.dumps(summary(result), indent=2) + "\n"


# ---------------------------------------------------------------- causal graphs

class CausalGraphError(ValueError):
    pass


@dataclass
class CausalGraph:
    """Bipartite graph of firings (``f<step>``) and occurrences (``r<id>``).

    Edge kinds: ``consume`` (resource -> firing), ``produce`` (firing ->
    resource) and ``read`` (resource -> firing, not part of the causal order).
    """

    rule_nodes: dict[int, Firing] = field(default_factory=dict)
    resource_nodes: dict[int, Atom] = field(default_factory=dict)
    edges: list[tuple[str, str, str]] = field(default_factory=list)

    def producer(self) -> dict[int, int]:
        return {int(d[1:]): int(s[1:]) for s, d, k in self.edges if k == "produce"}

    def consumer(self) -> dict[int, int]:
        return {int(s[1:]): int(d[1:]) for s, d, k in self.edges if k == "consume"}

    def successors(self, include_reads: bool = False) -> dict[str, list[str]]:
        succ: dict[str, list[str]] = {}
        for s, d, k in self.edges:
            if k != "read" or include_reads:
                succ.setdefault(s, []).append(d)
        return succ

    def reachable(self, src: str, include_reads: bool = False) -> set[str]:
        succ = self.successors(include_reads)
        seen, stack = set(), [src]
        while stack:
            n = stack.pop()
            for m in succ.get(n, ()):
                if m not in seen:
                    seen.add(m)
                    stack.append(m)
        return seen


def causal_graph(trace: Trace) -> CausalGraph:
    atoms: dict[int, Atom] = dict(trace.initial.linear)
    g = CausalGraph()
    touched: set[int] = set()
    for f in trace.firings:
        g.rule_nodes[f.step] = f
        node = f"f{f.step}"
        for oid in f.consumed:
            if oid not in atoms:
                raise CausalGraphError(f"step {f.step} consumes unknown occurrence {oid}")
            g.edges.append((f"r{oid}", node, "consume"))
            touched.add(oid)
        for ref in f.read:
            if isinstance(ref, int):
                if ref not in atoms:
                    raise CausalGraphError(f"step {f.step} reads unknown occurrence {ref}")
                g.edges.append((f"r{ref}", node, "read"))
                touched.add(ref)
        for oid, a in f.produced:
            if oid in atoms:
                raise CausalGraphError(f"step {f.step} reproduces occurrence {oid}")
            atoms[oid] = a
            g.edges.append((node, f"r{oid}", "produce"))
            touched.add(oid)
    g.resource_nodes = {oid: atoms[oid] for oid in sorted(touched)}
    return g


def _dot_escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace('"', '\\"')


def to_dot(graph: CausalGraph) -> str:
    if not graph.rule_nodes and not graph.resource_nodes:
        return "digraph causal { }\n"
    lines = ["digraph causal {"]
    for step in sorted(graph.rule_nodes):
        lines.append(f'  f{step} [shape=box, label="{_dot_escape(graph.rule_nodes[step].rule)}"];')
    for oid, a in graph.resource_nodes.items():
        lines.append(f'  r{oid} [shape=ellipse, label="{_dot_escape(str(a))}"];')
    for s, d, kind in graph.edges:
        lines.append(f"  {s} -> {d} [style=dashed];" if kind == "read" else f"  {s} -> {d};")
    lines.append("}")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class BeliefMotif:
    """A belief change fed by an utterance and by an earlier belief state,
    whose producing firings are causally unrelated."""

    change_step: int
    utterance_step: int
    prior_belief_step: int


def belief_motifs(graph: CausalGraph) -> list[BeliefMotif]:
    producer = graph.producer()
    found = []
    for step, f in graph.rule_nodes.items():
        if f.rule not in BELIEF_RULES:
            continue
        heard = [o for o in f.consumed if graph.resource_nodes[o].pred == "hears"]
        thought = [o for o in f.consumed if graph.resource_nodes[o].pred == "thinks"]
        if not heard or not thought:
            continue
        ph, pt = producer.get(heard[0]), producer.get(thought[0])
        if ph is None or pt is None or graph.rule_nodes[ph].rule not in SPEECH_RULES:
            continue
        if f"f{pt}" in graph.reachable(f"f{ph}") or f"f{ph}" in graph.reachable(f"f{pt}"):
            continue
        found.append(BeliefMotif(step, ph, pt))
    return found
