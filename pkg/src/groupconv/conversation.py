"""Conversation domain: scenarios, the standard ruleset, firing classification
and the conversational norms a trace must respect."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, replace
from enum import Enum
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Any, Iterable, Sequence, Union

from .dsl import Program, parse_program
from .engine import Firing, SimState, Trace, apply_firing
from .terms import Atom, Const, Fn, Nat, Term, atom

log = logging.getLogger(__name__)


class Archetype(str, Enum):
    PARTICIPANT = "participant"
    PEOPLE_PLEASER = "people_pleaser"
    CONTRARIAN = "contrarian"
    RETICENT = "reticent"

    @property
    def code(self) -> str:
        return _CODES[self]

    @classmethod
    def parse(cls, text: str) -> "Archetype":
        key = text.strip()
        for a, c in _CODES.items():
            if key.upper() == c:
                return a
        return cls(key.lower().replace("-", "_"))


_CODES = {
    Archetype.PARTICIPANT: "P",
    Archetype.PEOPLE_PLEASER: "PP",
    Archetype.CONTRARIAN: "C",
    Archetype.RETICENT: "R",
}

SENTIMENTS = ("negative", "neutral", "positive")
OPPOSITE = {"positive": "negative", "negative": "positive"}
EMOTIONS = ("happy", "sad", "miffed", "angry", "encouraged")


@dataclass(frozen=True)
class Opinion:
    topic: str
    sentiment: str

    def term(self) -> Term:
        return Fn("opinion", (Const(self.topic), Const(self.sentiment)))


@dataclass(frozen=True)
class Fact:
    topic: str
    value: str

    def term(self) -> Term:
        return Fn("fact", (Const(self.topic), Const(self.value)))


Statement = Union[Opinion, Fact]


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class Scenario:
    characters: tuple[tuple[str, Archetype], ...]
    topics: tuple[str, ...]
    relevant: tuple[tuple[str, str], ...] = ()
    beliefs: tuple[tuple[str, Statement], ...] = ()
    likes: tuple[tuple[str, str], ...] = ()
    listening: Union[str, tuple[tuple[str, str], ...]] = "complete"
    leader: str = ""
    starting_topic: str = ""
    turns: int = 9

    @property
    def names(self) -> list[str]:
        return [c for c, _ in self.characters]

    def archetype(self, name: str) -> Archetype:
        return dict(self.characters)[name]

    def listening_pairs(self) -> list[tuple[str, str]]:
        if self.listening == "complete":
            return [(a, b) for a in self.names for b in self.names if a != b]
        return list(self.listening)

    def with_archetypes(self, composition: Sequence[Archetype]) -> "Scenario":
        if len(composition) != len(self.characters):
            raise ScenarioError(
                f"composition has {len(composition)} slots but the scenario has "
                f"{len(self.characters)} characters")
        chars = tuple((c, Archetype(a)) for (c, _), a in zip(self.characters, composition))
        return replace(self, characters=chars)

    def check(self) -> None:
        names = set(self.names)
        topics = set(self.topics)
        if len(names) != len(self.characters):
            raise ScenarioError("duplicate character id")
        if self.leader not in names:
            raise ScenarioError(f"leader {self.leader!r} is not a character")
        if self.starting_topic not in topics:
            raise ScenarioError(f"starting topic {self.starting_topic!r} is not a topic")
        for a, b in self.relevant:
            for t in (a, b):
                if t not in topics:
                    raise ScenarioError(f"relevance mentions unknown topic {t!r}")
        for c, st in self.beliefs:
            if c not in names:
                raise ScenarioError(f"belief held by unknown character {c!r}")
            if st.topic not in topics:
                raise ScenarioError(f"belief about unknown topic {st.topic!r}")
            if isinstance(st, Opinion) and st.sentiment not in SENTIMENTS:
                raise ScenarioError(f"unknown sentiment {st.sentiment!r}")
        for pairs, what in ((self.likes, "likes"), (self.listening_pairs(), "listening")):
            for a, b in pairs:
                if a not in names or b not in names:
                    raise ScenarioError(f"{what} pair ({a}, {b}) mentions an unknown character")
                if what == "listening" and a == b:
                    raise ScenarioError(f"character {a!r} cannot listen to itself")
        if self.turns < 0:
            raise ScenarioError("turn budget must be non-negative")


def scenario_from_dict(doc: dict[str, Any]) -> Scenario:
    try:
        beliefs = []
        for b in doc.get("beliefs", []):
            if b["kind"] == "opinion":
                st: Statement = Opinion(b["topic"], b["sentiment"])
            elif b["kind"] == "fact":
                st = Fact(b["topic"], b["value"])
            else:
                raise ScenarioError(f"unknown belief kind {b['kind']!r}")
            beliefs.append((b["character"], st))
        listening = doc.get("listening", "complete")
        if listening != "complete":
            listening = tuple(tuple(p) for p in listening)
        sc = Scenario(
            characters=tuple((c["id"], Archetype.parse(c["archetype"])) for c in doc["characters"]),
            topics=tuple(doc["topics"]),
            relevant=tuple(tuple(p) for p in doc.get("relevant", [])),
            beliefs=tuple(beliefs),
            likes=tuple(tuple(p) for p in doc.get("likes", [])),
            listening=listening,
            leader=doc["leader"],
            starting_topic=doc["starting_topic"],
            turns=int(doc.get("turns", 9)),
        )
    except ScenarioError:
        raise
    except (KeyError, TypeError, ValueError) as e:
        raise ScenarioError(f"malformed scenario: {e}") from e
    sc.check()
    return sc


def scenario_to_dict(sc: Scenario) -> dict[str, Any]:
    beliefs = []
    for c, st in sc.beliefs:
        if isinstance(st, Opinion):
            beliefs.append({"character": c, "kind": "opinion", "topic": st.topic, "sentiment": st.sentiment})
        else:
            beliefs.append({"character": c, "kind": "fact", "topic": st.topic, "value": st.value})
    return {
        "characters": [{"id": c, "archetype": a.value} for c, a in sc.characters],
        "topics": list(sc.topics),
        "relevant": [list(p) for p in sc.relevant],
        "beliefs": beliefs,
        "likes": [list(p) for p in sc.likes],
        "listening": sc.listening if sc.listening == "complete" else [list(p) for p in sc.listening],
        "leader": sc.leader,
        "starting_topic": sc.starting_topic,
        "turns": sc.turns,
    }


def load_scenario(path: str | Path) -> Scenario:
    return scenario_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _data(*parts: str) -> str:
    path = resources.files("groupconv") / "data"
    for p in parts:
        path = path / p
    return path.read_text(encoding="utf-8")


def default_scenario() -> Scenario:
    return scenario_from_dict(json.loads(_data("scenarios", "scooby.json")))


@lru_cache(maxsize=None)
def standard_ruleset() -> Program:
    """The shipped 18-rule conversation program."""
    return parse_program(_data("rules", "conversation.cvl"))


def build_scenario(scenario: Scenario, program: Program | None = None) -> SimState:
    """Initial state for ``scenario``: its linear context plus the permanent
    facts of both the scenario and the program's permanent init block."""
    scenario.check()
    if scenario.turns == 0:
        log.warning("scenario has a zero turn budget; no speech act can fire")
    program = standard_ruleset() if program is None else program

    linear = [atom("turns", scenario.turns), atom("leader", scenario.leader),
              atom("starting_topic", scenario.starting_topic)]
    linear += [Atom("thinks", (Const(c), st.term())) for c, st in scenario.beliefs]
    linear += list(program.init)

    perm: list[Atom] = list(program.permanent_init)
    for a, b in scenario.relevant:
        perm += [atom("relevant", a, b), atom("relevant", b, a)]
    statements: set[Statement] = set()
    for t in scenario.topics:
        statements.update(Opinion(t, s) for s in SENTIMENTS)
    statements.update(st for _, st in scenario.beliefs)
    perm += [Atom("on_topic", (st.term(), Const(st.topic))) for st in statements]
    perm += [atom("listening", a, b) for a, b in scenario.listening_pairs()]
    perm += [atom("is", c, a.value) for c, a in scenario.characters]
    perm += [atom("likes", a, b) for a, b in scenario.likes]
    return SimState.from_atoms(linear, perm)


# ---------------------------------------------------------------- classification

@dataclass(frozen=True)
class SpeechAct:
    speaker: str


@dataclass(frozen=True)
class Interruption:
    interrupter: str
    interrupted: str


@dataclass(frozen=True)
class BeliefChange:
    character: str
    topic: str
    before: str
    after: str


@dataclass(frozen=True)
class EmotionChange:
    character: str
    emotion: str


@dataclass(frozen=True)
class TopicShift:
    before: str
    after: str


@dataclass(frozen=True)
class Initiation:
    speaker: str
    topic: str


FiringClass = Union[SpeechAct, Interruption, BeliefChange, EmotionChange, TopicShift, Initiation]

SPEECH_RULES = frozenset({
    "initiate", "begin_speaking", "finish_speaking", "reticent_contribute", "agree_to_please",
    "cause_debate", "question_fact", "question_opinion", "interrupt",
})
BELIEF_RULES = {
    "negative_to_neutral_opinion": ("negative", "neutral"),
    "positive_to_neutral_opinion": ("positive", "neutral"),
    "neutral_to_positive_opinion": ("neutral", "positive"),
    "neutral_to_negative_opinion": ("neutral", "negative"),
}
EMOTION_RULES = {
    "upset_from_interruption": "angry",
    "happy_from_agreement": "happy",
    "sad_from_disagreement": "sad",
    "encouraged_from_involvement": "encouraged",
}
TURN_RULES = SPEECH_RULES - {"initiate"} | {"change_topic"}


class UnknownRuleError(KeyError):
    pass


def classify_firing(firing: Firing) -> tuple[FiringClass, ...]:
    """Speech acts, interruptions, belief/emotion changes and topic shifts
    recorded by one firing of the standard ruleset."""
    name = firing.rule
    b = {k: str(v) for k, v in firing.binding.items()}
    if name == "initiate":
        return (Initiation(b["L"], b["T"]), SpeechAct(b["L"]))
    if name == "interrupt":
        return (Interruption(b["C"], b["C'"]), SpeechAct(b["C"]))
    if name in SPEECH_RULES:
        return (SpeechAct(b["C"]),)
    if name == "change_topic":
        return (TopicShift(b["T"], b["T'"]),)
    if name in BELIEF_RULES:
        before, after = BELIEF_RULES[name]
        return (BeliefChange(b["C"], b["T"], before, after),)
    if name in EMOTION_RULES:
        return (EmotionChange(b["C"], EMOTION_RULES[name]),)
    raise UnknownRuleError(f"not a rule of the standard conversation ruleset: {name!r}")


# ---------------------------------------------------------------- norms

def _states(trace: Trace) -> Iterable[tuple[SimState, Firing]]:
    state = trace.initial
    for f in trace.firings:
        yield state, f
        _, state = apply_firing(state, f)


def norm_violations(trace: Trace) -> list[str]:
    """Every breach of the conversational norms in ``trace``; empty when clean.

    Archetypes, relevance and the turn budget are read from the trace's own
    initial state, so the check needs nothing but the trace.
    """
    out: list[str] = []
    perm = trace.initial.permanent
    arche = {str(a.args[0]): str(a.args[1]) for a in perm if a.pred == "is"}
    budget = next((a.args[0].value for a in trace.initial.linear.values()
                   if a.pred == "turns" and isinstance(a.args[0], Nat)), 0)

    engaged_seen = {str(a.args[0]) for a in trace.initial.linear.values() if a.pred == "engaged"}
    miffed: dict[str, int] = {}
    angry: dict[str, int] = {}
    for a in trace.initial.linear.values():
        if a.pred == "feels":
            who, how = str(a.args[0]), str(a.args[1])
            if how == "miffed":
                miffed[who] = miffed.get(who, 0) + 1
            elif how == "angry":
                angry[who] = angry.get(who, 0) + 1

    spent = 0
    for state, f in _states(trace):
        where = f"step {f.step} ({f.rule})"
        if state.count("is_speaking") > 1:
            out.append(f"before {where}: more than one speaker")
        consumed_turns = [state.linear[i] for i in f.consumed if state.linear[i].pred == "turns"]
        if consumed_turns:
            spent += 1
            before = consumed_turns[0].args[0].value
            after = [a for _, a in f.produced if a.pred == "turns"]
            if len(after) != 1 or after[0].args[0].value != before - 1:
                out.append(f"{where}: turns did not decrease by exactly one")
        classes = classify_firing(f)
        for c in classes:
            if isinstance(c, Interruption) and arche.get(c.interrupter) in ("people_pleaser", "reticent"):
                out.append(f"{where}: {c.interrupter} ({arche[c.interrupter]}) interrupted")
            if (isinstance(c, SpeechAct) and f.rule != "initiate"
                    and arche.get(c.speaker) == "reticent" and c.speaker not in engaged_seen):
                out.append(f"{where}: reticent {c.speaker} spoke without being engaged")
            if isinstance(c, BeliefChange):
                gap = abs(SENTIMENTS.index(c.before) - SENTIMENTS.index(c.after))
                if gap != 1:
                    out.append(f"{where}: non-adjacent sentiment change {c.before}->{c.after}")
            if isinstance(c, TopicShift) and atom("relevant", c.before, c.after) not in perm:
                out.append(f"{where}: topic shift {c.before}->{c.after} between unrelated topics")
        topic = next((a.args[0] for a in state.linear.values() if a.pred == "current_topic"), None)
        for _, a in f.produced:
            st = None
            if a.pred == "says":
                st = a.args[1]
            elif a.pred == "hears":
                st = a.args[2]
            if st is not None and Atom("on_topic", (st, topic)) not in perm:
                out.append(f"{where}: {a} is off the current topic {topic}")
            if a.pred == "engaged":
                engaged_seen.add(str(a.args[0]))
            if a.pred == "feels":
                who, how = str(a.args[0]), str(a.args[1])
                if how == "miffed":
                    miffed[who] = miffed.get(who, 0) + 1
                elif how == "angry":
                    angry[who] = angry.get(who, 0) + 1
                    if miffed.get(who, 0) < 2 * angry[who]:
                        out.append(f"{where}: {who} became angry without two prior miffs")
    if trace.final.count("is_speaking") > 1:
        out.append("final state: more than one speaker")
    if spent > budget:
        out.append(f"{spent} turn-spending firings exceed the budget of {budget}")
    return out
