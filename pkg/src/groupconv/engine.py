"""Forward-chaining multiset rewriting.

A state is a multiset of linear atoms, each carrying an occurrence id that is
never reused, plus a set of permanent facts.  A rule fires by consuming its
linear preconditions, reading its ``$`` preconditions and permanent
references, and adding its postconditions under fresh ids.

Nondeterminism is confined to :func:`step`: all candidate firings are listed
in a fixed order and one is picked uniformly with a seeded
:class:`~groupconv.rng.SplitMix64`.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Literal, Sequence, Union

from .rng import SplitMix64
from .terms import Atom, Term, binding_key, instantiate, unify

ReadRef = Union[int, Atom]


class StaleCandidateError(RuntimeError):
    """A candidate was applied to a state that no longer holds what it consumes."""


@dataclass(frozen=True)
class Rule:
    name: str
    linear_pre: tuple[Atom, ...] = ()
    persistent_pre: tuple[Atom, ...] = ()
    # preconditions on permanent predicates written without ``$``
    permanent_pre: tuple[Atom, ...] = ()
    post: tuple[Atom, ...] = ()
    span: tuple[int, int, int, int] | None = field(default=None, compare=False, repr=False)

    @property
    def preconditions(self) -> tuple[Atom, ...]:
        return self.linear_pre + self.persistent_pre + self.permanent_pre

    def variables(self) -> set[str]:
        out: set[str] = set()
        for a in self.preconditions:
            out |= a.variables()
        return out

    @cached_property
    def _plan(self) -> tuple[tuple[Atom, str, frozenset[str]], ...]:
        return _plan_order(self)


def _plan_order(rule: Rule) -> tuple[tuple[Atom, str, frozenset[str]], ...]:
    # Greedy join order: prefer patterns whose variables are already bound,
    # so later patterns become lookups rather than scans.
    pending = [(a, "linear") for a in rule.linear_pre]
    pending += [(a, "persistent") for a in rule.persistent_pre]
    pending += [(a, "permanent") for a in rule.permanent_pre]
    bound: set[str] = set()
    order = []
    while pending:
        def score(item):
            a, kind = item
            vs = a.variables()
            return (len(vs - bound), kind == "permanent", -len(vs & bound))
        best = min(pending, key=score)
        pending.remove(best)
        order.append((best[0], best[1], frozenset(best[0].variables())))
        bound |= best[0].variables()
    return tuple(order)


@dataclass(frozen=True)
class SimState:
    """Linear occurrences keyed by id (insertion ordered) plus permanent facts."""

    linear: dict[int, Atom] = field(default_factory=dict)
    permanent: frozenset[Atom] = frozenset()
    next_id: int = 0

    @classmethod
    def from_atoms(cls, linear: Iterable[Atom], permanent: Iterable[Atom] = ()) -> "SimState":
        lin = dict(enumerate(linear))
        for a in lin.values():
            if not a.is_ground():
                raise ValueError(f"state atoms must be ground: {a}")
        perm = frozenset(permanent)
        return cls(lin, perm, len(lin))

    def atoms(self) -> list[Atom]:
        return list(self.linear.values())

    def count(self, pred: str) -> int:
        return sum(1 for a in self.linear.values() if a.pred == pred)

    def multiset(self) -> Counter:
        return Counter(self.linear.values())

    @cached_property
    def _occurrences(self) -> dict[Atom, list[int]]:
        occ: dict[Atom, list[int]] = {}
        for oid, a in self.linear.items():
            occ.setdefault(a, []).append(oid)
        for ids in occ.values():
            ids.sort()
        return occ

    @cached_property
    def _by_pred(self) -> dict[str, list[Atom]]:
        idx: dict[str, list[Atom]] = {}
        for a in self._occurrences:
            idx.setdefault(a.pred, []).append(a)
        for a in self.permanent:
            idx.setdefault(a.pred, []).append(a)
        return idx


@dataclass(frozen=True)
class Firing:
    rule: str
    binding: dict[str, Term]
    consumed: tuple[int, ...] = ()
    read: tuple[ReadRef, ...] = ()
    produced: tuple[tuple[int, Atom], ...] = ()
    step: int = -1
    post: tuple[Atom, ...] | None = field(default=None, compare=False, repr=False)

    @property
    def produced_ids(self) -> tuple[int, ...]:
        return tuple(oid for oid, _ in self.produced)


@dataclass(frozen=True)
class Trace:
    initial: SimState
    firings: tuple[Firing, ...]
    final: SimState
    seed: int
    termination: Literal["quiescent", "step_limit"]


def _bindings(rule: Rule, state: SimState) -> list[dict[str, Term]]:
    occ = state._occurrences
    by_pred = state._by_pred
    perm = state.permanent
    avail = {a: len(ids) for a, ids in occ.items()}
    plan = rule._plan
    out: list[dict[str, Term]] = []

    def go(i: int, b: dict[str, Term]) -> None:
        if i == len(plan):
            out.append(b)
            return
        pat, kind, pvars = plan[i]
        if pvars <= b.keys():
            # fully bound: a lookup, not a scan
            g = instantiate(pat, b)
            if kind != "permanent" and avail.get(g, 0) > 0:
                avail[g] -= 1
                go(i + 1, b)
                avail[g] += 1
            elif kind != "linear" and g in perm:
                go(i + 1, b)
            return
        for g in by_pred.get(pat.pred, ()):
            if g in perm:
                if kind == "linear":
                    continue
                nb = unify(pat, g, b)
                if nb is not None:
                    go(i + 1, nb)
                continue
            if kind == "permanent" or avail[g] == 0:
                continue
            nb = unify(pat, g, b)
            if nb is None:
                continue
            avail[g] -= 1
            go(i + 1, nb)
            avail[g] += 1

    go(0, {})
    return out


def _candidate(rule: Rule, binding: dict[str, Term], state: SimState) -> Firing:
    taken: dict[Atom, int] = {}

    def take(a: Atom) -> int:
        ids = state._occurrences[a]
        k = taken.get(a, 0)
        taken[a] = k + 1
        return ids[k]

    consumed = tuple(take(instantiate(p, binding)) for p in rule.linear_pre)
    read: list[ReadRef] = []
    for p in rule.persistent_pre:
        g = instantiate(p, binding)
        if g in state.permanent:
            read.append(g)
        else:
            read.append(take(g))
    read.extend(instantiate(p, binding) for p in rule.permanent_pre)
    post = tuple(instantiate(p, binding) for p in rule.post)
    return Firing(rule.name, binding, consumed, tuple(read), (), -1, post)


def applicable_firings(rule: Rule, state: SimState) -> list[Firing]:
    """Every distinct (rule, binding) instance enabled in ``state``.

    Identical linear preconditions must be met by distinct occurrences; the
    lowest free occurrence ids are assigned to each matched atom.  Results are
    ordered by binding (variables by name, terms by :func:`term_sort_key`).
    """
    bindings = _bindings(rule, state)
    bindings.sort(key=binding_key)
    return [_candidate(rule, b, state) for b in bindings]


def all_candidates(rules: Sequence[Rule], state: SimState) -> list[Firing]:
    out: list[Firing] = []
    for r in rules:
        out.extend(applicable_firings(r, state))
    return out


def instantiate_firing(rule: Rule, binding: dict[str, Term], state: SimState) -> Firing:
    """Rebuild the canonical candidate for a known binding."""
    missing = rule.variables() - binding.keys()
    if missing:
        raise ValueError(f"binding for {rule.name} misses {sorted(missing)}")
    try:
        return _candidate(rule, dict(binding), state)
    except (KeyError, IndexError) as e:
        raise StaleCandidateError(f"{rule.name} is not enabled under {binding}") from e


def apply_firing(state: SimState, candidate: Firing, step: int | None = None) -> tuple[Firing, SimState]:
    """Consume, read, produce.  Returns the recorded firing and the new state."""
    for oid in candidate.consumed:
        if oid not in state.linear:
            raise StaleCandidateError(f"occurrence {oid} consumed by {candidate.rule} is gone")
    for ref in candidate.read:
        if isinstance(ref, int) and ref not in state.linear:
            raise StaleCandidateError(f"occurrence {ref} read by {candidate.rule} is gone")
    if candidate.post is None:
        post = tuple(a for _, a in candidate.produced)
    else:
        post = candidate.post
    linear = dict(state.linear)
    for oid in candidate.consumed:
        del linear[oid]
    nid = state.next_id
    produced = []
    for a in post:
        linear[nid] = a
        produced.append((nid, a))
        nid += 1
    fired = Firing(
        candidate.rule,
        candidate.binding,
        candidate.consumed,
        candidate.read,
        tuple(produced),
        candidate.step if step is None else step,
        post,
    )
    return fired, SimState(linear, state.permanent, nid)


def step(state: SimState, rules: Sequence[Rule], rng: SplitMix64, index: int = 0):
    """Fire one uniformly chosen candidate; ``None`` when quiescent."""
    cands = all_candidates(rules, state)
    if not cands:
        return None
    choice = cands[rng.below(len(cands))]
    return apply_firing(state, choice, step=index)


def _rules_of(program) -> Sequence[Rule]:
    return getattr(program, "rules", program)


def run(program, initial: SimState, seed: int, step_limit: int = 200) -> Trace:
    if step_limit <= 0:
        raise ValueError("step_limit must be positive")
    rules = _rules_of(program)
    rng = SplitMix64(seed)
    state = initial
    firings: list[Firing] = []
    termination: Literal["quiescent", "step_limit"] = "step_limit"
    for i in range(step_limit):
        res = step(state, rules, rng, i)
        if res is None:
            termination = "quiescent"
            break
        fired, state = res
        firings.append(fired)
    else:
        if not all_candidates(rules, state):
            termination = "quiescent"
    return Trace(initial, tuple(firings), state, seed, termination)


def replay(trace: Trace, program=None) -> SimState:
    """Fold the recorded firings over the initial state.

    With a program, each firing is re-derived from its rule and binding and
    checked against the record; without one, the recorded atoms are used.
    """
    rules = {r.name: r for r in _rules_of(program)} if program is not None else None
    state = trace.initial
    for f in trace.firings:
        if rules is not None:
            cand = instantiate_firing(rules[f.rule], f.binding, state)
            if cand.consumed != f.consumed or cand.read != f.read:
                raise StaleCandidateError(f"step {f.step}: recorded occurrences differ from re-derivation")
            fired, state = apply_firing(state, cand, f.step)
            if fired.produced != f.produced:
                raise StaleCandidateError(f"step {f.step}: produced atoms differ")
        else:
            _, state = apply_firing(state, f)
    return state
