"""Independent oracles and random generators shared by the test modules."""
from __future__ import annotations

import itertools
import random
from collections import Counter

from groupconv.dsl import PredDecl, Program
from groupconv.engine import Rule, SimState
from groupconv.terms import Atom, Const, Fn, Nat, Succ, Var, instantiate, subterms, term_vars


# ---------------------------------------------------------------- matching oracle

def _universe(state: SimState) -> list:
    terms = set()
    for a in list(state.linear.values()) + list(state.permanent):
        for arg in a.args:
            for t in subterms(arg):
                terms.add(t)
                if isinstance(t, Nat) and t.value > 0:
                    terms.add(Nat(t.value - 1))
    return sorted(terms, key=repr)


def oracle_bindings(rule: Rule, state: SimState) -> set[tuple[str, frozenset]]:
    """Generate-and-test: every assignment of universe terms to the rule's
    variables, kept when the instantiated left-hand side is a sub-multiset
    of the state (permanent atoms by set membership)."""
    names = sorted(rule.variables())
    have = Counter(state.linear.values())
    out = set()
    for values in itertools.product(_universe(state), repeat=len(names)):
        b = dict(zip(names, values))
        need: Counter = Counter()
        ok = True
        for p in rule.linear_pre:
            need[instantiate(p, b)] += 1
        for p in rule.persistent_pre:
            g = instantiate(p, b)
            if g not in state.permanent:
                need[g] += 1
        for p in rule.permanent_pre:
            if instantiate(p, b) not in state.permanent:
                ok = False
        if ok and all(have[g] >= k for g, k in need.items()):
            out.add((rule.name, frozenset(b.items())))
    return out


# ---------------------------------------------------------------- random programs/states for the engine

LIN_PREDS = {"p": 1, "q": 2, "n": 1}
PERM_PREDS = {"r": 2, "k": 1}
CONSTS = ["a", "b", "c"]
VARS = ["X", "Y", "Z"]


def _arg(rng: random.Random, pred: str, ground: bool):
    if pred == "n":
        if ground or rng.random() < 0.3:
            return Nat(rng.randint(0, 3))
        v = Var(rng.choice(VARS))
        return Succ(v) if rng.random() < 0.5 else v
    if ground or rng.random() < 0.3:
        return Const(rng.choice(CONSTS))
    return Var(rng.choice(VARS))


def random_atom(rng: random.Random, pred: str, arity: int, ground: bool) -> Atom:
    return Atom(pred, tuple(_arg(rng, pred, ground) for _ in range(arity)))


def random_rule(rng: random.Random, name: str) -> Rule:
    lin, pers, perm = [], [], []
    for _ in range(rng.randint(1, 3)):
        roll = rng.random()
        if roll < 0.5:
            pred = rng.choice(list(LIN_PREDS))
            lin.append(random_atom(rng, pred, LIN_PREDS[pred], False))
        elif roll < 0.75:
            table = rng.choice([LIN_PREDS, PERM_PREDS])
            pred = rng.choice(list(table))
            pers.append(random_atom(rng, pred, table[pred], False))
        else:
            pred = rng.choice(list(PERM_PREDS))
            perm.append(random_atom(rng, pred, PERM_PREDS[pred], False))
    rule = Rule(name, tuple(lin), tuple(pers), tuple(perm))
    bound = sorted(rule.variables())
    post = []
    for _ in range(rng.randint(0, 2)):
        pred = rng.choice(["p", "q"])
        args = tuple(Var(rng.choice(bound)) if bound and rng.random() < 0.6 else Const(rng.choice(CONSTS))
                     for _ in range(LIN_PREDS[pred]))
        post.append(Atom(pred, args))
    return Rule(name, rule.linear_pre, rule.persistent_pre, rule.permanent_pre, tuple(post))


def random_state(rng: random.Random, max_linear: int = 12) -> SimState:
    linear = []
    for _ in range(rng.randint(0, max_linear)):
        pred = rng.choice(list(LIN_PREDS))
        linear.append(random_atom(rng, pred, LIN_PREDS[pred], True))
    perm = set()
    for _ in range(rng.randint(0, 5)):
        pred = rng.choice(list(PERM_PREDS))
        perm.add(random_atom(rng, pred, PERM_PREDS[pred], True))
    return SimState.from_atoms(linear, perm)


def random_engine_case(rng: random.Random) -> tuple[list[Rule], SimState]:
    rules = [random_rule(rng, f"r{i}") for i in range(rng.randint(1, 5))]
    return rules, random_state(rng)


# ---------------------------------------------------------------- random valid programs for the DSL

_NAMES = ["alpha", "beta", "gamma", "delta", "eps", "zeta", "eta"]


def _dsl_term(rng: random.Random, sort: str, vars_by_sort: dict[str, list[str]], depth: int = 0):
    if sort == "nat":
        roll = rng.random()
        if roll < 0.4:
            return Nat(rng.randint(0, 12))
        v: object = Var(rng.choice(vars_by_sort["nat"]))
        for _ in range(rng.choice([0, 0, 1, 2])):
            v = Succ(v)
        return v
    roll = rng.random()
    if roll < 0.4:
        return Var(rng.choice(vars_by_sort[sort]))
    if roll < 0.6 and depth < 2:
        k = rng.randint(1, 3)
        return Fn(rng.choice(["opinion", "fact", "pair"]),
                  tuple(_dsl_term(rng, sort, vars_by_sort, depth + 1) for _ in range(k)))
    return Const(rng.choice(["house", "ghosts", "velma", "fred", "x1", "y'"]))


def _ground_term(rng: random.Random, sort: str):
    if sort == "nat":
        return Nat(rng.randint(0, 20))
    if rng.random() < 0.3:
        return Fn("opinion", (Const(rng.choice(["house", "ghosts"])), Const("positive")))
    return Const(rng.choice(["house", "ghosts", "velma", "fred"]))


def random_program(rng: random.Random) -> Program:
    preds: dict[str, PredDecl] = {}
    for name in rng.sample(_NAMES, rng.randint(1, len(_NAMES))):
        sorts = tuple(rng.choice(["nat", "thing", "who"]) for _ in range(rng.randint(0, 3)))
        preds[name] = PredDecl(name, sorts, rng.random() < 0.3)
    lin = [d for d in preds.values() if not d.permanent]
    perm = [d for d in preds.values() if d.permanent]
    rules = []
    for i in range(rng.randint(0, 5)):
        vars_by_sort = {s: [f"{s[0].upper()}{j}" for j in range(2)] + [f"{s[0].upper()}'"]
                        for s in ("nat", "thing", "who")}
        lpre, ppre, kpre = [], [], []
        for _ in range(rng.randint(1, 4)):
            d = rng.choice(list(preds.values()))
            a = Atom(d.name, tuple(_dsl_term(rng, s, vars_by_sort) for s in d.sorts))
            if d.permanent:
                (ppre if rng.random() < 0.5 else kpre).append(a)
            elif rng.random() < 0.3:
                ppre.append(a)
            else:
                lpre.append(a)
        r = Rule(f"rule_{i}", tuple(lpre), tuple(ppre), tuple(kpre))
        bound = r.variables()
        post = []
        if lin:
            for _ in range(rng.randint(1, 3)):
                d = rng.choice(lin)
                args = []
                for s in d.sorts:
                    t = _dsl_term(rng, s, vars_by_sort)
                    if not term_vars(t) <= bound:
                        t = _ground_term(rng, s)
                    args.append(t)
                post.append(Atom(d.name, tuple(args)))
        else:
            continue
        rules.append(Rule(r.name, r.linear_pre, r.persistent_pre, r.permanent_pre, tuple(post)))
    def ground_atoms(decls):
        if not decls:
            return ()
        picks = [rng.choice(decls) for _ in range(rng.randint(0, 3))]
        return tuple(Atom(d.name, tuple(_ground_term(rng, s) for s in d.sorts)) for d in picks)

    init, pinit = ground_atoms(lin), ground_atoms(perm)
    return Program(preds, tuple(rules), init, pinit)
