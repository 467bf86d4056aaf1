"""First-order terms and atoms for the rewriting engine.

Ground naturals are stored as ``Nat(value)``; a successor applied to a
non-ground term is kept as ``Succ``.  ``succ()`` normalises, so
``succ(Nat(3)) == Nat(4)`` and every ground natural has exactly one form.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Union


@dataclass(frozen=True, slots=True)
class Const:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True, slots=True)
class Var:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True, slots=True)
class Nat:
    value: int

    def __post_init__(self) -> None:
        if self.value < 0:
            raise ValueError("naturals are non-negative")

    def __str__(self) -> str:
        return str(self.value)


@dataclass(frozen=True, slots=True)
class Succ:
    arg: "Term"

    def __str__(self) -> str:
        return f"(s {self.arg})"


@dataclass(frozen=True, slots=True)
class Fn:
    """Compound term such as ``(opinion house positive)``."""

    name: str
    args: tuple["Term", ...]

    def __str__(self) -> str:
        if not self.args:
            return self.name
        return "(" + " ".join([self.name, *map(str, self.args)]) + ")"


Term = Union[Const, Var, Nat, Succ, Fn]
Binding = Mapping[str, Term]


def succ(term: Term) -> Term:
    if isinstance(term, Nat):
        return Nat(term.value + 1)
    return Succ(term)


@dataclass(frozen=True, slots=True)
class Atom:
    pred: str
    args: tuple[Term, ...] = ()

    def __str__(self) -> str:
        return " ".join([self.pred, *map(str, self.args)])

    def is_ground(self) -> bool:
        return all(is_ground(a) for a in self.args)

    def variables(self) -> set[str]:
        out: set[str] = set()
        for a in self.args:
            _collect_vars(a, out)
        return out


def atom(pred: str, *args: Term | str | int) -> Atom:
    """Convenience constructor: strings become constants (or variables when
    capitalised), ints become naturals."""
    return Atom(pred, tuple(_coerce(a) for a in args))


def _coerce(x: Term | str | int) -> Term:
    if isinstance(x, bool):
        raise TypeError("bool is not a term")
    if isinstance(x, int):
        return Nat(x)
    if isinstance(x, str):
        return Var(x) if x[:1].isupper() else Const(x)
    return x


def is_ground(term: Term) -> bool:
    if isinstance(term, (Const, Nat)):
        return True
    if isinstance(term, Var):
        return False
    if isinstance(term, Succ):
        return False  # a ground successor is always normalised to Nat
    return all(is_ground(a) for a in term.args)


def _collect_vars(term: Term, out: set[str]) -> None:
    if isinstance(term, Var):
        out.add(term.name)
    elif isinstance(term, Succ):
        _collect_vars(term.arg, out)
    elif isinstance(term, Fn):
        for a in term.args:
            _collect_vars(a, out)


def term_vars(term: Term) -> set[str]:
    out: set[str] = set()
    _collect_vars(term, out)
    return out


def subterms(term: Term):
    """Yield every ground subterm of a ground term (including itself)."""
    yield term
    if isinstance(term, Fn):
        for a in term.args:
            yield from subterms(a)


def substitute(term: Term, binding: Binding) -> Term:
    if isinstance(term, Var):
        return binding.get(term.name, term)
    if isinstance(term, Succ):
        return succ(substitute(term.arg, binding))
    if isinstance(term, Fn):
        return Fn(term.name, tuple(substitute(a, binding) for a in term.args))
    return term


def instantiate(pattern: Atom, binding: Binding) -> Atom:
    return Atom(pattern.pred, tuple(substitute(a, binding) for a in pattern.args))


def _match(pat: Term, ground: Term, b: dict[str, Term]) -> bool:
    if isinstance(pat, Var):
        bound = b.get(pat.name)
        if bound is None:
            b[pat.name] = ground
            return True
        return bound == ground
    if isinstance(pat, Succ):
        if not isinstance(ground, Nat) or ground.value == 0:
            return False
        return _match(pat.arg, Nat(ground.value - 1), b)
    if isinstance(pat, Fn):
        if not isinstance(ground, Fn) or ground.name != pat.name or len(ground.args) != len(pat.args):
            return False
        return all(_match(p, g, b) for p, g in zip(pat.args, ground.args))
    return pat == ground


def unify(pattern: Atom, ground: Atom, partial: Binding | None = None) -> dict[str, Term] | None:
    """One-way match of ``pattern`` against the ground atom ``ground``.

    Returns the minimal extension of ``partial`` that instantiates the
    pattern to ``ground``, or ``None`` when no such extension exists.

    >>> unify(atom("turns", Succ(Var("N"))), atom("turns", 4))
    {'N': Nat(value=3)}
    """
    if pattern.pred != ground.pred or len(pattern.args) != len(ground.args):
        return None
    b = dict(partial) if partial else {}
    for p, g in zip(pattern.args, ground.args):
        if not _match(p, g, b):
            return None
    return b


def term_sort_key(term: Term) -> tuple:
    """Total order on ground terms: naturals numerically, then constants,
    then compounds."""
    if isinstance(term, Nat):
        return (0, term.value)
    if isinstance(term, Const):
        return (1, term.name)
    if isinstance(term, Fn):
        return (2, term.name, tuple(term_sort_key(a) for a in term.args))
    return (3, str(term))


def binding_key(binding: Binding) -> tuple:
    return tuple((name, term_sort_key(binding[name])) for name in sorted(binding))
