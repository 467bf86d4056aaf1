"""Rule-language front end: lexer, parser, validator and pretty-printer.

Program files (``.cvl``) hold predicate declarations, rules and an initial
context::

    pred turns nat.                 % linear predicate, one nat argument
    perm relevant topic topic.      % permanent predicate
    change_topic :
        turns (N + 1) * current_topic T * relevant T T'
        * $thinks C (opinion T' S)
      -o current_topic T' * turns N.
    init { turns 9, current_topic house }

``(N + k)`` and ``(s N)`` both denote successors; the printer emits ``(s N)``.
``%`` starts a comment.  Identifiers starting lowercase are constants and
predicates, uppercase ones are variables; primes are allowed (``C'``).
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterator, Literal

from .engine import Rule
from .terms import Atom, Const, Fn, Nat, Succ, Term, Var, succ, term_vars

Span = tuple[int, int, int, int]  # line, col, end_line, end_col (1-based)

KEYWORDS = {"pred", "perm", "init", "rule"}


@dataclass(frozen=True)
class Diagnostic:
    severity: Literal["error", "warning"]
    span: Span
    message: str
    code: str

    def __str__(self) -> str:
        line, col = self.span[0], self.span[1]
        return f"{line}:{col}: {self.severity}[{self.code}]: {self.message}"


class ProgramError(ValueError):
    def __init__(self, diagnostics: list[Diagnostic]):
        self.diagnostics = diagnostics
        super().__init__("\n".join(map(str, diagnostics)))


@dataclass(frozen=True)
class PredDecl:
    name: str
    sorts: tuple[str, ...]
    permanent: bool = False
    span: Span | None = field(default=None, compare=False, repr=False)

    @property
    def arity(self) -> int:
        return len(self.sorts)


@dataclass(frozen=True)
class Program:
    predicates: dict[str, PredDecl] = field(default_factory=dict)
    rules: tuple[Rule, ...] = ()
    init: tuple[Atom, ...] = ()
    permanent_init: tuple[Atom, ...] = ()

    @property
    def permanent_predicates(self) -> frozenset[str]:
        return frozenset(n for n, d in self.predicates.items() if d.permanent)

    def rule(self, name: str) -> Rule:
        for r in self.rules:
            if r.name == name:
                return r
        raise KeyError(name)


# ---------------------------------------------------------------- lexing

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>%[^\n]*)
  | (?P<lolli>-o(?![A-Za-z0-9_']))
  | (?P<ident>[a-z][A-Za-z0-9_']*)
  | (?P<var>[A-Z_][A-Za-z0-9_']*)
  | (?P<num>[0-9]+)
  | (?P<punct>[()*.:${},+])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    col: int

    @property
    def span(self) -> Span:
        return (self.line, self.col, self.line, self.col + len(self.text))

    def is_(self, text: str) -> bool:
        return self.kind in ("punct", "lolli", "ident") and self.text == text


def tokenize(source: str) -> tuple[list[Token], list[Diagnostic]]:
    tokens: list[Token] = []
    diags: list[Diagnostic] = []
    pos, line, line_start = 0, 1, 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        col = pos - line_start + 1
        if m is None:
            diags.append(Diagnostic("error", (line, col, line, col + 1),
                                    f"unexpected character {source[pos]!r}", "lex"))
            pos += 1
            continue
        kind = m.lastgroup
        text = m.group()
        if kind not in ("ws", "comment"):
            tokens.append(Token(kind, text, line, col))
        nl = text.count("\n")
        if nl:
            line += nl
            line_start = pos + text.rfind("\n") + 1
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens, diags


# ---------------------------------------------------------------- parsing

class _Syntax(Exception):
    def __init__(self, token: Token, message: str, code: str = "syntax"):
        self.diag = Diagnostic("error", token.span, message, code)


@dataclass
class _RawRule:
    name: str
    pres: list[tuple[Atom, bool]]
    posts: list[Atom]
    span: Span


@dataclass
class _Raw:
    decls: list[PredDecl] = field(default_factory=list)
    rules: list[_RawRule] = field(default_factory=list)
    init: list[tuple[Atom, Span]] = field(default_factory=list)


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.toks = tokens
        self.i = 0
        self.diags: list[Diagnostic] = []

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def advance(self) -> Token:
        t = self.toks[self.i]
        if t.kind != "eof":
            self.i += 1
        return t

    def expect(self, text: str) -> Token:
        if not self.tok.is_(text):
            raise _Syntax(self.tok, f"expected '{text}', found {self._show(self.tok)}")
        return self.advance()

    @staticmethod
    def _show(t: Token) -> str:
        return "end of input" if t.kind == "eof" else f"'{t.text}'"

    def ident(self, what: str) -> Token:
        if self.tok.kind != "ident":
            raise _Syntax(self.tok, f"expected {what}, found {self._show(self.tok)}")
        return self.advance()

    def _starts_item(self) -> bool:
        t = self.tok
        if t.kind != "ident" or self.i == 0 or self.toks[self.i - 1].line == t.line:
            return False
        if t.text in ("pred", "perm"):
            return self.peek().kind == "ident"
        return self.peek().is_(":") or (t.text == "init" and self.peek().is_("{"))

    def recover(self) -> None:
        """Skip to just past the next '.' or '}', or to the next line that
        opens a declaration or rule, whichever comes first."""
        while self.tok.kind != "eof" and not self._starts_item():
            t = self.advance()
            if t.is_(".") or t.is_("}"):
                return

    def program(self) -> _Raw:
        raw = _Raw()
        while self.tok.kind != "eof":
            start = self.i
            try:
                t = self.tok
                if t.kind == "ident" and t.text in ("pred", "perm") and not self.peek().is_(":"):
                    raw.decls.append(self.decl())
                elif t.kind == "ident" and t.text == "init" and self.peek().is_("{"):
                    raw.init.extend(self.init())
                else:
                    raw.rules.append(self.rule())
            except _Syntax as e:
                self.diags.append(e.diag)
                if self.i == start:
                    self.advance()
                self.recover()
        return raw

    def decl(self) -> PredDecl:
        kw = self.advance()
        name = self.ident("predicate name")
        sorts = []
        while self.tok.kind == "ident":
            sorts.append(self.advance().text)
        end = self.expect(".")
        return PredDecl(name.text, tuple(sorts), kw.text == "perm",
                        (kw.line, kw.col, end.line, end.col + 1))

    def init(self) -> list[tuple[Atom, Span]]:
        self.advance()
        self.expect("{")
        out = []
        if not self.tok.is_("}"):
            while True:
                t0 = self.tok
                a = self.atom()
                out.append((a, (t0.line, t0.col, self.tok.line, self.tok.col)))
                if self.tok.is_(","):
                    self.advance()
                    continue
                break
        self.expect("}")
        return out

    def rule(self) -> _RawRule:
        first = self.tok
        if self.tok.is_("rule") and self.peek().kind == "ident" and self.peek(2).is_(":"):
            self.advance()
        name = self.ident("rule name")
        if name.text in KEYWORDS:
            raise _Syntax(name, f"'{name.text}' is reserved and cannot name a rule", "reserved")
        self.expect(":")
        pres = [self.pre()]
        while self.tok.is_("*"):
            self.advance()
            pres.append(self.pre())
        if self.tok.kind != "lolli":
            raise _Syntax(self.tok, f"expected '-o', found {self._show(self.tok)}")
        self.advance()
        posts = [self.post()]
        while self.tok.is_("*"):
            self.advance()
            posts.append(self.post())
        end = self.expect(".")
        return _RawRule(name.text, pres, posts, (first.line, first.col, end.line, end.col + 1))

    def pre(self) -> tuple[Atom, bool]:
        dollar = False
        if self.tok.is_("$"):
            self.advance()
            dollar = True
        return self.atom(), dollar

    def post(self) -> Atom:
        if self.tok.is_("$"):
            self.diags.append(Diagnostic("error", self.tok.span,
                                         "'$' cannot be applied to a postcondition", "dollar-post"))
            self.advance()
        return self.atom()

    def atom(self) -> Atom:
        name = self.ident("predicate")
        args = []
        while self.tok.kind in ("ident", "var", "num") or self.tok.is_("("):
            if self.tok.kind == "ident" and self.peek().is_(":"):
                break
            args.append(self.term())
        return Atom(name.text, tuple(args))

    def term(self) -> Term:
        t = self.advance()
        if t.kind == "ident":
            return Const(t.text)
        if t.kind == "var":
            return Var(t.text)
        if t.kind == "num":
            return Nat(int(t.text))
        if not t.is_("("):
            raise _Syntax(t, f"expected a term, found {self._show(t)}")
        if self.tok.kind == "var" and self.peek().is_("+"):
            v = Var(self.advance().text)
            self.advance()
            if self.tok.kind != "num":
                raise _Syntax(self.tok, "expected a number after '+'")
            n = int(self.advance().text)
            self.expect(")")
            out: Term = v
            for _ in range(n):
                out = succ(out)
            return out
        head = self.ident("constructor")
        args = []
        while not self.tok.is_(")"):
            if self.tok.kind == "eof":
                raise _Syntax(self.tok, "unclosed '('")
            args.append(self.term())
        self.advance()
        if head.text == "s":
            if len(args) != 1:
                raise _Syntax(head, "successor takes exactly one argument", "nat-term")
            if not isinstance(args[0], (Nat, Succ, Var)):
                raise _Syntax(head, "successor of a non-natural term", "nat-term")
            return succ(args[0])
        if not args:
            return Const(head.text)
        return Fn(head.text, tuple(args))


def parse_atom(text: str) -> Atom:
    """Parse a single atom such as ``thinks velma (opinion house negative)``."""
    tokens, diags = tokenize(text)
    if diags:
        raise ProgramError(diags)
    p = _Parser(tokens)
    try:
        a = p.atom()
        if p.tok.kind != "eof":
            raise _Syntax(p.tok, f"trailing input {p._show(p.tok)}")
    except _Syntax as e:
        raise ProgramError([e.diag]) from None
    return a


def parse_term(text: str) -> Term:
    tokens, diags = tokenize(text)
    if diags:
        raise ProgramError(diags)
    p = _Parser(tokens)
    try:
        t = p.term()
        if p.tok.kind != "eof":
            raise _Syntax(p.tok, f"trailing input {p._show(p.tok)}")
    except _Syntax as e:
        raise ProgramError([e.diag]) from None
    return t


# ---------------------------------------------------------------- building

def _build(raw: _Raw) -> tuple[Program, list[Diagnostic]]:
    diags: list[Diagnostic] = []
    preds: dict[str, PredDecl] = {}
    for d in raw.decls:
        if d.name in preds:
            diags.append(Diagnostic("error", d.span, f"duplicate declaration of predicate '{d.name}'",
                                    "duplicate-pred"))
            continue
        preds[d.name] = d
    perm = {n for n, d in preds.items() if d.permanent}
    rules = []
    for rr in raw.rules:
        lin, pers, permref = [], [], []
        for a, dollar in rr.pres:
            if dollar:
                pers.append(a)
            elif a.pred in perm:
                permref.append(a)
            else:
                lin.append(a)
        rules.append(Rule(rr.name, tuple(lin), tuple(pers), tuple(permref), tuple(rr.posts), rr.span))
    init, pinit, spans = [], [], {}
    for a, sp in raw.init:
        (pinit if a.pred in perm else init).append(a)
        spans.setdefault(a, sp)
    prog = Program(preds, tuple(rules), tuple(init), tuple(pinit))
    return prog, diags + validate(prog, init_spans=spans)


def check_program(source: str) -> tuple[Program | None, list[Diagnostic]]:
    """Parse and validate; the program is ``None`` when any error is present."""
    tokens, diags = tokenize(source)
    p = _Parser(tokens)
    raw = p.program()
    diags += p.diags
    prog, more = _build(raw)
    diags += more
    diags.sort(key=lambda d: d.span)
    if any(d.severity == "error" for d in diags):
        return None, diags
    return prog, diags


def parse_program(source: str) -> Program:
    """Parse program text, raising :class:`ProgramError` on any error."""
    prog, diags = check_program(source)
    if prog is None:
        raise ProgramError([d for d in diags if d.severity == "error"])
    return prog


# ---------------------------------------------------------------- validation

_NOWHERE: Span = (0, 0, 0, 0)


def _arg_sort_problem(term: Term, sort: str) -> str | None:
    is_nat = isinstance(term, (Nat, Succ))
    if sort == "nat" and not (is_nat or isinstance(term, Var)):
        return f"expected a natural number, found '{term}'"
    if sort != "nat" and is_nat:
        return f"natural number '{term}' where sort '{sort}' is expected"
    return None


def _check_atom(a: Atom, preds: dict[str, PredDecl], span: Span, diags: list[Diagnostic],
                var_sorts: dict[str, str] | None, clashes: set[str] | None = None) -> None:
    d = preds.get(a.pred)
    if d is None:
        diags.append(Diagnostic("error", span, f"unknown predicate '{a.pred}'", "unknown-pred"))
        return
    if d.arity != len(a.args):
        diags.append(Diagnostic("error", span,
                                f"'{a.pred}' expects {d.arity} argument(s), got {len(a.args)}", "arity"))
        return
    for t, sort in zip(a.args, d.sorts):
        problem = _arg_sort_problem(t, sort)
        if problem:
            diags.append(Diagnostic("error", span, f"in '{a}': {problem}", "sort"))
        if var_sorts is None:
            continue
        if isinstance(t, Var):
            slots = [(t.name, sort)]
        elif isinstance(t, Succ):
            slots = [(v, "nat") for v in term_vars(t)]
        else:
            continue
        for v, s in slots:
            prev = var_sorts.setdefault(v, s)
            if prev != s and v not in clashes:
                clashes.add(v)
                diags.append(Diagnostic("error", span,
                                        f"variable {v} used at sorts '{prev}' and '{s}'", "var-sort"))


def validate(program: Program, init_spans: dict[Atom, Span] | None = None) -> list[Diagnostic]:
    """All arity, sort, binding and permanence problems in ``program``."""
    diags: list[Diagnostic] = []
    preds = program.predicates
    seen: set[str] = set()
    for r in program.rules:
        span = r.span or _NOWHERE
        if r.name in seen:
            diags.append(Diagnostic("error", span, f"duplicate rule name '{r.name}'", "duplicate-rule"))
        seen.add(r.name)
        if not (r.linear_pre or r.persistent_pre or r.permanent_pre):
            diags.append(Diagnostic("error", span, f"rule '{r.name}' has no preconditions", "empty-lhs"))
        var_sorts: dict[str, str] = {}
        clashes: set[str] = set()
        for a in r.preconditions + r.post:
            _check_atom(a, preds, span, diags, var_sorts, clashes)
        lhs = r.variables()
        for a in r.post:
            for v in sorted(a.variables() - lhs):
                diags.append(Diagnostic("error", span, f"variable {v} unbound on left-hand side", "unbound-var"))
            d = preds.get(a.pred)
            if d is not None and d.permanent:
                diags.append(Diagnostic("error", span,
                                        f"permanent predicate '{a.pred}' cannot be produced", "perm-post"))
        for a in r.linear_pre:
            d = preds.get(a.pred)
            if d is not None and d.permanent:
                diags.append(Diagnostic("error", span,
                                        f"permanent predicate '{a.pred}' listed as consumed", "perm-linear"))
        for a in r.permanent_pre:
            diags.append(Diagnostic("warning", span,
                                    f"permanent predicate matched linearly; will be treated as read-only: {a}",
                                    "perm-read"))
    spans = init_spans or {}
    for group, want_perm in ((program.init, False), (program.permanent_init, True)):
        for a in group:
            span = spans.get(a, _NOWHERE)
            if not a.is_ground():
                diags.append(Diagnostic("error", span, f"initial context must be ground: {a}", "init-ground"))
            _check_atom(a, preds, span, diags, None)
            d = preds.get(a.pred)
            if d is not None and d.permanent != want_perm:
                diags.append(Diagnostic("error", span, f"'{a.pred}' is in the wrong initial context",
                                        "init-perm"))
    return diags


# ---------------------------------------------------------------- printing

LINE_WIDTH = 72


def _rule_text(r: Rule) -> str:
    pres = [str(a) for a in r.linear_pre]
    pres += ["$" + str(a) for a in r.persistent_pre]
    pres += [str(a) for a in r.permanent_pre]
    lhs = " * ".join(pres)
    rhs = " * ".join(map(str, r.post))
    one = f"{r.name} : {lhs} -o {rhs}."
    if len(one) <= LINE_WIDTH:
        return one
    return f"{r.name} :\n    {_wrap(pres)}\n  -o\n    {_wrap([str(a) for a in r.post])}."


def _wrap(parts: list[str]) -> str:
    lines, cur = [], ""
    for p in parts:
        if cur and len(cur) + 3 + len(p) > LINE_WIDTH - 4:
            lines.append(cur)
            cur = "* " + p
        else:
            cur = p if not cur else f"{cur} * {p}"
    lines.append(cur)
    return "\n    ".join(lines)


def _iter_sections(program: Program) -> Iterator[str]:
    decls = [f"{'perm' if d.permanent else 'pred'} {' '.join([d.name, *d.sorts])}."
             for d in program.predicates.values()]
    if decls:
        yield "\n".join(decls)
    for r in program.rules:
        yield _rule_text(r)
    atoms = program.init + program.permanent_init
    if atoms:
        yield "init {\n" + ",\n".join("  " + str(a) for a in atoms) + "\n}"


def pretty_print(program: Program) -> str:
    return "\n\n".join(_iter_sections(program)) + "\n"
