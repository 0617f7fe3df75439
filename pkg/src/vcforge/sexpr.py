"""S-expression concrete syntax for sorts, terms and contexts.

Grammar (terms)::

    t ::= <int> | true | false | True | False | () | <name>
        | (lam (x S) t) | (forall (x S) t) | (forall ((x S) ...) t)
        | (and t t ...) | (or t t ...) | (=> t t ...) | (<=> t t) | (not t)
        | (= t t) | (squash t) | (with-tactic t "name")
        | (+ t t ...) | (- t t) | (- t) | (* t t ...) | (div t t) | (mod t t)
        | (< t t) | (<= t t) | (> t t) | (>= t t)
        | (? <id> S) | (t t ...)
    S ::= Unit | Bool | Int | Prop | <declared sort> | (-> S S ...)

``show`` prints the canonical form, and ``parse_term(show(t)) == t`` under the
same signature.  ``show_infix`` prints the F*-like infix notation used in
reports.
"""

from __future__ import annotations

import re
from typing import Iterable, Mapping

from vcforge.terms import (
    BOOL,
    FALSE,
    INT,
    PROP,
    TRUE,
    UNIT,
    UNIT_VALUE,
    And,
    App,
    Arith,
    Arrow,
    BVar,
    Binder,
    BoolLit,
    BoolSort,
    Context,
    Eq,
    FalseP,
    Forall,
    FVar,
    Hyp,
    Iff,
    Implies,
    IntLit,
    IntSort,
    Lam,
    Metavar,
    Or,
    PropSort,
    Sort,
    Squash,
    Term,
    TrueP,
    TypeCheckError,
    Uninterp,
    UnitLit,
    UnitSort,
    WithTactic,
    free_vars,
    infer,
    unapply,
)


class ParseError(Exception):
    def __init__(self, message: str, pos: tuple[int, int] | None = None):
        self.message = message
        self.pos = pos
        loc = f"{pos[0]}:{pos[1]}: " if pos else ""
        super().__init__(loc + message)


# --------------------------------------------------------------------------
# Reader


class SList(list):
    pos: tuple[int, int] | None = None


class Sym(str):
    pos: tuple[int, int] | None = None


class Str(str):
    pos: tuple[int, int] | None = None


class Num(int):
    pos: tuple[int, int] | None = None


_TOKEN = re.compile(r'\s+|;[^\n]*|(\()|(\))|"((?:[^"\\]|\\.)*)"|([^\s()";]+)')
_INT = re.compile(r"-?\d+$")


def _positions(text: str):
    line_starts = [0] + [m.end() for m in re.finditer("\n", text)]

    def at(offset):
        import bisect

        line = bisect.bisect_right(line_starts, offset) - 1
        return line + 1, offset - line_starts[line] + 1

    return at


def read_all(text: str) -> list:
    """Read every s-expression in ``text``."""
    at = _positions(text)
    stack: list[SList] = [SList()]
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", at(pos))
        if m.group(1):
            lst = SList()
            lst.pos = at(m.start())
            stack.append(lst)
        elif m.group(2):
            if len(stack) == 1:
                raise ParseError("unbalanced ')'", at(m.start()))
            done = stack.pop()
            stack[-1].append(done)
        elif m.group(3) is not None:
            s = Str(bytes(m.group(3), "utf-8").decode("unicode_escape"))
            s.pos = at(m.start())
            stack[-1].append(s)
        elif m.group(4):
            tok = m.group(4)
            if _INT.match(tok):
                atom = Num(int(tok))
            else:
                atom = Sym(tok)
            atom.pos = at(m.start())
            stack[-1].append(atom)
        pos = m.end()
    if len(stack) != 1:
        raise ParseError("unbalanced '('", stack[-1].pos)
    return list(stack[0])


def read_one(text: str):
    items = read_all(text)
    if len(items) != 1:
        raise ParseError(f"expected one s-expression, found {len(items)}")
    return items[0]


def pos_of(x) -> tuple[int, int] | None:
    return getattr(x, "pos", None)


def quote(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


# --------------------------------------------------------------------------
# Sorts

_BASE_SORTS = {"Unit": UNIT, "Bool": BOOL, "Int": INT, "Prop": PROP}


def parse_sort(x, sorts: Mapping[str, Uninterp] | None = None) -> Sort:
    sorts = sorts or {}
    if isinstance(x, Sym):
        if x in _BASE_SORTS:
            return _BASE_SORTS[x]
        if x in sorts:
            return sorts[x]
        raise ParseError(f"unknown sort {x}", pos_of(x))
    if isinstance(x, SList) and len(x) >= 3 and x[0] == "->":
        parts = [parse_sort(p, sorts) for p in x[1:]]
        result = parts[-1]
        for s in reversed(parts[:-1]):
            result = Arrow(s, result)
        return result
    raise ParseError(f"malformed sort {show_sexp(x)}", pos_of(x))


def sorts_in(t: Term) -> set[Uninterp]:
    from vcforge.terms import subterms

    found = set()

    def walk(s):
        if isinstance(s, Uninterp):
            found.add(s)
        elif isinstance(s, Arrow):
            walk(s.dom)
            walk(s.cod)

    for u in subterms(t):
        if isinstance(u, (Lam, Forall, Metavar)):
            walk(u.sort)
        elif isinstance(u, Eq) and u.sort is not None:
            walk(u.sort)
    return found


# --------------------------------------------------------------------------
# Term parser

KEYWORDS = {
    "lam", "forall", "and", "or", "=>", "<=>", "not", "=", "squash", "with-tactic",
    "+", "-", "*", "div", "mod", "<", "<=", ">", ">=", "?", "true", "false", "True", "False",
}


class TermParser:
    """Parses terms against a signature.

    ``ctx`` supplies the free names (and their sorts, used to infer equality
    sorts), ``sorts`` the declared uninterpreted sorts and ``defs`` names that
    are expanded in place.
    """

    def __init__(self, ctx: Context | None = None, sorts: Mapping[str, Uninterp] | None = None,
                 defs: Mapping[str, Term] | None = None, strict: bool = True):
        self.ctx = ctx or Context()
        self.sorts = dict(sorts or {})
        self.defs = dict(defs or {})
        self.strict = strict

    def sort(self, x) -> Sort:
        return parse_sort(x, self.sorts)

    def parse(self, x, scope: tuple[tuple[str, Sort], ...] = ()) -> Term:
        return self._term(x, scope)

    def _infer(self, t, scope, x):
        try:
            return infer(self.ctx, t, tuple(s for _, s in scope))
        except TypeCheckError as e:
            raise ParseError(f"cannot infer sort: {e}", pos_of(x)) from None

    def _binders(self, spec, where):
        if isinstance(spec, SList) and len(spec) == 2 and isinstance(spec[0], Sym):
            return [(str(spec[0]), self.sort(spec[1]))]
        if isinstance(spec, SList) and spec and all(isinstance(b, SList) and len(b) == 2 for b in spec):
            return [(str(b[0]), self.sort(b[1])) for b in spec]
        raise ParseError(f"malformed binder in {where}", pos_of(spec))

    def _term(self, x, scope) -> Term:
        if isinstance(x, Num):
            return IntLit(int(x))
        if isinstance(x, Str):
            raise ParseError("unexpected string", pos_of(x))
        if isinstance(x, Sym):
            return self._symbol(x, scope)
        assert isinstance(x, SList)
        if not x:
            return UNIT_VALUE
        head = x[0]
        args = x[1:]
        if isinstance(head, Sym) and head in KEYWORDS:
            return self._form(str(head), args, x, scope)
        if len(args) == 0:
            raise ParseError("empty application", pos_of(x))
        fn = self._term(head, scope)
        for a in args:
            fn = App(fn, self._term(a, scope))
        return fn

    def _symbol(self, x, scope) -> Term:
        match str(x):
            case "true":
                return BoolLit(True)
            case "false":
                return BoolLit(False)
            case "True":
                return TRUE
            case "False":
                return FALSE
        for depth, (name, _) in enumerate(reversed(scope)):
            if name == x:
                return BVar(depth)
        if x in self.defs:
            return self.defs[x]
        if self.strict and self.ctx.lookup(x) is None:
            raise ParseError(f"unbound variable {x}", pos_of(x))
        return FVar(str(x))

    def _arity(self, name, args, n, x):
        if len(args) != n:
            raise ParseError(f"{name} expects {n} argument(s), got {len(args)}", pos_of(x))

    def _form(self, name, args, x, scope) -> Term:
        t = lambda a: self._term(a, scope)  # noqa: E731
        match name:
            case "lam" | "forall":
                self._arity(name, args, 2, x)
                binders = self._binders(args[0], name)
                inner = scope + tuple(binders)
                body = self._term(args[1], inner)
                node = Lam if name == "lam" else Forall
                for bname, bsort in reversed(binders):
                    body = node(bsort, body, bname)
                return body
            case "and" | "or":
                if len(args) < 2:
                    raise ParseError(f"{name} expects at least two arguments", pos_of(x))
                node = And if name == "and" else Or
                parts = [t(a) for a in args]
                result = parts[-1]
                for p in reversed(parts[:-1]):
                    result = node(p, result)
                return result
            case "=>":
                if len(args) < 2:
                    raise ParseError("=> expects at least two arguments", pos_of(x))
                parts = [t(a) for a in args]
                result = parts[-1]
                for p in reversed(parts[:-1]):
                    result = Implies(p, result)
                return result
            case "<=>":
                self._arity(name, args, 2, x)
                return Iff(t(args[0]), t(args[1]))
            case "not":
                self._arity(name, args, 1, x)
                return Implies(t(args[0]), FALSE)
            case "=":
                self._arity(name, args, 2, x)
                lhs, rhs = t(args[0]), t(args[1])
                return Eq(self._infer(lhs, scope, args[0]), lhs, rhs)
            case "squash":
                self._arity(name, args, 1, x)
                return Squash(t(args[0]))
            case "with-tactic":
                self._arity(name, args, 2, x)
                if not isinstance(args[1], (Str, Sym)):
                    raise ParseError("tactic name must be a string", pos_of(args[1]))
                return WithTactic(t(args[0]), str(args[1]))
            case "+" | "*":
                if len(args) < 2:
                    raise ParseError(f"{name} expects at least two arguments", pos_of(x))
                parts = [t(a) for a in args]
                result = parts[0]
                for p in parts[1:]:
                    result = Arith(name, (result, p))
                return result
            case "-":
                if len(args) == 1:
                    return Arith("-", (IntLit(0), t(args[0])))
                self._arity(name, args, 2, x)
                return Arith("-", (t(args[0]), t(args[1])))
            case "div" | "mod" | "<" | "<=":
                self._arity(name, args, 2, x)
                return Arith(name, (t(args[0]), t(args[1])))
            case ">" | ">=":
                self._arity(name, args, 2, x)
                return Arith("<" if name == ">" else "<=", (t(args[1]), t(args[0])))
            case "?":
                self._arity(name, args, 2, x)
                return Metavar(int(args[0]), self.sort(args[1]))
        raise ParseError(f"'{name}' cannot be used here", pos_of(x))


def parse_term(text_or_sexp, ctx: Context | None = None, sorts=None, defs=None, strict=True) -> Term:
    x = read_one(text_or_sexp) if isinstance(text_or_sexp, str) and not isinstance(text_or_sexp, (Sym, Str)) else text_or_sexp
    if ctx is not None and sorts is None:
        sorts = signature_sorts(ctx)
    return TermParser(ctx, sorts, defs, strict).parse(x)


def signature_sorts(ctx: Context, extra: Iterable[Term] = ()) -> dict[str, Uninterp]:
    """Uninterpreted sorts mentioned by a context."""
    found: dict[str, Uninterp] = {}

    def walk(s):
        if isinstance(s, Uninterp):
            found.setdefault(s.name, s)
        elif isinstance(s, Arrow):
            walk(s.dom)
            walk(s.cod)

    for e in ctx.entries:
        if isinstance(e, Binder):
            walk(e.sort)
        else:
            for s in sorts_in(e.prop):
                walk(s)
    for t in extra:
        for s in sorts_in(t):
            walk(s)
    return found


# --------------------------------------------------------------------------
# Printer


def show_sort(s: Sort) -> str:
    return str(s)


def _binder_name(hint: str, taken: set[str]) -> str:
    base = hint if hint and hint not in KEYWORDS and hint != "_" else "x"
    if base not in taken:
        return base
    i = 1
    while f"{base}{i}" in taken:
        i += 1
    return f"{base}{i}"


def show(t: Term, names: tuple[str, ...] = ()) -> str:
    """Canonical s-expression of a term.  ``names`` names loose indices
    (innermost last)."""
    taken = free_vars(t) | set(names)
    return _show(t, list(names), taken)


def _show(t: Term, scope: list[str], taken: set[str]) -> str:
    match t:
        case BVar(i):
            if i < len(scope):
                return scope[-1 - i]
            return f"#{i}"
        case FVar(n):
            return n
        case UnitLit():
            return "()"
        case BoolLit(v):
            return "true" if v else "false"
        case IntLit(v):
            return str(v)
        case TrueP():
            return "True"
        case FalseP():
            return "False"
        case Lam(s, body, hint) | Forall(s, body, hint):
            kw = "lam" if isinstance(t, Lam) else "forall"
            name = _binder_name(hint, taken)
            inner = _show(body, scope + [name], taken | {name})
            return f"({kw} ({name} {show_sort(s)}) {inner})"
        case App():
            head, args = unapply(t)
            return "(" + " ".join(_show(u, scope, taken) for u in [head] + args) + ")"
        case And(l, r) | Or(l, r) | Implies(l, r) | Iff(l, r):
            op = {And: "and", Or: "or", Implies: "=>", Iff: "<=>"}[type(t)]
            return f"({op} {_show(l, scope, taken)} {_show(r, scope, taken)})"
        case Eq(_, l, r):
            return f"(= {_show(l, scope, taken)} {_show(r, scope, taken)})"
        case Squash(p):
            return f"(squash {_show(p, scope, taken)})"
        case WithTactic(p, n):
            return f"(with-tactic {_show(p, scope, taken)} {quote(n)})"
        case Arith(op, (a, b)):
            return f"({op} {_show(a, scope, taken)} {_show(b, scope, taken)})"
        case Metavar(i, s, pending):
            suffix = "" if not pending else f" ;{len(pending)} pending"
            return f"(? {i} {show_sort(s)}{suffix})"
    raise TypeError(f"cannot print {t!r}")


def show_entry(e: Binder | Hyp) -> str:
    if isinstance(e, Binder):
        return f"(var {e.name} {show_sort(e.sort)})"
    return f"(hyp {e.name} {show(e.prop)})"


def show_context(ctx: Context) -> str:
    return "(" + " ".join(show_entry(e) for e in ctx.entries) + ")"


def show_sexp(x) -> str:
    """Print a raw s-expression as read by ``read_all``."""
    if isinstance(x, list):
        return "(" + " ".join(show_sexp(i) for i in x) + ")"
    if isinstance(x, Str):
        return quote(x)
    return str(x)


# --------------------------------------------------------------------------
# Infix printer

_PREC = {Iff: 1, Implies: 2, Or: 3, And: 4}
_INFIX = {Iff: "<==>", Implies: "==>", Or: "\\/", And: "/\\"}
_ARITH_INFIX = {"+": ("+", 6), "-": ("-", 6), "*": ("*", 7), "div": ("/", 7), "mod": ("%", 7),
                "<": ("<", 5), "<=": ("<=", 5)}


def infix_sort(s: Sort) -> str:
    match s:
        case UnitSort():
            return "unit"
        case BoolSort():
            return "bool"
        case IntSort():
            return "int"
        case PropSort():
            return "prop"
        case Uninterp(n):
            return n
        case Arrow(d, c):
            dom = infix_sort(d)
            if isinstance(d, Arrow):
                dom = f"({dom})"
            return f"{dom} -> {infix_sort(c)}"
    return str(s)


def show_infix(t: Term, names: tuple[str, ...] = ()) -> str:
    taken = free_vars(t) | set(names)
    return _infix(t, list(names), taken, 0, True)


def _infix(t, scope, taken, ctx_prec, root) -> str:
    def sub(u, p):
        return _infix(u, scope, taken, p, False)

    def wrap(s, prec):
        return f"({s})" if prec < ctx_prec else s

    match t:
        case BVar(i):
            return scope[-1 - i] if i < len(scope) else f"#{i}"
        case FVar(n):
            return n
        case UnitLit():
            return "()"
        case BoolLit(v):
            return "true" if v else "false"
        case IntLit(v):
            return f"({v})" if v < 0 and not root else str(v)
        case TrueP():
            return "True"
        case FalseP():
            return "False"
        case Lam(s, body, hint) | Forall(s, body, hint):
            name = _binder_name(hint, taken)
            inner = _infix(body, scope + [name], taken | {name}, 0, True)
            if isinstance(t, Lam):
                text = f"fun ({name}:{infix_sort(s)}) -> {inner}"
            else:
                text = f"forall ({name}:{infix_sort(s)}). {inner}"
            return text if root else f"({text})"
        case And(l, r) | Or(l, r) | Implies(l, r) | Iff(l, r):
            p = _PREC[type(t)]
            # ==> associates to the right; everything else is parenthesized
            lp, rp = (p + 1, p) if isinstance(t, Implies) else (p + 1, p + 1)
            return wrap(f"{sub(l, lp)} {_INFIX[type(t)]} {sub(r, rp)}", p)
        case WithTactic(p, n):
            text = f"{sub(p, 6)} `with_tactic` {n}"
            return text if root else f"({text})"
        case Eq(_, l, r):
            return wrap(f"{sub(l, 6)} == {sub(r, 6)}", 5)
        case Arith(op, (a, b)):
            sym, p = _ARITH_INFIX[op]
            rp = p + 1
            lp = p if p >= 6 else p + 1
            return wrap(f"{sub(a, lp)} {sym} {sub(b, rp)}", p)
        case Squash(p):
            return wrap(f"squash {sub(p, 9)}", 8)
        case App():
            head, args = unapply(t)
            return wrap(" ".join(sub(u, 9) for u in [head] + args), 8)
        case Metavar(i):
            return f"?{i}"
    raise TypeError(f"cannot print {t!r}")


def show_context_infix(ctx: Context) -> str:
    parts = []
    for e in ctx.entries:
        if isinstance(e, Binder):
            parts.append(f"{e.name}:{infix_sort(e.sort)}")
        else:
            parts.append(f"{e.name}:{show_infix(e.prop)}")
    return ", ".join(parts)
