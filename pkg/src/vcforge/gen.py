"""Seeded random generators for the property suites and the tests."""

from __future__ import annotations

import random
from dataclasses import dataclass

from vcforge import interop as io
from vcforge.terms import (
    BOOL,
    FALSE,
    INT,
    PROP,
    TRUE,
    And,
    Arith,
    Arrow,
    BoolLit,
    Context,
    Eq,
    Forall,
    FVar,
    Iff,
    Implies,
    IntLit,
    Lam,
    Or,
    Sort,
    Term,
    Uninterp,
    WithTactic,
    abstract,
    apply,
    arrows,
    has_marker,
)

U = Uninterp("U", 3)
TACTIC_NAMES = ("tau1", "tau2", "tau3")


def theorem_signature() -> Context:
    """Symbols shared by the split suites: 2 * 2 * 8 * 3 = 96 interpretations."""
    return Context().bind("A", PROP).bind("B", PROP).bind("P", Arrow(U, PROP)).bind("c", U)


THEOREM_SYMBOLS = ("A", "B", "P", "c")


class _Scope:
    """Named variables in scope while generating under binders."""

    def __init__(self, rng: random.Random):
        self.rng = rng
        self.vars: list[tuple[str, Sort]] = []
        self.counter = 0

    def fresh(self) -> str:
        self.counter += 1
        return f"v{self.counter}"

    def of(self, sort: Sort) -> list[str]:
        return [n for n, s in self.vars if s == sort]


def _atom(sc: _Scope) -> Term:
    rng = sc.rng
    us = ["c"] + sc.of(U)
    bs = sc.of(BOOL)
    choices = ["A", "B", "P", "P", "eqU", "true", "false"]
    if bs:
        choices += ["bool", "bool"]
    match rng.choice(choices):
        case "A":
            return FVar("A")
        case "B":
            return FVar("B")
        case "P":
            return apply(FVar("P"), FVar(rng.choice(us)))
        case "eqU":
            return Eq(U, FVar(rng.choice(us)), FVar(rng.choice(us)))
        case "true":
            return TRUE
        case "false":
            return FALSE
        case _:
            return Eq(BOOL, FVar(rng.choice(bs)), BoolLit(rng.random() < 0.5))


def _forall(sc: _Scope, body_fn) -> Term:
    sort = U if sc.rng.random() < 0.7 else BOOL
    x = sc.fresh()
    sc.vars.append((x, sort))
    body = body_fn()
    sc.vars.pop()
    return Forall(sort, abstract(body, x), x)


def marked_formula(rng: random.Random, depth: int = 5, marker_rate: float = 0.3, scope: _Scope | None = None) -> Term:
    """A random proposition over the theorem signature with markers in
    arbitrary positions."""
    sc = scope or _Scope(rng)

    def go(d):
        if d <= 0 or rng.random() < 0.2:
            t = _atom(sc)
        else:
            kind = rng.choice(["and", "or", "implies", "implies", "iff", "forall", "forall"])
            if kind == "forall":
                t = _forall(sc, lambda: go(d - 1))
            else:
                node = {"and": And, "or": Or, "implies": Implies, "iff": Iff}[kind]
                t = node(go(d - 1), go(d - 1))
        if rng.random() < marker_rate:
            t = WithTactic(t, rng.choice(TACTIC_NAMES))
        return t

    return go(depth)


def marked_vc(rng: random.Random, depth: int = 5) -> Term:
    """Like ``marked_formula`` but with at least one marker."""
    while True:
        t = marked_formula(rng, depth)
        if has_marker(t):
            return t


def plain_formula(rng: random.Random, depth: int, scope: _Scope) -> Term:
    return marked_formula(rng, depth, marker_rate=0.0, scope=scope)


def p_shaped_vc(rng: random.Random, depth: int = 5) -> Term:
    """A single marker plugged into a context from the grammar
    ``. | phi /\\ P | P /\\ phi | forall x. P | phi ==> P``."""
    sc = _Scope(rng)

    def go(d):
        if d <= 0 or rng.random() < 0.15:
            return WithTactic(plain_formula(rng, 2, sc), rng.choice(TACTIC_NAMES))
        match rng.choice(["left", "right", "forall", "forall", "implies"]):
            case "left":
                return And(plain_formula(rng, 2, sc), go(d - 1))
            case "right":
                inner = go(d - 1)
                return And(inner, plain_formula(rng, 2, sc))
            case "implies":
                return Implies(plain_formula(rng, 2, sc), go(d - 1))
        return _forall(sc, lambda: go(d - 1))

    return go(depth)


# --------------------------------------------------------------------------
# Canonicalizer inputs

BIG_LITERALS = (2**44, 2**88, -(2**44), 2**44 - 1, 2**64 + 7)
RING_VARS = ("a", "b", "c", "d", "e")


def monoid_tree(rng: random.Random, depth: int, mult, unit: Term, atoms: tuple[Term, ...]) -> Term:
    def go(d):
        if d <= 0 or rng.random() < 0.25:
            return unit if rng.random() < 0.15 else rng.choice(atoms)
        a, b = go(d - 1), go(d - 1)
        return Arith(mult, (a, b)) if isinstance(mult, str) else apply(mult, a, b)

    return go(depth)


def ring_term(rng: random.Random, depth: int = 5, names=RING_VARS) -> Term:
    """Integer terms over + - * with small and large literals and div/mod by
    nonzero literals (opaque atoms to the canonicalizer)."""

    def leaf():
        r = rng.random()
        if r < 0.55:
            return FVar(rng.choice(names))
        if r < 0.9:
            return IntLit(rng.randint(-6, 6))
        return IntLit(rng.choice(BIG_LITERALS))

    def go(d):
        if d <= 0 or rng.random() < 0.2:
            return leaf()
        op = rng.choice(["+", "+", "-", "*", "*", "divmod"])
        if op == "divmod":
            k = rng.choice([2, 3, 4, 7, -5, 2**44])
            return Arith(rng.choice(["div", "mod"]), (go(d - 1), IntLit(k)))
        return Arith(op, (go(d - 1), go(d - 1)))

    return go(depth)


def int_assignment(rng: random.Random, names=RING_VARS, bound: int = 10**6) -> dict[str, int]:
    return {n: rng.randint(-bound, bound) for n in names}


# --------------------------------------------------------------------------
# Engine goals


def audit_env() -> Context:
    return (
        Context()
        .bind("x", INT)
        .bind("y", INT)
        .bind("b", BOOL)
        .bind("P", Arrow(INT, PROP))
        .bind("Q", PROP)
        .assume("h", apply(FVar("P"), IntLit(5)))
        .assume("hq", FVar("Q"))
    )


AUDIT_SORTS = (INT, BOOL, Arrow(INT, INT), arrows(INT, INT, INT), Arrow(BOOL, INT))


def int_expr(rng: random.Random, ints: list[Term], depth: int = 2) -> Term:
    if depth <= 0 or rng.random() < 0.4:
        return rng.choice(ints) if ints and rng.random() < 0.7 else IntLit(rng.randint(-3, 5))
    return Arith(rng.choice("+-*"), (int_expr(rng, ints, depth - 1), int_expr(rng, ints, depth - 1)))


def goal_prop(rng: random.Random, depth: int = 3, ints: list[Term] | None = None) -> Term:
    """Irrelevant goals for the audit suite; a mix of provable and not."""
    ints = [FVar("x"), FVar("y")] if ints is None else ints

    def go(d, scope):
        if d <= 0 or rng.random() < 0.25:
            match rng.choice(["true", "Q", "P", "refl", "eq", "lt"]):
                case "true":
                    return TRUE
                case "Q":
                    return FVar("Q")
                case "P":
                    return apply(FVar("P"), int_expr(rng, scope, 1))
                case "refl":
                    e = int_expr(rng, scope, 1)
                    return Eq(INT, e, e)
                case "eq":
                    return Eq(INT, int_expr(rng, scope, 1), int_expr(rng, scope, 1))
            return Arith("<", (int_expr(rng, scope, 1), int_expr(rng, scope, 1)))
        match rng.choice(["and", "and", "implies", "forall"]):
            case "and":
                return And(go(d - 1, scope), go(d - 1, scope))
            case "implies":
                return Implies(go(d - 1, scope), go(d - 1, scope))
        name = f"z{d}"
        body = go(d - 1, scope + [FVar(name)])
        return Forall(INT, abstract(body, name), name)

    return go(depth, list(ints))


def value_of(rng: random.Random, ctx: Context, sort: Sort, depth: int = 2) -> Term:
    """A random term of ``sort`` well-typed in ``ctx``."""
    vars_ = [FVar(b.name) for b in ctx.binders if b.sort == sort]
    match sort:
        case Arrow(dom, cod):
            if vars_ and rng.random() < 0.3:
                return rng.choice(vars_)
            name = ctx.fresh("w")
            body = value_of(rng, ctx.bind(name, dom), cod, depth)
            return Lam(dom, abstract(body, name), name)
    if sort == INT:
        ints = [FVar(b.name) for b in ctx.binders if b.sort == INT]
        return int_expr(rng, ints, depth)
    if sort == BOOL:
        return rng.choice(vars_) if vars_ and rng.random() < 0.5 else BoolLit(rng.random() < 0.5)
    raise ValueError(f"no generator for {sort}")


# --------------------------------------------------------------------------
# Interop terms

BASE_TYPES = (io.UNIT_T, io.INT_T)


def base_type(rng: random.Random, depth: int = 2) -> io.SrcType:
    if depth <= 0 or rng.random() < 0.5:
        return rng.choice(BASE_TYPES)
    a, b = base_type(rng, depth - 1), base_type(rng, depth - 1)
    return io.ProdT(a, b) if rng.random() < 0.5 else io.SumT(a, b)


@dataclass
class _IoGen:
    rng: random.Random
    mixed: bool = False
    counter: int = 0

    def fresh(self) -> str:
        self.counter += 1
        return f"x{self.counter}"

    def term(self, ty: io.SrcType, d: int, g: dict) -> io.SrcTerm:
        rng = self.rng
        here = [io.SVar(n) for n, t in g.items() if t == ty]
        if d <= 0:
            return rng.choice(here) if here and rng.random() < 0.5 else self.intro(ty, 0, g)
        e = self._pick(ty, d, g, here)
        if self.mixed and not io.free_vars(e)[0] and rng.random() < 0.2:
            # a closed subterm handed over as already-compiled target code
            e = io.SUnembed(io.translate(e), ty, io.EMPTY_DELTA)
        return e

    def _pick(self, ty, d, g, here):
        rng = self.rng
        r = rng.random()
        if here and r < 0.15:
            return rng.choice(here)
        if r < 0.4:
            return self.intro(ty, d, g)
        if r < 0.55:  # beta redex
            a = base_type(rng, 1)
            x = self.fresh()
            lam = io.SLam(x, a, self.term(ty, d - 1, {**g, x: a}))
            if self.mixed and not g and rng.random() < 0.2:
                lam = io.SUnembed(io.translate(lam), io.ArrowT(a, ty), io.EMPTY_DELTA)
            return io.SApp(lam, self.term(a, d - 1, g))
        if r < 0.65:  # projection
            other = base_type(rng, 1)
            if rng.random() < 0.5:
                return io.SFst(self.term(io.ProdT(ty, other), d - 1, g))
            return io.SSnd(self.term(io.ProdT(other, ty), d - 1, g))
        if r < 0.8:  # case
            t1, t2 = base_type(rng, 1), base_type(rng, 1)
            x1, x2 = self.fresh(), self.fresh()
            return io.SCase(
                self.term(io.SumT(t1, t2), d - 1, g),
                x1, t1, self.term(ty, d - 1, {**g, x1: t1}),
                x2, t2, self.term(ty, d - 1, {**g, x2: t2}),
            )
        return self.poly(ty, d, g)

    def poly(self, ty, d, g):
        rng = self.rng
        kind = rng.choice(["id", "const", "swap"])
        if kind == "id":
            f = io.POLY_ID_NATIVE if self.mixed and rng.random() < 0.5 else io.POLY_ID
            return io.SApp(io.STyApp(f, ty), self.term(ty, d - 1, g))
        if kind == "const":
            other = base_type(rng, 1)
            const = io.STyLam("A", io.STyLam("B", io.SLam("p", io.TyVar("A"), io.SLam("q", io.TyVar("B"), io.SVar("p")))))
            inst = io.STyApp(io.STyApp(const, ty), other)
            return io.SApp(io.SApp(inst, self.term(ty, d - 1, g)), self.term(other, d - 1, g))
        if not isinstance(ty, io.ProdT):
            return self.intro(ty, d, g)
        A, B = io.TyVar("A"), io.TyVar("B")
        swap = io.STyLam("A", io.STyLam("B", io.SLam("p", io.ProdT(A, B), io.SPair(io.SSnd(io.SVar("p")), io.SFst(io.SVar("p"))))))
        inst = io.STyApp(io.STyApp(swap, ty.right), ty.left)
        return io.SApp(inst, self.term(io.ProdT(ty.right, ty.left), d - 1, g))

    def intro(self, ty, d, g):
        rng = self.rng
        match ty:
            case io.UnitT():
                return io.S_UNIT
            case io.IntT():
                return io.SInt(rng.randint(-20, 20))
            case io.ProdT(a, b):
                return io.SPair(self.term(a, d - 1, g), self.term(b, d - 1, g))
            case io.SumT(a, b):
                if rng.random() < 0.5:
                    return io.SInl(ty, self.term(a, d - 1, g))
                return io.SInr(ty, self.term(b, d - 1, g))
        raise ValueError(ty)


def src_term(rng: random.Random, depth: int = 7, mixed: bool = False) -> tuple[io.SrcTerm, io.SrcType]:
    """A closed, well-typed source term of a base type (unit, int and
    products or sums of them)."""
    gen = _IoGen(rng, mixed)
    ty = base_type(rng, 2)
    return gen.term(ty, depth, {}), ty


# --------------------------------------------------------------------------
# SMT differential goals


def smt_signature() -> Context:
    return (
        Context()
        .bind("p", BOOL)
        .bind("q", BOOL)
        .bind("R", PROP)
        .bind("f", Arrow(BOOL, BOOL))
        .bind("g", arrows(BOOL, BOOL, BOOL))
    )


def bool_goal(rng: random.Random, depth: int = 4) -> Term:
    """A quantified proposition whose only sort is Bool."""
    counter = [0]

    def bterm(scope, d):
        pool = [FVar("p"), FVar("q")] + scope
        r = rng.random()
        if d <= 0 or r < 0.5:
            return rng.choice(pool) if rng.random() < 0.85 else BoolLit(rng.random() < 0.5)
        if r < 0.8:
            return apply(FVar("f"), bterm(scope, d - 1))
        return apply(FVar("g"), bterm(scope, d - 1), bterm(scope, d - 1))

    def go(scope, d):
        if d <= 0 or rng.random() < 0.2:
            r = rng.random()
            if r < 0.1:
                return FVar("R")
            if r < 0.15:
                return rng.choice([TRUE, FALSE])
            return Eq(BOOL, bterm(scope, 2), bterm(scope, 2))
        kind = rng.choice(["and", "or", "implies", "iff", "forall", "forall"])
        if kind == "forall":
            counter[0] += 1
            name = f"b{counter[0]}"
            body = go(scope + [FVar(name)], d - 1)
            return Forall(BOOL, abstract(body, name), name)
        node = {"and": And, "or": Or, "implies": Implies, "iff": Iff}[kind]
        return node(go(scope, d - 1), go(scope, d - 1))

    return go([], depth)


# --------------------------------------------------------------------------
# Plain typed terms


def typed_term(rng: random.Random, ctx: Context, sort: Sort, depth: int = 6) -> Term:
    """A random term of ``sort`` over the binders of ``ctx``, with plenty of
    beta-redexes so normalization has work to do."""
    counter = [0]

    def fresh():
        counter[0] += 1
        return f"_g{counter[0]}"

    def go(c: Context, s: Sort, d: int) -> Term:
        here = [FVar(b.name) for b in c.binders if b.sort == s]
        if d <= 0 or rng.random() < 0.15:
            if here and rng.random() < 0.6:
                return rng.choice(here)
            if s == INT:
                return IntLit(rng.randint(-5, 5))
            if s == BOOL:
                return BoolLit(rng.random() < 0.5)
            if isinstance(s, Arrow):
                x = fresh()
                return Lam(s.dom, abstract(go(c.bind(x, s.dom), s.cod, 0), x), x)
            raise ValueError(s)
        r = rng.random()
        if r < 0.3:  # beta redex at a random argument sort
            a = rng.choice((INT, BOOL))
            x = fresh()
            fn = Lam(a, abstract(go(c.bind(x, a), s, d - 1), x), x)
            return apply(fn, go(c, a, d - 1))
        if isinstance(s, Arrow):
            x = fresh()
            return Lam(s.dom, abstract(go(c.bind(x, s.dom), s.cod, d - 1), x), x)
        if s == INT:
            if r < 0.5:
                f = go(c, Arrow(INT, INT), d - 1)
                return apply(f, go(c, INT, d - 1))
            return Arith(rng.choice("+-*"), (go(c, INT, d - 1), go(c, INT, d - 1)))
        if r < 0.6:
            f = go(c, Arrow(INT, BOOL), d - 1)
            return apply(f, go(c, INT, d - 1))
        return here[0] if here and r < 0.7 else BoolLit(rng.random() < 0.5)

    return go(ctx, sort, depth)
