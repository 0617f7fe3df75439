"""Proof-by-reflection canonicalizers for monoids and the integer semiring."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from vcforge.engine import (
    ErrorKind,
    ProofState,
    TacticError,
    by_lemma,
    rewrite_goal,
    smt_defer,
)
from vcforge.terms import (
    INT,
    Arith,
    App,
    Context,
    Eq,
    Hyp,
    IntLit,
    Term,
    WithTactic,
    apply,
    is_locally_closed,
    normalize,
    plus,
    times,
)


def term_key(t: Term) -> str:
    """Deterministic ordering key: the canonical s-expression."""
    from vcforge.sexpr import show

    return show(t) if is_locally_closed(t) else repr(t)


# --------------------------------------------------------------------------
# Monoids


@dataclass(frozen=True)
class MUnit:
    pass


@dataclass(frozen=True)
class MVar:
    index: int


@dataclass(frozen=True)
class MMult:
    lhs: MonoidExpr
    rhs: MonoidExpr


MonoidExpr = MUnit | MVar | MMult


@dataclass(frozen=True)
class MonoidOps:
    """``mult`` is either an arithmetic operator name (``"+"``, ``"*"``) or a
    head term applied to two arguments."""

    unit: Term
    mult: str | Term
    commutative: bool = False
    key: Callable[[Term], str] = term_key

    def match(self, t: Term) -> tuple[Term, Term] | None:
        if isinstance(self.mult, str):
            if isinstance(t, Arith) and t.op == self.mult:
                return t.args
            return None
        if isinstance(t, App) and isinstance(t.fn, App) and t.fn.fn == self.mult:
            return t.fn.arg, t.arg
        return None

    def build(self, a: Term, b: Term) -> Term:
        if isinstance(self.mult, str):
            return Arith(self.mult, (a, b))
        return apply(self.mult, a, b)


INT_ADD = MonoidOps(IntLit(0), "+", commutative=True)
INT_MUL = MonoidOps(IntLit(1), "*", commutative=True)


def reify_monoid(ops: MonoidOps, t: Term, atoms: list[Term] | None = None) -> tuple[MonoidExpr, list[Term]]:
    """Reflect ``t`` into monoid syntax.  ``atoms`` is extended in place so
    several terms can share one table."""
    atoms = [] if atoms is None else atoms

    def go(u):
        if u == ops.unit:
            return MUnit()
        parts = ops.match(u)
        if parts is not None:
            return MMult(go(parts[0]), go(parts[1]))
        for i, a in enumerate(atoms):
            if a == u:
                return MVar(i)
        atoms.append(u)
        return MVar(len(atoms) - 1)

    return go(t), atoms


def denote(ops: MonoidOps, e: MonoidExpr, atoms) -> Term:
    match e:
        case MUnit():
            return ops.unit
        case MVar(i):
            return atoms[i]
        case MMult(a, b):
            return ops.build(denote(ops, a, atoms), denote(ops, b, atoms))
    raise TypeError(e)


def flatten(e: MonoidExpr) -> list[int]:
    match e:
        case MUnit():
            return []
        case MVar(i):
            return [i]
        case MMult(a, b):
            return flatten(a) + flatten(b)
    raise TypeError(e)


def mldenote(ops: MonoidOps, xs: list[int], atoms) -> Term:
    """Right-nested product; the unit appears only for the empty list."""
    if not xs:
        return ops.unit
    result = atoms[xs[-1]]
    for i in reversed(xs[:-1]):
        result = ops.build(atoms[i], result)
    return result


def canonical_list(ops: MonoidOps, e: MonoidExpr, atoms) -> list[int]:
    xs = flatten(e)
    if ops.commutative:
        xs.sort(key=lambda i: (ops.key(atoms[i]), i))
    return xs


def canon_monoid_term(ops: MonoidOps, t: Term) -> Term:
    e, atoms = reify_monoid(ops, t)
    return mldenote(ops, canonical_list(ops, e, atoms), atoms)


def _head_equality(state: ProofState, name: str, int_only: bool = False) -> Eq:
    if not state.goals:
        raise TacticError(ErrorKind.EMPTY_GOALS, "no goals", state)
    g = state.goals[0]
    if g.relevant:
        raise TacticError(ErrorKind.SHAPE, f"{name} needs an irrelevant goal", state)
    phi = normalize(state.resolve(g.prop))
    while isinstance(phi, WithTactic):  # markers are transparent
        phi = phi.phi
    if not isinstance(phi, Eq) or (int_only and phi.sort != INT):
        raise TacticError(ErrorKind.SHAPE, f"{name} needs an {'Int ' if int_only else ''}equality, got {phi}", state)
    return phi


def canon_monoid(ops: MonoidOps):
    """Solve ``lhs == rhs`` when both sides flatten to the same operand list
    (sorted first for commutative monoids); otherwise leave the goal as the
    equality of the two canonical forms."""

    def tac(state: ProofState):
        eq = _head_equality(state, "canon_monoid")
        atoms: list[Term] = []
        el, atoms = reify_monoid(ops, eq.lhs, atoms)
        er, atoms = reify_monoid(ops, eq.rhs, atoms)
        xl, xr = canonical_list(ops, el, atoms), canonical_list(ops, er, atoms)
        if xl == xr:
            return by_lemma(state, "monoid_reflect")
        return rewrite_goal(state, Eq(eq.sort, mldenote(ops, xl, atoms), mldenote(ops, xr, atoms)))

    return tac


# --------------------------------------------------------------------------
# Sum of products


@dataclass(frozen=True)
class Poly:
    """Monomials ``(atom indices, coefficient)`` over a sorted atom table.

    Zero coefficients never appear, each index multiset occurs once, and
    monomials are sorted by their atom keys, so two polynomials are equal
    exactly when their canonical forms are.
    """

    monomials: tuple[tuple[tuple[int, ...], int], ...]
    atoms: tuple[Term, ...]

    def as_dict(self) -> dict[tuple[str, ...], int]:
        return {tuple(term_key(self.atoms[i]) for i in ix): c for ix, c in self.monomials}

    @property
    def degree(self) -> int:
        return max((len(ix) for ix, _ in self.monomials), default=0)


_Raw = dict  # tuple of atom keys (sorted) -> coefficient


def _add(p: _Raw, q: _Raw, sign: int = 1) -> _Raw:
    r = dict(p)
    for k, c in q.items():
        r[k] = r.get(k, 0) + sign * c
        if r[k] == 0:
            del r[k]
    return r


def _mul(p: _Raw, q: _Raw) -> _Raw:
    r: _Raw = {}
    for k1, c1 in p.items():
        for k2, c2 in q.items():
            k = tuple(sorted(k1 + k2))
            r[k] = r.get(k, 0) + c1 * c2
            if r[k] == 0:
                del r[k]
    return r


def _raw(t: Term, table: dict[str, Term]) -> _Raw:
    match t:
        case IntLit(n):
            return {(): n} if n else {}
        case Arith("+", (a, b)):
            return _add(_raw(a, table), _raw(b, table))
        case Arith("-", (a, b)):
            return _add(_raw(a, table), _raw(b, table), -1)
        case Arith("*", (a, b)):
            return _mul(_raw(a, table), _raw(b, table))
        case Arith("div" | "mod" as op, (a, b)):
            t = Arith(op, (canon_int(a), canon_int(b)))
    k = term_key(t)
    table.setdefault(k, t)
    return {(k,): 1}


def _freeze(raw: _Raw, table: dict[str, Term]) -> Poly:
    used = sorted({k for ks in raw for k in ks})
    index = {k: i for i, k in enumerate(used)}
    monos = tuple(
        (tuple(index[k] for k in ks), c)
        for ks, c in sorted(raw.items(), key=lambda kv: (len(kv[0]), kv[0]))
    )
    return Poly(monos, tuple(table[k] for k in used))


def poly_of(t: Term) -> Poly:
    """Expand ``t`` into a sum of products; anything that is not ``+``,
    ``-``, ``*`` or a literal is an opaque atom."""
    table: dict[str, Term] = {}
    return _freeze(_raw(t, table), table)


def reflect(p: Poly) -> Term:
    """The canonical term of a polynomial: a left-nested sum of monomials,
    each ``coefficient * a1 * ... * ak`` with a coefficient of 1 omitted."""
    terms = []
    for ix, c in p.monomials:
        if not ix:
            terms.append(IntLit(c))
            continue
        prod = p.atoms[ix[0]]
        for i in ix[1:]:
            prod = times(prod, p.atoms[i])
        terms.append(prod if c == 1 else times(IntLit(c), prod))
    if not terms:
        return IntLit(0)
    result = terms[0]
    for u in terms[1:]:
        result = plus(result, u)
    return result


def canon_int(t: Term) -> Term:
    return reflect(poly_of(t))


def is_linear(t: Term) -> bool:
    """Linear integer arithmetic over uninterpreted symbols (div and mod by
    literals allowed)."""
    match t:
        case Arith("*", (a, b)):
            if isinstance(a, IntLit) or isinstance(b, IntLit):
                return is_linear(a) and is_linear(b)
            return False
        case Arith("div" | "mod", (a, b)):
            return isinstance(b, IntLit) and is_linear(a)
    from vcforge.terms import children

    return all(is_linear(c) for c, _ in children(t))


def _context_linear(ctx: Context) -> bool:
    return all(is_linear(e.prop) for e in ctx.entries if isinstance(e, Hyp))


def canon_semiring(state: ProofState):
    """Solve an integer equality whose sides have the same sum-of-products
    form; otherwise rewrite both sides to canonical form and defer to SMT."""
    eq = _head_equality(state, "canon_semiring", int_only=True)
    pl, pr = poly_of(eq.lhs), poly_of(eq.rhs)
    if pl == pr:
        return by_lemma(state, "semiring_reflect")
    new = Eq(INT, reflect(pl), reflect(pr))
    g = state.goals[0]
    logic = "UFLIA" if is_linear(new) and _context_linear(g.env) else None
    _, st = rewrite_goal(state, new, logic)
    return smt_defer(st)
