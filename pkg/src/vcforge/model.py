"""Finite models and the brute-force validity oracle.

Terms are compiled once into Python closures and then evaluated under many
assignments, which is what makes exhaustive enumeration affordable.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Iterator, Mapping

from vcforge.terms import (
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
    Uninterp,
    UnitLit,
    UnitSort,
    WithTactic,
    euclid_divmod,
    free_vars,
)


class OracleError(Exception):
    code = "oracle-error"


class UnboundedSort(OracleError):
    code = "unbounded-sort"


class CarrierTooLarge(OracleError):
    code = "carrier-too-large"


class ModelRejected(OracleError):
    """Raised when an atom is undefined in the model (division by zero)."""

    code = "model-rejected"


class UnsupportedTerm(OracleError):
    code = "unsupported-term"


class Table:
    """A finite function, compared extensionally."""

    __slots__ = ("dom", "out", "_index")

    def __init__(self, dom: tuple, out: tuple):
        self.dom = dom
        self.out = out
        self._index = {x: i for i, x in enumerate(dom)}

    def __call__(self, x):
        try:
            return self.out[self._index[x]]
        except KeyError:
            raise ModelRejected(f"{x!r} lies outside the function's finite domain") from None

    def __eq__(self, other):
        return isinstance(other, Table) and self.dom == other.dom and self.out == other.out

    def __hash__(self):
        return hash(self.out)

    def __repr__(self):
        return "{" + ", ".join(f"{a!r}->{b!r}" for a, b in zip(self.dom, self.out)) + "}"


UNIT_VAL = ()


@dataclass(frozen=True)
class FiniteModel:
    """Carriers for every sort plus a fixed interpretation of some symbols.

    ``int_range`` is the inclusive interval Int quantifiers range over;
    arithmetic itself is unbounded.  ``sizes`` gives carrier sizes for
    uninterpreted sorts (falling back to the sort's size hint).
    """

    int_range: tuple[int, int] | None = None
    sizes: Mapping[str, int] = field(default_factory=dict)
    interp: Mapping[str, Any] = field(default_factory=dict)
    max_carrier: int = 4096
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    def with_interp(self, extra: Mapping[str, Any]) -> FiniteModel:
        return FiniteModel(self.int_range, self.sizes, {**self.interp, **extra}, self.max_carrier, self._cache)

    def carrier(self, sort: Sort) -> tuple:
        try:
            return self._cache[sort]
        except KeyError:
            pass
        match sort:
            case UnitSort():
                c = (UNIT_VAL,)
            case BoolSort() | PropSort():
                c = (False, True)
            case IntSort():
                if self.int_range is None:
                    raise UnboundedSort("Int has no bounded carrier in this model")
                lo, hi = self.int_range
                c = tuple(range(lo, hi + 1))
            case Uninterp(name, hint):
                n = self.sizes.get(name, hint)
                if not n:
                    raise UnboundedSort(f"uninterpreted sort {name} has no carrier size")
                c = tuple(range(n))
            case Arrow(dom, cod):
                d, r = self.carrier(dom), self.carrier(cod)
                if len(r) ** len(d) > self.max_carrier:
                    raise CarrierTooLarge(f"{sort} has {len(r)}**{len(d)} elements")
                c = tuple(Table(d, out) for out in itertools.product(r, repeat=len(d)))
            case _:
                raise UnsupportedTerm(f"no carrier for {sort}")
        if len(c) > self.max_carrier:
            raise CarrierTooLarge(f"{sort} has {len(c)} elements")
        if not c:
            raise UnboundedSort(f"{sort} has an empty carrier")
        self._cache[sort] = c
        return c


def values_equal(model: FiniteModel, sort: Sort | None, a, b) -> bool:
    if isinstance(sort, Arrow):
        return all(values_equal(model, sort.cod, a(x), b(x)) for x in model.carrier(sort.dom))
    return a == b


Compiled = Callable[[Mapping[str, Any], tuple], Any]


def compile_term(model: FiniteModel, t: Term) -> Compiled:
    """Compile ``t`` to a function of (free-variable environment, bound stack)."""
    match t:
        case BVar(i):
            k = -1 - i
            return lambda env, st: st[k]
        case FVar(name):
            def fvar(env, st):
                try:
                    return env[name]
                except KeyError:
                    raise UnsupportedTerm(f"symbol {name} is not interpreted") from None
            return fvar
        case UnitLit():
            return lambda env, st: UNIT_VAL
        case BoolLit(v) | IntLit(v):
            return lambda env, st: v
        case TrueP():
            return lambda env, st: True
        case FalseP():
            return lambda env, st: False
        case Lam(_, body):
            b = compile_term(model, body)
            return lambda env, st: (lambda v: b(env, st + (v,)))
        case App(f, a):
            cf, ca = compile_term(model, f), compile_term(model, a)
            return lambda env, st: cf(env, st)(ca(env, st))
        case Forall(s, body):
            carrier = model.carrier(s)
            b = compile_term(model, body)
            return lambda env, st: all(b(env, st + (v,)) for v in carrier)
        case And(l, r):
            cl, cr = compile_term(model, l), compile_term(model, r)
            return lambda env, st: cl(env, st) and cr(env, st)
        case Or(l, r):
            cl, cr = compile_term(model, l), compile_term(model, r)
            return lambda env, st: cl(env, st) or cr(env, st)
        case Implies(l, r):
            cl, cr = compile_term(model, l), compile_term(model, r)
            return lambda env, st: (not cl(env, st)) or cr(env, st)
        case Iff(l, r):
            cl, cr = compile_term(model, l), compile_term(model, r)
            return lambda env, st: cl(env, st) == cr(env, st)
        case Eq(s, l, r):
            cl, cr = compile_term(model, l), compile_term(model, r)
            if isinstance(s, Arrow):
                return lambda env, st: values_equal(model, s, cl(env, st), cr(env, st))
            return lambda env, st: cl(env, st) == cr(env, st)
        case Squash(p) | WithTactic(p, _):
            return compile_term(model, p)
        case Arith(op, (x, y)):
            return _compile_arith(op, compile_term(model, x), compile_term(model, y))
        case Metavar(i):
            raise UnsupportedTerm(f"cannot evaluate metavariable ?{i}")
    raise UnsupportedTerm(f"cannot evaluate {t!r}")


def _compile_arith(op, cx, cy) -> Compiled:
    match op:
        case "+":
            return lambda env, st: cx(env, st) + cy(env, st)
        case "-":
            return lambda env, st: cx(env, st) - cy(env, st)
        case "*":
            return lambda env, st: cx(env, st) * cy(env, st)
        case "<":
            return lambda env, st: cx(env, st) < cy(env, st)
        case "<=":
            return lambda env, st: cx(env, st) <= cy(env, st)
    which = 0 if op == "div" else 1

    def divmod_(env, st):
        a, b = cx(env, st), cy(env, st)
        if b == 0:
            raise ModelRejected(f"{op} by zero")
        return euclid_divmod(a, b)[which]

    return divmod_


def eval_term(model: FiniteModel, t: Term, env: Mapping[str, Any] | None = None):
    """Value of a locally closed term; free symbols come from ``env`` or the
    model's interpretation."""
    full = dict(model.interp)
    if env:
        full.update(env)
    return compile_term(model, t)(full, ())


# --------------------------------------------------------------------------
# Validity


def _determining(hyp: Term, binders: set[str]):
    """If ``hyp`` has the shape ``v = e`` with ``v`` a binder not free in ``e``,
    return ``(v, e)``."""
    if isinstance(hyp, Eq) and not isinstance(hyp.sort, Arrow):
        for v, e in ((hyp.lhs, hyp.rhs), (hyp.rhs, hyp.lhs)):
            if isinstance(v, FVar) and v.name in binders and v.name not in free_vars(e):
                return v.name, e
    return None


class Validity:
    """A compiled validity check of ``phi`` under ``ctx``.

    Binders named in ``fixed`` (by default the symbols the model interprets)
    are read from the environment passed at call time instead of being
    enumerated, so one compiled check can be run under many interpretations.

    Hypotheses are checked as soon as the binders they mention are assigned,
    and a binder pinned by an equation ``v = e`` is computed rather than
    enumerated.  Both only prune assignments that would fail anyway.
    """

    def __init__(self, model: FiniteModel, ctx: Context, phi: Term, fixed: Iterable[str] | None = None):
        fixed = set(model.interp) if fixed is None else set(fixed)
        self.model = model
        order = [b for b in ctx.entries if isinstance(b, Binder) and b.name not in fixed]
        names = {b.name for b in order}
        self.binder_names = names
        self.carriers = {b.name: model.carrier(b.sort) for b in order}
        hyps = []
        for h in ctx.hyps:
            deps = frozenset(free_vars(h.prop) & names)
            hyps.append((deps, compile_term(model, h.prop), _determining(h.prop, names)))
        targets = {d[0] for _, _, d in hyps if d is not None}
        order.sort(key=lambda b: b.name in targets)
        self.order = order
        self.hyps = hyps
        self.definers: dict[str, list] = {}
        for _, _, d in hyps:
            if d is not None:
                v, e = d
                self.definers.setdefault(v, []).append((frozenset(free_vars(e) & names), compile_term(model, e)))
        self.goal = compile_term(model, phi)

    def assignments(self, base: Mapping[str, Any] | None = None) -> Iterator[dict[str, Any]]:
        carriers, definers = self.carriers, self.definers

        def go(env, assigned, remaining, pending):
            still = []
            for h in pending:
                if h[0] <= assigned:
                    if not h[1](env, ()):
                        return
                else:
                    still.append(h)
            if not remaining:
                yield env
                return
            pick = None
            for b in remaining:
                for deps, ce in definers.get(b.name, ()):
                    if deps <= assigned:
                        pick = (b, ce)
                        break
                if pick:
                    break
            if pick:
                b, ce = pick
                value = ce(env, ())
                if value not in carriers[b.name]:
                    return
                choices = (value,)
            else:
                b = remaining[0]
                choices = carriers[b.name]
            rest = [r for r in remaining if r is not b]
            now = assigned | {b.name}
            for v in choices:
                env2 = dict(env)
                env2[b.name] = v
                yield from go(env2, now, rest, still)

        start = dict(self.model.interp)
        if base:
            start.update(base)
        yield from go(start, frozenset(), self.order, self.hyps)

    def countermodel(self, base: Mapping[str, Any] | None = None) -> dict[str, Any] | None:
        for env in self.assignments(base):
            if not self.goal(env, ()):
                return {k: v for k, v in env.items() if k in self.binder_names}
        return None

    def __call__(self, base: Mapping[str, Any] | None = None) -> bool:
        return self.countermodel(base) is None


def assignments(model: FiniteModel, ctx: Context) -> Iterator[dict[str, Any]]:
    """Assignments to the context's binders (other than symbols the model
    interprets) that satisfy its hypotheses."""
    return Validity(model, ctx, TrueP()).assignments()


def find_countermodel(model: FiniteModel, ctx: Context, phi: Term) -> dict[str, Any] | None:
    return Validity(model, ctx, phi).countermodel()


def eval_validity(model: FiniteModel, ctx: Context, phi: Term) -> bool:
    """True iff ``phi`` holds under every assignment of the context's binders
    satisfying its hypotheses.  ``WithTactic`` is transparent."""
    return find_countermodel(model, ctx, phi) is None


def interpretations(model: FiniteModel, symbols: Mapping[str, Sort]) -> Iterator[FiniteModel]:
    """Every extension of ``model`` interpreting ``symbols``."""
    names = sorted(symbols)
    carriers = [model.carrier(symbols[n]) for n in names]
    for values in itertools.product(*carriers):
        yield model.with_interp(dict(zip(names, values)))


def count_interpretations(model: FiniteModel, symbols: Mapping[str, Sort]) -> int:
    n = 1
    for s in symbols.values():
        n *= len(model.carrier(s))
    return n
