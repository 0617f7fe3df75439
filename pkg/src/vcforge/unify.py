"""First-order syntactic unification over terms with metavariables."""

from __future__ import annotations

from typing import Mapping

from vcforge.terms import (
    Eq,
    Forall,
    Lam,
    Metavar,
    Term,
    WithTactic,
    children,
    is_locally_closed,
    metavars,
    resolve_metavars,
)


class UnificationError(Exception):
    pass


def _walk(t: Term, subst: Mapping[int, Term]) -> Term:
    while isinstance(t, Metavar) and not t.pending and t.id in subst:
        t = subst[t.id]
    return t


def _occurs(mid: int, t: Term, subst) -> bool:
    return mid in metavars(resolve_metavars(t, subst))


def unify(a: Term, b: Term, subst: Mapping[int, Term] | None = None) -> dict[int, Term]:
    """Extend ``subst`` so that ``a`` and ``b`` become syntactically equal.

    Only metavariables without pending de Bruijn operations can be bound, and
    only to locally closed terms (no higher-order patterns).
    """
    result = dict(subst or {})
    stack = [(a, b, 0)]
    while stack:
        x, y, depth = stack.pop()
        x, y = _walk(x, result), _walk(y, result)
        if x == y:
            continue
        if isinstance(x, Metavar) and not x.pending:
            _bind(x, y, result)
            continue
        if isinstance(y, Metavar) and not y.pending:
            _bind(y, x, result)
            continue
        if type(x) is not type(y):
            raise UnificationError(f"cannot unify {x} with {y}")
        if isinstance(x, (Lam, Forall)) and x.sort != y.sort:
            raise UnificationError(f"binder sorts differ: {x.sort} vs {y.sort}")
        if isinstance(x, Eq) and x.sort != y.sort:
            raise UnificationError(f"equality sorts differ: {x.sort} vs {y.sort}")
        if isinstance(x, WithTactic) and x.tactic != y.tactic:
            raise UnificationError("different tactic markers")
        xs, ys = list(children(x)), list(children(y))
        if not xs or len(xs) != len(ys) or getattr(x, "op", None) != getattr(y, "op", None):
            raise UnificationError(f"cannot unify {x} with {y}")
        for (cx, bx), (cy, _) in zip(xs, ys):
            stack.append((cx, cy, depth + bx))
    return result


def _bind(mv: Metavar, t: Term, subst: dict) -> None:
    if not is_locally_closed(t):
        raise UnificationError(f"?{mv.id} cannot capture bound variables")
    if _occurs(mv.id, t, subst):
        raise UnificationError(f"occurs check: ?{mv.id} in {t}")
    subst[mv.id] = t
