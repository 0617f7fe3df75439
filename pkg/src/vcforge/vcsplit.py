"""Splitting tactic-marked obligations out of a verification condition."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Mapping

from vcforge.engine import Failed, Goal, ProofState, initial_state, run_tactic
from vcforge.model import FiniteModel, eval_validity
from vcforge.terms import (
    PROP,
    TRUE,
    And,
    Context,
    Forall,
    Iff,
    Implies,
    Or,
    Squash,
    Term,
    TypeCheckError,
    WithTactic,
    abstract,
    children,
    drop_markers,
    free_vars,
    open_binder,
    simplify,
    typecheck,
)

MAX_DEPTH = 32


class Polarity(Enum):
    POSITIVE = "strictly-positive"
    OTHER = "other"


class SplitError(Exception):
    pass


class NotPShaped(SplitError):
    pass


class UnknownTactic(SplitError):
    def __init__(self, name: str, path: tuple):
        super().__init__(f"no tactic named {name!r} (marker at {'/'.join(map(str, path)) or '<root>'})")
        self.name = name
        self.path = path


def mark(phi: Term, tactic: str, ctx: Context = Context()) -> Term:
    try:
        s = typecheck(ctx, phi)
    except TypeCheckError as e:
        raise SplitError(str(e)) from None
    if s != PROP:
        raise SplitError(f"only propositions can be marked, got {s}")
    return WithTactic(phi, tactic)


def _labelled_children(t: Term):
    match t:
        case And(l, r) | Or(l, r) | Implies(l, r) | Iff(l, r):
            yield l, "lhs"
            yield r, "rhs"
        case Forall(_, body):
            yield body, "body"
        case Squash(p):
            yield p, "prop"
        case WithTactic(p, _):
            yield p, "phi"
        case _:
            for i, (c, _) in enumerate(children(t)):
                yield c, i


def _child_polarity(t: Term, label, pol: Polarity) -> Polarity:
    if pol is Polarity.OTHER:
        return pol
    if isinstance(t, (And, Or, Forall, Squash, WithTactic)):
        return pol
    if isinstance(t, Implies) and label == "rhs":
        return pol
    return Polarity.OTHER


def classify_positions(vc: Term) -> list[tuple[tuple, Polarity]]:
    """Polarity of every marker occurrence, in pre-order."""
    out = []

    def go(t, pol, path):
        if isinstance(t, WithTactic):
            out.append((path, pol))
        for c, label in _labelled_children(t):
            go(c, _child_polarity(t, label, pol), path + (label,))

    go(vc, Polarity.POSITIVE, ())
    return out


@dataclass(frozen=True)
class Obligation:
    delta: Context
    phi: Term
    tactic: str
    path: tuple = ()


@dataclass(frozen=True)
class SplitResult:
    skeleton: Term
    obligations: tuple[Obligation, ...]


def split_vc(base: Context, vc: Term, _depth: int = 0) -> SplitResult:
    """Replace strictly-positive markers by True and return them as
    obligations under the binders and premises traversed to reach them.
    Markers anywhere else are dropped in place."""
    if _depth > MAX_DEPTH:
        raise SplitError(f"markers nested deeper than {MAX_DEPTH}")
    taken = base.names() | free_vars(vc)
    obligations: list[Obligation] = []

    def go(t, delta: Context, path):
        match t:
            case WithTactic(phi, tau):
                inner = split_vc(base + delta, phi, _depth + 1)
                obligations.append(Obligation(delta, inner.skeleton, tau, path))
                for o in inner.obligations:
                    obligations.append(Obligation(delta + o.delta, o.phi, o.tactic, path + ("phi",) + o.path))
                return TRUE
            case And(l, r):
                return And(go(l, delta, path + ("lhs",)), go(r, delta, path + ("rhs",)))
            case Or(l, r):
                return Or(go(l, delta, path + ("lhs",)), go(r, delta, path + ("rhs",)))
            case Squash(p):
                return Squash(go(p, delta, path + ("prop",)))
            case Implies(l, r):
                premise = drop_markers(l)
                return Implies(premise, go(r, delta.assume("_", premise), path + ("rhs",)))
            case Forall(s, body, hint):
                x = (base + delta).fresh(hint, taken)
                taken.add(x)
                opened = go(open_binder(body, x), delta.bind(x, s), path + ("body",))
                return Forall(s, abstract(opened, x), hint)
        return drop_markers(t)

    skeleton = go(vc, Context(), ())
    return SplitResult(skeleton, tuple(obligations))


def check_split_soundness(model: FiniteModel, base: Context, vc: Term) -> bool:
    """(skeleton valid and every obligation valid) implies vc valid."""
    r = split_vc(base, vc)
    if not eval_validity(model, base, r.skeleton):
        return True
    if not all(eval_validity(model, base + o.delta, o.phi) for o in r.obligations):
        return True
    return eval_validity(model, base, vc)


def p_shape_path(vc: Term) -> tuple:
    """Path to the single marker of a P-shaped VC, else ``NotPShaped``."""
    found = classify_positions(vc)
    if len(found) != 1:
        raise NotPShaped(f"expected exactly one marker, found {len(found)}")
    path = found[0][0]
    t = vc
    for label in path:
        ok = (
            (isinstance(t, And) and label in ("lhs", "rhs"))
            or (isinstance(t, Forall) and label == "body")
            or (isinstance(t, Implies) and label == "rhs")
        )
        if not ok:
            raise NotPShaped(f"{type(t).__name__}/{label} is not a P-context step")
        t = dict((lb, c) for c, lb in _labelled_children(t))[label]
    return path


def check_split_completeness_P(model: FiniteModel, base: Context, vc: Term) -> bool:
    """For P-shaped contexts: vc valid implies skeleton and obligation valid."""
    p_shape_path(vc)
    if not eval_validity(model, base, vc):
        return True
    r = split_vc(base, vc)
    return eval_validity(model, base, r.skeleton) and all(
        eval_validity(model, base + o.delta, o.phi) for o in r.obligations
    )


# --------------------------------------------------------------------------
# Pipeline


@dataclass(frozen=True)
class ObligationReport:
    obligation: Obligation
    status: str  # "solved", "deferred", "open" or "error"
    remaining: tuple[Goal, ...] = ()
    error: str | None = None


@dataclass(frozen=True)
class PipelineResult:
    skeleton: Term
    skeleton_status: str  # "trivial" or "smt"
    reports: tuple[ObligationReport, ...]
    remaining_smt: tuple[Goal, ...]

    @property
    def discharged(self) -> tuple[Obligation, ...]:
        return tuple(r.obligation for r in self.reports if r.status == "solved")


def _run_obligation(base: Context, o: Obligation, tactic) -> ObligationReport:
    goal, state = initial_state(base + o.delta, o.phi)
    outcome = run_tactic(tactic, state)
    if isinstance(outcome, Failed):
        return ObligationReport(o, "error", (goal,), outcome.error.message)
    st: ProofState = outcome.state
    leftover = tuple(Goal(g.env, Squash(st.resolve(g.prop)), g.witness) for g in st.goals if not g.relevant)
    if any(g.relevant for g in st.goals):
        return ObligationReport(o, "error", (goal,), "script left relevant goals open")
    remaining = st.smt_goals + leftover
    if not remaining:
        return ObligationReport(o, "solved")
    return ObligationReport(o, "open" if leftover else "deferred", remaining)


def run_pipeline(base: Context, vc: Term, registry: Mapping[str, Callable], workers: int = 1) -> PipelineResult:
    """Split ``vc``, run each obligation's tactic, and collect what is left
    for the SMT backend (including a non-trivial skeleton)."""
    r = split_vc(base, vc)
    for o in r.obligations:
        if o.tactic not in registry:
            raise UnknownTactic(o.tactic, o.path)
    jobs = [(o, registry[o.tactic]) for o in r.obligations]
    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            reports = tuple(pool.map(lambda j: _run_obligation(base, *j), jobs))
    else:
        reports = tuple(_run_obligation(base, *j) for j in jobs)
    remaining = tuple(g for rep in reports for g in rep.remaining)
    if simplify(r.skeleton) == TRUE:
        status = "trivial"
    else:
        status = "smt"
        skel_goal, _ = initial_state(base, r.skeleton)
        remaining = remaining + (skel_goal,)
    return PipelineResult(r.skeleton, status, reports, remaining)
