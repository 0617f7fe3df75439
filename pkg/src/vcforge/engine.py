"""The tactic engine.

A tactic is a function ``ProofState -> (value, ProofState)`` that raises
``TacticError`` on failure.  Proof states are immutable, so rolling back on a
caught failure is just returning the state we started from.
"""

from __future__ import annotations

import functools
import hashlib
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Callable, Iterable, Mapping

from vcforge.terms import (
    UNIT,
    UNIT_VALUE,
    And,
    Arrow,
    Binder,
    Context,
    Forall,
    FVar,
    Hyp,
    Implies,
    Lam,
    Metavar,
    Sort,
    Squash,
    Term,
    TRUE,
    TypeCheckError,
    UnitLit,
    abstract,
    apply,
    arrows,
    metavars,
    normalize,
    open_binder,
    replay,
    resolve_metavars,
    simplify,
    typecheck,
)
from vcforge.unify import UnificationError, unify


class ErrorKind(Enum):
    EMPTY_GOALS = "empty-goals"
    SHAPE = "shape"
    TYPE_MISMATCH = "type-mismatch"
    UNIFY = "unification"
    NOT_TRIVIAL = "not-trivial"
    RELEVANT = "relevant-goal"
    NEGATIVE_N = "negative-n"
    OUT_OF_RANGE = "out-of-range"
    REPEAT_CAP = "repeat-cap"
    USER = "user"


class TacticError(Exception):
    def __init__(self, kind: ErrorKind, message: str, state: ProofState | None = None):
        super().__init__(f"{kind.value}: {message}")
        self.kind = kind
        self.message = message
        self.state = state


@dataclass(frozen=True)
class Goal:
    """``env |- witness : goal_type``.  The goal is irrelevant exactly when
    ``goal_type`` is a ``Squash``."""

    env: Context
    goal_type: Sort | Squash
    witness: Metavar
    logic: str | None = None  # SMT logic hint set by canonicalizers

    @property
    def relevant(self) -> bool:
        return not isinstance(self.goal_type, Squash)

    @property
    def prop(self) -> Term:
        if self.relevant:
            raise ValueError("relevant goals carry no proposition")
        return self.goal_type.prop


@dataclass(frozen=True)
class TraceEntry:
    primitive: str
    before: str
    after: str
    validation: Validation


@dataclass(frozen=True)
class ProofState:
    goals: tuple[Goal, ...] = ()
    smt_goals: tuple[Goal, ...] = ()
    assignments: Mapping[int, Term] = field(default_factory=dict)
    fresh: int = 0
    trace: tuple[TraceEntry, ...] = ()

    def canonical(self) -> str:
        return repr((self.goals, self.smt_goals, sorted(self.assignments.items()), self.fresh))

    def digest(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]

    def observable(self) -> tuple:
        """Everything but the trace; equal for a state and its rollback."""
        return (self.goals, self.smt_goals, dict(self.assignments), self.fresh)

    def resolve(self, t: Term) -> Term:
        return resolve_metavars(t, self.assignments)

    def solution(self, goal: Goal) -> Term:
        return self.resolve(goal.witness)


def initial_state(env: Context, goal_type: Sort | Term) -> tuple[Goal, ProofState]:
    """A state with the single goal ``env |- ?0 : goal_type``.  A bare
    proposition is squashed."""
    return new_goal(ProofState(), env, goal_type)


def new_goal(state: ProofState, env: Context, goal_type: Sort | Term) -> tuple[Goal, ProofState]:
    if isinstance(goal_type, Term) and not isinstance(goal_type, Squash):
        goal_type = Squash(goal_type)
    sort = goal_type if isinstance(goal_type, Sort) else UNIT
    goal = Goal(env, goal_type, Metavar(state.fresh, sort))
    return goal, replace(state, fresh=state.fresh + 1, goals=state.goals + (goal,))


def _mint(state: ProofState, env: Context, goal_type) -> tuple[Goal, ProofState]:
    """Like ``new_goal`` but does not add the goal to the list."""
    goal, st = new_goal(state, env, goal_type)
    return goal, replace(st, goals=state.goals)


def _assign(state: ProofState, mv: Metavar, t: Term) -> dict:
    a = dict(state.assignments)
    a[mv.id] = t
    return a


def _head(state: ProofState) -> Goal:
    if not state.goals:
        raise TacticError(ErrorKind.EMPTY_GOALS, "no goals", state)
    return state.goals[0]


def _irrelevant_head(state: ProofState) -> Goal:
    g = _head(state)
    if g.relevant:
        raise TacticError(ErrorKind.SHAPE, f"expected an irrelevant goal, got {g.goal_type}", state)
    return g


# --------------------------------------------------------------------------
# Validations


@dataclass(frozen=True)
class Validation:
    """Maps solutions of the successor goals (``holes``) to solutions of the
    predecessor goals: each output is a template over the holes."""

    holes: tuple[Metavar, ...]
    outputs: tuple[Term, ...]

    @property
    def arity_in(self) -> int:
        return len(self.holes)

    @property
    def arity_out(self) -> int:
        return len(self.outputs)

    def apply(self, solutions: Iterable[Term]) -> tuple[Term, ...]:
        sols = list(solutions)
        if len(sols) != len(self.holes):
            raise ValueError(f"expected {len(self.holes)} solutions, got {len(sols)}")
        table = {h.id: s for h, s in zip(self.holes, sols)}
        return tuple(_plug(o, table) for o in self.outputs)

    def compose(self, after: Validation) -> Validation:
        """``self`` then ``after``: ``after`` maps its holes to ``self``'s holes."""
        return Validation(after.holes, self.apply(after.outputs))


def _plug(t: Term, table: Mapping[int, Term]) -> Term:
    from vcforge.terms import map_children

    def go(u):
        if isinstance(u, Metavar):
            if u.id in table:
                return replay(table[u.id], u.pending)
            return u
        return map_children(u, lambda ch, b: go(ch))

    return go(t)


def validation_between(before: ProofState, after: ProofState) -> Validation:
    holes = tuple(g.witness for g in after.goals)
    stop = frozenset(h.id for h in holes)
    outputs = tuple(resolve_metavars(g.witness, after.assignments, stop) for g in before.goals)
    return Validation(holes, outputs)


def _generic_solutions(goals: tuple[Goal, ...]) -> tuple[list[Term], Context]:
    """A most general solution per goal: an uninterpreted function of the
    goal's binders for relevant goals, the unit value for irrelevant ones."""
    sols, sig = [], Context()
    for i, g in enumerate(goals):
        if g.relevant:
            bs = g.env.binders
            name = f"sol!{i}"
            sig = sig.bind(name, arrows(*(b.sort for b in bs), g.goal_type))
            sols.append(apply(FVar(name), *(FVar(b.name) for b in bs)))
        else:
            sols.append(UNIT_VALUE)
    return sols, sig


def audit_evolution(before: ProofState, after: ProofState, model=None) -> bool:
    """Check ``before`` correctly evolves to ``after``.

    Generic solutions for ``after``'s goals are pushed through the validation
    and must typecheck at ``before``'s goal types.  With a finite ``model``
    the semantic half is checked too: if every irrelevant goal of ``after``
    is valid then so is every irrelevant goal of ``before``.
    """
    if after.trace[: len(before.trace)] != before.trace:
        return False
    if after.smt_goals[: len(before.smt_goals)] != before.smt_goals:
        return False
    v = validation_between(before, after)
    sols, sig = _generic_solutions(after.goals)
    for g, out in zip(before.goals, v.apply(sols)):
        if metavars(out):
            return False
        try:
            got = typecheck(g.env + sig, out)
        except TypeCheckError:
            return False
        if got != (g.goal_type if g.relevant else UNIT):
            return False
    if model is not None:
        return _semantic_audit(before, after, model)
    return True


def _semantic_audit(before: ProofState, after: ProofState, model) -> bool:
    from vcforge.model import ModelRejected, OracleError, eval_validity

    def all_valid(state, goals):
        for g in goals:
            if g.relevant:
                continue
            phi = state.resolve(g.prop)
            if metavars(phi):
                raise OracleError("unresolved metavariable")
            if not eval_validity(model, g.env, phi):
                return False
        return True

    try:
        if all_valid(after, after.goals + after.smt_goals):
            return all_valid(before, before.goals + before.smt_goals)
    except ModelRejected:
        return True
    except OracleError:
        return True
    return True


# --------------------------------------------------------------------------
# Running tactics

Tactic = Callable[[ProofState], tuple[Any, ProofState]]


@dataclass(frozen=True)
class Success:
    value: Any
    state: ProofState


@dataclass(frozen=True)
class Failed:
    error: TacticError
    state: ProofState


def run_tactic(tac: Tactic, state: ProofState) -> Success | Failed:
    try:
        value, st = tac(state)
    except TacticError as e:
        return Failed(e, e.state if e.state is not None else state)
    return Success(value, st)


def primitive(name: str):
    """Decorate a primitive so every successful step is logged in the trace."""

    def deco(fn):
        @functools.wraps(fn)
        def wrapper(state: ProofState, *args, **kw):
            value, after = fn(state, *args, **kw)
            entry = TraceEntry(name, state.digest(), after.digest(), validation_between(state, after))
            return value, replace(after, trace=state.trace + (entry,))

        wrapper.primitive_name = name
        return wrapper

    return deco


# --------------------------------------------------------------------------
# Primitives


@primitive("intro")
def intro(state: ProofState):
    g = _head(state)
    rest = state.goals[1:]
    if g.relevant:
        if not isinstance(g.goal_type, Arrow):
            raise TacticError(ErrorKind.SHAPE, f"cannot intro at sort {g.goal_type}", state)
        x = g.env.fresh("x")
        sub, st = _mint(state, g.env.bind(x, g.goal_type.dom), g.goal_type.cod)
        template = Lam(g.goal_type.dom, abstract(sub.witness, x), x)
        return x, replace(st, goals=(sub,) + rest, assignments=_assign(st, g.witness, template))
    phi = normalize(state.resolve(g.prop))
    if isinstance(phi, Forall):
        x = g.env.fresh(phi.name)
        env, body = g.env.bind(x, phi.sort), open_binder(phi.body, x)
    elif isinstance(phi, Implies):
        x = g.env.fresh("h")
        env, body = g.env.assume(x, phi.lhs), phi.rhs
    else:
        raise TacticError(ErrorKind.SHAPE, f"cannot intro into {phi}", state)
    sub, st = _mint(state, env, Squash(body))
    return x, replace(st, goals=(sub,) + rest, assignments=_assign(st, g.witness, UNIT_VALUE))


@primitive("exact")
def exact(state: ProofState, e: Term):
    g = _head(state)
    rest = state.goals[1:]
    if g.relevant:
        try:
            got = typecheck(g.env, e)
        except TypeCheckError as err:
            raise TacticError(ErrorKind.TYPE_MISMATCH, str(err), state) from None
        if got != g.goal_type:
            raise TacticError(ErrorKind.TYPE_MISMATCH, f"expected {g.goal_type}, got {got}", state)
        return None, replace(state, goals=rest, assignments=_assign(state, g.witness, e))
    phi = normalize(state.resolve(g.prop))
    assignments = dict(state.assignments)
    if isinstance(e, UnitLit):
        if simplify(phi) != TRUE:
            raise TacticError(ErrorKind.TYPE_MISMATCH, f"() does not prove {phi}", state)
    elif isinstance(e, FVar) and isinstance(g.env.lookup(e.name), Hyp):
        hyp = normalize(state.resolve(g.env.lookup(e.name).prop))
        try:
            assignments = unify(hyp, phi, assignments)
        except UnificationError as err:
            raise TacticError(ErrorKind.UNIFY, str(err), state) from None
    else:
        raise TacticError(ErrorKind.TYPE_MISMATCH, f"{e} is not a proof of {phi}", state)
    assignments[g.witness.id] = UNIT_VALUE
    # goals whose witness was solved by unification are done
    rest = tuple(r for r in rest if r.witness.id not in assignments)
    return None, replace(state, goals=rest, assignments=assignments)


@primitive("refine_intro")
def refine_intro(state: ProofState):
    g = _head(state)
    if g.relevant:
        raise TacticError(ErrorKind.SHAPE, f"refine_intro needs a squashed goal, got {g.goal_type}", state)
    sub, st = _mint(state, g.env, g.goal_type)
    return None, replace(st, goals=(sub,) + state.goals[1:], assignments=_assign(st, g.witness, UNIT_VALUE))


@primitive("trivial")
def trivial(state: ProofState):
    g = _irrelevant_head(state)
    if simplify(state.resolve(g.prop)) != TRUE:
        raise TacticError(ErrorKind.NOT_TRIVIAL, "not trivial", state)
    return None, replace(state, goals=state.goals[1:], assignments=_assign(state, g.witness, UNIT_VALUE))


@primitive("split")
def split(state: ProofState):
    g = _irrelevant_head(state)
    phi = normalize(state.resolve(g.prop))
    if not isinstance(phi, And):
        raise TacticError(ErrorKind.SHAPE, f"not a conjunction: {phi}", state)
    a, st = _mint(state, g.env, Squash(phi.lhs))
    b, st = _mint(st, g.env, Squash(phi.rhs))
    return None, replace(st, goals=(a, b) + state.goals[1:], assignments=_assign(st, g.witness, UNIT_VALUE))


def revert(env: Context, keep: int, phi: Term) -> Term:
    """Close ``phi`` over the entries of ``env`` after the first ``keep``."""
    for e in reversed(env.entries[keep:]):
        if isinstance(e, Binder):
            phi = Forall(e.sort, abstract(phi, e.name), e.name)
        else:
            phi = Implies(e.prop, phi)
    return phi


@primitive("join")
def join(state: ProofState):
    if len(state.goals) < 2:
        raise TacticError(ErrorKind.OUT_OF_RANGE, "join needs two goals", state)
    g1, g2 = state.goals[0], state.goals[1]
    if g1.relevant or g2.relevant:
        raise TacticError(ErrorKind.SHAPE, "join needs two irrelevant goals", state)
    k = g1.env.common_prefix(g2.env)
    env = Context(g1.env.entries[:k])
    phi = And(revert(g1.env, k, state.resolve(g1.prop)), revert(g2.env, k, state.resolve(g2.prop)))
    sub, st = _mint(state, env, Squash(phi))
    a = _assign(st, g1.witness, UNIT_VALUE)
    a[g2.witness.id] = UNIT_VALUE
    return None, replace(st, goals=(sub,) + state.goals[2:], assignments=a)


@primitive("smt")
def smt_defer(state: ProofState):
    g = _head(state)
    if g.relevant:
        raise TacticError(ErrorKind.RELEVANT, "relevant goal cannot be sent to SMT", state)
    moved = replace(g, goal_type=Squash(state.resolve(g.prop)))
    return None, replace(
        state,
        goals=state.goals[1:],
        smt_goals=state.smt_goals + (moved,),
        assignments=_assign(state, g.witness, UNIT_VALUE),
    )


@primitive("rewrite_goal")
def rewrite_goal(state: ProofState, new_prop: Term, logic: str | None = None):
    """Replace the head goal's proposition; the caller vouches for the
    equivalence (used by canonicalizers whose lemma guarantees it)."""
    g = _irrelevant_head(state)
    sub, st = _mint(state, g.env, Squash(new_prop))
    sub = replace(sub, logic=logic)
    return None, replace(st, goals=(sub,) + state.goals[1:], assignments=_assign(st, g.witness, UNIT_VALUE))


@primitive("by_lemma")
def by_lemma(state: ProofState, lemma: str):
    """Close the head irrelevant goal, justified by a named lemma that the
    caller has just checked the premise of."""
    g = _irrelevant_head(state)
    return lemma, replace(state, goals=state.goals[1:], assignments=_assign(state, g.witness, UNIT_VALUE))


# --------------------------------------------------------------------------
# Combinators


def fail(message: str = "failed") -> Tactic:
    def tac(state):
        raise TacticError(ErrorKind.USER, message, state)

    return tac


def skip(state: ProofState):
    return None, state


def catch(tac: Tactic) -> Tactic:
    """Never fails: returns ``("inl", error)`` with the original state, or
    ``("inr", value)`` with the new one."""

    def run(state):
        try:
            value, st = tac(state)
        except TacticError as e:
            return Inl(e), state
        return Inr(value), st

    return run


@dataclass(frozen=True)
class Inl:
    value: Any


@dataclass(frozen=True)
class Inr:
    value: Any


DEFAULT_REPEAT_CAP = 10_000


def repeat(tac: Tactic, cap: int = DEFAULT_REPEAT_CAP) -> Tactic:
    def run(state):
        values = []
        for _ in range(cap):
            try:
                v, state = tac(state)
            except TacticError:
                return values, state
            values.append(v)
        raise TacticError(ErrorKind.REPEAT_CAP, f"repeat exceeded {cap} iterations", state)

    return run


def seq(*tacs: Tactic) -> Tactic:
    def run(state):
        value = None
        for t in tacs:
            value, state = t(state)
        return value, state

    return run


def or_else(*tacs: Tactic) -> Tactic:
    def run(state):
        err = TacticError(ErrorKind.USER, "no alternative", state)
        for t in tacs:
            try:
                return t(state)
            except TacticError as e:
                err = e
        raise err

    return run


first = or_else


def divide(n: int, left: Tactic, right: Tactic) -> Tactic:
    def run(state):
        if n < 0:
            raise TacticError(ErrorKind.NEGATIVE_N, f"divide at {n}", state)
        if n > len(state.goals):
            raise TacticError(ErrorKind.OUT_OF_RANGE, f"divide at {n} with {len(state.goals)} goals", state)
        lgoals, rgoals = state.goals[:n], state.goals[n:]
        x, lst = left(replace(state, goals=lgoals, smt_goals=()))
        rstart = replace(lst, goals=rgoals, smt_goals=())
        y, rst = right(rstart)
        solved = rst.assignments
        return (x, y), replace(
            rst,
            goals=tuple(g for g in lst.goals + rst.goals if g.witness.id not in solved),
            smt_goals=state.smt_goals + lst.smt_goals + rst.smt_goals,
        )

    return run


def on_all_goals(tac: Tactic) -> Tactic:
    """Run ``tac`` once per goal, each in isolation."""

    def run(state):
        if not state.goals:
            return [], state
        return divide(1, tac, on_all_goals(tac))(state)

    return run


def dump(label: str, sink: Callable[[str], None] | None = None) -> Tactic:
    def run(state):
        text = f"== {label} ==\n{format_state(state)}"
        if sink is None:
            print(text)
        else:
            sink(text)
        return None, state

    return run


# --------------------------------------------------------------------------
# Rendering


def format_state(state: ProofState) -> str:
    if not state.goals and not state.smt_goals:
        return "no goals"
    lines = []
    if not state.goals:
        lines.append("no goals")
    for i, g in enumerate(state.goals, 1):
        lines.append(f"goal {i} of {len(state.goals)} [?{g.witness.id}]")
        lines.extend(_format_goal(state, g))
    for i, g in enumerate(state.smt_goals, 1):
        lines.append(f"smt goal {i} of {len(state.smt_goals)}")
        lines.extend(_format_goal(state, g))
    return "\n".join(lines)


def _format_goal(state: ProofState, g: Goal) -> list[str]:
    from vcforge.sexpr import show, show_sort

    out = []
    for e in g.env.entries:
        if isinstance(e, Binder):
            out.append(f"  {e.name} : {show_sort(e.sort)}")
        else:
            out.append(f"  {e.name} : {show(state.resolve(e.prop))}")
    if g.relevant:
        out.append(f"  ⊢ {show_sort(g.goal_type)}")
    else:
        out.append(f"  ⊨ {show(state.resolve(g.prop))}")
    return out
