import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vcforge.engine import (
    ErrorKind,
    Failed,
    Inl,
    Inr,
    ProofState,
    Success,
    TacticError,
    audit_evolution,
    catch,
    divide,
    dump,
    exact,
    fail,
    format_state,
    initial_state,
    intro,
    join,
    new_goal,
    on_all_goals,
    refine_intro,
    repeat,
    run_tactic,
    seq,
    skip,
    smt_defer,
    split,
    trivial,
)
from vcforge.model import FiniteModel, eval_validity
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
    Arrow,
    BoolLit,
    Context,
    Eq,
    Forall,
    FVar,
    Implies,
    IntLit,
    Lam,
    Metavar,
    BVar,
    typecheck,
)

PQ = Context().bind("P", PROP).bind("Q", PROP)


def goal_props(state):
    return [g.prop for g in state.goals]


def test_intro_on_arrow_goal():
    _, s0 = initial_state(Context(), Arrow(INT, INT))
    x, s1 = intro(s0)
    (g,) = s1.goals
    assert g.goal_type == INT and g.env.binders[0].sort == INT
    tmpl = s1.assignments[0]
    assert isinstance(tmpl, Lam) and tmpl.sort == INT and tmpl.name == x


def test_intro_then_exact_42():
    g0, s0 = initial_state(Context(), Arrow(INT, INT))
    _, s1 = intro(s0)
    _, s2 = exact(s1, IntLit(42))
    assert s2.goals == ()
    sol = s2.solution(g0)
    assert sol == Lam(INT, IntLit(42), sol.name)
    assert typecheck(Context(), sol) == Arrow(INT, INT)
    assert audit_evolution(s0, s2)


def test_intro_forall_prop():
    _, s0 = initial_state(Context(), Forall(BOOL, TRUE))
    _, s1 = intro(s0)
    (g,) = s1.goals
    assert g.prop == TRUE and g.env.binders[0].sort == BOOL


def test_intro_errors():
    _, s0 = initial_state(Context(), INT)
    r = run_tactic(intro, s0)
    assert isinstance(r, Failed) and r.error.kind == ErrorKind.SHAPE
    r = run_tactic(intro, ProofState())
    assert isinstance(r, Failed) and r.error.kind == ErrorKind.EMPTY_GOALS


def test_exact_variable():
    ctx = Context().bind("x", INT)
    g, s0 = initial_state(ctx, INT)
    _, s1 = exact(s0, FVar("x"))
    assert s1.goals == () and s1.solution(g) == FVar("x")


def test_exact_type_mismatch_keeps_state():
    _, s0 = initial_state(Context(), INT)
    r = run_tactic(lambda s: exact(s, BoolLit(True)), s0)
    assert isinstance(r, Failed) and r.error.kind == ErrorKind.TYPE_MISMATCH
    assert r.state.observable() == s0.observable()


def test_exact_unit_on_true():
    g, s0 = initial_state(Context(), TRUE)
    _, s1 = exact(s0, UNIT_VALUE)
    assert s1.goals == () and s1.solution(g) == UNIT_VALUE


def test_refine_intro():
    _, s0 = initial_state(Context(), Eq(INT, IntLit(0), IntLit(0)))
    _, s1 = refine_intro(s0)
    (g,) = s1.goals
    assert not g.relevant and g.prop == Eq(INT, IntLit(0), IntLit(0))
    ctx = Context().bind("P", PROP).assume("h", FVar("P"))
    _, s0 = initial_state(ctx, FVar("P"))
    _, s1 = refine_intro(s0)
    _, s2 = exact(s1, FVar("h"))
    assert s2.goals == ()
    _, s0 = initial_state(Context(), INT)
    assert run_tactic(refine_intro, s0).error.kind == ErrorKind.SHAPE


@pytest.mark.parametrize("phi,ok", [(And(TRUE, TRUE), True), (Eq(INT, IntLit(0), IntLit(0)), True), (FALSE, False)])
def test_trivial(phi, ok):
    _, s0 = initial_state(Context(), phi)
    r = run_tactic(trivial, s0)
    assert isinstance(r, Success) == ok
    if not ok:
        assert r.error.kind == ErrorKind.NOT_TRIVIAL


def test_split():
    _, s0 = initial_state(PQ, And(FVar("P"), FVar("Q")))
    _, s1 = split(s0)
    assert goal_props(s1) == [FVar("P"), FVar("Q")]
    _, s0 = initial_state(PQ, FVar("P"))
    assert isinstance(run_tactic(split, s0), Failed)


def test_split_then_join_equivalent():
    phi = And(Implies(FVar("P"), FVar("Q")), FVar("P"))
    _, s0 = initial_state(PQ, phi)
    _, s2 = seq(split, join)(s0)
    (g,) = s2.goals
    m = FiniteModel()
    assert eval_validity(m, g.env, g.prop) == eval_validity(m, PQ, phi)
    assert audit_evolution(s0, s2, m)


def test_join_same_env():
    P = Context().bind("p", Arrow(INT, PROP)).bind("q", Arrow(INT, PROP)).bind("x", INT)
    px, qx = App(FVar("p"), FVar("x")), App(FVar("q"), FVar("x"))
    _, s = initial_state(P, px)
    _, s = new_goal(s, P, qx)
    _, s1 = join(s)
    assert goal_props(s1) == [And(px, qx)] and s1.goals[0].env == P


def test_join_reverts_extra_binders():
    base = Context().bind("p", Arrow(INT, PROP)).bind("Q", PROP).bind("x", INT)
    _, s = initial_state(base.bind("y", INT), App(FVar("p"), FVar("y")))
    _, s = new_goal(s, base, FVar("Q"))
    _, s1 = join(s)
    (g,) = s1.goals
    assert g.env == base
    assert g.prop == And(Forall(INT, App(FVar("p"), BVar(0)), "y"), FVar("Q"))


def test_join_empty_prefix():
    a = Context().bind("x", BOOL)
    b = Context().bind("y", BOOL)
    _, s = initial_state(a, Eq(BOOL, FVar("x"), FVar("x")))
    _, s = new_goal(s, b, Eq(BOOL, FVar("y"), FVar("y")))
    _, s1 = join(s)
    (g,) = s1.goals
    assert g.env == Context()
    assert isinstance(g.prop.lhs, Forall) and isinstance(g.prop.rhs, Forall)


def test_join_with_relevant_goal_fails():
    _, s = initial_state(Context(), INT)
    _, s = new_goal(s, Context(), TRUE)
    assert run_tactic(join, s).error.kind == ErrorKind.SHAPE


def test_smt_defer():
    _, s0 = initial_state(PQ, FVar("P"))
    _, s1 = smt_defer(s0)
    assert len(s1.goals) == 0 and len(s1.smt_goals) == 1
    _, s0 = initial_state(Context(), INT)
    assert run_tactic(smt_defer, s0).error.kind == ErrorKind.RELEVANT


def test_catch_rolls_back():
    _, s0 = initial_state(PQ, FVar("P"))
    err = TacticError(ErrorKind.USER, "boom")
    v, s1 = catch(fail("boom"))(s0)
    assert isinstance(v, Inl) and v.value.kind == err.kind
    assert s1 is s0


def test_catch_success():
    _, s0 = initial_state(Context(), TRUE)
    v, s1 = catch(lambda s: exact(s, UNIT_VALUE))(s0)
    assert isinstance(v, Inr) and s1.goals == ()


def test_catch_restores_metavariables():
    ctx = Context().assume("h", Eq(INT, IntLit(3), IntLit(3)))
    _, s = initial_state(ctx, INT)
    _, s = new_goal(s, ctx, Eq(INT, Metavar(0, INT), IntLit(3)))
    # put the squashed goal first so exact(h) sees it
    s = ProofState(goals=(s.goals[1], s.goals[0]), fresh=s.fresh)
    unifies_then_fails = seq(lambda st: exact(st, FVar("h")), fail("later"))
    # the unification alone succeeds and assigns ?0
    _, mid = exact(s, FVar("h"))
    assert 0 in mid.assignments
    v, after = catch(unifies_then_fails)(s)
    assert isinstance(v, Inl)
    assert after.observable() == s.observable()
    assert 0 not in after.assignments


def test_repeat_split_leaves():
    a, b, c, d = (FVar(n) for n in "abcd")
    ctx = Context().bind("a", PROP).bind("b", PROP).bind("c", PROP).bind("d", PROP)
    phi = And(And(And(a, b), c), d)
    _, s0 = initial_state(ctx, phi)
    vals, s1 = repeat(split)(s0)
    assert goal_props(s1) == [a, b, c, d] and len(vals) == 3


def test_repeat_fail_and_empty():
    _, s0 = initial_state(PQ, FVar("P"))
    assert repeat(fail())(s0) == ([], s0)
    assert repeat(trivial)(ProofState())[0] == []


def test_repeat_cap():
    _, s0 = initial_state(PQ, FVar("P"))
    with pytest.raises(TacticError) as e:
        repeat(skip, cap=5)(s0)
    assert e.value.kind == ErrorKind.REPEAT_CAP


def _two_unit_goals():
    _, s = initial_state(Context(), UNIT)
    _, s = new_goal(s, Context(), UNIT)
    return s


def test_divide_examples():
    s = _two_unit_goals()
    u = lambda st: exact(st, UNIT_VALUE)
    _, s1 = divide(1, u, u)(s)
    assert s1.goals == ()
    with pytest.raises(TacticError) as e:
        divide(-1, skip, skip)(s)
    assert e.value.kind == ErrorKind.NEGATIVE_N
    with pytest.raises(TacticError) as e:
        divide(3, skip, skip)(s)
    assert e.value.kind == ErrorKind.OUT_OF_RANGE
    both = seq(u, u)
    assert divide(0, skip, both)(s)[1].observable() == both(s)[1].observable()


def test_on_all_goals():
    _, s = initial_state(Context(), TRUE)
    _, s = new_goal(s, Context(), And(TRUE, TRUE))
    _, s1 = on_all_goals(trivial)(s)
    assert s1.goals == ()


def test_audit_reflexive_and_trace():
    _, s0 = initial_state(PQ, And(FVar("P"), FVar("Q")))
    assert audit_evolution(s0, s0)
    _, s1 = split(s0)
    _, s2 = smt_defer(s1)
    assert [t.primitive for t in s2.trace] == ["split", "smt"]
    assert s2.trace[0].before == s0.digest() and s2.trace[1].after == s2.digest()
    assert audit_evolution(s0, s1) and audit_evolution(s1, s2) and audit_evolution(s0, s2)


def test_audit_detects_dropped_goal():
    from dataclasses import replace

    _, s0 = initial_state(Context(), INT)
    assert not audit_evolution(s0, replace(s0, goals=()))


def test_format_state_and_dump():
    _, s0 = initial_state(Context().bind("x", INT), Eq(INT, FVar("x"), FVar("x")))
    text = format_state(s0)
    assert "goal 1 of 1" in text and "x : Int" in text
    assert format_state(ProofState()) == "no goals"
    out = []
    dump("here", out.append)(s0)
    assert out[0].startswith("== here ==")


def test_digest_is_stable():
    _, a = initial_state(PQ, FVar("P"))
    _, b = initial_state(PQ, FVar("P"))
    assert a.digest() == b.digest()


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32))
def test_random_scripts_audit(seed):
    from vcforge.suites import audit_suite

    r = audit_suite(seed, trials=5)
    assert r.failures == 0, r.examples
