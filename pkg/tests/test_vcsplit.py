import random
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vcforge import gen, suites
from vcforge.engine import fail
from vcforge.model import FiniteModel, eval_validity, interpretations
from vcforge.problem import default_registry, load_problem, problem_registry
from vcforge.terms import (
    BOOL,
    FALSE,
    PROP,
    TRUE,
    And,
    Context,
    Forall,
    FVar,
    Implies,
    IntLit,
    Or,
    Uninterp,
    WithTactic,
    drop_markers,
)
from vcforge.vcsplit import (
    NotPShaped,
    Obligation,
    Polarity,
    SplitError,
    SplitResult,
    UnknownTactic,
    check_split_completeness_P,
    check_split_soundness,
    classify_positions,
    mark,
    p_shape_path,
    run_pipeline,
    split_vc,
)

FIX = Path(__file__).parent.parent / "fixtures"
T = Uninterp("t", 2)
X, R, S = FVar("X"), FVar("R"), FVar("S")
BASE = Context().bind("X", PROP).bind("R", PROP).bind("S", PROP)


def vc0():
    return Implies(X, Forall(T, And(WithTactic(R, "tau1"), Implies(R, S)), "x"))


def test_mark():
    assert mark(TRUE, "t") == WithTactic(TRUE, "t")
    with pytest.raises(SplitError):
        mark(IntLit(1), "t")


def test_assert_by_desugaring_shape():
    phi, k = FVar("P"), FVar("K")
    ctx = Context().bind("P", PROP).bind("K", PROP)
    vc = And(mark(phi, "tau", ctx), Implies(phi, k))
    r = split_vc(ctx, vc)
    assert r.skeleton == And(TRUE, Implies(phi, k))
    assert [o.phi for o in r.obligations] == [phi]


def test_classify_vc0():
    assert classify_positions(vc0()) == [(("rhs", "body", "lhs"), Polarity.POSITIVE)]


def test_classify_negative():
    assert classify_positions(Implies(WithTactic(FALSE, "tau"), FALSE)) == [(("lhs",), Polarity.OTHER)]


def test_classify_nested_implies_left():
    vc = And(TRUE, Implies(And(TRUE, WithTactic(R, "t")), S))
    assert classify_positions(vc)[0][1] is Polarity.OTHER


def test_polarity_under_other_stays_other():
    vc = Implies(Forall(BOOL, And(TRUE, Implies(TRUE, WithTactic(R, "t")))), S)
    assert [p for _, p in classify_positions(vc)] == [Polarity.OTHER]


def test_split_vc0():
    r = split_vc(BASE, vc0())
    assert r.skeleton == Implies(X, Forall(T, And(TRUE, Implies(R, S)), "x"))
    (o,) = r.obligations
    assert o.phi == R and o.tactic == "tau1"
    assert [(type(e).__name__, e.name) for e in o.delta.entries] == [("Hyp", "_"), ("Binder", "x")]
    assert o.delta.hyps[0].prop == X and o.delta.binders[0].sort == T


def test_assumption_left_as_is():
    r = split_vc(BASE, vc0())
    assert r.skeleton.rhs.body.rhs == Implies(R, S)


def test_split_negative_drops_marker():
    r = split_vc(Context(), Implies(WithTactic(FALSE, "tau"), FALSE))
    assert r.skeleton == Implies(FALSE, FALSE) and r.obligations == ()


def test_zero_markers():
    vc = Implies(X, And(R, S))
    assert split_vc(BASE, vc) == SplitResult(vc, ())


def test_nested_markers_recurse():
    vc = WithTactic(And(R, Implies(X, WithTactic(S, "inner"))), "outer")
    r = split_vc(BASE, vc)
    assert r.skeleton == TRUE
    outer, inner = r.obligations
    assert outer.tactic == "outer" and outer.phi == And(R, Implies(X, TRUE))
    assert inner.tactic == "inner" and inner.phi == S and inner.delta.hyps[0].prop == X


def test_markers_on_true_sound():
    vc = And(WithTactic(TRUE, "a"), Forall(BOOL, WithTactic(TRUE, "b")))
    m = FiniteModel()
    assert check_split_soundness(m, Context(), vc)


def test_vc0_all_interpretations():
    m = FiniteModel(sizes={"t": 2})
    sig = {"X": PROP, "R": PROP, "S": PROP}
    for i in interpretations(m, sig):
        assert check_split_soundness(i, Context(), vc0())


def test_skeleton_preservation():
    rng = random.Random(11)
    base = gen.theorem_signature()
    for _ in range(200):
        vc = gen.marked_formula(rng, 4)
        r = split_vc(base, vc)
        # erasing markers on both sides only differs where a marker became True
        n_pos = sum(1 for _, p in classify_positions(vc) if p is Polarity.POSITIVE)
        assert (drop_markers(vc) == r.skeleton) or n_pos > 0
        assert not any(p is Polarity.POSITIVE for _, p in classify_positions(r.skeleton))


def test_p_shape():
    assert p_shape_path(WithTactic(R, "t")) == ()
    with pytest.raises(NotPShaped):
        p_shape_path(Or(WithTactic(R, "t"), S))
    with pytest.raises(NotPShaped):
        p_shape_path(And(WithTactic(R, "t"), WithTactic(S, "u")))


def test_p_context_cases():
    m = FiniteModel(sizes={"t": 2})
    sig = {"X": PROP, "R": PROP, "S": PROP}
    cases = [And(S, WithTactic(R, "t")), Forall(T, WithTactic(R, "t")), WithTactic(R, "t")]
    for vc in cases:
        for i in interpretations(m, sig):
            assert check_split_completeness_P(i, Context(), vc)


def test_or_is_not_complete():
    # the Or choice is sound but gives up completeness, so it is outside P
    vc = Or(WithTactic(R, "t"), Implies(R, FALSE))
    m = FiniteModel().with_interp({"R": False})
    r = split_vc(BASE, vc)
    assert eval_validity(m, BASE, vc)
    assert not eval_validity(m, BASE, r.obligations[0].phi)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32))
def test_theorem1_property(seed):
    r = suites.theorem1_suite(seed, trials=10)
    assert r.failures == 0, r.examples


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32))
def test_theorem2_property(seed):
    r = suites.theorem2_suite(seed, trials=10)
    assert r.failures == 0, r.examples


def _forget_obligations(base, vc):
    r = split_vc(base, vc)
    return SplitResult(r.skeleton, ())


def _assume_own_goal(base, vc):
    r = split_vc(base, vc)
    return SplitResult(r.skeleton, tuple(Obligation(o.delta.assume("_", o.phi), o.phi, o.tactic, o.path) for o in r.obligations))


@pytest.mark.parametrize("broken", [_forget_obligations, _assume_own_goal])
def test_theorem1_suite_catches_unsound_splitter(monkeypatch, broken):
    monkeypatch.setattr(suites, "split_vc", broken)
    assert suites.theorem1_suite(0, trials=300).failures > 0


def test_pipeline_zero_markers():
    r = run_pipeline(BASE, Implies(X, X), {})
    assert r.reports == () and r.skeleton_status == "trivial"
    r = run_pipeline(BASE, Implies(X, R), {})
    assert r.skeleton_status == "smt" and len(r.remaining_smt) == 1


def test_pipeline_unknown_tactic():
    with pytest.raises(UnknownTactic, match="tau1"):
        run_pipeline(BASE, vc0(), {})


def test_pipeline_script_error_continues():
    vc = And(WithTactic(R, "bad"), WithTactic(TRUE, "good"))
    r = run_pipeline(BASE, vc, {"bad": fail("nope"), "good": default_registry()["trivial"]})
    assert [rep.status for rep in r.reports] == ["error", "solved"]
    assert "nope" in r.reports[0].error


def test_pipeline_vc0_defers_to_smt():
    p = load_problem(str(FIX / "vc0.vcf"))
    r = run_pipeline(p.ctx, p.goal, problem_registry(p))
    (rep,) = r.reports
    assert rep.status == "deferred"
    assert len(r.remaining_smt) == 2  # R under Delta, plus the skeleton


def test_pipeline_poly_multiply():
    p = load_problem(str(FIX / "poly_multiply.vcf"))
    r = run_pipeline(p.ctx, p.goal, problem_registry(p))
    (rep,) = r.reports
    assert rep.obligation.tactic == "canon-semiring"
    # canonical forms agree, so the lemma closes it without the solver
    assert rep.status == "solved"
    assert r.skeleton_status == "smt" and len(r.remaining_smt) == 1


def test_pipeline_workers_same_result():
    vc = And(WithTactic(TRUE, "a"), WithTactic(And(TRUE, TRUE), "a"))
    reg = {"a": default_registry()["trivial"]}
    assert run_pipeline(Context(), vc, reg, workers=4) == run_pipeline(Context(), vc, reg)
