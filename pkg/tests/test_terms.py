import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vcforge import gen
from vcforge.model import FiniteModel, eval_term, eval_validity
from vcforge.sexpr import parse_term, show
from vcforge.terms import (
    BOOL,
    INT,
    PROP,
    TRUE,

    And,
    App,
    Arith,
    Arrow,
    BoolLit,
    BVar,
    Context,
    Eq,
    Forall,
    FuelExhausted,
    FVar,
    Implies,
    IntLit,
    Lam,
    Metavar,
    Squash,
    TypeCheckError,
    WithTactic,
    abstract,
    apply,
    drop_markers,
    instantiate,
    normalize,
    open_binder,
    shift,
    simplify,
    subst,
    typecheck,
)

x_body = BVar(0)


def test_subst_identity_body():
    assert subst(x_body, IntLit(5)) == IntLit(5)


def test_subst_doubling():
    assert subst(Arith("+", (BVar(0), BVar(0))), IntLit(2)) == Arith("+", (IntLit(2), IntLit(2)))


def test_subst_under_binder_does_not_capture():
    # body of fun x -> fun y -> x
    body = Lam(INT, BVar(1), "y")
    got = subst(body, IntLit(7))
    assert got == Lam(INT, IntLit(7), "y")
    m = FiniteModel()
    assert eval_term(m, App(got, IntLit(3))) == 7


def test_subst_shifts_open_replacement():
    # replacing into a binder must shift loose indices of the replacement
    body = Lam(INT, BVar(1), "y")
    got = instantiate(body, BVar(0))
    assert got == Lam(INT, BVar(1), "y")


def test_open_and_abstract_are_inverse():
    body = Arith("+", (BVar(0), FVar("z")))
    assert abstract(open_binder(body, "x"), "x") == body


def test_shift():
    assert shift(Lam(INT, Arith("+", (BVar(0), BVar(1)))), 2) == Lam(INT, Arith("+", (BVar(0), BVar(3))))


def test_typecheck_examples():
    assert typecheck(Context(), Lam(INT, BVar(0))) == Arrow(INT, INT)
    p = Forall(BOOL, Implies(Eq(BOOL, BVar(0), BoolLit(True)), Eq(BOOL, BVar(0), BoolLit(True))))
    assert typecheck(Context(), p) == PROP
    assert typecheck(Context(), WithTactic(TRUE, "t")) == PROP
    assert typecheck(Context(), Squash(TRUE)) == PROP


def test_typecheck_errors_carry_path():
    with pytest.raises(TypeCheckError) as e:
        typecheck(Context(), And(TRUE, IntLit(1)))
    assert e.value.path
    with pytest.raises(TypeCheckError, match="unbound"):
        typecheck(Context(), FVar("nope"))
    with pytest.raises(TypeCheckError):
        typecheck(Context(), Eq(INT, IntLit(1), BoolLit(True)))


def test_metavar_sort_is_recorded():
    assert typecheck(Context(), Metavar(3, INT)) == INT


def test_normalize_examples():
    assert normalize(App(Lam(INT, BVar(0)), IntLit(0))) == IntLit(0)
    assert normalize(App(Lam(INT, Arith("+", (BVar(0), BVar(0)))), IntLit(3))) == IntLit(6)


def test_normalize_keeps_markers_unless_asked():
    t = WithTactic(Eq(INT, Arith("+", (IntLit(1), IntLit(1))), IntLit(2)), "t")
    assert isinstance(normalize(t), WithTactic)
    assert not isinstance(normalize(t, unfold_tactics=True), WithTactic)
    assert drop_markers(t) == t.phi


def test_normalize_fuel():
    omega_ish = apply(Lam(INT, Arith("+", (BVar(0), BVar(0)))), IntLit(1))
    with pytest.raises(FuelExhausted):
        big = omega_ish
        for _ in range(50):
            big = apply(Lam(INT, Arith("+", (BVar(0), BVar(0)))), big)
        normalize(big, fuel=10)


def test_simplify_laws():
    assert simplify(And(TRUE, Eq(INT, FVar("x"), FVar("x")))) == TRUE
    assert simplify(Implies(TRUE, FVar("p"))) == FVar("p")
    assert simplify(Eq(INT, Arith("+", (FVar("x"), IntLit(0))), FVar("x"))) == TRUE


def test_euclidean_division():
    m = FiniteModel()
    assert eval_term(m, Arith("div", (IntLit(-7), IntLit(2)))) == -4
    assert eval_term(m, Arith("mod", (IntLit(-7), IntLit(2)))) == 1
    assert eval_term(m, Arith("mod", (IntLit(7), IntLit(-2)))) == 1
    assert normalize(Arith("mod", (IntLit(-7), IntLit(2)))) == IntLit(1)


def test_context_telescope():
    ctx = Context().bind("x", INT).assume("_", Eq(INT, FVar("x"), IntLit(1))).assume("_", TRUE)
    assert [b.name for b in ctx.binders] == ["x"]
    assert len(ctx.hyps) == 2
    assert ctx.fresh("x") != "x"


SIG = Context().bind("x", INT).bind("b", BOOL).bind("f", Arrow(INT, INT))


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32))
def test_normalize_preserves_meaning_and_sort(seed):
    rng = random.Random(seed)
    sort = rng.choice([INT, BOOL, Arrow(INT, INT)])
    t = gen.typed_term(rng, SIG, sort, 6)
    n = normalize(t)
    assert typecheck(SIG, t) == typecheck(SIG, t) == typecheck(SIG, n)
    m = FiniteModel(int_range=(-3, 3))
    env = {"x": rng.randint(-3, 3), "b": rng.random() < 0.5, "f": lambda v: 2 * v - 1}
    a, c = eval_term(m, t, env), eval_term(m, n, env)
    if sort == Arrow(INT, INT):
        assert all(a(v) == c(v) for v in range(-3, 4))
    else:
        assert a == c


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32))
def test_substitution_lemma(seed):
    rng = random.Random(seed)
    ctx = SIG.bind("v", INT)
    body = abstract(gen.typed_term(rng, ctx, INT, 5), "v")
    arg = gen.typed_term(rng, SIG, INT, 3)
    m = FiniteModel()
    env = {"x": rng.randint(-9, 9), "b": True, "f": lambda v: v + 3}
    direct = eval_term(m, instantiate(body, arg), env)
    via = eval_term(m, open_binder(body, "v"), {**env, "v": eval_term(m, arg, env)})
    assert direct == via


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32))
def test_print_parse_round_trip(seed):
    rng = random.Random(seed)
    base = gen.theorem_signature()
    t = gen.marked_formula(rng, 4)
    text = show(t)
    assert parse_term(text, base) == t
    u = gen.typed_term(rng, SIG, rng.choice([INT, BOOL, Arrow(INT, INT)]), 5)
    assert parse_term(show(u), SIG) == u


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32))
def test_with_tactic_is_transparent(seed):
    rng = random.Random(seed)
    base = gen.theorem_signature()
    phi = gen.marked_formula(rng, 3, marker_rate=0.0)
    m = FiniteModel(sizes={"U": 2})
    assert eval_validity(m, base, phi) == eval_validity(m, base, WithTactic(phi, "n"))


def test_typecheck_is_deterministic():
    rng = random.Random(4)
    for _ in range(50):
        t = gen.typed_term(rng, SIG, INT, 5)
        assert typecheck(SIG, t) == typecheck(SIG, t)
