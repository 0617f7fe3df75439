import random
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vcforge import gen
from vcforge.canon import (
    INT_ADD,
    INT_MUL,
    MMult,
    MonoidOps,
    MUnit,
    MVar,
    canon_int,
    canon_monoid,
    canon_monoid_term,
    canon_semiring,
    denote,
    flatten,
    mldenote,
    poly_of,
    reflect,
    reify_monoid,
)
from vcforge.engine import ErrorKind, TacticError, initial_state
from vcforge.model import FiniteModel, eval_term
from vcforge.problem import load_problem
from vcforge.sexpr import parse_term
from vcforge.terms import INT, Arith, Context, Eq, FVar, IntLit, Uninterp, abstract, instantiate

FIX = Path(__file__).parent.parent / "fixtures"
a, b, c = FVar("a"), FVar("b"), FVar("c")
ABC = Context().bind("a", INT).bind("b", INT).bind("c", INT).bind("x", INT).bind("y", INT)
NONCOMM_ADD = MonoidOps(IntLit(0), "+")


def plus(x, y):
    return Arith("+", (x, y))


def times(x, y):
    return Arith("*", (x, y))


def test_reify_examples():
    e, atoms = reify_monoid(INT_ADD, plus(plus(a, IntLit(0)), b))
    assert e == MMult(MMult(MVar(0), MUnit()), MVar(1)) and atoms == [a, b]
    assert reify_monoid(INT_ADD, c) == (MVar(0), [c])


def test_flatten_examples():
    assert flatten(MMult(MMult(MVar(0), MUnit()), MVar(1))) == [0, 1]
    assert flatten(MUnit()) == []


def test_mldenote_fold():
    atoms = [a, b, c]
    assert mldenote(INT_ADD, [], atoms) == IntLit(0)
    assert mldenote(INT_ADD, [0], atoms) == a
    assert mldenote(INT_ADD, [0, 1, 2], atoms) == plus(a, plus(b, c))


def _goal(lhs, rhs, ctx=ABC):
    return initial_state(ctx, Eq(INT, lhs, rhs))[1]


def test_canon_monoid_associativity():
    _, st = canon_monoid(NONCOMM_ADD)(_goal(plus(plus(a, b), c), plus(a, plus(b, c))))
    assert st.goals == ()


def test_canon_monoid_commutative_vs_not():
    _, st = canon_monoid(INT_ADD)(_goal(plus(b, a), plus(a, b)))
    assert st.goals == ()
    _, st = canon_monoid(NONCOMM_ADD)(_goal(plus(b, a), plus(a, b)))
    (g,) = st.goals
    assert g.prop == Eq(INT, plus(b, a), plus(a, b))
    assert eval_term(FiniteModel(), g.prop, {"a": 3, "b": 4})


def test_canon_monoid_heap():
    p = load_problem(str(FIX / "heap.vcf"))
    from vcforge.problem import problem_registry
    from vcforge.vcsplit import run_pipeline

    r = run_pipeline(p.ctx, p.goal, problem_registry(p))
    assert all(rep.status == "solved" for rep in r.reports)


def test_canon_monoid_needs_equality():
    st = initial_state(ABC, Arith("<", (a, b)))[1]
    with pytest.raises(TacticError) as e:
        canon_monoid(INT_ADD)(st)
    assert e.value.kind == ErrorKind.SHAPE


def test_poly_examples():
    assert poly_of(times(plus(a, b), plus(a, b))).as_dict() == {("a", "a"): 1, ("a", "b"): 2, ("b", "b"): 1}
    assert poly_of(plus(times(IntLit(0), FVar("x")), FVar("y"))).as_dict() == {("y",): 1}
    m = Arith("mod", (FVar("a0"), FVar("p44")))
    p = poly_of(m)
    assert p.monomials == (((0,), 1),) and p.atoms == (m,)


def test_negative_literal_is_coefficient():
    p = poly_of(times(IntLit(-5), a))
    assert p.monomials == (((0,), -5),)


def test_big_coefficients():
    p = poly_of(times(times(IntLit(2**44), a), IntLit(2**44)))
    assert p.monomials == (((0,), 2**88),)


def test_canon_semiring_examples():
    _, st = canon_semiring(_goal(FVar("x"), FVar("x")))
    assert st.goals == () and st.smt_goals == ()
    _, st = canon_semiring(_goal(plus(FVar("x"), IntLit(1)), plus(FVar("x"), IntLit(2))))
    assert st.goals == () and len(st.smt_goals) == 1
    g = st.smt_goals[0]
    assert g.logic == "UFLIA"
    assert not eval_term(FiniteModel(), g.prop, {"x": 0})


def test_canon_semiring_rejects_non_int():
    st = initial_state(Context().bind("p", Uninterp("V", 2)), Eq(Uninterp("V", 2), FVar("p"), FVar("p")))[1]
    with pytest.raises(TacticError):
        canon_semiring(st)


def test_poly_multiply_core_assertion():
    p = load_problem(str(FIX / "poly_multiply.vcf"))
    lhs = p.defs["h_r_expand"]
    rhs = parse_term("(+ hh_expand (* b (+ (* (* n n) 4) -5)))", p.ctx, defs=p.defs)
    assert poly_of(lhs) == poly_of(rhs)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32))
def test_reify_round_trip(seed):
    rng = random.Random(seed)
    atoms = tuple(FVar(n) for n in "abcd")
    t = gen.monoid_tree(rng, 5, "+", IntLit(0), atoms)
    e, table = reify_monoid(INT_ADD, t)
    assert denote(INT_ADD, e, table) == t


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32))
def test_flatten_preserves_value(seed):
    rng = random.Random(seed)
    atoms = tuple(FVar(n) for n in "abcd")
    t = gen.monoid_tree(rng, 5, "+", IntLit(0), atoms)
    e, table = reify_monoid(INT_ADD, t)
    env = {n: rng.randint(-100, 100) for n in "abcd"}
    m = FiniteModel()
    assert eval_term(m, mldenote(INT_ADD, flatten(e), table), env) == eval_term(m, t, env)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32), st.randoms(use_true_random=False))
def test_commutative_sort_stable(seed, shuffler):
    rng = random.Random(seed)
    atoms = [FVar(n) for n in "abcd"]
    xs = [rng.choice(atoms) for _ in range(rng.randint(0, 7))]
    ys = list(xs)
    shuffler.shuffle(ys)
    build = lambda zs: mldenote(INT_MUL, list(range(len(zs))), zs)
    assert canon_monoid_term(INT_MUL, build(xs)) == canon_monoid_term(INT_MUL, build(ys))


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32))
def test_semiring_denotation_and_idempotence(seed):
    rng = random.Random(seed)
    t = gen.ring_term(rng, 5)
    p = poly_of(t)
    assert poly_of(reflect(p)) == p
    assert canon_int(canon_int(t)) == canon_int(t)
    env = gen.int_assignment(rng)
    m = FiniteModel()
    assert eval_term(m, t, env) == eval_term(m, reflect(p), env)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32))
def test_opaque_atom_substitution(seed):
    rng = random.Random(seed)
    t = gen.ring_term(rng, 4)
    atom = Arith("mod", (FVar("a"), IntLit(7)))
    with_atom = plus(times(atom, t), atom)
    with_var = plus(times(FVar("z"), t), FVar("z"))
    # abstracting the atom as a variable then plugging it back commutes with poly_of
    back = instantiate(abstract(canon_int(with_var), "z"), atom)
    assert poly_of(back) == poly_of(with_atom)
