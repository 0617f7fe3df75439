import pytest

from vcforge.engine import ErrorKind, TacticError, initial_state
from vcforge.problem import (
    default_registry,
    parse_problem,
    parse_script,
    problem_registry,
    show_problem,
)
from vcforge.sexpr import ParseError, infix_sort, parse_sort, parse_term, read_all, read_one, show, show_infix
from vcforge.terms import INT, PROP, Arrow, BVar, Context, Eq, Forall, IntLit, Uninterp

P_INT = Context().bind("P", Arrow(INT, PROP)).bind("x", INT)


def test_reader_positions():
    with pytest.raises(ParseError) as e:
        read_all("(a\n  (b c)")
    assert e.value.pos is not None
    with pytest.raises(ParseError):
        read_all(")")
    assert len(read_all("; comment\n(a) (b)")) == 2


def test_parse_sort():
    assert parse_sort(read_one("(-> Int Int Prop)")) == Arrow(INT, Arrow(INT, PROP))
    t = Uninterp("t", 2)
    assert parse_sort(read_one("t"), {"t": t}) == t
    with pytest.raises(ParseError):
        parse_sort(read_one("Nope"))


def test_parse_term_binders_and_negative_literals():
    t = parse_term("(forall (y Int) (= y -5))", Context())
    assert t == Forall(INT, Eq(INT, BVar(0), IntLit(-5)), "y")
    assert show(t) == "(forall (y Int) (= y -5))"


def test_parse_term_unbound_location():
    with pytest.raises(ParseError) as e:
        parse_term("(P z)", P_INT)
    assert "unbound" in str(e.value) and e.value.pos == (1, 4)


def test_infix_rendering():
    t = parse_term("(=> (P x) (and (P x) True))", P_INT)
    assert show_infix(t) == "P x ==> P x /\\ True"
    assert infix_sort(Arrow(INT, PROP)) == "int -> prop"


def test_problem_forms():
    p = parse_problem(
        """
        (declare-sort t 2)
        (declare-const c t)
        (declare-var n Int)
        (assume pos (> n 0))
        (define m (+ n 1))
        (goal (> m 1))
        (tactic go (first (trivial) (smt)))
        (script (seq (call go)))
        (model (int 0 3) (sort t 2))
        (logic QF_LIA)
        """
    )
    assert [b.name for b in p.ctx.binders] == ["c", "n"]
    assert p.goal == parse_term("(> (+ n 1) 1)", p.ctx)
    assert p.logic == "QF_LIA" and p.model.int_range == (0, 3)
    assert "go" in problem_registry(p)
    assert parse_problem(show_problem(p)).goal == p.goal


@pytest.mark.parametrize(
    "text,msg",
    [
        ("(declare-const x Int)", "no goal"),
        ("(goal True) (goal True)", "exactly one goal"),
        ("(declare-const x Int) (declare-const x Int) (goal True)", "already declared"),
        ("(goal (+ 1 2))", "expected a proposition"),
        ("(frob) (goal True)", "unknown declaration"),
        ("(goal True) (tactic t (wiggle))", "unknown tactic step"),
        ("(declare-sort t 0) (goal True)", "positive"),
    ],
)
def test_problem_errors(text, msg):
    with pytest.raises(ParseError, match=msg):
        parse_problem(text)


def test_scripts_compile_and_run():
    ctx = P_INT.assume("h", parse_term("(P x)", P_INT))
    goal = parse_term("(and (P x) (= (+ x 0) x))", ctx)
    _, st = initial_state(ctx, goal)
    tac = parse_script("(split) (divide 1 (exact h) (trivial))")
    _, after = tac(st)
    assert after.goals == ()


def test_script_exact_parsed_in_goal_env():
    _, st = initial_state(Context(), Arrow(INT, INT))
    _, after = parse_script("(seq (intro) (exact 42))")(st)
    assert after.goals == ()
    with pytest.raises(TacticError) as e:
        parse_script("(seq (intro) (exact nope))")(st)
    assert e.value.kind == ErrorKind.TYPE_MISMATCH


def test_script_catch_and_fail():
    _, st = initial_state(Context(), Eq(INT, IntLit(1), IntLit(2)))
    value, after = parse_script('(catch (seq (trivial) (fail "no")))')(st)
    assert after is st
    with pytest.raises(TacticError, match="boom"):
        parse_script('(fail "boom")')(st)


def test_call_needs_known_name():
    with pytest.raises(ParseError, match="unknown tactic"):
        parse_script("(call missing)", default_registry())
    assert parse_script("(call smt)", default_registry())


def test_canon_monoid_with_custom_op():
    ctx = Context().bind("m", Arrow(INT, Arrow(INT, INT))).bind("e", INT).bind("a", INT).bind("b", INT)
    goal = parse_term("(= (m (m a e) b) (m a (m e b)))", ctx)
    _, st = initial_state(ctx, goal)
    _, after = parse_script("(canon-monoid m e)")(st)
    assert after.goals == ()
