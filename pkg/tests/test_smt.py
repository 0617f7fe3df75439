import random
import sys
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vcforge import gen
from vcforge.engine import initial_state
from vcforge.model import FiniteModel
from vcforge.problem import load_problem
from vcforge.smt import (
    MalformedOutput,
    SmtSyntaxError,
    SolverConfig,
    SolverSpawnError,
    SolverTimeout,
    UnsupportedConstruct,
    check_smtlib,
    dispatch,
    dispatch_all,
    emit_batch,
    emit_smtlib,
    oracle_discharge,
)
from vcforge.terms import (
    BOOL,
    FALSE,
    INT,
    TRUE,
    Arith,
    BVar,
    Context,
    Eq,
    Forall,
    FVar,
    IntLit,
    Metavar,
    Squash,
)
from vcforge.vcsplit import split_vc

FIX = Path(__file__).parent.parent / "fixtures"


def goal(phi, ctx=Context()):
    return initial_state(ctx, phi)[0]


def x_plus_one():
    ctx = Context().bind("x", INT)
    return goal(Eq(INT, Arith("+", (FVar("x"), IntLit(1))), Arith("+", (FVar("x"), IntLit(2)))), ctx)


def test_emit_forall():
    phi = Forall(INT, Eq(INT, Arith("+", (BVar(0), IntLit(0))), BVar(0)), "x")
    job = emit_smtlib(goal(phi))
    assert job.assertions[-1] == "(not (forall ((x Int)) (= (+ x 0) x)))"
    assert job.text().endswith("(check-sat)\n")
    check_smtlib(job.text())


def test_emit_declares_env():
    job = emit_smtlib(x_plus_one())
    assert "(declare-const x Int)" in job.text()
    assert job.logic == "UFNIA"
    assert emit_smtlib(x_plus_one(), logic="QF_LIA").logic == "QF_LIA"


def test_emit_is_deterministic():
    assert emit_smtlib(x_plus_one()).text() == emit_smtlib(x_plus_one()).text()


def test_emit_rejects_metavar_and_relevant():
    with pytest.raises(UnsupportedConstruct):
        emit_smtlib(goal(Eq(INT, Metavar(7, INT), IntLit(0))))
    with pytest.raises(UnsupportedConstruct):
        emit_smtlib(goal(INT))
    g = goal(TRUE)
    with pytest.raises(UnsupportedConstruct):
        emit_smtlib(type(g)(g.env, Squash(Squash(TRUE)), g.witness))


def test_bound_names_avoid_capture():
    ctx = Context().bind("x", INT)
    phi = Forall(INT, Forall(INT, Eq(INT, BVar(1), FVar("x")), "x"), "x")
    text = emit_smtlib(goal(phi, ctx)).assertions[-1]
    assert text == "(not (forall ((x!0 Int)) (forall ((x!1 Int)) (= x!0 x))))"


def test_emit_poly_multiply_skeleton_checks():
    p = load_problem(str(FIX / "poly_multiply.vcf"))
    r = split_vc(p.ctx, p.goal)
    n = check_smtlib(emit_smtlib(goal(r.skeleton, p.ctx)).text())
    assert n > 10


def test_batch_joins_goals():
    ctx = Context().bind("p", BOOL)
    a, b = goal(Eq(BOOL, FVar("p"), FVar("p")), ctx), goal(TRUE, ctx)
    b = type(b)(b.env, b.goal_type, Metavar(1, b.witness.sort))
    job = emit_batch([a, b])
    assert job.assertions[-1].startswith("(not (and")


@pytest.mark.parametrize(
    "text",
    [
        "(assert (+ 1 true))",
        "(declare-fun f (Int) Int)(assert (f 1 2))",
        "(assert x)",
        "(assert (= 1 2)",
        "(frobnicate)",
    ],
)
def test_checker_rejects(text):
    with pytest.raises(SmtSyntaxError):
        check_smtlib(text)


def test_checker_accepts():
    assert check_smtlib("(set-logic UFLIA)(declare-sort U 0)(declare-fun c () U)(assert (= c c))(check-sat)") == 5


def test_config_none_is_unavailable():
    job = emit_smtlib(goal(TRUE))
    assert dispatch(job, SolverConfig("none")).status == "unavailable"
    assert dispatch(job, SolverConfig()).status == "unavailable"


def test_keep_dir(tmp_path):
    job = emit_smtlib(goal(TRUE))
    r = dispatch(job, SolverConfig(None, keep_dir=str(tmp_path / "out")))
    assert Path(r.path).read_text() == job.text()


def test_spawn_error():
    with pytest.raises(SolverSpawnError):
        dispatch(emit_smtlib(goal(TRUE)), SolverConfig("/nonexistent/solver {file}"))


def test_timeout():
    with pytest.raises(SolverTimeout):
        dispatch(emit_smtlib(goal(TRUE)), SolverConfig(f"{sys.executable} -c 'import time; time.sleep(5)' {{file}}", timeout=0.3))


def test_malformed_output():
    with pytest.raises(MalformedOutput):
        dispatch(emit_smtlib(goal(TRUE)), SolverConfig("echo hello {file}"))


def test_fake_solver_outputs():
    job = emit_smtlib(goal(TRUE))
    script = f"{sys.executable} -c 'print(\"sat\"); print(\"(model)\")' {{file}}"
    r = dispatch(job, SolverConfig(script))
    assert r.status == "sat" and not r.discharged and "(model)" in r.output
    r = dispatch(job, SolverConfig(f"{sys.executable} -c 'print(\"unknown\")' {{file}}"))
    assert r.status == "unknown" and not r.discharged


def test_dispatch_all_keeps_order_and_errors():
    jobs = [emit_smtlib(goal(TRUE)), emit_smtlib(goal(FALSE))]
    out = dispatch_all(jobs, SolverConfig("echo hello {file}", workers=2))
    assert all(isinstance(o, MalformedOutput) for o in out)


def test_oracle():
    m = FiniteModel()
    assert oracle_discharge(goal(TRUE), m)
    assert not oracle_discharge(goal(FALSE), m)
    assert not oracle_discharge(emit_smtlib(x_plus_one()), FiniteModel(int_range=(-2, 2)))


def test_z3_verdicts(z3_config):
    assert dispatch(emit_smtlib(goal(TRUE)), z3_config).status == "unsat"
    r = dispatch(emit_smtlib(x_plus_one()), z3_config)
    assert r.status == "sat" and "x" in r.output


def test_z3_differential(z3_config):
    from vcforge.suites import smt_suite

    r = smt_suite(3, trials=60, config=z3_config)
    assert r.failures == 0, r.examples
    assert r.notes["agreed"] == 60


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32))
def test_emitted_text_always_checks(seed):
    rng = random.Random(seed)
    job = emit_smtlib(goal(gen.bool_goal(rng), gen.smt_signature()))
    check_smtlib(job.text())
