"""Seeded property suites that execute the library's theorems.

Each suite returns a ``SuiteResult``; the CLI prints them and the acceptance
tests assert on them.
"""

from __future__ import annotations

import itertools
import random
import shutil
import time
from dataclasses import dataclass, field
from typing import Callable

from vcforge import gen
from vcforge import interop as io
from vcforge.canon import (
    INT_ADD,
    INT_MUL,
    MonoidOps,
    canon_int,
    canon_monoid_term,
    poly_of,
    reflect,
)
from vcforge.engine import (
    ProofState,
    audit_evolution,
    catch,
    divide,
    exact,
    fail,
    initial_state,
    intro,
    join,
    new_goal,
    on_all_goals,
    refine_intro,
    repeat,
    seq,
    smt_defer,
    split,
    trivial,
)
from vcforge.model import FiniteModel, ModelRejected, Validity, eval_term, eval_validity
from vcforge.smt import SolverConfig, check_smtlib, dispatch, emit_smtlib
from vcforge.terms import (
    INT,
    TRUE,
    UNIT,
    UNIT_VALUE,
    Arrow,
    Context,
    FVar,
    IntLit,
    Metavar,
    Squash,
    Term,
    apply,
    metavars,
    normalize,
    simplify,
    typecheck,
)
from vcforge.unify import UnificationError, unify
from vcforge.vcsplit import split_vc


@dataclass
class SuiteResult:
    name: str
    trials: int
    failures: int = 0
    seconds: float = 0.0
    notes: dict = field(default_factory=dict)
    examples: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.failures == 0

    def line(self) -> str:
        extra = "".join(f" {k}={v}" for k, v in self.notes.items())
        return f"{self.name}: {self.trials} trials, {self.failures} failures, {self.seconds:.2f}s{extra}"

    def record(self, example) -> None:
        self.failures += 1
        if len(self.examples) < 5:
            self.examples.append(example)


def _timed(fn):
    def run(*args, **kw):
        t0 = time.perf_counter()
        result = fn(*args, **kw)
        result.seconds = time.perf_counter() - t0
        return result

    run.__name__ = fn.__name__
    run.__doc__ = fn.__doc__
    return run


# --------------------------------------------------------------------------
# Splitting theorems

MAX_INTERPRETATIONS = 2**12


def _interpretation_envs(model: FiniteModel, base: Context) -> list[dict]:
    symbols = [b for b in base.binders]
    carriers = [model.carrier(b.sort) for b in symbols]
    total = 1
    for c in carriers:
        total *= len(c)
    if total > MAX_INTERPRETATIONS:
        raise ValueError(f"{total} interpretations exceed the exhaustive bound")
    return [dict(zip((b.name for b in symbols), vs)) for vs in itertools.product(*carriers)]


def _split_checks(model, base, vc):
    fixed = [b.name for b in base.binders]
    r = split_vc(base, vc)
    skel = Validity(model, base, r.skeleton, fixed)
    obls = [Validity(model, base + o.delta, o.phi, fixed) for o in r.obligations]
    orig = Validity(model, base, vc, fixed)
    return r, skel, obls, orig


def theorem1_instance(model: FiniteModel, base: Context, vc: Term, envs: list[dict]) -> dict | None:
    """A violating interpretation of soundness, or None.  Checked under each
    interpretation of the signature separately, which is stronger than
    comparing validity over all interpretations at once."""
    _, skel, obls, orig = _split_checks(model, base, vc)
    for env in envs:
        if skel(env) and all(o(env) for o in obls) and not orig(env):
            return env
    return None


def theorem2_instance(model: FiniteModel, base: Context, vc: Term, envs: list[dict]) -> dict | None:
    _, skel, obls, orig = _split_checks(model, base, vc)
    for env in envs:
        if orig(env) and not (skel(env) and all(o(env) for o in obls)):
            return env
    return None


@_timed
def theorem1_suite(seed: int = 0, trials: int = 1000, depth: int = 5, carrier: int = 3) -> SuiteResult:
    """Soundness of splitting on random marked VCs."""
    rng = random.Random(seed)
    model = FiniteModel(sizes={"U": carrier})
    base = gen.theorem_signature()
    envs = _interpretation_envs(model, base)
    res = SuiteResult("theorem1-soundness", trials, notes={"interpretations": len(envs)})
    obligations = 0
    for _ in range(trials):
        vc = gen.marked_vc(rng, depth)
        obligations += len(split_vc(base, vc).obligations)
        bad = theorem1_instance(model, base, vc, envs)
        if bad is not None:
            res.record((vc, bad))
    res.notes["obligations"] = obligations
    return res


@_timed
def theorem2_suite(seed: int = 0, trials: int = 1000, depth: int = 5, carrier: int = 3) -> SuiteResult:
    """Completeness of splitting for P-shaped contexts."""
    rng = random.Random(seed)
    model = FiniteModel(sizes={"U": carrier})
    base = gen.theorem_signature()
    envs = _interpretation_envs(model, base)
    res = SuiteResult("theorem2-completeness", trials, notes={"interpretations": len(envs)})
    valid = 0
    for _ in range(trials):
        vc = gen.p_shaped_vc(rng, depth)
        bad = theorem2_instance(model, base, vc, envs)
        if bad is not None:
            res.record((vc, bad))
        valid += Validity(model, base, vc, [b.name for b in base.binders])(envs[0])
    res.notes["valid-under-first-interpretation"] = valid
    return res


# --------------------------------------------------------------------------
# Canonicalizers

IDENTITY2 = ((1, 0), (0, 1))


def matmul(a, b):
    return tuple(tuple(sum(a[i][k] * b[k][j] for k in range(2)) for j in range(2)) for i in range(2))


MATRIX_MONOID = MonoidOps(FVar("e"), FVar("m"), commutative=False)


def _monoid_cases():
    """(ops, atoms, sampler) triples: integer sum and product, and a
    non-commutative monoid of 2x2 integer matrices under an uninterpreted
    head symbol."""
    add_atoms = tuple(FVar(n) for n in "abcd")
    mat_atoms = tuple(FVar(n) for n in ("p", "q", "r"))

    def ints(rng):
        return {n: rng.randint(-1000, 1000) for n in "abcd"}

    def small_ints(rng):
        return {n: rng.randint(-9, 9) for n in "abcd"}

    def mats(rng):
        env = {n: tuple(tuple(rng.randint(-3, 3) for _ in range(2)) for _ in range(2)) for n in ("p", "q", "r")}
        env["e"] = IDENTITY2
        env["m"] = lambda x: lambda y: matmul(x, y)
        return env

    return [
        (INT_ADD, add_atoms, ints),
        (MonoidOps(IntLit(0), "+", commutative=False), add_atoms, ints),
        (INT_MUL, add_atoms, small_ints),
        (MATRIX_MONOID, mat_atoms, mats),
    ]


@_timed
def canon_suite(seed: int = 0, trials: int = 1000, samples: int = 5) -> SuiteResult:
    """Denotation preservation and idempotence for both canonicalizers;
    ``trials`` monoid trees plus ``trials`` ring terms."""
    rng = random.Random(seed)
    model = FiniteModel()
    res = SuiteResult("canonicalizers", 2 * trials)
    cases = _monoid_cases()
    for i in range(trials):
        ops, atoms, sample = cases[i % len(cases)]
        t = gen.monoid_tree(rng, rng.randint(0, 6), ops.mult, ops.unit, atoms)
        c = canon_monoid_term(ops, t)
        if canon_monoid_term(ops, c) != c:
            res.record(("monoid-idempotence", t))
            continue
        for _ in range(samples):
            env = sample(rng)
            if eval_term(model, t, env) != eval_term(model, c, env):
                res.record(("monoid-denotation", t, env))
                break
    skipped = 0
    for _ in range(trials):
        t = gen.ring_term(rng, rng.randint(1, 6))
        p = poly_of(t)
        c = reflect(p)
        if poly_of(c) != p or canon_int(c) != c:
            res.record(("ring-idempotence", t))
            continue
        for _ in range(samples):
            env = gen.int_assignment(rng)
            try:
                want = eval_term(model, t, env)
            except ModelRejected:
                skipped += 1
                continue
            if want != eval_term(model, c, env):
                res.record(("ring-denotation", t, env))
                break
    res.notes["rejected-samples"] = skipped
    return res


# --------------------------------------------------------------------------
# Evolution audit


def _witness_for(rng: random.Random, state: ProofState, g) -> Term | None:
    """A proof term ``exact`` should accept for the head goal, if one is
    easy to find."""
    if g.relevant:
        return gen.value_of(rng, g.env, g.goal_type)
    phi = normalize(state.resolve(g.prop))
    if simplify(phi) == TRUE:
        return UNIT_VALUE
    for h in g.env.hyps:
        try:
            unify(normalize(state.resolve(h.prop)), phi, state.assignments)
        except UnificationError:
            continue
        return FVar(h.name)
    return None


def _sensible_step(rng: random.Random, state: ProofState):
    g = state.goals[0]
    if g.relevant:
        if isinstance(g.goal_type, Arrow) and rng.random() < 0.6:
            return "intro", intro
        w = _witness_for(rng, state, g)
        return "exact", lambda s: exact(s, w)
    phi = normalize(state.resolve(g.prop))
    from vcforge.terms import And, Forall, Implies

    w = _witness_for(rng, state, g)
    if w is not None and rng.random() < 0.7:
        return "exact", lambda s: exact(s, w)
    if isinstance(phi, And):
        return ("split", split) if rng.random() < 0.8 else ("repeat-split", repeat(split))
    if isinstance(phi, (Forall, Implies)):
        return "intro", intro
    if len(state.goals) > 1 and not state.goals[1].relevant and rng.random() < 0.4:
        return "join", join
    return "smt", smt_defer


def _noise_step(rng: random.Random, state: ProofState):
    w = None
    if state.goals:
        w = _witness_for(rng, state, state.goals[0])
    options = [
        ("intro", intro),
        ("split", split),
        ("join", join),
        ("smt", smt_defer),
        ("trivial", trivial),
        ("refine_intro", refine_intro),
        ("exact-bad", lambda s: exact(s, IntLit(3))),
        ("all-trivial", on_all_goals(catch(trivial))),
        ("divide", divide(min(1, len(state.goals)), catch(trivial), catch(smt_defer))),
    ]
    if w is not None:
        options.append(("exact", lambda s: exact(s, w)))
    return rng.choice(options)


def audit_goals(rng: random.Random) -> ProofState:
    env = gen.audit_env()
    state = ProofState()
    for _ in range(rng.randint(1, 3)):
        r = rng.random()
        if r < 0.35:
            _, state = new_goal(state, env, rng.choice(gen.AUDIT_SORTS))
        elif r < 0.85:
            _, state = new_goal(state, env, gen.goal_prop(rng, rng.randint(0, 3)))
        else:
            # ?k : Int together with |= P ?k, solvable by unifying against h : P 5
            k = state.fresh + 1
            _, state = new_goal(state, env, Squash(apply(FVar("P"), Metavar(k, INT))))
            _, state = new_goal(state, env, INT)
    return state


def fully_solved_ok(initial: ProofState, final: ProofState) -> bool:
    if final.goals:
        return False
    for g in initial.goals:
        sol = final.solution(g)
        if metavars(sol):
            return False
        want = g.goal_type if g.relevant else UNIT
        try:
            if typecheck(g.env, sol) != want:
                return False
        except Exception:
            return False
    return True


@_timed
def audit_suite(seed: int = 0, trials: int = 1000, max_steps: int = 14, injections: int = 100) -> SuiteResult:
    """Random scripts over random goals, auditing every step."""
    rng = random.Random(seed)
    res = SuiteResult("evolution-audit", trials)
    steps = solved = 0
    for _ in range(trials):
        initial = audit_goals(rng)
        state = initial
        for _ in range(rng.randint(1, max_steps)):
            if not state.goals:
                break
            pick = _sensible_step if rng.random() < 0.75 else _noise_step
            name, tac = pick(rng, state)
            _, nxt = catch(tac)(state)
            steps += 1
            if not (audit_evolution(state, nxt) and audit_evolution(initial, nxt)):
                res.record((name, state, nxt))
                break
            state = nxt
        if not state.goals:
            solved += 1
            if not fully_solved_ok(initial, state):
                res.record(("solution", initial, state))
    rollback_failures = 0
    for _ in range(injections):
        state = audit_goals(rng)
        _, tac = _sensible_step(rng, state)
        _, after = catch(seq(tac, fail("injected")))(state)
        if after.canonical() != state.canonical() or after.observable() != state.observable() or after.trace != state.trace:
            rollback_failures += 1
            res.record(("rollback", state, after))
    res.notes.update(steps=steps, solved=solved, injected=injections, rollback_failures=rollback_failures)
    return res


# --------------------------------------------------------------------------
# Interop


@_timed
def interop_suite(seed: int = 0, trials: int = 500, depth: int = 7, mixed: int = 0) -> SuiteResult:
    """Differential test of the translation on closed base-typed terms, plus
    the two worked examples and optionally some terms with native parts."""
    rng = random.Random(seed)
    res = SuiteResult("interop", trials + 2 + mixed)
    boundary = 0
    for _ in range(trials):
        e, _ = gen.src_term(rng, depth)
        a = io.check_translation_correctness(e)
        boundary += io.boundary_nodes(io.translate(e))
        if not a.ok or not a.closed_clean:
            res.record(("random", io.show_src(e), a))
    ex1 = io.check_translation_correctness(io.IDENTITY_APP_NATIVE)
    if not (ex1.ok and ex1.direct == 0):
        res.record(("example-1", ex1))
    direct = io.observe(io.src_eval(io.poly_id_applied(True)))
    if direct != ("var", "y"):
        res.record(("example-2", direct))
    for _ in range(mixed):
        e, _ = gen.src_term(rng, depth, mixed=True)
        a = io.check_translation_correctness(e)
        if not a.ok:
            res.record(("mixed", io.show_src(e), a))
    res.notes["boundary-nodes"] = boundary
    return res


# --------------------------------------------------------------------------
# SMT


def detect_solver() -> SolverConfig:
    """VCFORGE_SOLVER if set, else z3 on PATH, else no solver."""
    cfg = SolverConfig().with_env()
    if cfg.command is None and shutil.which("z3"):
        cfg = SolverConfig("z3 -smt2 {file}")
    return cfg


@_timed
def smt_suite(seed: int = 0, trials: int = 200, config: SolverConfig | None = None,
              corpus: list[tuple[Context, Term]] = ()) -> SuiteResult:
    """Emitted text must pass the internal checker; with a solver, its
    verdicts must match the finite oracle on Bool-only goals."""
    rng = random.Random(seed)
    config = config if config is not None else SolverConfig()
    res = SuiteResult("smt-bridge", trials + len(corpus), notes={"solver": config.command if config.enabled else "none"})
    for ctx, phi in corpus:
        goal, _ = initial_state(ctx, phi)
        try:
            check_smtlib(emit_smtlib(goal).text())
        except Exception as e:  # noqa: BLE001 - reported as a failure
            res.record(("corpus", phi, e))
    model = FiniteModel()
    env = gen.smt_signature()
    valid = agree = 0
    for _ in range(trials):
        phi = gen.bool_goal(rng)
        goal, _ = initial_state(env, phi)
        job = emit_smtlib(goal)
        try:
            check_smtlib(job.text())
        except Exception as e:  # noqa: BLE001
            res.record(("syntax", phi, e))
            continue
        verdict = eval_validity(model, env, phi)
        valid += verdict
        if config.enabled:
            out = dispatch(job, config)
            if out.status not in ("sat", "unsat") or (out.status == "unsat") != verdict:
                res.record(("disagree", phi, out.status, verdict))
            else:
                agree += 1
    res.notes.update(valid=valid, agreed=agree)
    return res


SUITES: dict[str, Callable[..., SuiteResult]] = {
    "theorem1": theorem1_suite,
    "theorem2": theorem2_suite,
    "canon": canon_suite,
    "audit": audit_suite,
    "interop": interop_suite,
    "smt": smt_suite,
}
