"""Command-line front end.

Exit codes: 0 when everything was proved or checked, 1 when goals remain
open (or a property failed), 2 on usage, parse, type or backend errors.
Results go to stdout and diagnostics to stderr.
"""

from __future__ import annotations

import argparse
import configparser
import os
import sys
from dataclasses import dataclass, replace

from vcforge import interop as io
from vcforge import suites
from vcforge.engine import Failed, Goal, initial_state, run_tactic
from vcforge.model import OracleError, find_countermodel
from vcforge.problem import (
    Problem,
    compile_script,
    load_problem,
    parse_script,
    problem_registry,
    show_problem,
)
from vcforge.sexpr import (
    ParseError,
    read_all,
    show,
    show_context,
    show_context_infix,
    show_infix,
)
from vcforge.smt import SmtError, SolverConfig, SolverTimeout, dispatch, dispatch_all, emit_batch, emit_smtlib
from vcforge.terms import DEFAULT_FUEL, Squash, TypeCheckError, typecheck
from vcforge.vcsplit import SplitError, run_pipeline, split_vc

OK, OPEN, ERROR = 0, 1, 2
DEFAULT_CONFIG = "vcforge.cfg"


class CliError(Exception):
    pass


@dataclass(frozen=True)
class Settings:
    solver: str | None = None
    timeout: float = 10.0
    fuel: int = DEFAULT_FUEL
    workers: int = 4
    keep_smt: str | None = None
    logic: str | None = None


def read_config(path: str | None) -> Settings:
    """``key = value`` lines; unknown keys are rejected."""
    if path is None:
        if not os.path.exists(DEFAULT_CONFIG):
            return Settings()
        path = DEFAULT_CONFIG
    parser = configparser.ConfigParser()
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_string("[vcforge]\n" + fh.read())
    except (OSError, configparser.Error) as e:
        raise CliError(f"cannot read config {path}: {e}") from None
    sec = parser["vcforge"]
    known = {"solver", "timeout", "fuel", "workers", "keep_smt", "logic"}
    extra = set(sec) - known
    if extra:
        raise CliError(f"{path}: unknown config keys {', '.join(sorted(extra))}")
    try:
        return Settings(
            solver=sec.get("solver"),
            timeout=sec.getfloat("timeout", 10.0),
            fuel=sec.getint("fuel", DEFAULT_FUEL),
            workers=sec.getint("workers", 4),
            keep_smt=sec.get("keep_smt"),
            logic=sec.get("logic"),
        )
    except ValueError as e:
        raise CliError(f"{path}: {e}") from None


def settings_for(args) -> Settings:
    s = read_config(getattr(args, "config", None))
    env = os.environ.get("VCFORGE_SOLVER")
    if env is not None:
        s = replace(s, solver=env)
    for key in ("solver", "timeout", "fuel", "workers", "keep_smt", "logic"):
        value = getattr(args, key, None)
        if value is not None:
            s = replace(s, **{key: value})
    return s


def solver_config(s: Settings) -> SolverConfig:
    return SolverConfig(s.solver, s.timeout, s.keep_smt, s.workers)


def _err(msg: str) -> None:
    print(msg, file=sys.stderr)


def _located(path: str, e: ParseError) -> str:
    return f"{path}:{e}" if e.pos else f"{path}: {e}"


def _load(path: str) -> Problem:
    try:
        return load_problem(path)
    except OSError as e:
        raise CliError(f"cannot read {path}: {e.strerror}") from None
    except ParseError as e:
        raise CliError(_located(path, e)) from None


# --------------------------------------------------------------------------
# check


def cmd_check(args) -> int:
    p = _load(args.file)
    try:
        sort = typecheck(p.ctx, p.goal)
    except TypeCheckError as e:
        raise CliError(f"{args.file}: {e}") from None
    if args.echo:
        sys.stdout.write(show_problem(p))
    else:
        print(f"goal : {sort}")
    return OK


# --------------------------------------------------------------------------
# split


def _path(path: tuple) -> str:
    return "/".join(map(str, path)) or "<root>"


def cmd_split(args) -> int:
    p = _load(args.file)
    try:
        r = split_vc(p.ctx, p.goal)
    except SplitError as e:
        raise CliError(str(e)) from None
    infix = args.syntax == "infix"
    term = show_infix if infix else show
    ctx = show_context_infix if infix else show_context
    print(f"skeleton: {term(r.skeleton)}")
    for i, o in enumerate(r.obligations, 1):
        print(f"obligation {i}: tactic {o.tactic} at {_path(o.path)}")
        print(f"  delta: {ctx(o.delta)}")
        print(f"  goal: {term(o.phi)}")
    status = OK
    if args.check_theorem1:
        res = suites.theorem1_suite(seed=args.seed, trials=args.trials, carrier=args.carrier)
        print(f"seed = {args.seed}")
        print(res.line())
        if p.model is not None:
            from vcforge.vcsplit import check_split_soundness

            ok = check_split_soundness(p.model, p.ctx, p.goal)
            print(f"file soundness under its model: {'ok' if ok else 'VIOLATED'}")
            status = OK if ok else OPEN
        if not res.ok:
            status = OPEN
    return status


# --------------------------------------------------------------------------
# prove


def _remaining_after_script(p: Problem, script) -> tuple[list[Goal], list[str]]:
    goal, st = initial_state(p.ctx, p.goal)
    out = run_tactic(script, st)
    if isinstance(out, Failed):
        return [], [f"script failed: {out.error}"]
    st = out.state
    open_, remaining = [], list(st.smt_goals)
    for g in st.goals:
        if g.relevant:
            open_.append(f"relevant goal ?{g.witness.id} left open")
        else:
            remaining.append(replace(g, goal_type=Squash(st.resolve(g.prop))))
    return remaining, open_


def _describe(model_env: dict) -> str:
    return ", ".join(f"{k} = {v!r}" for k, v in sorted(model_env.items()))


def cmd_prove(args) -> int:
    p = _load(args.file)
    s = settings_for(args)
    cfg = solver_config(s)
    registry = problem_registry(p)
    failures: list[str] = []
    script = None
    try:
        if args.tactic:
            if args.tactic not in registry:
                raise CliError(f"unknown tactic {args.tactic}; known: {', '.join(sorted(registry))}")
            script = registry[args.tactic]
        elif args.script:
            with open(args.script, encoding="utf-8") as fh:
                script = parse_script(fh.read(), registry)
        elif p.script is not None:
            script = compile_script(p.script, registry)
    except OSError as e:
        raise CliError(f"cannot read {args.script}: {e.strerror}") from None
    except ParseError as e:
        raise CliError(_located(args.script or args.file, e)) from None

    if script is not None:
        remaining, failures = _remaining_after_script(p, script)
    else:
        try:
            result = run_pipeline(p.ctx, p.goal, registry, workers=s.workers)
        except SplitError as e:
            raise CliError(str(e)) from None
        for i, rep in enumerate(result.reports, 1):
            o = rep.obligation
            print(f"obligation {i} [{o.tactic}]: {rep.status}" + (f" ({rep.error})" if rep.error else ""))
        print(f"skeleton: {result.skeleton_status}")
        remaining = list(result.remaining_smt)

    verdicts = _discharge_all(remaining, s, cfg, p, args.oracle, args.batch)
    errors = 0
    open_goals = len(failures)
    for msg in failures:
        print(msg)
    for i, (g, (verdict, detail)) in enumerate(zip(remaining, verdicts), 1):
        if verdict == "error":
            errors += 1
            _err(f"goal {i}: {detail}")
            print(f"goal {i}: error")
            continue
        print(f"goal {i}: {verdict}")
        if verdict != "discharged":
            open_goals += 1
            print(f"  {show(g.prop)}")
            if detail:
                print(f"  countermodel: {detail}")
    if errors:
        return ERROR
    if open_goals:
        print(f"open goals: {open_goals}")
        return OPEN
    print("proved")
    return OK


def _solver_verdict(res) -> tuple[str, str] | None:
    """None when the goal was discharged."""
    if isinstance(res, SolverTimeout):
        # not an infrastructure failure: the goal simply stays open
        return "open (timeout)", ""
    if isinstance(res, SmtError):
        return "error", str(res)
    if res.discharged:
        return None
    return f"open ({res.status})", res.output.replace("\n", " ") if res.status == "sat" else ""


def _oracle_verdict(g: Goal, p: Problem) -> tuple[str, str]:
    if p.model is None:
        return "error", "--oracle needs a (model ...) block in the problem"
    try:
        cm = find_countermodel(p.model, g.env, g.prop)
    except OracleError as e:
        return "error", f"oracle: {e}"
    return ("discharged", "") if cm is None else ("open (oracle)", _describe(cm))


def _discharge_all(goals: list[Goal], s: Settings, cfg: SolverConfig, p: Problem,
                   use_oracle: bool, batch: bool) -> list[tuple[str, str]]:
    """Encode every goal, run the solver jobs in parallel, then settle each
    goal: discharged on unsat, otherwise by the oracle if asked."""
    out: list[tuple[str, str] | None] = [None] * len(goals)
    if cfg.enabled or cfg.keep_dir:
        if batch and len(goals) > 1:
            try:
                job = emit_batch(goals, s.logic or p.logic, provenance=f"{p.source} all goals")
                (res,) = dispatch_all([job], cfg)
            except SmtError as e:
                res = e
            if cfg.enabled and _solver_verdict(res) is None:
                return [("discharged", "")] * len(goals)
        jobs, where = [], []
        for i, g in enumerate(goals):
            try:
                jobs.append(emit_smtlib(g, s.logic or g.logic or p.logic))
                where.append(i)
            except SmtError as e:
                if cfg.enabled:
                    out[i] = ("error", f"cannot encode: {e}")
        for i, res in zip(where, dispatch_all(jobs, cfg)):
            if cfg.enabled:
                v = _solver_verdict(res)
                out[i] = ("discharged", "") if v is None else v
    for i, g in enumerate(goals):
        v = out[i]
        if v is not None and (v[0] in ("discharged", "error") or not use_oracle):
            continue
        out[i] = _oracle_verdict(g, p) if use_oracle else ("open (no solver)", "")
    return out


# --------------------------------------------------------------------------
# emit-smt


def cmd_emit(args) -> int:
    p = _load(args.file)
    s = settings_for(args)
    if args.whole:
        goals = [initial_state(p.ctx, p.goal)[0]]
    else:
        result = run_pipeline(p.ctx, p.goal, problem_registry(p), workers=1)
        goals = list(result.remaining_smt)
    if not goals:
        print("; nothing left for the solver")
    for i, g in enumerate(goals, 1):
        try:
            job = emit_smtlib(g, s.logic or g.logic or p.logic, provenance=f"{p.source} goal {i}")
        except SmtError as e:
            raise CliError(f"goal {i}: {e}") from None
        if s.keep_smt:
            dispatch(job, SolverConfig(None, keep_dir=s.keep_smt))
        sys.stdout.write(job.text())
    return OK


# --------------------------------------------------------------------------
# interop


def _read_src(path: str) -> io.SrcTerm:
    try:
        with open(path, encoding="utf-8") as fh:
            forms = read_all(fh.read())
    except OSError as e:
        raise CliError(f"cannot read {path}: {e.strerror}") from None
    except ParseError as e:
        raise CliError(_located(path, e)) from None
    if len(forms) != 1:
        raise CliError(f"{path}: expected exactly one source term")
    try:
        return io.parse_src(forms[0])
    except ParseError as e:
        raise CliError(_located(path, e)) from None


def cmd_interop(args) -> int:
    e = _read_src(args.file)
    s = settings_for(args)
    try:
        if args.action == "eval":
            m = io.Machine(s.fuel, args.trace)
            v = m.deep_force(m.eval_src(e))
            if args.trace:
                for line in m.trace:
                    print(line)
            print(io.show_src(v))
            return OK
        a = io.check_translation_correctness(e, s.fuel, args.trace)
    except io.InteropError as err:
        raise CliError(f"{args.file}: {err}") from None
    for line in a.trace:
        print(line)
    print(f"direct: {a.direct!r}")
    print(f"translated: {a.translated!r}")
    print(f"closed translation clean: {a.closed_clean}")
    print("agree" if a.ok else "DISAGREE")
    return OK if a.ok and a.closed_clean else OPEN


# --------------------------------------------------------------------------
# suite


def cmd_suite(args) -> int:
    names = list(suites.SUITES) if args.name == "all" else [args.name]
    print(f"seed = {args.seed}")
    status = OK
    for name in names:
        kw = {"seed": args.seed}
        if args.trials is not None:
            kw["trials"] = args.trials
        if name == "smt":
            s = settings_for(args)
            kw["config"] = solver_config(s) if s.solver else suites.detect_solver()
        res = suites.SUITES[name](**kw)
        print(res.line())
        for ex in res.examples:
            _err(f"  counterexample: {ex!r}")
        if not res.ok:
            status = OPEN
    return status


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="vcforge", description=__doc__.splitlines()[0])
    ap.add_argument("--config", help=f"key=value settings file (default: ./{DEFAULT_CONFIG} if present)")
    sub = ap.add_subparsers(dest="command", required=True)

    c = sub.add_parser("check", help="parse and typecheck a problem file")
    c.add_argument("file")
    c.add_argument("--echo", action="store_true", help="print the parsed problem in canonical syntax")
    c.set_defaults(run=cmd_check)

    sp = sub.add_parser("split", help="split tactic-marked obligations out of the goal")
    sp.add_argument("file")
    sp.add_argument("--syntax", choices=("sexp", "infix"), default="sexp")
    sp.add_argument("--check-theorem1", action="store_true", help="also run the soundness property suite")
    sp.add_argument("--carrier", type=int, default=3, help="size of the uninterpreted sort in the suite")
    sp.add_argument("--trials", type=int, default=1000)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(run=cmd_split)

    pr = sub.add_parser("prove", help="run tactics and discharge what is left")
    pr.add_argument("file")
    how = pr.add_mutually_exclusive_group()
    how.add_argument("--script", help="a .tac script to run on the whole goal instead of splitting")
    how.add_argument("--tactic", help="a registered tactic (e.g. canon-semiring) to run on the whole goal")
    pr.add_argument("--solver", help='solver command, e.g. "z3 -smt2 {file}"; "none" disables')
    pr.add_argument("--oracle", action="store_true", help="use the finite model oracle for leftover goals")
    pr.add_argument("--batch", action="store_true", help="first try all leftover goals as one joined solver job")
    pr.add_argument("--keep-smt", dest="keep_smt", metavar="DIR", help="write every SMT job to DIR")
    pr.add_argument("--logic", help="override the SMT logic")
    pr.add_argument("--timeout", type=float)
    pr.add_argument("--workers", type=int)
    pr.set_defaults(run=cmd_prove)

    em = sub.add_parser("emit-smt", help="print SMT-LIB for the goals that would reach the solver")
    em.add_argument("file")
    em.add_argument("--whole", action="store_true", help="encode the goal without splitting")
    em.add_argument("--logic")
    em.add_argument("--keep-smt", dest="keep_smt", metavar="DIR")
    em.set_defaults(run=cmd_emit)

    it = sub.add_parser("interop", help="evaluate or check a source-language term")
    it.add_argument("action", choices=("eval", "check"))
    it.add_argument("file")
    it.add_argument("--trace", action="store_true", help="print the rule-by-rule derivation")
    it.add_argument("--fuel", type=int)
    it.set_defaults(run=cmd_interop)

    su = sub.add_parser("suite", help="run a seeded property suite")
    su.add_argument("name", choices=(*suites.SUITES, "all"))
    su.add_argument("--seed", type=int, default=0)
    su.add_argument("--trials", type=int)
    su.add_argument("--solver")
    su.set_defaults(run=cmd_suite)
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.run(args)
    except CliError as e:
        _err(f"error: {e}")
        return ERROR


if __name__ == "__main__":
    sys.exit(main())
