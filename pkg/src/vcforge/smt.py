"""SMT-LIB2 emission, a small SMT-LIB checker, and a solver process driver."""

from __future__ import annotations

import hashlib
import os
import re
import shlex
import subprocess
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from vcforge.engine import Goal, ProofState, join, repeat
from vcforge.model import FiniteModel, eval_validity
from vcforge.terms import (
    And,
    App,
    Arith,
    Arrow,
    Binder,
    BoolLit,
    BoolSort,
    BVar,
    Context,
    Eq,
    FalseP,
    Forall,
    free_vars,
    FVar,
    Iff,
    Implies,
    IntLit,
    IntSort,
    Lam,
    Metavar,
    Or,
    PropSort,
    Sort,
    Squash,
    Term,
    TrueP,
    Uninterp,
    UnitLit,
    UnitSort,
    WithTactic,
    unapply,
)

DEFAULT_LOGIC = "UFNIA"
DEFAULT_TIMEOUT = 10.0


class SmtError(Exception):
    code = "smt-error"


class UnsupportedConstruct(SmtError):
    code = "unsupported-construct"


class SmtSyntaxError(SmtError):
    code = "smtlib-syntax"


class SolverSpawnError(SmtError):
    code = "solver-spawn"


class SolverTimeout(SmtError):
    code = "solver-timeout"


class MalformedOutput(SmtError):
    code = "solver-malformed-output"


# --------------------------------------------------------------------------
# Emission

_SIMPLE = re.compile(r"[A-Za-z~!@$%^&*_+=<>.?/-][A-Za-z0-9~!@$%^&*_+=<>.?/-]*$")
_RESERVED = {
    "and", "or", "not", "=>", "=", "ite", "distinct", "let", "forall", "exists", "match",
    "true", "false", "div", "mod", "abs", "+", "-", "*", "<", "<=", ">", ">=", "_", "!",
    "as", "par", "NUMERAL", "DECIMAL", "STRING", "Int", "Bool", "Real",
}


def symbol(name: str) -> str:
    if _SIMPLE.match(name) and name not in _RESERVED:
        return name
    if "|" in name or "\\" in name:
        raise UnsupportedConstruct(f"name {name!r} cannot be an SMT-LIB symbol")
    return f"|{name}|"


def smt_sort(s: Sort) -> str:
    match s:
        case IntSort():
            return "Int"
        case BoolSort() | PropSort():
            return "Bool"
        case Uninterp(name):
            return symbol(name)
        case UnitSort():
            raise UnsupportedConstruct("the Unit sort has no SMT-LIB counterpart here")
        case Arrow():
            raise UnsupportedConstruct(f"higher-order sort {s}")
    raise UnsupportedConstruct(f"sort {s}")


_CONNECTIVE = {And: "and", Or: "or", Implies: "=>", Iff: "="}


def smt_term(t: Term, scope: tuple[str, ...] = (), taken: frozenset[str] | None = None) -> str:
    """Bound variables keep their hint unless it would capture a free name or
    shadow an enclosing binder."""
    if taken is None:
        taken = frozenset(symbol(n) for n in free_vars(t))
    rec = lambda u, sc=scope: smt_term(u, sc, taken)  # noqa: E731
    match t:
        case BVar(i):
            return scope[-1 - i]
        case FVar(name):
            return symbol(name)
        case IntLit(v):
            return str(v) if v >= 0 else f"(- {-v})"
        case BoolLit(v):
            return "true" if v else "false"
        case TrueP():
            return "true"
        case FalseP():
            return "false"
        case And(l, r) | Or(l, r) | Implies(l, r) | Iff(l, r):
            return f"({_CONNECTIVE[type(t)]} {rec(l)} {rec(r)})"
        case Eq(s, l, r):
            if isinstance(s, Arrow):
                raise UnsupportedConstruct("equality between functions")
            return f"(= {rec(l)} {rec(r)})"
        case Forall(s, body, hint):
            name = symbol(hint)
            k = len(scope)
            while name in taken or name in scope:
                name = symbol(f"{hint}!{k}")
                k += 1
            return f"(forall (({name} {smt_sort(s)})) {rec(body, scope + (name,))})"
        case Arith(op, (a, b)):
            return f"({op} {rec(a)} {rec(b)})"
        case WithTactic(p, _):
            return rec(p)
        case App():
            head, args = unapply(t)
            if not isinstance(head, FVar):
                raise UnsupportedConstruct(f"application of a non-symbol head {head}")
            return "(" + " ".join([symbol(head.name)] + [rec(a) for a in args]) + ")"
        case Metavar(i):
            raise UnsupportedConstruct(f"metavariable ?{i}")
        case Squash():
            raise UnsupportedConstruct("nested squash")
        case Lam():
            raise UnsupportedConstruct("lambda abstraction")
        case UnitLit():
            raise UnsupportedConstruct("unit value")
    raise UnsupportedConstruct(f"term {t!r}")


def _declare(b: Binder) -> str:
    s = b.sort
    if isinstance(s, Arrow):
        args = []
        while isinstance(s, Arrow):
            args.append(smt_sort(s.dom))
            s = s.cod
        return f"(declare-fun {symbol(b.name)} ({' '.join(args)}) {smt_sort(s)})"
    return f"(declare-const {symbol(b.name)} {smt_sort(s)})"


def _sorts_of(s: Sort, out: dict):
    if isinstance(s, Uninterp):
        out.setdefault(s.name, None)
    elif isinstance(s, Arrow):
        _sorts_of(s.dom, out)
        _sorts_of(s.cod, out)


@dataclass(frozen=True)
class SmtJob:
    logic: str
    sorts: tuple[str, ...]
    decls: tuple[str, ...]
    assertions: tuple[str, ...]
    provenance: str = ""
    source: tuple[Context, Term] | None = field(default=None, compare=False, repr=False)

    def text(self) -> str:
        lines = []
        if self.provenance:
            lines.extend(f"; {p}" for p in self.provenance.splitlines())
        lines.append(f"(set-logic {self.logic})")
        lines.extend(f"(declare-sort {symbol(s)} 0)" for s in self.sorts)
        lines.extend(self.decls)
        lines.extend(f"(assert {a})" for a in self.assertions)
        lines.append("(check-sat)")
        return "\n".join(lines) + "\n"

    def digest(self) -> str:
        return hashlib.sha256(self.text().encode()).hexdigest()[:16]


def _collect_sorts(ctx: Context, phi: Term) -> tuple[str, ...]:
    from vcforge.sexpr import sorts_in

    found: dict[str, None] = {}
    for e in ctx.entries:
        if isinstance(e, Binder):
            _sorts_of(e.sort, found)
        else:
            for s in sorts_in(e.prop):
                _sorts_of(s, found)
    for s in sorts_in(phi):
        _sorts_of(s, found)
    return tuple(found)


def emit_smtlib(goal: Goal, logic: str | None = None, provenance: str = "") -> SmtJob:
    """Encode an irrelevant goal: binders become declarations, hypotheses
    assertions, and the negated goal the final assertion."""
    if goal.relevant:
        raise UnsupportedConstruct("relevant goals cannot be sent to SMT")
    phi = goal.prop
    if isinstance(phi, Squash):
        raise UnsupportedConstruct("nested squash")
    ctx = goal.env
    for b in ctx.binders:
        if isinstance(b.sort, Arrow):
            s = b.sort
            while isinstance(s, Arrow):
                if isinstance(s.dom, Arrow):
                    raise UnsupportedConstruct(f"higher-order symbol {b.name}")
                s = s.cod
    decls = tuple(_declare(b) for b in ctx.binders)
    asserts = tuple(smt_term(h.prop) for h in ctx.hyps) + (f"(not {smt_term(phi)})",)
    return SmtJob(
        logic or goal.logic or DEFAULT_LOGIC,
        _collect_sorts(ctx, phi),
        decls,
        asserts,
        provenance,
        (ctx, phi),
    )


def emit_batch(goals: Sequence[Goal], logic: str | None = None, provenance: str = "") -> SmtJob:
    """One job for several goals, joined over their common environment."""
    if len(goals) == 1:
        return emit_smtlib(goals[0], logic, provenance)
    state = ProofState(goals=tuple(goals), fresh=1 + max(g.witness.id for g in goals))
    _, st = repeat(join)(state)
    logics = {g.logic for g in goals}
    hint = logics.pop() if len(logics) == 1 else None
    return emit_smtlib(Goal(st.goals[0].env, st.goals[0].goal_type, st.goals[0].witness, hint), logic, provenance)


# --------------------------------------------------------------------------
# An SMT-LIB checker for what we emit

_TOKEN = re.compile(r"\s+|;[^\n]*|(\()|(\))|(\|[^|\\]*\|)|(\"(?:[^\"]|\"\")*\")|([^\s()|\";]+)")


def _read(text: str) -> list:
    stack: list[list] = [[]]
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise SmtSyntaxError(f"bad token at offset {pos}")
        pos = m.end()
        if m.group(1):
            stack.append([])
        elif m.group(2):
            if len(stack) == 1:
                raise SmtSyntaxError(f"unbalanced ')' at offset {m.start()}")
            done = stack.pop()
            stack[-1].append(done)
        elif m.group(3):
            stack[-1].append(("sym", m.group(3)[1:-1]))
        elif m.group(4):
            stack[-1].append(("str", m.group(4)))
        elif m.group(5):
            stack[-1].append(m.group(5))
    if len(stack) != 1:
        raise SmtSyntaxError("unbalanced '('")
    return stack[0]


def _name(x) -> str:
    if isinstance(x, tuple) and x[0] == "sym":
        return x[1]
    if isinstance(x, str) and not re.fullmatch(r"\d+", x):
        return x
    raise SmtSyntaxError(f"expected a symbol, got {x!r}")


class _Checker:
    def __init__(self):
        self.sorts = {"Int", "Bool"}
        self.funs: dict[str, tuple[tuple[str, ...], str]] = {}

    def sort(self, x) -> str:
        n = _name(x) if not isinstance(x, list) else None
        if n is None or n not in self.sorts:
            raise SmtSyntaxError(f"unknown sort {x!r}")
        return n

    def term(self, x, scope: dict) -> str:
        if isinstance(x, str) and re.fullmatch(r"\d+", x):
            return "Int"
        if not isinstance(x, list):
            n = _name(x)
            if n in scope:
                return scope[n]
            if n in ("true", "false"):
                return "Bool"
            if n in self.funs and not self.funs[n][0]:
                return self.funs[n][1]
            raise SmtSyntaxError(f"unknown symbol {n}")
        if not x:
            raise SmtSyntaxError("empty application")
        head = x[0]
        if isinstance(head, str) and head in ("forall", "exists"):
            if len(x) != 3 or not isinstance(x[1], list) or not x[1]:
                raise SmtSyntaxError(f"malformed {head}")
            inner = dict(scope)
            for b in x[1]:
                if not isinstance(b, list) or len(b) != 2:
                    raise SmtSyntaxError("malformed sorted variable")
                inner[_name(b[0])] = self.sort(b[1])
            self._expect(self.term(x[2], inner), "Bool", head)
            return "Bool"
        args = [self.term(a, scope) for a in x[1:]]
        op = _name(head)
        if op in ("and", "or", "=>"):
            if len(args) < 2:
                raise SmtSyntaxError(f"{op} needs at least two arguments")
            for a in args:
                self._expect(a, "Bool", op)
            return "Bool"
        if op == "not":
            self._arity(op, args, 1)
            self._expect(args[0], "Bool", op)
            return "Bool"
        if op in ("=", "distinct"):
            if len(args) < 2 or len(set(args)) != 1:
                raise SmtSyntaxError(f"{op} over mismatched sorts {args}")
            return "Bool"
        if op == "ite":
            self._arity(op, args, 3)
            self._expect(args[0], "Bool", op)
            if args[1] != args[2]:
                raise SmtSyntaxError("ite branches differ in sort")
            return args[1]
        if op in ("+", "*", "-"):
            if not args or (op != "-" and len(args) < 2):
                raise SmtSyntaxError(f"{op} arity")
            for a in args:
                self._expect(a, "Int", op)
            return "Int"
        if op in ("div", "mod"):
            self._arity(op, args, 2)
            for a in args:
                self._expect(a, "Int", op)
            return "Int"
        if op in ("<", "<=", ">", ">="):
            self._arity(op, args, 2)
            for a in args:
                self._expect(a, "Int", op)
            return "Bool"
        if op in self.funs:
            dom, cod = self.funs[op]
            if tuple(args) != dom:
                raise SmtSyntaxError(f"{op} expects {dom}, got {tuple(args)}")
            return cod
        raise SmtSyntaxError(f"unknown function {op}")

    @staticmethod
    def _arity(op, args, n):
        if len(args) != n:
            raise SmtSyntaxError(f"{op} expects {n} arguments, got {len(args)}")

    @staticmethod
    def _expect(got, want, where):
        if got != want:
            raise SmtSyntaxError(f"{where}: expected {want}, got {got}")

    def command(self, c):
        if not isinstance(c, list) or not c or not isinstance(c[0], str):
            raise SmtSyntaxError(f"not a command: {c!r}")
        head, args = c[0], c[1:]
        match head:
            case "set-logic":
                self._arity(head, args, 1)
                _name(args[0])
            case "set-option" | "set-info":
                pass
            case "declare-sort":
                if len(args) not in (1, 2) or (len(args) == 2 and args[1] != "0"):
                    raise SmtSyntaxError("declare-sort expects a name and arity 0")
                self.sorts.add(_name(args[0]))
            case "declare-const":
                self._arity(head, args, 2)
                self.funs[_name(args[0])] = ((), self.sort(args[1]))
            case "declare-fun":
                self._arity(head, args, 3)
                if not isinstance(args[1], list):
                    raise SmtSyntaxError("declare-fun expects a sort list")
                self.funs[_name(args[0])] = (tuple(self.sort(s) for s in args[1]), self.sort(args[2]))
            case "assert":
                self._arity(head, args, 1)
                self._expect(self.term(args[0], {}), "Bool", "assert")
            case "check-sat" | "get-model" | "exit" | "push" | "pop":
                pass
            case _:
                raise SmtSyntaxError(f"unknown command {head}")


def check_smtlib(text: str) -> int:
    """Parse and sort-check a script; returns the number of commands."""
    commands = _read(text)
    checker = _Checker()
    for c in commands:
        checker.command(c)
    return len(commands)


# --------------------------------------------------------------------------
# Dispatch


@dataclass(frozen=True)
class SolverConfig:
    command: str | None = None  # e.g. "z3 -smt2 {file}"; None disables
    timeout: float = DEFAULT_TIMEOUT
    keep_dir: str | None = None
    workers: int = 4

    @property
    def enabled(self) -> bool:
        return bool(self.command) and self.command.strip().lower() != "none"

    def with_env(self) -> SolverConfig:
        env = os.environ.get("VCFORGE_SOLVER")
        if env is None:
            return self
        return SolverConfig(env, self.timeout, self.keep_dir, self.workers)


@dataclass(frozen=True)
class SolveResult:
    status: str  # "unsat", "sat", "unknown" or "unavailable"
    output: str = ""
    path: str | None = None

    @property
    def discharged(self) -> bool:
        return self.status == "unsat"


def dispatch(job: SmtJob, config: SolverConfig) -> SolveResult:
    text = job.text()
    check_smtlib(text)
    path = None
    if config.keep_dir:
        Path(config.keep_dir).mkdir(parents=True, exist_ok=True)
        path = str(Path(config.keep_dir) / f"{job.digest()}.smt2")
        Path(path).write_text(text)
    if not config.enabled:
        return SolveResult("unavailable", path=path)
    with tempfile.TemporaryDirectory() as tmp:
        file = Path(tmp) / "job.smt2"
        file.write_text(text + "(get-model)\n")
        argv = [a.replace("{file}", str(file)) for a in shlex.split(config.command)]
        if not any("{file}" in a for a in shlex.split(config.command)):
            argv.append(str(file))
        try:
            proc = subprocess.run(argv, capture_output=True, text=True, timeout=config.timeout)
        except subprocess.TimeoutExpired:
            raise SolverTimeout(f"solver exceeded {config.timeout}s") from None
        except OSError as e:
            raise SolverSpawnError(f"cannot run {argv[0]}: {e}") from None
    lines = [ln.strip() for ln in proc.stdout.splitlines() if ln.strip()]
    if not lines or lines[0] not in ("sat", "unsat", "unknown"):
        raise MalformedOutput(f"unexpected solver output: {(proc.stdout + proc.stderr)[:200]!r}")
    output = "\n".join(lines[1:]) if lines[0] == "sat" else ""
    return SolveResult(lines[0], output, path)


def dispatch_all(jobs: Iterable[SmtJob], config: SolverConfig) -> list[SolveResult | SmtError]:
    """Run jobs in parallel; results come back in job order, errors as values."""

    def one(job):
        try:
            return dispatch(job, config)
        except SmtError as e:
            return e

    jobs = list(jobs)
    if config.workers <= 1 or len(jobs) <= 1:
        return [one(j) for j in jobs]
    with ThreadPoolExecutor(max_workers=config.workers) as pool:
        return list(pool.map(one, jobs))


def oracle_discharge(item: Goal | SmtJob, model: FiniteModel) -> bool:
    if isinstance(item, SmtJob):
        if item.source is None:
            raise ValueError("job has no source goal")
        ctx, phi = item.source
    else:
        ctx, phi = item.env, item.prop
    return eval_validity(model, ctx, phi)
