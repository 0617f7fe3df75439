"""Problem files (``.vcf``) and tactic scripts (``.tac``).

A problem file is a sequence of s-expressions::

    (declare-sort t 3)            ; size hint optional
    (declare-const X Prop)        ; declare-var is a synonym
    (assume h (= x 1))
    (define two (+ 1 1))          ; expanded where used
    (goal (=> X (with-tactic X "tau")))
    (tactic tau (seq (intro) (exact h)))
    (script (seq (intro) (smt)))  ; optional script for the whole goal
    (model (int -2 2) (sort t 3) (max-carrier 4096))
    (logic UFLIA)

Declarations must precede their uses and there is exactly one goal.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

from vcforge.canon import INT_ADD, MonoidOps, canon_monoid, canon_semiring
from vcforge.engine import (
    ErrorKind,
    TacticError,
    catch,
    divide,
    dump,
    exact,
    fail,
    first,
    intro,
    join,
    on_all_goals,
    refine_intro,
    repeat,
    seq,
    skip,
    smt_defer,
    split,
    trivial,
)
from vcforge.model import FiniteModel
from vcforge.sexpr import (
    Num,
    ParseError,
    SList,
    Str,
    Sym,
    TermParser,
    parse_sort,
    pos_of,
    read_all,
    show,
    show_sexp,
    show_sort,
    signature_sorts,
)
from vcforge.terms import (
    PROP,
    Binder,
    Context,
    IntLit,
    Term,
    TypeCheckError,
    Uninterp,
    check_context,
    typecheck,
)

Tactic = Callable


@dataclass(frozen=True)
class Problem:
    sorts: Mapping[str, Uninterp]
    ctx: Context
    goal: Term
    defs: Mapping[str, Term] = field(default_factory=dict)
    tactics: Mapping[str, object] = field(default_factory=dict)  # name -> script s-expression
    script: object | None = None
    model: FiniteModel | None = None
    logic: str | None = None
    source: str = "<input>"


def _expect(cond, msg, x):
    if not cond:
        raise ParseError(msg, pos_of(x))


def parse_problem(text: str, source: str = "<input>") -> Problem:
    sorts: dict[str, Uninterp] = {}
    ctx = Context()
    defs: dict[str, Term] = {}
    tactics: dict[str, object] = {}
    goal = script = model = logic = None

    def term(x):
        return TermParser(ctx, sorts, defs).parse(x)

    for form in read_all(text):
        _expect(isinstance(form, SList) and form and isinstance(form[0], Sym), "expected a declaration", form)
        head, args = str(form[0]), form[1:]
        taken = ctx.names() | set(defs) | set(sorts)
        match head:
            case "declare-sort":
                _expect(len(args) in (1, 2) and isinstance(args[0], Sym), "usage: (declare-sort name [size])", form)
                _expect(args[0] not in sorts, f"sort {args[0]} declared twice", form)
                size = int(args[1]) if len(args) == 2 else None
                _expect(size is None or size > 0, "sort size must be positive", form)
                sorts[str(args[0])] = Uninterp(str(args[0]), size)
            case "declare-const" | "declare-var":
                _expect(len(args) == 2 and isinstance(args[0], Sym), f"usage: ({head} name sort)", form)
                _expect(args[0] not in taken, f"{args[0]} is already declared", form)
                ctx = ctx.bind(str(args[0]), parse_sort(args[1], sorts))
            case "assume":
                _expect(len(args) == 2 and isinstance(args[0], Sym), "usage: (assume name prop)", form)
                _expect(args[0] == "_" or args[0] not in taken, f"{args[0]} is already declared", form)
                prop = term(args[1])
                _check_prop(ctx, prop, args[1])
                ctx = ctx.assume(str(args[0]), prop)
            case "define":
                _expect(len(args) == 2 and isinstance(args[0], Sym), "usage: (define name term)", form)
                _expect(args[0] not in taken, f"{args[0]} is already declared", form)
                value = term(args[1])
                try:
                    typecheck(ctx, value)
                except TypeCheckError as e:
                    raise ParseError(str(e), pos_of(args[1])) from None
                defs[str(args[0])] = value
            case "goal":
                _expect(len(args) == 1, "usage: (goal prop)", form)
                _expect(goal is None, "a problem has exactly one goal", form)
                goal = term(args[0])
                _check_prop(ctx, goal, args[0])
            case "tactic":
                _expect(len(args) == 2 and isinstance(args[0], (Sym, Str)), "usage: (tactic name script)", form)
                compile_script(args[1], _ANY)  # reject malformed scripts early
                tactics[str(args[0])] = args[1]
            case "script":
                _expect(len(args) == 1, "usage: (script s)", form)
                compile_script(args[0], _ANY)
                script = args[0]
            case "model":
                model = _parse_model(args, form)
            case "logic":
                _expect(len(args) == 1 and isinstance(args[0], Sym), "usage: (logic NAME)", form)
                logic = str(args[0])
            case _:
                raise ParseError(f"unknown declaration {head}", pos_of(form))
    if goal is None:
        raise ParseError("no goal in problem")
    return Problem(sorts, ctx, goal, defs, tactics, script, model, logic, source)


def _check_prop(ctx, t, x):
    try:
        s = typecheck(ctx, t)
    except TypeCheckError as e:
        raise ParseError(str(e), pos_of(x)) from None
    if s != PROP:
        raise ParseError(f"expected a proposition, got sort {s}", pos_of(x))


def _parse_model(args, form) -> FiniteModel:
    int_range, sizes, cap = None, {}, 4096
    for item in args:
        _expect(isinstance(item, SList) and item and isinstance(item[0], Sym), "malformed model entry", item)
        key, vals = str(item[0]), item[1:]
        _expect(all(isinstance(v, (Num, Sym)) for v in vals), "malformed model entry", item)
        match key:
            case "int":
                _expect(len(vals) == 2 and vals[0] <= vals[1], "usage: (int lo hi)", item)
                int_range = (int(vals[0]), int(vals[1]))
            case "sort":
                _expect(len(vals) == 2 and isinstance(vals[1], Num), "usage: (sort name size)", item)
                sizes[str(vals[0])] = int(vals[1])
            case "max-carrier":
                _expect(len(vals) == 1 and isinstance(vals[0], Num), "usage: (max-carrier n)", item)
                cap = int(vals[0])
            case _:
                raise ParseError(f"unknown model entry {key}", pos_of(item))
    return FiniteModel(int_range, sizes, max_carrier=cap)


def load_problem(path: str) -> Problem:
    with open(path, encoding="utf-8") as fh:
        return parse_problem(fh.read(), path)


def show_problem(p: Problem) -> str:
    """Canonical text of a problem; definitions are already expanded."""
    lines = []
    for name, s in p.sorts.items():
        lines.append(f"(declare-sort {name}{'' if s.size is None else ' ' + str(s.size)})")
    for e in p.ctx.entries:
        if isinstance(e, Binder):
            lines.append(f"(declare-const {e.name} {show_sort(e.sort)})")
        else:
            lines.append(f"(assume {e.name} {show(e.prop)})")
    lines.append(f"(goal {show(p.goal)})")
    for name, s in p.tactics.items():
        lines.append(f"(tactic {name} {show_sexp(s)})")
    if p.script is not None:
        lines.append(f"(script {show_sexp(p.script)})")
    if p.model is not None:
        parts = []
        if p.model.int_range is not None:
            parts.append(f"(int {p.model.int_range[0]} {p.model.int_range[1]})")
        parts.extend(f"(sort {k} {v})" for k, v in p.model.sizes.items())
        parts.append(f"(max-carrier {p.model.max_carrier})")
        lines.append("(model " + " ".join(parts) + ")")
    if p.logic:
        lines.append(f"(logic {p.logic})")
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# Scripts

class _AnyName(dict):
    """Accepts every ``(call name)`` when only the syntax is being checked."""

    def __contains__(self, key):
        return True

    def __getitem__(self, key):
        return skip


_ANY = _AnyName()

_NULLARY = {
    "intro": intro,
    "smt": smt_defer,
    "trivial": trivial,
    "split": split,
    "join": join,
    "refine-intro": refine_intro,
    "canon-semiring": canon_semiring,
    "skip": skip,
}


def _monoid(args, commutative, x):
    if not args:
        return canon_monoid(INT_ADD if commutative else MonoidOps(IntLit(0), "+", commutative=False))
    _expect(len(args) == 2, "usage: (canon-monoid [op unit])", x)

    def tac(state):
        if not state.goals:
            raise TacticError(ErrorKind.EMPTY_GOALS, "no goals", state)
        p = TermParser(state.goals[0].env, signature_sorts(state.goals[0].env))
        op = str(args[0]) if args[0] in ("+", "*") else p.parse(args[0])
        ops = MonoidOps(p.parse(args[1]), op, commutative)
        return canon_monoid(ops)(state)

    return tac


def _exact(arg):
    def tac(state):
        if not state.goals:
            raise TacticError(ErrorKind.EMPTY_GOALS, "no goals", state)
        env = state.goals[0].env
        try:
            e = TermParser(env, signature_sorts(env)).parse(arg)
        except ParseError as err:
            raise TacticError(ErrorKind.TYPE_MISMATCH, str(err), state) from None
        return exact(state, e)

    return tac


def compile_script(x, registry: Mapping[str, Tactic] | None = None) -> Tactic:
    """Turn a script s-expression into a tactic.  ``(call name)`` refers to
    an entry of ``registry``."""
    _expect(isinstance(x, SList) and x and isinstance(x[0], Sym), "a script step is a list like (intro)", x)
    head, args = str(x[0]), x[1:]
    sub = lambda a: compile_script(a, registry)  # noqa: E731
    if head in _NULLARY:
        _expect(not args, f"({head}) takes no arguments", x)
        return _NULLARY[head]
    match head:
        case "seq":
            return seq(*map(sub, args))
        case "first":
            _expect(args, "(first ...) needs alternatives", x)
            return first(*map(sub, args))
        case "repeat":
            _expect(len(args) == 1, "usage: (repeat s)", x)
            return repeat(sub(args[0]))
        case "catch":
            _expect(len(args) == 1, "usage: (catch s)", x)
            return catch(sub(args[0]))
        case "all":
            _expect(len(args) == 1, "usage: (all s)", x)
            return on_all_goals(sub(args[0]))
        case "divide":
            _expect(len(args) == 3 and isinstance(args[0], Num), "usage: (divide n s t)", x)
            return divide(int(args[0]), sub(args[1]), sub(args[2]))
        case "exact":
            _expect(len(args) == 1, "usage: (exact term)", x)
            return _exact(args[0])
        case "canon-monoid" | "canon-monoid-comm":
            return _monoid(args, head.endswith("comm"), x)
        case "dump":
            _expect(len(args) == 1 and isinstance(args[0], Str), 'usage: (dump "label")', x)
            return dump(str(args[0]))
        case "fail":
            _expect(len(args) <= 1, 'usage: (fail ["message"])', x)
            return fail(str(args[0]) if args else "failed")
        case "call":
            _expect(len(args) == 1 and registry is not None and str(args[0]) in registry,
                    f"unknown tactic {show_sexp(args[0]) if args else ''}", x)
            return registry[str(args[0])]
    raise ParseError(f"unknown tactic step {head}", pos_of(x))


def parse_script(text: str, registry: Mapping[str, Tactic] | None = None) -> Tactic:
    forms = read_all(text)
    if len(forms) != 1:
        forms = [SList([Sym("seq"), *forms])]
    return compile_script(forms[0], registry)


def default_registry() -> dict[str, Tactic]:
    return {
        "canon-semiring": canon_semiring,
        "canon-monoid": canon_monoid(MonoidOps(IntLit(0), "+", commutative=False)),
        "canon-monoid-comm": canon_monoid(INT_ADD),
        "smt": smt_defer,
        "trivial": trivial,
        "split": repeat(split),
    }


def problem_registry(p: Problem, base: Mapping[str, Tactic] | None = None) -> dict[str, Tactic]:
    reg = dict(default_registry() if base is None else base)
    for name, s in p.tactics.items():
        reg[name] = compile_script(s, reg)
    return reg


def check_problem(p: Problem) -> None:
    check_context(p.ctx)
    typecheck(p.ctx, p.goal)
