"""Sorts, terms and contexts of the object logic.

Bound variables are de Bruijn indices; variables introduced by a context are
named (``FVar``).  Binder names on ``Lam``/``Forall`` are display hints only and
do not take part in equality, so structural equality is alpha-equivalence.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterator, Union


# --------------------------------------------------------------------------
# Sorts


class Sort:
    __slots__ = ()


@dataclass(frozen=True)
class UnitSort(Sort):
    def __str__(self):
        return "Unit"


@dataclass(frozen=True)
class BoolSort(Sort):
    def __str__(self):
        return "Bool"


@dataclass(frozen=True)
class IntSort(Sort):
    def __str__(self):
        return "Int"


@dataclass(frozen=True)
class PropSort(Sort):
    def __str__(self):
        return "Prop"


@dataclass(frozen=True)
class Uninterp(Sort):
    name: str
    size: int | None = field(default=None, compare=False)

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Arrow(Sort):
    dom: Sort
    cod: Sort

    def __str__(self):
        parts = [self.dom]
        cod = self.cod
        while isinstance(cod, Arrow):
            parts.append(cod.dom)
            cod = cod.cod
        parts.append(cod)
        return "(-> " + " ".join(map(str, parts)) + ")"


UNIT = UnitSort()
BOOL = BoolSort()
INT = IntSort()
PROP = PropSort()


def arrows(*sorts: Sort) -> Sort:
    """Right-nested arrow: ``arrows(a, b, c) == Arrow(a, Arrow(b, c))``."""
    result = sorts[-1]
    for s in reversed(sorts[:-1]):
        result = Arrow(s, result)
    return result


# --------------------------------------------------------------------------
# Terms


class Term:
    __slots__ = ()

    def __str__(self):
        from vcforge.sexpr import show

        return show(self)


@dataclass(frozen=True, repr=False)
class _Leaf(Term):
    def __repr__(self):
        return f"{type(self).__name__}()"


@dataclass(frozen=True)
class BVar(Term):
    index: int


@dataclass(frozen=True)
class FVar(Term):
    name: str


@dataclass(frozen=True, repr=False)
class UnitLit(_Leaf):
    pass


@dataclass(frozen=True)
class BoolLit(Term):
    value: bool


@dataclass(frozen=True)
class IntLit(Term):
    value: int


@dataclass(frozen=True)
class Lam(Term):
    sort: Sort
    body: Term
    name: str = field(default="x", compare=False)


@dataclass(frozen=True)
class App(Term):
    fn: Term
    arg: Term


@dataclass(frozen=True)
class Forall(Term):
    sort: Sort
    body: Term
    name: str = field(default="x", compare=False)


@dataclass(frozen=True)
class And(Term):
    lhs: Term
    rhs: Term


@dataclass(frozen=True)
class Or(Term):
    lhs: Term
    rhs: Term


@dataclass(frozen=True)
class Implies(Term):
    lhs: Term
    rhs: Term


@dataclass(frozen=True)
class Iff(Term):
    lhs: Term
    rhs: Term


@dataclass(frozen=True)
class Eq(Term):
    sort: Sort | None
    lhs: Term
    rhs: Term


@dataclass(frozen=True, repr=False)
class TrueP(_Leaf):
    pass


@dataclass(frozen=True, repr=False)
class FalseP(_Leaf):
    pass


@dataclass(frozen=True)
class Squash(Term):
    prop: Term


@dataclass(frozen=True)
class WithTactic(Term):
    phi: Term
    tactic: str


ARITH_OPS = ("+", "-", "*", "div", "mod", "<", "<=")
COMPARISONS = ("<", "<=")


@dataclass(frozen=True)
class Arith(Term):
    op: str
    args: tuple[Term, ...]

    def __post_init__(self):
        if self.op not in ARITH_OPS:
            raise ValueError(f"unknown arithmetic operator {self.op!r}")
        if len(self.args) != 2:
            raise ValueError(f"{self.op} takes two operands")


@dataclass(frozen=True)
class Metavar(Term):
    """A unification variable.

    ``pending`` records the de Bruijn operations (shift, instantiate, abstract)
    that were applied to the metavariable's position before it was solved; they
    are replayed on its solution when it is substituted in.
    """

    id: int
    sort: Sort
    pending: tuple = ()

    def push(self, op: tuple) -> Metavar:
        return Metavar(self.id, self.sort, self.pending + (op,))


TRUE = TrueP()
FALSE = FalseP()
UNIT_VALUE = UnitLit()

Binary = Union[And, Or, Implies, Iff]
CONNECTIVES = (And, Or, Implies, Iff)


def Not(p: Term) -> Term:
    return Implies(p, FALSE)


def plus(a: Term, b: Term) -> Term:
    return Arith("+", (a, b))


def minus(a: Term, b: Term) -> Term:
    return Arith("-", (a, b))


def times(a: Term, b: Term) -> Term:
    return Arith("*", (a, b))


def apply(fn: Term, *args: Term) -> Term:
    for a in args:
        fn = App(fn, a)
    return fn


def unapply(t: Term) -> tuple[Term, list[Term]]:
    """Split an application spine into its head and arguments."""
    args = []
    while isinstance(t, App):
        args.append(t.arg)
        t = t.fn
    args.reverse()
    return t, args


# --------------------------------------------------------------------------
# Generic traversal


def children(t: Term) -> Iterator[tuple[Term, bool]]:
    """Yield ``(child, binds)`` for each immediate subterm; ``binds`` marks
    children that sit under one extra binder."""
    match t:
        case Lam(_, body) | Forall(_, body):
            yield body, True
        case App(f, a):
            yield f, False
            yield a, False
        case And(l, r) | Or(l, r) | Implies(l, r) | Iff(l, r) | Eq(_, l, r):
            yield l, False
            yield r, False
        case Squash(p) | WithTactic(p, _):
            yield p, False
        case Arith(_, args):
            for a in args:
                yield a, False


def map_children(t: Term, fn: Callable[[Term, bool], Term]) -> Term:
    match t:
        case Lam(s, body, n):
            return Lam(s, fn(body, True), n)
        case Forall(s, body, n):
            return Forall(s, fn(body, True), n)
        case App(f, a):
            return App(fn(f, False), fn(a, False))
        case And(l, r):
            return And(fn(l, False), fn(r, False))
        case Or(l, r):
            return Or(fn(l, False), fn(r, False))
        case Implies(l, r):
            return Implies(fn(l, False), fn(r, False))
        case Iff(l, r):
            return Iff(fn(l, False), fn(r, False))
        case Eq(s, l, r):
            return Eq(s, fn(l, False), fn(r, False))
        case Squash(p):
            return Squash(fn(p, False))
        case WithTactic(p, n):
            return WithTactic(fn(p, False), n)
        case Arith(op, args):
            return Arith(op, tuple(fn(a, False) for a in args))
    return t


def subterms(t: Term) -> Iterator[Term]:
    yield t
    for c, _ in children(t):
        yield from subterms(c)


def size(t: Term) -> int:
    return sum(1 for _ in subterms(t))


def free_vars(t: Term) -> set[str]:
    return {u.name for u in subterms(t) if isinstance(u, FVar)}


def metavars(t: Term) -> set[int]:
    return {u.id for u in subterms(t) if isinstance(u, Metavar)}


def has_marker(t: Term) -> bool:
    return any(isinstance(u, WithTactic) for u in subterms(t))


def is_locally_closed(t: Term, depth: int = 0) -> bool:
    match t:
        case BVar(i):
            return i < depth
        case Metavar():
            return True
    return all(is_locally_closed(c, depth + b) for c, b in children(t))


# --------------------------------------------------------------------------
# de Bruijn operations


def shift(t: Term, by: int, cutoff: int = 0) -> Term:
    if by == 0:
        return t

    def go(u, c):
        match u:
            case BVar(i):
                return BVar(i + by) if i >= c else u
            case Metavar():
                return u.push(("shift", by, c))
            case FVar() | IntLit() | BoolLit() | UnitLit() | TrueP() | FalseP():
                return u
        return map_children(u, lambda ch, b: go(ch, c + b))

    return go(t, cutoff)


def instantiate(body: Term, replacement: Term, depth: int = 0) -> Term:
    """Substitute ``replacement`` for the loose index ``depth`` of ``body``,
    decrementing the indices above it.  Capture-avoiding by construction."""

    def go(u, d):
        match u:
            case BVar(i):
                if i == d:
                    return shift(replacement, d)
                return BVar(i - 1) if i > d else u
            case Metavar():
                return u.push(("inst", d, replacement))
            case FVar() | IntLit() | BoolLit() | UnitLit() | TrueP() | FalseP():
                return u
        return map_children(u, lambda ch, b: go(ch, d + b))

    return go(body, depth)


# The operation is called ``subst`` in the public API.
subst = instantiate


def abstract(t: Term, name: str, depth: int = 0) -> Term:
    """Turn free occurrences of ``name`` into the bound index ``depth``.

    ``t`` must be locally closed.
    """

    def go(u, d):
        match u:
            case FVar(n):
                return BVar(d) if n == name else u
            case Metavar():
                return u.push(("abs", name, d))
            case BVar() | IntLit() | BoolLit() | UnitLit() | TrueP() | FalseP():
                return u
        return map_children(u, lambda ch, b: go(ch, d + b))

    return go(t, depth)


def open_binder(body: Term, name: str) -> Term:
    return instantiate(body, FVar(name))


def replay(solution: Term, pending: tuple) -> Term:
    for op in pending:
        match op:
            case ("shift", by, c):
                solution = shift(solution, by, c)
            case ("inst", d, repl):
                solution = instantiate(solution, repl, d)
            case ("abs", name, d):
                solution = abstract(solution, name, d)
    return solution


def rename_free(t: Term, mapping: dict[str, Term]) -> Term:
    """Replace free variables by terms (which must be locally closed)."""

    def go(u, d):
        match u:
            case FVar(n) if n in mapping:
                return shift(mapping[n], d)
            case BVar() | FVar() | IntLit() | BoolLit() | UnitLit() | TrueP() | FalseP():
                return u
        return map_children(u, lambda ch, b: go(ch, d + b))

    return go(t, 0)


def resolve_metavars(t: Term, assignments, stop=frozenset()) -> Term:
    """Instantiate assigned metavariables transitively (``stop`` ids are left)."""

    def go(u):
        match u:
            case Metavar(i, _, pending) if i not in stop and i in assignments:
                return replay(go(assignments[i]), pending)
            case Metavar():
                return u
        return map_children(u, lambda ch, b: go(ch))

    return go(t)


# --------------------------------------------------------------------------
# Contexts


@dataclass(frozen=True)
class Binder:
    name: str
    sort: Sort


@dataclass(frozen=True)
class Hyp:
    name: str
    prop: Term


@dataclass(frozen=True)
class Context:
    """A telescope of variable binders and named hypotheses.

    Hypotheses may mention binders that precede them.  Hypotheses named ``_``
    are anonymous and may repeat.
    """

    entries: tuple[Binder | Hyp, ...] = ()

    def bind(self, name: str, sort: Sort) -> Context:
        return Context(self.entries + (Binder(name, sort),))

    def assume(self, name: str, prop: Term) -> Context:
        return Context(self.entries + (Hyp(name, prop),))

    def __add__(self, other: Context) -> Context:
        return Context(self.entries + other.entries)

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    @property
    def binders(self) -> tuple[Binder, ...]:
        return tuple(e for e in self.entries if isinstance(e, Binder))

    @property
    def hyps(self) -> tuple[Hyp, ...]:
        return tuple(e for e in self.entries if isinstance(e, Hyp))

    def lookup(self, name: str) -> Binder | Hyp | None:
        for e in reversed(self.entries):
            if e.name == name:
                return e
        return None

    def names(self) -> set[str]:
        return {e.name for e in self.entries}

    def fresh(self, hint: str, avoid=()) -> str:
        taken = self.names() | set(avoid)
        hint = hint if hint and hint != "_" else "x"
        if hint not in taken:
            return hint
        i = 1
        while f"{hint}{i}" in taken:
            i += 1
        return f"{hint}{i}"

    def common_prefix(self, other: Context) -> int:
        n = 0
        for a, b in zip(self.entries, other.entries):
            if a != b:
                break
            n += 1
        return n


EMPTY = Context()


# --------------------------------------------------------------------------
# Type checking


class TypeCheckError(Exception):
    def __init__(self, message: str, path: tuple = (), term: Term | None = None):
        self.message = message
        self.path = path
        self.term = term
        where = "/".join(map(str, path)) or "<root>"
        super().__init__(f"{message} at {where}")


def typecheck(ctx: Context, t: Term) -> Sort:
    return infer(ctx, t)


def infer(ctx: Context, t: Term, bound: tuple[Sort, ...] = (), path: tuple = ()) -> Sort:
    def fail(msg):
        raise TypeCheckError(msg, path, t)

    def sub(child, label, extra=()):
        return infer(ctx, child, bound + extra, path + (label,))

    def expect(child, label, sort, extra=()):
        got = sub(child, label, extra)
        if got != sort:
            raise TypeCheckError(f"expected {sort}, got {got}", path + (label,), child)

    match t:
        case BVar(i):
            if i >= len(bound):
                fail(f"unbound index {i}")
            return bound[-1 - i]
        case FVar(name):
            entry = ctx.lookup(name)
            if entry is None:
                fail(f"unbound variable {name}")
            return entry.sort if isinstance(entry, Binder) else UNIT
        case UnitLit():
            return UNIT
        case BoolLit():
            return BOOL
        case IntLit():
            return INT
        case Lam(s, body):
            return Arrow(s, sub(body, "body", (s,)))
        case App(f, a):
            fs = sub(f, "fn")
            if not isinstance(fs, Arrow):
                fail(f"applying a non-function of sort {fs}")
            expect(a, "arg", fs.dom)
            return fs.cod
        case Forall(s, body):
            expect(body, "body", PROP, (s,))
            return PROP
        case And(l, r) | Or(l, r) | Implies(l, r) | Iff(l, r):
            expect(l, "lhs", PROP)
            expect(r, "rhs", PROP)
            return PROP
        case Eq(s, l, r):
            if s is None:
                s = sub(l, "lhs")
            else:
                expect(l, "lhs", s)
            expect(r, "rhs", s)
            return PROP
        case TrueP() | FalseP():
            return PROP
        case Squash(p):
            expect(p, "prop", PROP)
            return PROP
        case WithTactic(p, _):
            expect(p, "phi", PROP)
            return PROP
        case Arith(op, args):
            for i, a in enumerate(args):
                expect(a, i, INT)
            return PROP if op in COMPARISONS else INT
        case Metavar(_, s):
            return s
    fail(f"unknown term {t!r}")


def check_prop(ctx: Context, t: Term) -> None:
    s = typecheck(ctx, t)
    if s != PROP:
        raise TypeCheckError(f"expected Prop, got {s}", (), t)


def check_context(ctx: Context) -> None:
    seen: set[str] = set()
    prefix = Context()
    for e in ctx.entries:
        if e.name in seen and e.name != "_":
            raise TypeCheckError(f"duplicate name {e.name}")
        seen.add(e.name)
        if isinstance(e, Hyp):
            check_prop(prefix, e.prop)
        prefix = Context(prefix.entries + (e,))


def elaborate(ctx: Context, t: Term, bound: tuple[Sort, ...] = ()) -> Term:
    """Fill in missing equality sorts by inference."""

    def go(u, bnd):
        match u:
            case Eq(None, l, r):
                s = infer(ctx, l, bnd)
                return Eq(s, go(l, bnd), go(r, bnd))
            case Lam(s, _) | Forall(s, _):
                return map_children(u, lambda ch, b: go(ch, bnd + (s,)))
        return map_children(u, lambda ch, b: go(ch, bnd))

    return go(t, bound)


# --------------------------------------------------------------------------
# Normalization


DEFAULT_FUEL = 100_000


class FuelExhausted(Exception):
    pass


def euclid_divmod(a: int, b: int) -> tuple[int, int]:
    """Division with a non-negative remainder, as in SMT-LIB."""
    q = a // b if b > 0 else -(a // -b)
    return q, a - b * q


def fold_arith(op: str, args: tuple[Term, ...]) -> Term:
    a, b = args
    if not (isinstance(a, IntLit) and isinstance(b, IntLit)):
        return Arith(op, args)
    x, y = a.value, b.value
    match op:
        case "+":
            return IntLit(x + y)
        case "-":
            return IntLit(x - y)
        case "*":
            return IntLit(x * y)
        case "div" if y != 0:
            return IntLit(euclid_divmod(x, y)[0])
        case "mod" if y != 0:
            return IntLit(euclid_divmod(x, y)[1])
        case "<":
            return TRUE if x < y else FALSE
        case "<=":
            return TRUE if x <= y else FALSE
    return Arith(op, args)


def normalize(t: Term, fuel: int = DEFAULT_FUEL, unfold_tactics: bool = False) -> Term:
    """Strong beta-normal form with literal arithmetic folded.

    ``WithTactic`` markers are kept unless ``unfold_tactics`` is set; metavariables
    are opaque.  Raises ``FuelExhausted`` once ``fuel`` steps are used up.
    """
    budget = [fuel]

    def norm(u):
        budget[0] -= 1
        if budget[0] < 0:
            raise FuelExhausted(f"normalization exceeded {fuel} steps")
        match u:
            case App(f, a):
                f2, a2 = norm(f), norm(a)
                if isinstance(f2, Lam):
                    return norm(instantiate(f2.body, a2))
                return App(f2, a2)
            case Arith(op, args):
                return fold_arith(op, tuple(norm(x) for x in args))
            case WithTactic(p, _) if unfold_tactics:
                return norm(p)
            case Metavar() | BVar() | FVar() | IntLit() | BoolLit() | UnitLit() | TrueP() | FalseP():
                return u
        return map_children(u, lambda ch, b: norm(ch))

    return norm(t)


def drop_markers(t: Term) -> Term:
    match t:
        case WithTactic(p, _):
            return drop_markers(p)
    return map_children(t, lambda ch, b: drop_markers(ch))


def simplify(t: Term) -> Term:
    """Normalize, then apply propositional and arithmetic unit laws
    bottom-up."""
    return _simp(normalize(drop_markers(t)))


def _simp(t: Term) -> Term:
    t = map_children(t, lambda ch, b: _simp(ch))
    match t:
        case And(TrueP(), x) | And(x, TrueP()):
            return x
        case And(FalseP(), _) | And(_, FalseP()):
            return FALSE
        case Or(TrueP(), _) | Or(_, TrueP()):
            return TRUE
        case Or(FalseP(), x) | Or(x, FalseP()):
            return x
        case Implies(TrueP(), x):
            return x
        case Implies(FalseP(), _) | Implies(_, TrueP()):
            return TRUE
        case Implies(x, y) if x == y:
            return TRUE
        case Iff(x, y) if x == y:
            return TRUE
        case Iff(TrueP(), x) | Iff(x, TrueP()):
            return x
        case Eq(_, x, y) if x == y:
            return TRUE
        case Eq(_, IntLit(x), IntLit(y)) | Eq(_, BoolLit(x), BoolLit(y)):
            return TRUE if x == y else FALSE
        case Forall(_, TrueP()):
            return TRUE
        case Arith("+", (IntLit(0), x)) | Arith("+" | "-", (x, IntLit(0))):
            return x
        case Arith("*", (IntLit(1), x)) | Arith("*" | "div", (x, IntLit(1))):
            return x
        case Squash(p):
            return p
    return t
