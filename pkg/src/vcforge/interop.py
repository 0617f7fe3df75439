"""A typed source language, an untyped target language, and the coercions
between them.

Source terms may contain target code unembedded at a type (``SUnembed``) and
target terms may contain source code embedded at a type (``TEmbed``).  Both
evaluators are call-by-value; crossing the boundary applies ``scoerce`` or
``tcoerce``.  Polymorphic values travel through target code as ``TOpaque``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union


class InteropError(Exception):
    pass


class SrcTypeError(InteropError):
    pass


class Stuck(InteropError):
    pass


class OutOfFuel(InteropError):
    pass


# --------------------------------------------------------------------------
# Types


@dataclass(frozen=True)
class UnitT:
    pass


@dataclass(frozen=True)
class IntT:
    pass


@dataclass(frozen=True)
class TyVar:
    name: str


@dataclass(frozen=True)
class ArrowT:
    dom: SrcType
    cod: SrcType


@dataclass(frozen=True)
class ProdT:
    left: SrcType
    right: SrcType


@dataclass(frozen=True)
class SumT:
    left: SrcType
    right: SrcType


@dataclass(frozen=True)
class ForallT:
    var: str
    body: SrcType


SrcType = Union[UnitT, IntT, TyVar, ArrowT, ProdT, SumT, ForallT]
UNIT_T = UnitT()
INT_T = IntT()

# A type substitution: sorted (variable, type) pairs.
TypeSubst = tuple[tuple[str, SrcType], ...]
EMPTY_DELTA: TypeSubst = ()


def delta_of(mapping: dict[str, SrcType]) -> TypeSubst:
    return tuple(sorted(mapping.items()))


def ftv(t: SrcType) -> set[str]:
    match t:
        case TyVar(n):
            return {n}
        case ArrowT(a, b) | ProdT(a, b) | SumT(a, b):
            return ftv(a) | ftv(b)
        case ForallT(v, b):
            return ftv(b) - {v}
    return set()


def _fresh_tyvar(base: str, avoid: set[str]) -> str:
    i = 1
    while f"{base}{i}" in avoid:
        i += 1
    return f"{base}{i}"


def subst_type(t: SrcType, delta: dict[str, SrcType] | TypeSubst) -> SrcType:
    """Simultaneous, capture-avoiding substitution."""
    d = dict(delta)
    if not d:
        return t
    match t:
        case TyVar(n):
            return d.get(n, t)
        case ArrowT(a, b):
            return ArrowT(subst_type(a, d), subst_type(b, d))
        case ProdT(a, b):
            return ProdT(subst_type(a, d), subst_type(b, d))
        case SumT(a, b):
            return SumT(subst_type(a, d), subst_type(b, d))
        case ForallT(v, body):
            inner = {k: s for k, s in d.items() if k != v}
            clash = set().union(*(ftv(s) for s in inner.values())) if inner else set()
            if v in clash:
                v2 = _fresh_tyvar(v, clash | ftv(body) | set(inner))
                body = subst_type(body, {v: TyVar(v2)})
                v = v2
            return ForallT(v, subst_type(body, inner))
    return t


def types_equiv(a: SrcType, b: SrcType) -> bool:
    """Alpha-equivalence of types."""

    def go(x, y, ex: dict, ey: dict, depth: int) -> bool:
        match x, y:
            case TyVar(n), TyVar(m):
                return ex.get(n, n) == ey.get(m, m)
            case (ArrowT(a1, b1), ArrowT(a2, b2)) | (ProdT(a1, b1), ProdT(a2, b2)) | (SumT(a1, b1), SumT(a2, b2)):
                return go(a1, a2, ex, ey, depth) and go(b1, b2, ex, ey, depth)
            case ForallT(v1, b1), ForallT(v2, b2):
                tag = f"#{depth}"
                return go(b1, b2, {**ex, v1: tag}, {**ey, v2: tag}, depth + 1)
        return x == y and isinstance(x, (UnitT, IntT))

    return go(a, b, {}, {}, 0)


def type_wf(delta_vars: set[str], t: SrcType) -> bool:
    return ftv(t) <= delta_vars


# --------------------------------------------------------------------------
# Terms


class SrcTerm:
    __slots__ = ()


class TgtTerm:
    __slots__ = ()


@dataclass(frozen=True)
class SUnit(SrcTerm):
    pass


@dataclass(frozen=True)
class SInt(SrcTerm):
    value: int


@dataclass(frozen=True)
class SVar(SrcTerm):
    name: str


@dataclass(frozen=True)
class SLam(SrcTerm):
    var: str
    ty: SrcType
    body: SrcTerm


@dataclass(frozen=True)
class SApp(SrcTerm):
    fn: SrcTerm
    arg: SrcTerm


@dataclass(frozen=True)
class SPair(SrcTerm):
    left: SrcTerm
    right: SrcTerm


@dataclass(frozen=True)
class SFst(SrcTerm):
    e: SrcTerm


@dataclass(frozen=True)
class SSnd(SrcTerm):
    e: SrcTerm


@dataclass(frozen=True)
class SInl(SrcTerm):
    ty: SrcType  # the whole sum type
    e: SrcTerm


@dataclass(frozen=True)
class SInr(SrcTerm):
    ty: SrcType
    e: SrcTerm


@dataclass(frozen=True)
class SCase(SrcTerm):
    scrut: SrcTerm
    x1: str
    t1: SrcType
    e1: SrcTerm
    x2: str
    t2: SrcType
    e2: SrcTerm


@dataclass(frozen=True)
class STyLam(SrcTerm):
    var: str
    body: SrcTerm


@dataclass(frozen=True)
class STyApp(SrcTerm):
    e: SrcTerm
    ty: SrcType


@dataclass(frozen=True)
class SUnembed(SrcTerm):
    tgt: TgtTerm
    ty: SrcType
    delta: TypeSubst = EMPTY_DELTA


@dataclass(frozen=True)
class TUnit(TgtTerm):
    pass


@dataclass(frozen=True)
class TInt(TgtTerm):
    value: int


@dataclass(frozen=True)
class TVar(TgtTerm):
    name: str


@dataclass(frozen=True)
class TLam(TgtTerm):
    var: str
    body: TgtTerm


@dataclass(frozen=True)
class TApp(TgtTerm):
    fn: TgtTerm
    arg: TgtTerm


@dataclass(frozen=True)
class TPair(TgtTerm):
    left: TgtTerm
    right: TgtTerm


@dataclass(frozen=True)
class TFst(TgtTerm):
    e: TgtTerm


@dataclass(frozen=True)
class TSnd(TgtTerm):
    e: TgtTerm


@dataclass(frozen=True)
class TInl(TgtTerm):
    e: TgtTerm


@dataclass(frozen=True)
class TInr(TgtTerm):
    e: TgtTerm


@dataclass(frozen=True)
class TCase(TgtTerm):
    scrut: TgtTerm
    x1: str
    e1: TgtTerm
    x2: str
    e2: TgtTerm


@dataclass(frozen=True)
class TEmbed(TgtTerm):
    src: SrcTerm
    ty: SrcType
    delta: TypeSubst = EMPTY_DELTA


@dataclass(frozen=True)
class TOpaque(TgtTerm):
    src: SrcTerm


S_UNIT = SUnit()
T_UNIT = TUnit()


def boundary_nodes(t: SrcTerm | TgtTerm) -> int:
    """Number of Embed, Unembed and Opaque nodes anywhere in ``t``."""
    n = 1 if isinstance(t, (SUnembed, TEmbed, TOpaque)) else 0
    for c in _subterms(t):
        n += boundary_nodes(c)
    return n


def _subterms(t):
    for name in getattr(t, "__dataclass_fields__", {}):
        v = getattr(t, name)
        if isinstance(v, (SrcTerm, TgtTerm)):
            yield v


def free_vars(t: SrcTerm | TgtTerm) -> tuple[frozenset[str], frozenset[str]]:
    """Free (source, target) variables, looking through the boundary."""
    src: set[str] = set()
    tgt: set[str] = set()

    def go(u, bs: frozenset, bt: frozenset):
        match u:
            case SVar(n):
                if n not in bs:
                    src.add(n)
            case TVar(n):
                if n not in bt:
                    tgt.add(n)
            case SLam(x, _, body):
                go(body, bs | {x}, bt)
            case TLam(x, body):
                go(body, bs, bt | {x})
            case SCase(s, x1, _, e1, x2, _, e2):
                go(s, bs, bt)
                go(e1, bs | {x1}, bt)
                go(e2, bs | {x2}, bt)
            case TCase(s, x1, e1, x2, e2):
                go(s, bs, bt)
                go(e1, bs, bt | {x1})
                go(e2, bs, bt | {x2})
            case _:
                for c in _subterms(u):
                    go(c, bs, bt)

    go(t, frozenset(), frozenset())
    return frozenset(src), frozenset(tgt)


# --------------------------------------------------------------------------
# Source typing


def src_typecheck(e: SrcTerm, tyvars: frozenset[str] = frozenset(), gamma: dict | None = None) -> SrcType:
    def wf(tv, t):
        if not type_wf(set(tv), t):
            raise SrcTypeError(f"ill-formed type {show_type(t)}")

    def go(u, tv: frozenset, g: dict) -> SrcType:
        match u:
            case SUnit():
                return UNIT_T
            case SInt():
                return INT_T
            case SVar(n):
                if n not in g:
                    raise SrcTypeError(f"unbound variable {n}")
                return g[n]
            case SLam(x, t, body):
                wf(tv, t)
                return ArrowT(t, go(body, tv, {**g, x: t}))
            case SApp(f, a):
                ft = go(f, tv, g)
                at = go(a, tv, g)
                if not isinstance(ft, ArrowT):
                    raise SrcTypeError(f"applying a non-function of type {show_type(ft)}")
                if not types_equiv(ft.dom, at):
                    raise SrcTypeError(f"argument mismatch: {show_type(ft.dom)} vs {show_type(at)}")
                return ft.cod
            case SPair(a, b):
                return ProdT(go(a, tv, g), go(b, tv, g))
            case SFst(p) | SSnd(p):
                pt = go(p, tv, g)
                if not isinstance(pt, ProdT):
                    raise SrcTypeError(f"projection from non-pair type {show_type(pt)}")
                return pt.left if isinstance(u, SFst) else pt.right
            case SInl(t, p) | SInr(t, p):
                wf(tv, t)
                if not isinstance(t, SumT):
                    raise SrcTypeError("injection annotated with a non-sum type")
                want = t.left if isinstance(u, SInl) else t.right
                got = go(p, tv, g)
                if not types_equiv(want, got):
                    raise SrcTypeError(f"injection payload mismatch: {show_type(want)} vs {show_type(got)}")
                return t
            case SCase(s, x1, t1, e1, x2, t2, e2):
                wf(tv, t1)
                wf(tv, t2)
                st = go(s, tv, g)
                if not types_equiv(st, SumT(t1, t2)):
                    raise SrcTypeError(f"case on {show_type(st)}")
                r1 = go(e1, tv, {**g, x1: t1})
                r2 = go(e2, tv, {**g, x2: t2})
                if not types_equiv(r1, r2):
                    raise SrcTypeError("case branches differ in type")
                return r1
            case STyLam(a, body):
                return ForallT(a, go(body, tv | {a}, g))
            case STyApp(f, t):
                wf(tv, t)
                ft = go(f, tv, g)
                if not isinstance(ft, ForallT):
                    raise SrcTypeError(f"type application of non-polymorphic {show_type(ft)}")
                return subst_type(ft.body, {ft.var: t})
            case SUnembed(_, t, d):
                wf(tv | {k for k, _ in d}, t)
                for _, s in d:
                    wf(tv, s)
                return subst_type(t, d)
        raise SrcTypeError(f"not a source term: {u!r}")

    return go(e, frozenset(tyvars), dict(gamma or {}))


# --------------------------------------------------------------------------
# Substitution


class Machine:
    """Evaluation context: fuel, a derivation trace and a name supply."""

    def __init__(self, fuel: int = 100_000, trace: bool = False):
        self.fuel = fuel
        self.trace: list[str] | None = [] if trace else None
        self._n = 0

    def fresh(self, base: str) -> str:
        self._n += 1
        return f"{base.rstrip('0123456789')}'{self._n}"

    def log(self, rule: str, detail: str = ""):
        if self.trace is not None:
            self.trace.append(f"{rule} {detail}".rstrip())

    def tick(self):
        self.fuel -= 1
        if self.fuel < 0:
            raise OutOfFuel("evaluation ran out of fuel")

    # substitution of a source variable
    def subst_s(self, t, x: str, v: SrcTerm):
        fv = free_vars(v)
        return self._subst(t, ("s", x), v, fv)

    # substitution of a target variable
    def subst_t(self, t, x: str, v: TgtTerm):
        fv = free_vars(v)
        return self._subst(t, ("t", x), v, fv)

    def _subst(self, t, key, v, fv):
        kind, x = key
        fs, ft = fv
        go = lambda u: self._subst(u, key, v, fv)  # noqa: E731
        match t:
            case SVar(n):
                return v if kind == "s" and n == x else t
            case TVar(n):
                return v if kind == "t" and n == x else t
            case SLam(y, ty, body):
                if kind == "s" and y == x:
                    return t
                if y in fs:
                    y2 = self.fresh(y)
                    body = self.subst_s(body, y, SVar(y2))
                    y = y2
                return SLam(y, ty, go(body))
            case TLam(y, body):
                if kind == "t" and y == x:
                    return t
                if y in ft:
                    y2 = self.fresh(y)
                    body = self.subst_t(body, y, TVar(y2))
                    y = y2
                return TLam(y, go(body))
            case SCase(s, x1, t1, e1, x2, t2, e2):
                b1 = self._under_s(x1, e1, key, v, fv)
                b2 = self._under_s(x2, e2, key, v, fv)
                return SCase(go(s), b1[0], t1, b1[1], b2[0], t2, b2[1])
            case TCase(s, x1, e1, x2, e2):
                b1 = self._under_t(x1, e1, key, v, fv)
                b2 = self._under_t(x2, e2, key, v, fv)
                return TCase(go(s), b1[0], b1[1], b2[0], b2[1])
        return _map(t, go)

    def _under_s(self, y, body, key, v, fv):
        if key == ("s", y):
            return y, body
        if y in fv[0]:
            y2 = self.fresh(y)
            body = self.subst_s(body, y, SVar(y2))
            y = y2
        return y, self._subst(body, key, v, fv)

    def _under_t(self, y, body, key, v, fv):
        if key == ("t", y):
            return y, body
        if y in fv[1]:
            y2 = self.fresh(y)
            body = self.subst_t(body, y, TVar(y2))
            y = y2
        return y, self._subst(body, key, v, fv)

    # ------------------------------------------------------------------
    # Source semantics

    def is_src_value(self, e: SrcTerm) -> bool:
        match e:
            case SUnit() | SInt() | SLam() | STyLam() | SVar():
                return True
            case SPair(a, b):
                return self.is_src_value(a) and self.is_src_value(b)
            case SInl(_, p) | SInr(_, p):
                return self.is_src_value(p)
            case SUnembed(t, _, _):
                return self.is_tgt_value(t)
        return False

    def is_tgt_value(self, t: TgtTerm) -> bool:
        match t:
            case TUnit() | TInt() | TLam() | TOpaque() | TVar():
                return True
            case TPair(a, b):
                return self.is_tgt_value(a) and self.is_tgt_value(b)
            case TInl(p) | TInr(p):
                return self.is_tgt_value(p)
        return False

    def eval_src(self, e: SrcTerm) -> SrcTerm:
        self.tick()
        match e:
            case SUnit() | SInt() | SLam() | STyLam() | SVar():
                return e
            case SUnembed(t, ty, d):
                v = self.eval_tgt(t)
                self.log("S-Alien", show_type(ty))
                return SUnembed(v, ty, d)
            case SApp(f, a):
                fv = self.eval_src(f)
                av = self.eval_src(a)
                lam = self.force(fv)
                if not isinstance(lam, SLam):
                    raise Stuck(f"applying {show_src(lam)}")
                self.log("S-App")
                return self.eval_src(self.subst_s(lam.body, lam.var, av))
            case SPair(a, b):
                return SPair(self.eval_src(a), self.eval_src(b))
            case SFst(p) | SSnd(p):
                pv = self.force(self.eval_src(p))
                if not isinstance(pv, SPair):
                    raise Stuck(f"projection from {show_src(pv)}")
                self.log("S-Fst" if isinstance(e, SFst) else "S-Snd")
                return pv.left if isinstance(e, SFst) else pv.right
            case SInl(ty, p):
                return SInl(ty, self.eval_src(p))
            case SInr(ty, p):
                return SInr(ty, self.eval_src(p))
            case SCase(s, x1, _, e1, x2, _, e2):
                sv = self.force(self.eval_src(s))
                if isinstance(sv, SInl):
                    self.log("S-CaseL")
                    return self.eval_src(self.subst_s(e1, x1, sv.e))
                if isinstance(sv, SInr):
                    self.log("S-CaseR")
                    return self.eval_src(self.subst_s(e2, x2, sv.e))
                raise Stuck(f"case on {show_src(sv)}")
            case STyApp(f, ty):
                fv = self.force(self.eval_src(f))
                if not isinstance(fv, STyLam):
                    raise Stuck(f"type application of {show_src(fv)}")
                self.log("S-TyApp", show_type(ty))
                return self.eval_src(subst_type_in_term(fv.body, fv.var, ty))
        raise Stuck(f"cannot evaluate {e!r}")

    def force(self, v: SrcTerm) -> SrcTerm:
        while isinstance(v, SUnembed):
            if not self.is_tgt_value(v.tgt):
                v = self.eval_src(v)
            self.log("force", f"scoerce {show_type(v.ty)}")
            v = self.scoerce(v.ty, v.delta, v.tgt)
        return v

    def scoerce(self, ty: SrcType, delta: TypeSubst, v: TgtTerm) -> SrcTerm:
        match ty, v:
            case TyVar(a), TOpaque(e):
                return e
            case TyVar(a), _:
                d = dict(delta)
                if a in d:
                    return self.scoerce(d[a], EMPTY_DELTA, v)
                raise Stuck(f"unembedding {show_tgt(v)} at abstract type {a}")
            case UnitT(), TUnit():
                return S_UNIT
            case IntT(), TInt(n):
                return SInt(n)
            case ProdT(t1, t2), TPair(v1, v2):
                return SPair(SUnembed(v1, t1, delta), SUnembed(v2, t2, delta))
            case SumT(t1, t2), TInl(p):
                return SInl(subst_type(ty, delta), SUnembed(p, t1, delta))
            case SumT(t1, t2), TInr(p):
                return SInr(subst_type(ty, delta), SUnembed(p, t2, delta))
            case ArrowT(t1, t2), _:
                x = self.fresh("x")
                return SLam(x, subst_type(t1, delta), SUnembed(TApp(v, self.prot(SVar(x), t1, delta)), t2, delta))
            case ForallT(a, body), _:
                d = tuple((k, s) for k, s in delta if k != a)
                return STyLam(a, SUnembed(v, body, d))
        raise Stuck(f"cannot unembed {show_tgt(v)} at {show_type(ty)}")

    # ------------------------------------------------------------------
    # Target semantics

    def eval_tgt(self, t: TgtTerm) -> TgtTerm:
        self.tick()
        match t:
            case TUnit() | TInt() | TLam() | TOpaque() | TVar():
                return t
            case TEmbed(e, ty, d):
                v = self.eval_src(e)
                self.log("T-Alien", f"tcoerce {show_type(ty)}")
                return self.eval_tgt(self.tcoerce(ty, d, v))
            case TApp(f, a):
                fv = self.eval_tgt(f)
                av = self.eval_tgt(a)
                if not isinstance(fv, TLam):
                    raise Stuck(f"applying {show_tgt(fv)}")
                self.log("T-App")
                return self.eval_tgt(self.subst_t(fv.body, fv.var, av))
            case TPair(a, b):
                return TPair(self.eval_tgt(a), self.eval_tgt(b))
            case TFst(p) | TSnd(p):
                pv = self.eval_tgt(p)
                if not isinstance(pv, TPair):
                    raise Stuck(f"projection from {show_tgt(pv)}")
                self.log("T-Fst" if isinstance(t, TFst) else "T-Snd")
                return pv.left if isinstance(t, TFst) else pv.right
            case TInl(p):
                return TInl(self.eval_tgt(p))
            case TInr(p):
                return TInr(self.eval_tgt(p))
            case TCase(s, x1, e1, x2, e2):
                sv = self.eval_tgt(s)
                if isinstance(sv, TInl):
                    self.log("T-CaseL")
                    return self.eval_tgt(self.subst_t(e1, x1, sv.e))
                if isinstance(sv, TInr):
                    self.log("T-CaseR")
                    return self.eval_tgt(self.subst_t(e2, x2, sv.e))
                raise Stuck(f"case on {show_tgt(sv)}")
        raise Stuck(f"cannot evaluate {t!r}")

    def prot(self, e: SrcTerm, ty: SrcType, delta: TypeSubst) -> TgtTerm:
        if isinstance(ty, TyVar):
            return TOpaque(e)
        return TEmbed(e, ty, delta)

    def tcoerce(self, ty: SrcType, delta: TypeSubst, v: SrcTerm) -> TgtTerm:
        if isinstance(v, SUnembed) and types_equiv(subst_type(v.ty, v.delta), subst_type(ty, delta)):
            self.log("cancel", show_type(ty))
            return v.tgt
        match ty:
            case TyVar():
                return TOpaque(v)
            case ArrowT(t1, t2):
                x = self.fresh("x")
                return TLam(x, TEmbed(SApp(v, SUnembed(TVar(x), t1, delta)), t2, delta))
            case ForallT(a, body):
                return TEmbed(STyApp(v, TyVar(a)), body, delta)
        v = self.force(v)
        match ty, v:
            case UnitT(), SUnit():
                return T_UNIT
            case IntT(), SInt(n):
                return TInt(n)
            case ProdT(t1, t2), SPair(a, b):
                return TPair(self.prot(a, t1, delta), self.prot(b, t2, delta))
            case SumT(t1, _), SInl(_, p):
                return TInl(self.prot(p, t1, delta))
            case SumT(_, t2), SInr(_, p):
                return TInr(self.prot(p, t2, delta))
        raise Stuck(f"cannot embed {show_src(v)} at {show_type(ty)}")

    def deep_force(self, v: SrcTerm) -> SrcTerm:
        """Unembed a value completely, as far as its shape allows."""
        v = self.force(v)
        match v:
            case SPair(a, b):
                return SPair(self.deep_force(self.eval_src(a)), self.deep_force(self.eval_src(b)))
            case SInl(ty, p):
                return SInl(ty, self.deep_force(self.eval_src(p)))
            case SInr(ty, p):
                return SInr(ty, self.deep_force(self.eval_src(p)))
        return v


def _map(t, fn):
    """Rebuild ``t`` with ``fn`` applied to every immediate subterm."""
    kwargs = {}
    changed = False
    for name in t.__dataclass_fields__:
        v = getattr(t, name)
        if isinstance(v, (SrcTerm, TgtTerm)):
            nv = fn(v)
            changed |= nv is not v
            kwargs[name] = nv
        else:
            kwargs[name] = v
    return type(t)(**kwargs) if changed else t


def _subst_delta(delta: TypeSubst, a: str, s: SrcType) -> TypeSubst:
    return tuple((k, subst_type(v, {a: s})) for k, v in delta)


def subst_type_in_term(e, a: str, s: SrcType):
    """Replace type variable ``a`` by ``s`` in a term of either language.

    An unembedding at a type mentioning ``a`` outside its own substitution
    records ``a := s`` in that substitution instead of rewriting the type."""

    def ty(t):
        return subst_type(t, {a: s})

    def go(u):
        match u:
            case SLam(x, t, body):
                return SLam(x, ty(t), go(body))
            case SInl(t, p):
                return SInl(ty(t), go(p))
            case SInr(t, p):
                return SInr(ty(t), go(p))
            case SCase(sc, x1, t1, e1, x2, t2, e2):
                return SCase(go(sc), x1, ty(t1), go(e1), x2, ty(t2), go(e2))
            case STyLam(b, body):
                if b == a:
                    return u
                if b in ftv(s):
                    raise InteropError(f"type variable {b} would capture")
                return STyLam(b, go(body))
            case STyApp(f, t):
                return STyApp(go(f), ty(t))
            case SUnembed(tg, t, d) | TEmbed(tg, t, d):
                node = type(u)
                if a in dict(d) or a not in ftv(t):
                    return node(go(tg), t, _subst_delta(d, a, s))
                return node(go(tg), t, delta_of({**dict(_subst_delta(d, a, s)), a: s}))
        return _map(u, go)

    return go(e)


# --------------------------------------------------------------------------
# Translation


def translate(e: SrcTerm, gamma: dict[str, SrcType] | None = None, machine: Machine | None = None) -> TgtTerm:
    """Type-erasing translation.  Bound variables are threaded through the
    body as unembedded target variables, which the Box rule then strips."""
    m = machine or Machine()
    gamma = dict(gamma or {})

    def go(u, g):
        match u:
            case SUnit():
                return T_UNIT
            case SInt(n):
                return TInt(n)
            case SVar(x):
                if x not in g:
                    raise SrcTypeError(f"unbound variable {x}")
                return TEmbed(u, g[x], EMPTY_DELTA)
            case SUnembed(t, _, _):
                return t
            case SLam(x, t, body):
                y = m.fresh(x)
                return TLam(y, go(m.subst_s(body, x, SUnembed(TVar(y), t, EMPTY_DELTA)), g))
            case SApp(f, a):
                return TApp(go(f, g), go(a, g))
            case SPair(a, b):
                return TPair(go(a, g), go(b, g))
            case SFst(p):
                return TFst(go(p, g))
            case SSnd(p):
                return TSnd(go(p, g))
            case SInl(_, p):
                return TInl(go(p, g))
            case SInr(_, p):
                return TInr(go(p, g))
            case SCase(s, x1, t1, e1, x2, t2, e2):
                y1, y2 = m.fresh(x1), m.fresh(x2)
                b1 = go(m.subst_s(e1, x1, SUnembed(TVar(y1), t1, EMPTY_DELTA)), g)
                b2 = go(m.subst_s(e2, x2, SUnembed(TVar(y2), t2, EMPTY_DELTA)), g)
                return TCase(go(s, g), y1, b1, y2, b2)
            case STyLam(_, body):
                return go(body, g)
            case STyApp(f, _):
                return go(f, g)
        raise SrcTypeError(f"cannot translate {u!r}")

    return go(e, gamma)


def src_eval(e: SrcTerm, fuel: int = 100_000, machine: Machine | None = None) -> SrcTerm:
    """Evaluate and unembed the result as far as its shape allows."""
    m = machine or Machine(fuel)
    return m.deep_force(m.eval_src(e))


def tgt_eval(t: TgtTerm, fuel: int = 100_000, machine: Machine | None = None) -> TgtTerm:
    m = machine or Machine(fuel)
    return m.eval_tgt(t)


def observe(v: SrcTerm):
    """Plain Python view of a forced base-typed value (ignores annotations)."""
    match v:
        case SUnit():
            return ()
        case SInt(n):
            return n
        case SPair(a, b):
            return (observe(a), observe(b))
        case SInl(_, p):
            return ("inl", observe(p))
        case SInr(_, p):
            return ("inr", observe(p))
        case SVar(n):
            return ("var", n)
    return ("fun", show_src(v))


@dataclass(frozen=True)
class Agreement:
    ok: bool
    direct: object
    translated: object
    closed_clean: bool
    trace: tuple[str, ...] = field(default=(), repr=False)


def check_translation_correctness(e: SrcTerm, fuel: int = 100_000, trace: bool = False) -> Agreement:
    """Evaluate ``e`` directly and through the translation, then compare."""
    ty = src_typecheck(e)
    direct = observe(src_eval(e, fuel))
    m = Machine(fuel, trace)
    t = translate(e, machine=m)
    fs, ft = free_vars(e)
    clean = boundary_nodes(t) == 0 if not fs else True
    w = m.eval_tgt(t)
    via = observe(m.deep_force(SUnembed(w, ty, EMPTY_DELTA)))
    return Agreement(direct == via, direct, via, clean, tuple(m.trace or ()))


# --------------------------------------------------------------------------
# Concrete syntax


def show_type(t: SrcType) -> str:
    match t:
        case UnitT():
            return "unit"
        case IntT():
            return "int"
        case TyVar(n):
            return n
        case ArrowT(a, b):
            return f"(-> {show_type(a)} {show_type(b)})"
        case ProdT(a, b):
            return f"(* {show_type(a)} {show_type(b)})"
        case SumT(a, b):
            return f"(+ {show_type(a)} {show_type(b)})"
        case ForallT(v, b):
            return f"(forall {v} {show_type(b)})"
    return repr(t)


def _show_delta(d: TypeSubst) -> str:
    return " (" + " ".join(f"({k} {show_type(v)})" for k, v in d) + ")" if d else ""


def show_src(e: SrcTerm) -> str:
    match e:
        case SUnit():
            return "()"
        case SInt(n):
            return str(n)
        case SVar(n):
            return n
        case SLam(x, t, b):
            return f"(lam ({x} {show_type(t)}) {show_src(b)})"
        case SApp(f, a):
            return f"(app {show_src(f)} {show_src(a)})"
        case SPair(a, b):
            return f"(pair {show_src(a)} {show_src(b)})"
        case SFst(p):
            return f"(fst {show_src(p)})"
        case SSnd(p):
            return f"(snd {show_src(p)})"
        case SInl(t, p):
            return f"(inl {show_type(t)} {show_src(p)})"
        case SInr(t, p):
            return f"(inr {show_type(t)} {show_src(p)})"
        case SCase(s, x1, t1, e1, x2, t2, e2):
            return (f"(case {show_src(s)} ({x1} {show_type(t1)} {show_src(e1)}) "
                    f"({x2} {show_type(t2)} {show_src(e2)}))")
        case STyLam(a, b):
            return f"(tylam {a} {show_src(b)})"
        case STyApp(f, t):
            return f"(tyapp {show_src(f)} {show_type(t)})"
        case SUnembed(t, ty, d):
            return f"(unembed {show_tgt(t)} {show_type(ty)}{_show_delta(d)})"
    return repr(e)


def show_tgt(t: TgtTerm) -> str:
    match t:
        case TUnit():
            return "()"
        case TInt(n):
            return str(n)
        case TVar(n):
            return n
        case TLam(x, b):
            return f"(lam {x} {show_tgt(b)})"
        case TApp(f, a):
            return f"(app {show_tgt(f)} {show_tgt(a)})"
        case TPair(a, b):
            return f"(pair {show_tgt(a)} {show_tgt(b)})"
        case TFst(p):
            return f"(fst {show_tgt(p)})"
        case TSnd(p):
            return f"(snd {show_tgt(p)})"
        case TInl(p):
            return f"(inl {show_tgt(p)})"
        case TInr(p):
            return f"(inr {show_tgt(p)})"
        case TCase(s, x1, e1, x2, e2):
            return f"(case {show_tgt(s)} ({x1} {show_tgt(e1)}) ({x2} {show_tgt(e2)}))"
        case TEmbed(e, ty, d):
            return f"(embed {show_src(e)} {show_type(ty)}{_show_delta(d)})"
        case TOpaque(e):
            return f"(opaque {show_src(e)})"
    return repr(t)


def parse_type(x) -> SrcType:
    from vcforge.sexpr import ParseError, SList, Sym, pos_of

    if isinstance(x, Sym):
        return {"unit": UNIT_T, "int": INT_T}.get(str(x)) or TyVar(str(x))
    if isinstance(x, SList) and len(x) == 3 and isinstance(x[0], Sym):
        head = str(x[0])
        if head == "forall":
            return ForallT(str(x[1]), parse_type(x[2]))
        node = {"->": ArrowT, "*": ProdT, "+": SumT}.get(head)
        if node:
            return node(parse_type(x[1]), parse_type(x[2]))
    raise ParseError("malformed type", pos_of(x))


def _parse_delta(x) -> TypeSubst:
    return delta_of({str(p[0]): parse_type(p[1]) for p in x})


def parse_src(x) -> SrcTerm:
    from vcforge.sexpr import Num, ParseError, SList, Sym, pos_of, read_one

    if isinstance(x, str) and not isinstance(x, Sym):
        x = read_one(x)
    if isinstance(x, Num):
        return SInt(int(x))
    if isinstance(x, Sym):
        return SVar(str(x))
    if not isinstance(x, SList):
        raise ParseError("malformed source term", pos_of(x))
    if not x:
        return S_UNIT
    head, args = (str(x[0]) if isinstance(x[0], Sym) else None), x[1:]
    try:
        match head, len(args):
            case "lam", 2:
                return SLam(str(args[0][0]), parse_type(args[0][1]), parse_src(args[1]))
            case "app", n if n >= 2:
                f = parse_src(args[0])
                for a in args[1:]:
                    f = SApp(f, parse_src(a))
                return f
            case "pair", 2:
                return SPair(parse_src(args[0]), parse_src(args[1]))
            case "fst", 1:
                return SFst(parse_src(args[0]))
            case "snd", 1:
                return SSnd(parse_src(args[0]))
            case "inl", 2:
                return SInl(parse_type(args[0]), parse_src(args[1]))
            case "inr", 2:
                return SInr(parse_type(args[0]), parse_src(args[1]))
            case "case", 3:
                (x1, t1, e1), (x2, t2, e2) = args[1], args[2]
                return SCase(parse_src(args[0]), str(x1), parse_type(t1), parse_src(e1),
                             str(x2), parse_type(t2), parse_src(e2))
            case "tylam", 2:
                return STyLam(str(args[0]), parse_src(args[1]))
            case "tyapp", 2:
                return STyApp(parse_src(args[0]), parse_type(args[1]))
            case "unembed", 2 | 3:
                d = _parse_delta(args[2]) if len(args) == 3 else EMPTY_DELTA
                return SUnembed(parse_tgt(args[0]), parse_type(args[1]), d)
    except (ValueError, TypeError, IndexError):
        pass
    raise ParseError(f"malformed source form {head!r}", pos_of(x))


def parse_tgt(x) -> TgtTerm:
    from vcforge.sexpr import Num, ParseError, SList, Sym, pos_of, read_one

    if isinstance(x, str) and not isinstance(x, Sym):
        x = read_one(x)
    if isinstance(x, Num):
        return TInt(int(x))
    if isinstance(x, Sym):
        return TVar(str(x))
    if not isinstance(x, SList):
        raise ParseError("malformed target term", pos_of(x))
    if not x:
        return T_UNIT
    head, args = (str(x[0]) if isinstance(x[0], Sym) else None), x[1:]
    try:
        match head, len(args):
            case "lam", 2:
                return TLam(str(args[0]), parse_tgt(args[1]))
            case "app", n if n >= 2:
                f = parse_tgt(args[0])
                for a in args[1:]:
                    f = TApp(f, parse_tgt(a))
                return f
            case "pair", 2:
                return TPair(parse_tgt(args[0]), parse_tgt(args[1]))
            case "fst", 1:
                return TFst(parse_tgt(args[0]))
            case "snd", 1:
                return TSnd(parse_tgt(args[0]))
            case "inl", 1:
                return TInl(parse_tgt(args[0]))
            case "inr", 1:
                return TInr(parse_tgt(args[0]))
            case "case", 3:
                (x1, e1), (x2, e2) = args[1], args[2]
                return TCase(parse_tgt(args[0]), str(x1), parse_tgt(e1), str(x2), parse_tgt(e2))
            case "embed", 2 | 3:
                d = _parse_delta(args[2]) if len(args) == 3 else EMPTY_DELTA
                return TEmbed(parse_src(args[0]), parse_type(args[1]), d)
            case "opaque", 1:
                return TOpaque(parse_src(args[0]))
    except (ValueError, TypeError, IndexError):
        pass
    raise ParseError(f"malformed target form {head!r}", pos_of(x))


# The two worked examples.
IDENTITY_APP = SApp(SLam("x", INT_T, SVar("x")), SInt(0))
IDENTITY_APP_NATIVE = SApp(SUnembed(TLam("x", TVar("x")), ArrowT(INT_T, INT_T)), SInt(0))
POLY_ID = STyLam("A", SLam("x", TyVar("A"), SVar("x")))
POLY_ID_NATIVE = SUnembed(TLam("x", TVar("x")), ForallT("A", ArrowT(TyVar("A"), TyVar("A"))))


def poly_id_applied(native: bool, ty: SrcType = INT_T, arg: SrcTerm = SVar("y")) -> SrcTerm:
    f = POLY_ID_NATIVE if native else POLY_ID
    return SApp(STyApp(f, ty), arg)
