import pytest

from vcforge.model import (
    CarrierTooLarge,
    FiniteModel,
    ModelRejected,
    UnboundedSort,
    count_interpretations,
    eval_term,
    eval_validity,
    find_countermodel,
    interpretations,
)
from vcforge.terms import (
    BOOL,
    INT,
    PROP,
    App,
    Arith,
    Arrow,
    BVar,
    Context,
    Eq,
    Forall,
    FVar,
    Implies,
    IntLit,
    Uninterp,
)

U = Uninterp("U", 3)


def test_int_quantifier_needs_bound():
    phi = Forall(INT, Eq(INT, BVar(0), BVar(0)))
    with pytest.raises(UnboundedSort):
        eval_validity(FiniteModel(), Context(), phi)
    assert eval_validity(FiniteModel(int_range=(-2, 2)), Context(), phi)


def test_uninterpreted_sort_without_size():
    with pytest.raises(UnboundedSort):
        FiniteModel().carrier(Uninterp("V"))
    assert len(FiniteModel(sizes={"V": 2}).carrier(Uninterp("V"))) == 2


def test_function_carrier_limit():
    m = FiniteModel(int_range=(0, 9), max_carrier=1000)
    with pytest.raises(CarrierTooLarge):
        m.carrier(Arrow(INT, INT))
    assert len(m.carrier(Arrow(BOOL, BOOL))) == 4


def test_table_outside_domain_rejected():
    m = FiniteModel(int_range=(0, 1))
    f = m.carrier(Arrow(INT, INT))[0]
    with pytest.raises(ModelRejected):
        f(5)


def test_countermodel_found():
    ctx = Context().bind("x", INT)
    phi = Eq(INT, Arith("+", (FVar("x"), IntLit(1))), IntLit(0))
    cm = find_countermodel(FiniteModel(int_range=(-1, 1)), ctx, phi)
    assert cm is not None and cm["x"] != -1


def test_hypotheses_restrict_assignments():
    ctx = Context().bind("x", INT).assume("h", Eq(INT, FVar("x"), IntLit(1)))
    assert eval_validity(FiniteModel(int_range=(-3, 3)), ctx, Arith("<", (IntLit(0), FVar("x"))))


def test_pinned_binder_outside_carrier_is_pruned():
    ctx = Context().bind("x", INT).bind("y", INT).assume("h", Eq(INT, FVar("y"), Arith("*", (FVar("x"), IntLit(100)))))
    # only x = 0 yields y inside the carrier
    assert eval_validity(FiniteModel(int_range=(-3, 3)), ctx, Eq(INT, FVar("y"), IntLit(0)))


def test_interpretations_enumerate_signature():
    sig = {"A": PROP, "P": Arrow(U, PROP), "c": U}
    m = FiniteModel()
    assert count_interpretations(m, sig) == 2 * 8 * 3
    ms = list(interpretations(m, sig))
    assert len(ms) == 48
    assert len({(i.interp["A"], i.interp["P"], i.interp["c"]) for i in ms}) == 48


def test_fixed_symbol_read_from_interp():
    ctx = Context().bind("P", Arrow(U, PROP)).bind("c", U)
    phi = App(FVar("P"), FVar("c"))
    results = [eval_validity(i, ctx, phi) for i in interpretations(FiniteModel(), {"P": Arrow(U, PROP), "c": U})]
    assert any(results) and not all(results)


def test_implication_semantics():
    ctx = Context().bind("a", PROP).bind("b", PROP)
    assert not eval_validity(FiniteModel(), ctx, Implies(FVar("a"), FVar("b")))
    assert eval_validity(FiniteModel(), ctx, Implies(FVar("a"), FVar("a")))


def test_eval_closed_arith():
    assert eval_term(FiniteModel(), Arith("*", (IntLit(2**44), IntLit(2**44)))) == 2**88
