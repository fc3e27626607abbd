import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import brute_force_model_price
from robustexotic.actions import ActionSpace, PayoffMap, load_actions
from robustexotic.corpus import random_actions_document
from robustexotic.duality import (
    dual_enlarged,
    dynamic_extension_check,
    naive_model_price,
    price_report,
    superhedge_primal_enlarged,
    superhedge_primal_original,
)
from robustexotic.examples import load_example
from robustexotic.market import with_options

NEG_INF = float("-inf")
HALF = Fraction(1, 2)


def test_bin2_all_prices(bin2):
    m, p = bin2
    rep = price_report(m, p)
    assert rep.primal_original == rep.primal_enlarged == rep.dual_enlarged == HALF
    assert rep.naive_model_price == rep.dp_value == HALF
    assert rep.flags["primal_eq_dual"] and rep.flags["na_holds"]
    assert not rep.flags["naive_lt_dual"]


def test_zero_payoff(bin2):
    m, _ = bin2
    p = PayoffMap(m, ActionSpace(("0", "1")), [], lambda *_: Fraction(0))
    assert superhedge_primal_original(m, p).value == 0
    assert dual_enlarged(m, p).value == 0


def test_payoff_equal_to_static_option_costs_nothing(bin2):
    m, _ = bin2
    g = {leaf: m.prices[leaf][0] - 4 for leaf in m.tree.leaves()}
    mm = with_options(m, [g])
    p = PayoffMap(mm, ActionSpace(("x",)), [], lambda mk, leaf, plan, sp: mk.prices[leaf][0] - 4)
    assert superhedge_primal_original(mm, p).value == 0
    assert dual_enlarged(mm, p).value == 0


def test_uncalibratable_options_give_minus_infinity(bin2):
    m, p = bin2
    g = {leaf: Fraction(1) for leaf in m.tree.leaves()}
    mm = with_options(m, [g])
    pp = load_actions(p.document, mm)
    assert dual_enlarged(mm, pp).value == NEG_INF
    assert superhedge_primal_original(mm, pp).value == NEG_INF
    assert superhedge_primal_enlarged(mm, pp).value == NEG_INF


def test_weak_duality_on_corpus(corpus):
    for inst in corpus[:40]:
        rep = price_report(inst.market, inst.payoff, policy_budget=3000)
        chain = [rep.naive_model_price, rep.dual_enlarged, rep.primal_enlarged]
        chain = [v for v in chain if v is not None]
        assert all(a <= b for a, b in zip(chain, chain[1:])), inst.name


def test_naive_price_matches_brute_force(corpus):
    compared = 0
    for inst in corpus:
        brute = brute_force_model_price(inst.market, inst.payoff, limit=600)
        if brute is None:
            continue
        assert naive_model_price(inst.market, inst.payoff).value == brute, inst.name
        compared += 1
    assert compared >= 3


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 3), st.integers(-2, 4))
def test_scaling_and_truncation(seed, factor, level):
    rng = random.Random(seed)
    m, _ = load_example("gap")
    p = load_actions(random_actions_document(rng, m, 2, kind="table"), m)
    v = dual_enlarged(m, p).value
    assert dual_enlarged(m, p.scaled(Fraction(factor))).value == (v if v == NEG_INF else factor * v)
    assert dual_enlarged(m, p.truncated(level)).value <= v
    assert superhedge_primal_enlarged(m, p).value == v


def test_gap_instance():
    m, p = load_example("gap")
    rep = price_report(m, p)
    assert rep.flags["naive_lt_dual"] and rep.flags["primal_eq_dual"] and rep.flags["na_holds"]
    assert rep.dual_enlarged - rep.naive_model_price >= Fraction(1, 100)
    assert rep.extension["passed"]


@pytest.mark.parametrize("mode", ["rational", "float"])
def test_dynamic_extension(mode):
    m, p = load_example("gap")
    dual = dual_enlarged(m, p, mode=mode)
    primal = superhedge_primal_original(m, p, mode).value
    ext = dynamic_extension_check(m, p, dual, primal, mode)
    assert ext.passed, ext.checks
    assert set(ext.checks) >= {"calibration", "terminal", "martingale_Y", "martingale_S", "value_equals_primal"}


def test_extension_detects_a_wrong_measure():
    m, p = load_example("gap")
    dual = dual_enlarged(m, p)
    ext = dynamic_extension_check(m, p, dual, dual.value + 1)
    assert not ext.passed


def test_report_json_roundtrip(bin2):
    import json

    m, p = bin2
    doc = json.loads(price_report(m, p).to_json())
    assert doc["primal_original"] == "1/2"
    assert set(doc) >= {"primal_original", "primal_enlarged", "dual_enlarged", "naive_model_price", "flags", "na"}
