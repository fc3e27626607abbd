import random
from fractions import Fraction

from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import dense_lp_max, martingale_rows, reachable_leaves
from robustexotic.actions import ActionSpace
from robustexotic.arbitrage import (
    ENLARGED,
    ORIGINAL,
    check_na,
    local_na,
    max_mass,
    measure_polar_leaves,
    na_equivalence_suite,
    polar_leaves,
)
from robustexotic.corpus import random_market_document
from robustexotic.examples import lattice_market, load_example
from robustexotic.market import load_market, node_key, with_options


def _oracle_max_mass(m):
    leaves = reachable_leaves(m)
    A, b = martingale_rows(m, leaves, calibrate=True)
    out = {}
    for j, leaf in enumerate(leaves):
        c = [Fraction(int(i == j)) for i in range(len(leaves))]
        status, value, _ = dense_lp_max(c, A, b)
        out[leaf] = value if status == "optimal" else Fraction(0)
    return out


def _witness_payoff(m, w, leaf):
    total = sum(a * b for a, b in zip(w["h"], m.option_vector(leaf)))
    for k in range(m.horizon):
        y = w["H"].get(node_key(leaf[:k]))
        if y:
            total += sum(a * b for a, b in zip(y, m.increment(leaf[: k + 1])))
    return total


def test_bin2_na(bin2):
    m, p = bin2
    rep = check_na(m)
    assert rep.holds and rep.min_mass == Fraction(1, 4)
    assert max_mass(m) == {leaf: Fraction(1, 4) for leaf in m.tree.leaves()}
    assert check_na(m, ENLARGED, p.space).holds


def test_increasing_asset_has_witness():
    m = load_market(lattice_market(4, [1, 2], [["1/2", "1/2"]], 2))
    rep = check_na(m)
    assert not rep.holds
    pay = {leaf: _witness_payoff(m, rep.witness, leaf) for leaf in m.support.reachable_leaves}
    assert all(v >= 0 for v in pay.values()) and any(v > 0 for v in pay.values())
    assert pay == rep.witness["payoff"]


def test_mispriced_option_breaks_na(bin2):
    m, _ = bin2
    g = {leaf: m.prices[leaf][0] - 3 for leaf in m.tree.leaves()}
    rep = check_na(with_options(m, [g]))
    assert not rep.holds
    assert all(v == 0 for v in rep.max_mass.values())
    mm = with_options(m, [g])
    pay = {leaf: _witness_payoff(mm, rep.witness, leaf) for leaf in mm.support.reachable_leaves}
    assert all(v >= 0 for v in pay.values()) and any(v > 0 for v in pay.values())


def test_original_and_enlarged_agree_on_corpus(corpus):
    held = failed = 0
    for inst in corpus[:30]:
        assert na_equivalence_suite(inst.market, inst.payoff.space)
        if check_na(inst.market).holds:
            held += 1
        else:
            failed += 1
    assert held and failed


def test_max_mass_matches_oracle(corpus):
    for inst in corpus[:30]:
        assert max_mass(inst.market) == _oracle_max_mass(inst.market), inst.name


def test_polar_sets():
    rng = random.Random(11)
    m = load_market(random_market_document(rng, 2, 3, polar=True))
    assert polar_leaves(m)
    assert polar_leaves(m) == set(m.tree.leaves()) - set(reachable_leaves(m))
    if check_na(m).holds:
        assert measure_polar_leaves(m) == polar_leaves(m)


def test_local_na():
    good = load_market(lattice_market(4, [1, -1], [["1/2", "1/2"]], 1))
    bad = load_market(lattice_market(4, [1, 2], [["1/2", "1/2"]], 1))
    assert local_na(good, ())
    assert not local_na(bad, ())


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6))
def test_random_strategies_find_no_arbitrage_under_na(seed):
    rng = random.Random(seed)
    m, p = load_example("gap")
    assert check_na(m).holds
    leaves = m.support.reachable_leaves
    H = {node_key(n): (Fraction(rng.randint(-5, 5)),) for k in range(m.horizon) for n in m.support.reachable_at(k)}
    h = tuple(Fraction(rng.randint(-5, 5)) for _ in m.static_options)
    pay = [_witness_payoff(m, {"H": H, "h": h}, leaf) for leaf in leaves]
    assert not (all(v >= 0 for v in pay) and any(v > 0 for v in pay))


def test_enlarged_single_action(bin2):
    m, _ = bin2
    assert check_na(m, ENLARGED, ActionSpace(("x",))).min_mass == check_na(m, ORIGINAL).min_mass
