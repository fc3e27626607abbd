"""Random desk-scale instances for the invariant suites, and the gap search.

Everything is produced as JSON documents first and then loaded, so any
generated instance can be written out and replayed through the CLI.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .actions import PayoffMap, load_actions, plan_key
from .market import MarketModel, load_market, market_to_document, node_key, with_options

MAX_PAIRS = 1500  # leaves x |A|^(N+1)
MAX_POLICIES = 3000  # naive enumeration size over reachable non-leaf nodes


@dataclass
class Instance:
    name: str
    market: MarketModel
    payoff: PayoffMap
    market_doc: dict
    actions_doc: dict
    meta: dict = field(default_factory=dict)

    @property
    def num_actions(self) -> int:
        return len(self.payoff.space)


def _kernel(rng: random.Random, width: int) -> list:
    """Random strictly positive probability vector with small denominators."""
    weights = [rng.randint(1, 4) for _ in range(width)]
    return [Fraction(w, sum(weights)) for w in weights]


def random_market_document(rng: random.Random, horizon: int, width: int, dimension: int = 1,
                           arbitrage: bool = False, polar: bool = False) -> dict:
    labels = [["u", "m", "d"][:width] if width == 3 else ["u", "d"] for _ in range(horizon)]
    values = {"": [str(rng.randint(6, 10)) for _ in range(dimension)]}
    priors = {}
    nodes = [()]
    for k in range(horizon):
        nxt = []
        for node in nodes:
            base = [Fraction(v) for v in values[node_key(node)]]
            if dimension == 1:
                ups = rng.sample(range(1, 4), 1)
                downs = rng.sample(range(1, 4), 1)
                if width == 2:
                    incs = [(Fraction(ups[0]),), (Fraction(-downs[0]),)]
                else:
                    mid = Fraction(rng.randint(-1, 1), rng.choice((1, 2)))
                    incs = [(Fraction(ups[0] + 1),), (mid,), (Fraction(-downs[0] - 1),)]
            else:  # triangle around the origin
                incs = [(Fraction(2), Fraction(1)), (Fraction(-1), Fraction(2)), (Fraction(-1), Fraction(-2))]
                incs = incs[:width] if width == 3 else [(Fraction(1), Fraction(1)), (Fraction(-1), Fraction(-1))]
            if arbitrage and node == ():
                incs = [tuple(abs(v) + 1 for v in inc) for inc in incs]
            kernels = [_kernel(rng, width) for _ in range(rng.choice((1, 2)))]
            if polar and width == 3:  # middle successor becomes unreachable
                kernels = [[v / (1 - k_[1]) if i != 1 else Fraction(0) for i, v in enumerate(k_)] for k_ in kernels]
            priors[node_key(node)] = [[str(v) for v in k_] for k_ in kernels]
            for lab, inc in zip(labels[k], incs):
                child = node + (lab,)
                values[node_key(child)] = [str(b + i) for b, i in zip(base, inc)]
                nxt.append(child)
        nodes = nxt
    return {"horizon": horizon, "branches": labels, "assets": {"dimension": dimension, "values": values},
            "priors": priors, "static_options": []}


def _full_support_measure(m: MarketModel) -> Optional[dict]:
    from .arbitrage import check_na

    rep = check_na(m)
    return rep.measure if rep.holds else None


def normalized_options(m: MarketModel, rng: random.Random, count: int, shift: bool = True) -> list:
    """Random static payoffs made calibratable by subtracting a full-support martingale mean."""
    q = _full_support_measure(m) if shift else None
    options = []
    for _ in range(count):
        raw = {leaf: Fraction(rng.randint(-3, 3)) for leaf in m.tree.leaves()}
        if q is not None:
            mean = sum(q[leaf] * raw[leaf] for leaf in q)
            raw = {leaf: v - mean for leaf, v in raw.items()}
        options.append(raw)
    return options


def random_actions_document(rng: random.Random, m: MarketModel, num_actions: int, kind: Optional[str] = None) -> dict:
    labels = [str(i) for i in range(num_actions)]
    n = m.horizon
    kind = kind or rng.choice(("american", "table", "table"))
    if kind == "american" and num_actions > 1:
        cap = rng.randint(1, num_actions - 1)
        constraints = [{"kind": "window_sum", "upper": str(max(1, cap))}]
        if num_actions > 2 and rng.random() < 0.5:
            constraints.append({"kind": "per_period_cap", "cap": "1"})
        if n >= 2 and rng.random() < 0.3:
            constraints.append({"kind": "waiting_period", "n": 2})
        strike = rng.randint(5, 11)
        return {"name": "american", "actions": labels, "constraints": constraints,
                "payoff": {"kind": rng.choice(("american_put", "american_call")), "strike": str(strike)}}
    plans = list(itertools.product(labels, repeat=n + 1))
    constraints = []
    if num_actions > 1 and rng.random() < 0.7:
        forbidden = [p for p in plans if rng.random() < 0.3]
        if len(forbidden) < len(plans):
            constraints.append({"kind": "custom_predicate", "forbidden": [plan_key(p) for p in forbidden]})
    if num_actions > 1 and rng.random() < 0.3:
        constraints.append({"kind": "window_sum", "upper": str(rng.randint(1, n + 1))})
    values = {
        node_key(leaf): {plan_key(p): str(rng.randint(-5, 5)) for p in plans} for leaf in m.tree.leaves()
    }
    return {"name": "table", "actions": labels, "constraints": constraints,
            "payoff": {"kind": "table", "values": values, "default": "-inf"}}


def random_instance(rng: random.Random, name: str = "", arbitrage: bool = False,
                    max_options: int = 2) -> Optional[Instance]:
    """One random instance within the size caps, or None if the draw is too large."""
    horizon = rng.choice((1, 2, 2, 3))
    width = rng.choice((2, 3))
    num_actions = rng.choice((1, 2, 2, 3))
    dimension = 2 if (width == 3 and rng.random() < 0.1) else 1
    leaves = width**horizon
    inner = sum(width**k for k in range(horizon))
    if leaves * num_actions ** (horizon + 1) > MAX_PAIRS or num_actions**inner > MAX_POLICIES:
        return None
    mdoc = random_market_document(rng, horizon, width, dimension, arbitrage=arbitrage, polar=rng.random() < 0.3)
    m = load_market(mdoc)
    count = rng.randint(0, max_options)
    if count:
        opts = normalized_options(m, rng, count, shift=not arbitrage or rng.random() < 0.5)
        m = with_options(m, opts)
        mdoc = market_to_document(m)
    adoc = random_actions_document(rng, m, num_actions)
    payoff = load_actions(adoc, m)
    meta = {"horizon": horizon, "width": width, "actions": num_actions, "options": count, "dimension": dimension}
    return Instance(name, m, payoff, mdoc, adoc, meta)


def generate_corpus(seed: int = 2024, count: int = 60, arbitrage_share: float = 0.15) -> list:
    """Deterministic list of ``count`` instances; roughly ``arbitrage_share`` of draws target NA failure."""
    rng = random.Random(seed)
    out = []
    while len(out) < count:
        inst = random_instance(rng, name=f"corpus-{seed}-{len(out):03d}", arbitrage=rng.random() < arbitrage_share)
        if inst is not None:
            out.append(inst)
    return out


def strip_options(inst: Instance) -> Instance:
    m = with_options(inst.market, [])
    payoff = load_actions(inst.actions_doc, m)
    return Instance(inst.name + "-nolambda", m, payoff, market_to_document(m), inst.actions_doc, dict(inst.meta))


# ---------------------------------------------------------------------------
# gap search


def _gap_candidate(rng: random.Random) -> Instance:
    mdoc = random_market_document(rng, 2, 3, 1)
    m = load_market(mdoc)
    m = with_options(m, normalized_options(m, rng, 1))
    labels = ["0", "1"]
    plans = [p for p in itertools.product(labels, repeat=3) if sum(int(a) for a in p) <= 1]
    values = {
        node_key(leaf): {plan_key(p): str(rng.randint(-4, 4)) for p in plans} for leaf in m.tree.leaves()
    }
    adoc = {"name": "gap-search", "actions": labels, "constraints": [{"kind": "window_sum", "upper": "1"}],
            "payoff": {"kind": "table", "values": values, "default": "-inf"}}
    return Instance("gap", m, load_actions(adoc, m), market_to_document(m), adoc)


def find_gap_instance(seed: int = 7, tries: int = 500, margin=Fraction(1, 100)):
    """Random search for ``naive model price < superhedging price - margin``.

    Returns ``(instance, naive, primal, tries_used)`` or None.
    """
    from .duality import naive_model_price, superhedge_primal_original

    rng = random.Random(seed)
    for t in range(1, tries + 1):
        inst = _gap_candidate(rng)
        primal = superhedge_primal_original(inst.market, inst.payoff).value
        naive = naive_model_price(inst.market, inst.payoff).value
        if naive != float("-inf") and primal - naive >= margin:
            inst.meta = {"seed": seed, "try": t}
            return inst, naive, primal, t
    return None
