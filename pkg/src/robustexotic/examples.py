"""Shipped example instances (market + action documents) and their loader."""

from __future__ import annotations

import json
from fractions import Fraction
from importlib import resources
from pathlib import Path

from .actions import PayoffMap, load_actions
from .market import MarketModel, load_market, node_key

NAMES = ("bin2", "swing-gas", "multi-american-waiting", "multi-american-cap", "recursive-options", "gap")


def lattice_market(s0, moves, kernels, horizon, labels=None, name="") -> dict:
    """Recombining-increment tree: the same additive moves and prior kernels at every node."""
    if labels is None:
        labels = ["u", "d"] if len(moves) == 2 else ["u", "m", "d"][: len(moves)]
    values = {"": [str(s0)]}
    priors = {}
    nodes = [()]
    for _ in range(horizon):
        nxt = []
        for node in nodes:
            priors[node_key(node)] = [[str(v) for v in k] for k in kernels]
            base = values[node_key(node)][0]
            for lab, mv in zip(labels, moves):
                values[node_key(node + (lab,))] = [str(Fraction(base) + Fraction(mv))]
                nxt.append(node + (lab,))
        nodes = nxt
    return {"name": name, "horizon": horizon, "branches": [list(labels)] * horizon,
            "assets": {"dimension": 1, "values": values}, "priors": priors, "static_options": []}


def bin2():
    market = lattice_market(4, [1, -1], [["9/10", "1/10"], ["1/10", "9/10"]], 2, name="bin2")
    actions = {"name": "american put, exercise once", "actions": ["0", "1"],
               "constraints": [{"kind": "window_sum", "upper": "1"}],
               "payoff": {"kind": "american_put", "strike": "4"}}
    return market, actions


def swing_gas():
    """Weekly gas price in pounds; volumes in MMBtu bought at the 5 pound strike in weeks 1-4."""
    market = lattice_market(5, ["1/2", "-1/2"], [["3/4", "1/4"], ["1/4", "3/4"]], 4, name="swing-gas")
    actions = {"name": "gas swing", "actions": {"grid": ["0", "10000", "2500"]},
               "constraints": [{"kind": "prefix_allowed", "at_time": {"0": ["0"]}},
                               {"kind": "window_sum", "lower": "10000", "upper": "30000", "times": [1, 2, 3, 4]}],
               "payoff": {"kind": "swing", "strike": "5"}}
    return market, actions


def multi_american_waiting():
    """Two American puts, action = number exercised now, both exercised, two periods apart."""
    market = lattice_market(10, [1, -1], [["2/3", "1/3"], ["1/3", "2/3"]], 3, name="multi-american-waiting")
    actions = {"name": "two puts with waiting period", "actions": ["0", "1", "2"],
               "constraints": [{"kind": "prefix_allowed", "at_time": {"0": ["0"]}},
                               {"kind": "window_sum", "lower": "2", "upper": "2"},
                               {"kind": "waiting_period", "n": 2}],
               "payoff": {"kind": "american_put", "strike": "10"}}
    return market, actions


def multi_american_cap():
    """Two American puts, at most one exercised per period, both exercised."""
    market = lattice_market(10, [1, -1], [["2/3", "1/3"], ["1/3", "2/3"]], 3, name="multi-american-cap")
    actions = {"name": "two puts with per-period cap", "actions": ["0", "1", "2"],
               "constraints": [{"kind": "prefix_allowed", "at_time": {"0": ["0"]}},
                               {"kind": "window_sum", "lower": "2", "upper": "2"},
                               {"kind": "per_period_cap", "cap": "1"}],
               "payoff": {"kind": "american_put", "strike": "10"}}
    return market, actions


def recursive_options():
    """Choose a menu, then a sub-menu, then the vanilla delivered at maturity."""
    market = lattice_market(10, [2, 0, -2], [["1/2", "1/4", "1/4"], ["1/4", "1/4", "1/2"]], 2,
                            name="recursive-options")
    actions = {"name": "options on options", "actions": ["A", "B", "A1", "A2", "B1", "call9", "put11", "call10",
                                                           "put10", "fwd10"],
               "constraints": [{"kind": "prefix_allowed", "at_time": {"0": ["A", "B"]},
                                "after": {"A": ["A1", "A2"], "B": ["B1"], "A1": ["call9", "put11"],
                                          "A2": ["call10"], "B1": ["put10", "fwd10"]}}],
               "payoff": {"kind": "option_choice",
                          "options": {"call9": {"type": "call", "strike": "9"},
                                      "put11": {"type": "put", "strike": "11"},
                                      "call10": {"type": "call", "strike": "10"},
                                      "put10": {"type": "put", "strike": "10"},
                                      "fwd10": {"type": "forward", "strike": "10"}}}}
    return market, actions


BUILDERS = {
    "bin2": bin2,
    "swing-gas": swing_gas,
    "multi-american-waiting": multi_american_waiting,
    "multi-american-cap": multi_american_cap,
    "recursive-options": recursive_options,
}


def exercise_times(plan) -> list:
    """Exercise times, with multiplicity, of a count-encoded multi-American plan."""
    return [t for t, a in enumerate(plan) for _ in range(int(a))]


def data_dir() -> Path:
    return Path(str(resources.files("robustexotic") / "data"))


def example_paths(name: str):
    d = data_dir()
    return d / f"{name}.market.json", d / f"{name}.actions.json"


def load_example(name: str, **kwargs) -> tuple[MarketModel, PayoffMap]:
    if name not in NAMES:
        raise KeyError(f"unknown example {name!r}; choose from {', '.join(NAMES)}")
    mpath, apath = example_paths(name)
    m = load_market(str(mpath))
    return m, load_actions(str(apath), m, **kwargs)


def write_examples(target: Path | None = None, gap_seed: int = 7):
    """Regenerate the JSON files, including the gap instance found by random search."""
    from .corpus import find_gap_instance
    from .market import market_to_document

    target = target or data_dir()
    target.mkdir(parents=True, exist_ok=True)
    docs = {name: build() for name, build in BUILDERS.items()}
    found = find_gap_instance(seed=gap_seed)
    if found is None:
        raise RuntimeError("gap search found nothing")
    inst, naive, primal, tries = found
    mdoc = market_to_document(inst.market)
    mdoc["name"] = "gap"
    adoc = dict(inst.actions_doc)
    adoc["name"] = f"gap instance (search seed {gap_seed}, draw {tries})"
    docs["gap"] = (mdoc, adoc)
    for name, (mdoc, adoc) in docs.items():
        (target / f"{name}.market.json").write_text(json.dumps(mdoc, indent=1, sort_keys=True) + "\n")
        (target / f"{name}.actions.json").write_text(json.dumps(adoc, indent=1, sort_keys=True) + "\n")
    return docs
