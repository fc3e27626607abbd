"""Quasi-sure no-arbitrage checks on the original and the enlarged space.

NA is decided through polar sets: it holds iff some calibrated martingale
measure charges every reachable path. One LP maximizes the smallest mass;
when that fails, per-path LPs locate the uncharged paths and a second LP
produces an explicit arbitrage portfolio.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

from ._numeric import RATIONAL, format_ext
from .actions import ActionSpace, plan_key
from .enlarged import enlarged_martingale_constraints
from .lp import OPTIMAL, LinearProgram, solve
from .market import MarketModel, node_key

ORIGINAL = "original"
ENLARGED = "enlarged"


@dataclass
class NaReport:
    holds: bool
    space: str
    min_mass: object  # largest achievable smallest mass over reachable paths
    measure: Optional[dict] = None  # full-support calibrated martingale measure when NA holds
    max_mass: dict = field(default_factory=dict)  # path -> largest mass (computed on failure)
    witness: Optional[dict] = None  # arbitrage portfolio and its payoff on failure

    def uncharged(self) -> list:
        return sorted(p for p, v in self.max_mass.items() if not v > 0)

    def to_document(self) -> dict:
        def key(p):
            return node_key(p) if self.space == ORIGINAL else f"{node_key(p[0])}|{plan_key(p[1])}"

        doc = {"holds": self.holds, "space": self.space, "min_mass": format_ext(self.min_mass)}
        if self.max_mass:
            doc["max_mass"] = {key(p): format_ext(v) for p, v in sorted(self.max_mass.items())}
        if self.witness is not None:
            w = self.witness
            doc["witness"] = {
                "H": [
                    {"atom": a, "position": [format_ext(v) for v in y]} for a, y in sorted(w["H"].items())
                ],
                "h": [format_ext(v) for v in w["h"]],
                "payoff": {key(p): format_ext(v) for p, v in sorted(w["payoff"].items())},
            }
        return doc


def _paths_and_rows(m: MarketModel, space: str, actions: Optional[ActionSpace]):
    """Variables (paths) and equality rows of the calibrated martingale system."""
    if space == ORIGINAL:
        paths = list(m.support.reachable_leaves)
        rows = [({j: 1 for j in range(len(paths))}, 1)]
        for k in range(m.horizon):
            for node in m.support.reachable_at(k):
                for d in range(m.dimension):
                    coeffs = {
                        j: m.increment(leaf[: k + 1])[d]
                        for j, leaf in enumerate(paths)
                        if leaf[:k] == node and m.increment(leaf[: k + 1])[d]
                    }
                    if coeffs:
                        rows.append((coeffs, 0))
        for g in m.static_options:
            rows.append(({j: g[leaf] for j, leaf in enumerate(paths) if g[leaf]}, 0))
        return paths, rows
    if actions is None:
        raise ValueError("the enlarged check needs an action space")
    paths = [(w, c) for w in m.support.reachable_leaves for c in actions.plans(m.horizon + 1)]
    system = enlarged_martingale_constraints(m, actions, paths, calibrate=True)
    return paths, [(r.coeffs, r.rhs) for r in system.rows]


def _mass_lp(paths, rows, objective):
    lp = LinearProgram("max")
    for _ in paths:
        lp.add_variable(0, None)
    for coeffs, rhs in rows:
        lp.add_row(coeffs, "==", rhs)
    return lp


def max_mass(m: MarketModel, space: str = ORIGINAL, actions: Optional[ActionSpace] = None,
             mode: str = RATIONAL) -> dict:
    """For every reachable path, the largest mass a calibrated martingale measure can give it."""
    paths, rows = _paths_and_rows(m, space, actions)
    out = {}
    for j, p in enumerate(paths):
        lp = _mass_lp(paths, rows, None)
        lp.set_objective({j: 1})
        res = solve(lp, mode)
        out[p] = res.value if res.status == OPTIMAL else 0
    return out


def _witness(m: MarketModel, space: str, paths, mode: str):
    """Maximize the capped payoff of a nonnegative portfolio; positive optimum = arbitrage."""
    lp = LinearProgram("max")
    h = [lp.add_variable(None, None) for _ in m.static_options]
    pos = {}

    def atom(path, k):
        if space == ORIGINAL:
            return node_key(path[:k])
        leaf, plan = path
        return f"{node_key(leaf[:k])}|{plan_key(plan[: k + 1])}"

    exprs = []
    for p in paths:
        leaf = p if space == ORIGINAL else p[0]
        coeffs = {}
        for k in range(m.horizon):
            inc = m.increment(leaf[: k + 1])
            for d in range(m.dimension):
                if inc[d]:
                    key = (atom(p, k), d)
                    if key not in pos:
                        pos[key] = lp.add_variable(None, None)
                    coeffs[pos[key]] = coeffs.get(pos[key], 0) + inc[d]
        for i, g in enumerate(m.option_vector(leaf)):
            if g:
                coeffs[h[i]] = g
        exprs.append(coeffs)
        lp.add_row(coeffs, ">=", 0)
        u = lp.add_variable(0, 1, objective=1)
        row = dict(coeffs)
        row[u] = row.get(u, 0) - 1
        lp.add_row(row, ">=", 0)
    out = solve(lp, mode)
    if out.status != OPTIMAL or not out.value > 0:
        return None
    H = {}
    for (a, d), idx in pos.items():
        vec = H.setdefault(a, [0] * m.dimension)
        vec[d] = out.x[idx]
    payoff = {p: sum(c * out.x[j] for j, c in e.items()) for p, e in zip(paths, exprs)}
    return {"H": {a: tuple(v) for a, v in H.items()}, "h": tuple(out.x[i] for i in h), "payoff": payoff}


def check_na(m: MarketModel, space: str = ORIGINAL, actions: Optional[ActionSpace] = None,
             mode: str = RATIONAL) -> NaReport:
    """Quasi-sure NA with a full-support measure on success and an arbitrage witness on failure."""
    if space not in (ORIGINAL, ENLARGED):
        raise ValueError(f"unknown space {space!r}")
    paths, rows = _paths_and_rows(m, space, actions)
    lp = _mass_lp(paths, rows, None)
    tau = lp.add_variable(None, 1, objective=1)
    for j in range(len(paths)):
        lp.add_row({j: 1, tau: -1}, ">=", 0)
    out = solve(lp, mode)
    if out.status == OPTIMAL and out.value > 0:
        measure = {p: out.x[j] for j, p in enumerate(paths)}
        return NaReport(True, space, out.value, measure=measure)
    rep = NaReport(False, space, out.value if out.status == OPTIMAL else None)
    rep.max_mass = max_mass(m, space, actions, mode)
    rep.witness = _witness(m, space, paths, mode)
    return rep


def polar_leaves(m: MarketModel) -> set:
    """Leaves that no prior can reach."""
    return set(m.tree.leaves()) - set(m.support.reachable_leaves)


def measure_polar_leaves(m: MarketModel, mode: str = RATIONAL) -> set:
    """Leaves charged by no calibrated martingale measure."""
    masses = max_mass(m, ORIGINAL, None, mode)
    return polar_leaves(m) | {leaf for leaf, v in masses.items() if not v > 0}


def na_equivalence_suite(m: MarketModel, actions: ActionSpace, mode: str = RATIONAL) -> bool:
    """Original and enlarged NA agree; under NA the two polar leaf families coincide."""
    orig = check_na(m, ORIGINAL, None, mode)
    enl = check_na(m, ENLARGED, actions, mode)
    if orig.holds != enl.holds:
        raise AssertionError(f"NA disagreement: original={orig.holds} enlarged={enl.holds}")
    if orig.holds and polar_leaves(m) != measure_polar_leaves(m, mode):
        raise AssertionError("polar sets differ although NA holds")
    return True


def local_na(m: MarketModel, node, mode: str = RATIONAL) -> bool:
    """One-step NA at a node: some one-step martingale measure charges every charged successor."""
    from .market import OneStepPolytope

    succ = m.support.successor_support[node]
    poly = OneStepPolytope(node, succ, tuple(m.increment(c) for c in succ))
    lp, idx = poly.lp()
    tau = lp.add_variable(None, 1, objective=1)
    lp.sense = "max"
    for i in idx:
        lp.add_row({i: 1, tau: -1}, ">=", 0)
    out = solve(lp, mode)
    return out.status == OPTIMAL and out.value > 0
