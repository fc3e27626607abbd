"""Backward induction on the enlarged space, optimal policies and one-step hedges.

Values live on atoms ``(node, prefix)`` where ``node`` is a reachable
``k``-step node and ``prefix`` holds the actions ``c_0..c_{k-1}``. At the
terminal level the last action is maximized pointwise; at earlier levels
each action is scored by the largest expectation over one-step martingale
measures that avoid successors valued ``-inf``.
"""

from __future__ import annotations

import csv
import io
import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from ._numeric import DEFAULT_TOL, FLOAT, NEG_INF, RATIONAL, format_ext, is_finite, leq, to_mode
from .actions import ActionPolicy, PayoffMap, plan_key
from .lp import INFEASIBLE, OPTIMAL, LinearProgram, solve
from .market import MarketModel, OneStepPolytope, node_key, one_step_martingale_polytope


class HedgeInfeasible(RuntimeError):
    """The one-step hedging inequalities have no solution at some atom."""

    def __init__(self, level, node, prefix, certificate=None):
        super().__init__(f"no one-step hedge at level {level}, atom ({node_key(node)!r}, {plan_key(prefix)!r})")
        self.level = level
        self.node = node
        self.prefix = prefix
        self.certificate = certificate


@dataclass
class StepResult:
    value: object
    action: Optional[str]
    q: Optional[tuple]  # maximizing one-step measure for ``action``
    per_action: dict


def terminal_op(payoff: PayoffMap, leaf, prefix, mode: str = RATIONAL):
    """``max_a payoff(leaf, prefix + (a,))`` and the first maximizing action."""
    best, arg = NEG_INF, None
    for a in payoff.space.actions:
        v = payoff(leaf, tuple(prefix) + (a,))
        if v != NEG_INF:
            v = to_mode(v, mode)
        if arg is None or v > best:
            best, arg = v, a
    return best, arg


def _restricted_sup(poly: OneStepPolytope, values, mode, cache):
    key = (poly.node, tuple(values))
    if cache is not None and key in cache:
        return cache[key]
    finite = [s for s, v in zip(poly.successors, values) if v != NEG_INF]
    if not finite:
        res = (NEG_INF, None)
    else:
        obj = [v if v != NEG_INF else 0 for v in values]
        lp, idx = poly.lp(obj, restrict=finite, sense="max")
        out = solve(lp, mode)
        if out.status == INFEASIBLE:
            res = (NEG_INF, None)
        elif out.status == OPTIMAL:
            res = (out.value, tuple(out.x[i] for i in idx))
        else:  # bounded polytope: cannot happen
            raise RuntimeError("one-step LP reported unbounded")
    if cache is not None:
        cache[key] = res
    return res


def one_step_value(poly: OneStepPolytope, next_values: dict, mode: str = RATIONAL, cache=None) -> StepResult:
    """``max_a sup_q sum_i q_i V(i, a)`` with ``next_values[a]`` aligned to ``poly.successors``."""
    best = StepResult(NEG_INF, None, None, {})
    for a, values in next_values.items():
        v, q = _restricted_sup(poly, values, mode, cache)
        best.per_action[a] = v
        if best.action is None or v > best.value:
            best.value, best.action, best.q = v, a, q
    return best


def one_step_value_swapped(poly: OneStepPolytope, next_values: dict, mode: str = RATIONAL):
    """Same quantity with the two sups swapped: over polytope vertices, then over actions."""
    best = NEG_INF
    for q in poly.vertices():
        for values in next_values.values():
            total = 0
            for qi, v in zip(q, values):
                if qi == 0:
                    continue
                if v == NEG_INF:
                    total = NEG_INF
                    break
                total += to_mode(qi, mode) * v
            if total > best:
                best = total
    return best


@dataclass
class ValueTable:
    market: MarketModel
    payoff: PayoffMap
    mode: str
    levels: list  # levels[k][(node, prefix)] -> value; prefix has length k
    choices: list  # choices[k][(node, prefix)] -> maximizing action c_k
    measures: dict = field(default_factory=dict)  # (node, prefix) -> maximizing one-step q
    polytopes: dict = field(default_factory=dict)

    @property
    def horizon(self) -> int:
        return self.market.horizon

    @property
    def value(self):
        return self.levels[0][((), ())]

    def get(self, k, node, prefix):
        return self.levels[k].get((tuple(node), tuple(prefix)), NEG_INF)

    def next_values(self, node, prefix) -> dict:
        poly = self.polytopes[node]
        return {
            a: [self.get(len(node) + 1, s, tuple(prefix) + (a,)) for s in poly.successors]
            for a in self.payoff.space.actions
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        out = csv.writer(buf, lineterminator="\n")
        out.writerow(["level", "atom_key", "value", "action"])
        for k, level in enumerate(self.levels):
            for (node, prefix), v in sorted(level.items()):
                act = self.choices[k].get((node, prefix), "")
                out.writerow([k, f"{node_key(node)}|{plan_key(prefix)}", format_ext(v), act])
        return buf.getvalue()


def _prefixes(payoff: PayoffMap, length: int) -> list:
    out = [()]
    for _ in range(length):
        out = [p + (a,) for p in out for a in payoff.space.actions if payoff.prefix_ok(p + (a,))]
    return out


def backward_induction(m: MarketModel, payoff: PayoffMap, mode: str = RATIONAL):
    """Return ``(value, table)``; raises EmptyPolytope if a reachable node admits no martingale measure."""
    support = m.support
    n = m.horizon
    levels = [dict() for _ in range(n + 1)]
    choices = [dict() for _ in range(n + 1)]
    table = ValueTable(m, payoff, mode, levels, choices)
    prefixes = [_prefixes(payoff, k) for k in range(n + 1)]
    for leaf in support.reachable_leaves:
        for p in prefixes[n]:
            v, a = terminal_op(payoff, leaf, p, mode)
            levels[n][(leaf, p)] = v
            choices[n][(leaf, p)] = a
    cache = {}
    for k in range(n - 1, -1, -1):
        for node in support.reachable_at(k):
            poly = one_step_martingale_polytope(m, node, mode)
            table.polytopes[node] = poly
            for p in prefixes[k]:
                res = one_step_value(poly, table.next_values(node, p), mode, cache)
                levels[k][(node, p)] = res.value
                choices[k][(node, p)] = res.action
                if res.q is not None:
                    table.measures[(node, p)] = res.q
    return table.value, table


def commutation_defects(table: ValueTable) -> list:
    """Atoms where the vertex-swapped sup disagrees with the stored value."""
    bad = []
    for k in range(table.horizon):
        for (node, p), v in table.levels[k].items():
            w = one_step_value_swapped(table.polytopes[node], table.next_values(node, p), table.mode)
            if not (v == w or (table.mode == FLOAT and leq(v, w, FLOAT) and leq(w, v, FLOAT))):
                bad.append((k, node, p, v, w))
    return bad


def direct_tail_value(table: ValueTable, k: int, node, prefix):
    """Operator at level ``k`` in its tail form: sup over q and over whole tails ``c'``.

    ``f`` is the stored level-``k+1`` table, so only the first tail action
    matters; the enumeration over full tails is deliberate.
    """
    m = table.market
    poly = table.polytopes[node]
    best = NEG_INF
    tails = itertools.product(table.payoff.space.actions, repeat=m.horizon - k + 1)
    for tail in tails:
        values = [table.get(k + 1, s, tuple(prefix) + tail[:1]) for s in poly.successors]
        v, _ = _restricted_sup(poly, values, table.mode, None)
        if v > best:
            best = v
    return best


# ---------------------------------------------------------------------------
# policies


@dataclass
class ExtractedPolicy:
    choices: dict  # (level, node, prefix) -> action
    space_actions: tuple
    eps: Fraction = Fraction(0)

    def action(self, node, prefix):
        return self.choices.get((len(node), tuple(node), tuple(prefix)), self.space_actions[0])

    def plan(self, leaf) -> tuple:
        prefix = ()
        for k in range(len(leaf) + 1):
            prefix = prefix + (self.action(leaf[:k], prefix),)
        return prefix

    def to_action_policy(self, m: MarketModel) -> ActionPolicy:
        """Adapted policy on every tree node (unreached atoms take the first action)."""
        acts = {}
        for leaf in m.tree.leaves():
            plan = self.plan(leaf)
            for k in range(len(leaf) + 1):
                acts[leaf[:k]] = plan[k]
        return ActionPolicy(acts)


def extract_policy(table: ValueTable) -> ExtractedPolicy:
    """First maximizing action at every stored atom; exact (eps = 0) for finite action sets."""
    choices = {}
    for k, level in enumerate(table.choices):
        for (node, p), a in level.items():
            choices[(k, node, p)] = a
    return ExtractedPolicy(choices, table.payoff.space.actions)


def sup_expectation(m: MarketModel, leaf_values: dict, mode: str = RATIONAL):
    """``sup over martingale measures of E[f]`` for a leaf function, by one-step composition."""
    support = m.support
    vals = {leaf: leaf_values[leaf] for leaf in support.reachable_leaves}
    cache = {}
    for k in range(m.horizon - 1, -1, -1):
        for node in support.reachable_at(k):
            poly = one_step_martingale_polytope(m, node, mode)
            v, _ = _restricted_sup(poly, [vals[s] for s in poly.successors], mode, cache)
            vals[node] = v
    return vals[()]


def policy_value(m: MarketModel, payoff: PayoffMap, policy, mode: str = RATIONAL):
    """Robust value of the payoff along an adapted policy (no static options)."""
    f = {}
    for leaf in m.support.reachable_leaves:
        v = payoff(leaf, policy.plan(leaf))
        f[leaf] = v if v == NEG_INF else to_mode(v, mode)
    return sup_expectation(m, f, mode)


# ---------------------------------------------------------------------------
# hedges


@dataclass
class ExtractedHedge:
    market: MarketModel
    initial: object  # initial capital (the backward-induction value)
    positions: dict  # (node, prefix incl. c_k) -> tuple of d units held over (k, k+1]
    wealth: dict  # (node, prefix) -> wealth before trading at that atom
    mode: str = RATIONAL

    def gains(self, leaf, plan):
        total = 0
        for k in range(len(leaf)):
            y = self.positions.get((leaf[:k], tuple(plan[: k + 1])))
            if y is None:
                continue
            inc = self.market.increment(leaf[: k + 1])
            total += sum(to_mode(a, self.mode) * to_mode(b, self.mode) for a, b in zip(y, inc))
        return total

    def violations(self, payoff: PayoffMap, tol: float = DEFAULT_TOL) -> list:
        """Reachable feasible pairs where initial capital plus gains falls below the payoff."""
        bad = []
        for leaf in self.market.support.reachable_leaves:
            for plan in payoff.feasible_plan_list:
                v = payoff(leaf, plan)
                if v == NEG_INF:
                    continue
                w = self.initial + self.gains(leaf, plan)
                if not leq(to_mode(v, self.mode), w, self.mode, tol):
                    bad.append((leaf, plan, w, v))
        return bad

    def to_rows(self) -> list:
        rows = []
        for (node, p), y in sorted(self.positions.items()):
            rows.append({"level": len(node), "node": node_key(node), "plan_prefix": plan_key(p),
                         "position": [format_ext(v) for v in y]})
        return rows


def _hedge_lp(m, poly, targets, mode):
    d = m.dimension
    lp = LinearProgram("min")
    ys = [lp.add_variable(None, None) for _ in range(d)]
    ts = [lp.add_variable(0, None, objective=1) for _ in range(d)]
    for y, t in zip(ys, ts):
        lp.add_row({t: 1, y: -1}, ">=", 0)
        lp.add_row({t: 1, y: 1}, ">=", 0)
    for s, rhs in targets:
        inc = m.increment(s)
        coeffs = {ys[j]: inc[j] for j in range(d) if inc[j]}
        lp.add_row(coeffs, ">=", rhs)
    return lp, ys, solve(lp, mode)


def extract_hedge(table: ValueTable) -> ExtractedHedge:
    """Minimal-norm one-step hedges, built forward along reachable atoms.

    At each atom the reference level is the stored value when finite and
    the accumulated wealth otherwise, so the wealth never drops below the
    value of a finite atom and ends above the payoff.
    """
    m = table.market
    mode = table.mode
    if m.static_options:
        raise ValueError("one-step hedge extraction needs a market without static options")
    if not is_finite(table.value):
        raise HedgeInfeasible(0, (), (), None)
    positions, wealth = {}, {((), ()): table.value}
    for k in range(m.horizon):
        for node in m.support.reachable_at(k):
            poly = table.polytopes[node]
            for p in [p for (nd, p) in table.levels[k] if nd == node]:
                w = wealth.get((node, p))
                if w is None:
                    continue
                v = table.get(k, node, p)
                ref = v if is_finite(v) else w
                for a in table.payoff.space.actions:
                    nxt = p + (a,)
                    targets = []
                    for s in poly.successors:
                        vs = table.get(k + 1, s, nxt)
                        if vs != NEG_INF:
                            targets.append((s, vs - ref))
                    if not targets:
                        continue
                    lp, ys, out = _hedge_lp(m, poly, targets, mode)
                    if out.status != OPTIMAL:
                        raise HedgeInfeasible(k, node, nxt, out.farkas)
                    y = tuple(out.x[i] for i in ys)
                    positions[(node, nxt)] = y
                    for s in poly.successors:
                        gain = sum(to_mode(a_, mode) * to_mode(b, mode) for a_, b in zip(y, m.increment(s)))
                        wealth[(s, nxt)] = w + gain
    return ExtractedHedge(m, table.value, positions, wealth, mode)
