"""Superhedging prices, the enlarged dual, the naive model price and their comparisons.

Every price is an LP (or an enumeration of LPs). Only reachable leaves and
plans with a finite payoff generate superhedging rows; the dual measure is
supported on exactly those pairs.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from ._numeric import DEFAULT_TOL, FLOAT, NEG_INF, POS_INF, RATIONAL, close, format_ext, leq, to_mode
from .actions import DEFAULT_POLICY_BUDGET, BudgetExceeded, PayoffMap, plan_key
from .enlarged import LiftedMeasure, disintegrate, enlarged_martingale_constraints
from .lp import INFEASIBLE, OPTIMAL, UNBOUNDED, LinearProgram, LpOutcome, solve
from .market import MarketModel, node_key


@dataclass
class HedgePortfolio:
    x: object
    H: dict  # (node, plan prefix c_0..c_k) -> d-vector held over (k, k+1]
    h: tuple  # static option units

    def gains(self, m: MarketModel, leaf, plan):
        total = Fraction(0)
        for k in range(len(leaf)):
            y = self.H.get((leaf[:k], tuple(plan[: k + 1])))
            if y is not None:
                total += sum(Fraction(a) * b for a, b in zip(y, m.increment(leaf[: k + 1])))
        total += sum(Fraction(a) * b for a, b in zip(self.h, m.option_vector(leaf)))
        return total

    def to_document(self) -> dict:
        return {
            "x": format_ext(self.x),
            "h": [format_ext(v) for v in self.h],
            "H": [
                {"node": node_key(n), "plan_prefix": plan_key(p), "position": [format_ext(v) for v in y]}
                for (n, p), y in sorted(self.H.items())
            ],
        }


@dataclass
class PriceResult:
    value: object
    outcome: Optional[LpOutcome] = None
    portfolio: Optional[HedgePortfolio] = None
    measure: Optional[LiftedMeasure] = None
    note: str = ""


def _rows(payoff: PayoffMap):
    for leaf, row in payoff.table.items():
        for plan, v in row.items():
            yield leaf, plan, v


def _superhedge_lp(m: MarketModel, payoff: PayoffMap, key_of):
    """Shared builder: ``key_of(leaf, plan, k)`` names the position variable used over (k, k+1]."""
    lp = LinearProgram("min")
    x = lp.add_variable(None, None, name="x", objective=1)
    h = [lp.add_variable(None, None, name=f"h{i}") for i in range(m.num_options)]
    pos = {}

    def var(key, j):
        if (key, j) not in pos:
            pos[(key, j)] = lp.add_variable(None, None)
        return pos[(key, j)]

    for leaf, plan, v in _rows(payoff):
        coeffs = {x: 1}
        for k in range(m.horizon):
            inc = m.increment(leaf[: k + 1])
            key = key_of(leaf, plan, k)
            for j in range(m.dimension):
                if inc[j]:
                    idx = var(key, j)
                    coeffs[idx] = coeffs.get(idx, 0) + inc[j]
        for i, g in enumerate(m.option_vector(leaf)):
            if g:
                coeffs[h[i]] = g
        lp.add_row(coeffs, ">=", v, name=f"{node_key(leaf)}|{plan_key(plan)}")
    return lp, x, h, pos, var


def _result_from(lp, out, x, h, pos, m, positions_key):
    if out.status != OPTIMAL:
        return PriceResult(out.value, out, note=out.status)
    H = {}
    for (key, j), idx in pos.items():
        atom = positions_key(key)
        vec = H.setdefault(atom, [Fraction(0)] * m.dimension)
        vec[j] = out.x[idx]
    H = {k: tuple(v) for k, v in H.items()}
    port = HedgePortfolio(out.x[x], H, tuple(out.x[i] for i in h))
    return PriceResult(out.value, out, portfolio=port)


def superhedge_primal_original(m: MarketModel, payoff: PayoffMap, mode: str = RATIONAL) -> PriceResult:
    """Per-plan positions ``H(., c)`` with explicit equalities for non-anticipativity in actions."""
    lp, x, h, pos, var = _superhedge_lp(m, payoff, lambda leaf, plan, k: (leaf[:k], plan))
    groups = {}
    for (node, plan), j in list(pos):
        k = len(node)
        groups.setdefault((node, plan[: k + 1], j), []).append(plan)
    for (node, _, j), plans in groups.items():
        first = pos[((node, plans[0]), j)]
        for other in plans[1:]:
            lp.add_row({first: 1, pos[((node, other), j)]: -1}, "==", 0)
    out = solve(lp, mode)
    return _result_from(lp, out, x, h, pos, m, lambda key: (key[0], key[1][: len(key[0]) + 1]))


def superhedge_primal_enlarged(m: MarketModel, payoff: PayoffMap, mode: str = RATIONAL) -> PriceResult:
    """Positions indexed by the atom ``(omega_1..omega_k, c_0..c_k)``."""
    lp, x, h, pos, var = _superhedge_lp(m, payoff, lambda leaf, plan, k: (leaf[:k], plan[: k + 1]))
    out = solve(lp, mode)
    return _result_from(lp, out, x, h, pos, m, lambda key: key)


def dual_enlarged(m: MarketModel, payoff: PayoffMap, with_calibration: bool = True, mode: str = RATIONAL):
    """``max E[payoff]`` over enlarged martingale measures (calibrated when requested)."""
    variables = [(leaf, plan) for leaf, plan, _ in _rows(payoff)]
    values = [v for _, _, v in _rows(payoff)]
    system = enlarged_martingale_constraints(m, payoff.space, variables, calibrate=with_calibration)
    lp = LinearProgram("max")
    for v in values:
        lp.add_variable(0, None, objective=v)
    for r in system.rows:
        lp.add_row(r.coeffs, "==", r.rhs, name=r.name)
    out = solve(lp, mode)
    if out.status != OPTIMAL:
        return PriceResult(out.value, out, note=out.status)
    weights = {variables[j]: out.x[j] for j in range(len(variables)) if out.x[j]}
    nu, comps = disintegrate(weights)
    return PriceResult(out.value, out, measure=LiftedMeasure(weights, nu, comps))


# ---------------------------------------------------------------------------
# naive model price


@dataclass
class NaivePrice:
    value: object
    policy: Optional[dict] = None  # reachable non-leaf node -> action
    measure: Optional[dict] = None  # leaf -> weight
    terminal: Optional[dict] = None  # leaf -> pointwise-optimal last action
    policies: int = 0
    lps: int = 0


def naive_policy_count(m: MarketModel, payoff: PayoffMap) -> int:
    inner = [n for k in range(m.horizon) for n in m.support.reachable_at(k)]
    return len(payoff.space) ** len(inner)


def _calibrated_lp(m: MarketModel, leaves, values):
    lp = LinearProgram("max")
    idx = {leaf: lp.add_variable(0, None, objective=v) for leaf, v in zip(leaves, values)}
    lp.add_row({j: 1 for j in idx.values()}, "==", 1, name="mass")
    for k in range(m.horizon):
        for node in m.support.reachable_at(k):
            for d in range(m.dimension):
                coeffs = {}
                for leaf, j in idx.items():
                    if leaf[:k] == node:
                        inc = m.increment(leaf[: k + 1])[d]
                        if inc:
                            coeffs[j] = inc
                if coeffs:
                    lp.add_row(coeffs, "==", 0, name=f"mart[{node_key(node)}][{d}]")
    for lam, g in enumerate(m.static_options):
        coeffs = {j: g[leaf] for leaf, j in idx.items() if g[leaf]}
        lp.add_row(coeffs, "==", 0, name=f"calib[{lam}]")
    return lp, idx


def calibrated_sup(m: MarketModel, leaf_values: dict, mode: str = RATIONAL):
    """``sup over calibrated martingale measures of E[f]`` for a leaf function with ``-inf`` allowed."""
    leaves = [leaf for leaf in m.support.reachable_leaves if leaf_values[leaf] != NEG_INF]
    if not leaves:
        return NEG_INF, None
    lp, idx = _calibrated_lp(m, leaves, [leaf_values[leaf] for leaf in leaves])
    out = solve(lp, mode)
    if out.status != OPTIMAL:
        return NEG_INF, None
    return out.value, {leaf: out.x[j] for leaf, j in idx.items() if out.x[j]}


def _pruned_policies(inner, payoff: PayoffMap, budget: int):
    """Policies on ``inner`` (parents first), skipping actions whose prefix cannot be completed.

    Such an action sends every path below it to ``-inf``; any completable
    action instead only enlarges the set of admissible measures, so the
    skipped policies are dominated. If no action is completable, the first
    one stands in.
    """
    actions = payoff.space.actions
    count = 0
    pol = {}

    def rec(i):
        nonlocal count
        if i == len(inner):
            count += 1
            if count > budget:
                raise BudgetExceeded("naive policy enumeration", count, budget)
            yield dict(pol)
            return
        node = inner[i]
        prefix = tuple(pol[node[:k]] for k in range(len(node)))
        options = [a for a in actions if payoff.prefix_ok(prefix + (a,))] or [actions[0]]
        for a in options:
            pol[node] = a
            yield from rec(i + 1)
        del pol[node]

    yield from rec(0)


def naive_model_price(
    m: MarketModel, payoff: PayoffMap, mode: str = RATIONAL, budget: int = DEFAULT_POLICY_BUDGET
) -> NaivePrice:
    """Best adapted policy against the best calibrated martingale measure.

    Policies are enumerated on reachable non-leaf nodes only; the last
    action is taken pointwise optimal at each leaf, which is what any
    adapted policy can do once the whole path is known.
    """
    inner = [n for k in range(m.horizon) for n in m.support.reachable_at(k)]
    leaves = m.support.reachable_leaves
    actions = payoff.space.actions
    best = NaivePrice(NEG_INF)
    cache = {}
    for pol in _pruned_policies(inner, payoff, budget):
        vec, term = [], {}
        for leaf in leaves:
            prefix = tuple(pol[leaf[:k]] for k in range(m.horizon))
            top, arg = NEG_INF, None
            for a in actions:
                v = payoff(leaf, prefix + (a,))
                if arg is None or v > top:
                    top, arg = v, a
            vec.append(top if top == NEG_INF else to_mode(top, mode))
            term[leaf] = arg
        key = tuple(vec)
        if key not in cache:
            cache[key] = calibrated_sup(m, dict(zip(leaves, vec)), mode)
        value, q = cache[key]
        best.policies += 1
        if best.policy is None or value > best.value:
            best.value, best.policy, best.measure, best.terminal = value, pol, q, term
    best.lps = len(cache)
    return best


# ---------------------------------------------------------------------------
# dynamic extension


@dataclass
class ExtensionReport:
    passed: bool
    checks: dict
    Y: list  # per option: {(level, node, prefix): value}
    pushforward: dict  # (leaf, (Y_1..Y_{N-1} per option)) -> weight
    value: object


def _conditional(weights, fn, level):
    """``E[fn | omega_1..omega_k, c_0..c_k]`` on positive-mass atoms."""
    return _conditional_pairs(weights, lambda leaf, plan: fn(leaf), level)


def dynamic_extension_check(m: MarketModel, payoff: PayoffMap, dual: PriceResult, primal_value, mode=RATIONAL,
                            tol: float = DEFAULT_TOL) -> ExtensionReport:
    """Build the option price processes ``Y`` under the optimal enlarged measure and check them.

    ``Y_0`` is the unconditional mean, ``Y_k`` (``1 <= k < N``) the
    conditional mean on ``(omega_1..omega_k, c_0..c_k)``, ``Y_N = g``.
    Checks: calibration, terminal match, martingale property of ``Y`` and
    of ``S`` on the coarser history of ``(S, Y)``, and the value equality.
    """
    if dual.measure is None:
        return ExtensionReport(False, {"dual_solved": False}, [], {}, dual.value)
    weights = {k: v for k, v in dual.measure.weights.items() if v}
    n = m.horizon
    eq = (lambda a, b: a == b) if mode == RATIONAL else (lambda a, b: close(a, b, FLOAT, tol))
    checks = {"calibration": True, "terminal": True, "martingale_Y": True, "martingale_S": True}
    Ys = []
    for g in m.static_options:
        total = sum(w * g[leaf] for (leaf, _), w in weights.items())
        Y = {(0, (), ()): total}
        checks["calibration"] &= eq(total, 0)
        for k in range(1, n + 1):
            for (node, prefix), v in _conditional(weights, lambda leaf: g[leaf], k).items():
                Y[(k, node, prefix)] = v
        for (leaf, plan) in weights:
            checks["terminal"] &= eq(Y[(n, leaf, plan)], g[leaf])
        Ys.append(Y)

    def y_at(Y, leaf, plan, k):
        if k == 0:
            return Y[(0, (), ())]
        return Y[(k, leaf[:k], plan[: k + 1])]

    for Y in Ys:
        # Y_0 sits before c_0 is chosen, so the first step is an unconditional mean
        first = sum(w * y_at(Y, leaf, plan, 1) for (leaf, plan), w in weights.items())
        checks["martingale_Y"] &= eq(first, Y[(0, (), ())])
        for k in range(1, n):
            nxt = _conditional_pairs(weights, lambda leaf, plan: y_at(Y, leaf, plan, k + 1), k)
            for (leaf, plan) in weights:
                ok = eq(nxt[(leaf[:k], plan[: k + 1])], y_at(Y, leaf, plan, k))
                checks["martingale_Y"] &= ok
    # pushforward onto (path, Y-path) and the martingale property there
    push = {}
    for (leaf, plan), w in weights.items():
        ys = tuple(tuple(y_at(Y, leaf, plan, k) for Y in Ys) for k in range(1, n))
        push[(leaf, ys)] = push.get((leaf, ys), 0) + w
    for k in range(n):
        mass, acc_s, acc_y = {}, {}, {}
        for (leaf, ys), w in push.items():
            key = (leaf[:k], ys[:k])
            mass[key] = mass.get(key, 0) + w
            inc = m.increment(leaf[: k + 1])
            acc_s[key] = [a + w * b for a, b in zip(acc_s.get(key, [0] * m.dimension), inc)]
            if Ys:
                before = ys[k - 1] if k >= 1 else tuple(Y[(0, (), ())] for Y in Ys)
                after = ys[k] if k < n - 1 else m.option_vector(leaf)
                dy = [a - b for a, b in zip(after, before)]
                acc_y[key] = [a + w * b for a, b in zip(acc_y.get(key, [0] * len(Ys)), dy)]
        for key, mk in mass.items():
            if mk:
                checks["martingale_S"] &= all(eq(v, 0) for v in acc_s[key])
                if Ys:
                    checks["martingale_Y"] &= all(eq(v, 0) for v in acc_y[key])
    value = sum(w * payoff(leaf, plan) for (leaf, plan), w in weights.items())
    checks["value_equals_primal"] = eq(value, primal_value)
    return ExtensionReport(all(checks.values()), checks, Ys, push, value)


def _conditional_pairs(weights, fn, level):
    mass, acc = {}, {}
    for (leaf, plan), w in weights.items():
        key = (leaf[:level], plan[: level + 1])
        mass[key] = mass.get(key, 0) + w
        acc[key] = acc.get(key, 0) + w * fn(leaf, plan)
    return {k: acc[k] / mass[k] for k in mass if mass[k]}


# ---------------------------------------------------------------------------
# report


@dataclass
class PriceReport:
    primal_original: object = None
    primal_enlarged: object = None
    dual_enlarged: object = None
    naive_model_price: object = None
    dp_value: object = None
    na: Optional[dict] = None
    witnesses: dict = field(default_factory=dict)
    flags: dict = field(default_factory=dict)
    errors: dict = field(default_factory=dict)
    extension: Optional[dict] = None

    def to_document(self) -> dict:
        doc = {
            "primal_original": format_ext(self.primal_original),
            "primal_enlarged": format_ext(self.primal_enlarged),
            "dual_enlarged": format_ext(self.dual_enlarged),
            "naive_model_price": format_ext(self.naive_model_price),
            "dp_value": format_ext(self.dp_value),
            "na": self.na,
            "witnesses": self.witnesses,
            "flags": self.flags,
        }
        if self.extension is not None:
            doc["dynamic_extension"] = self.extension
        if self.errors:
            doc["errors"] = self.errors
        return doc

    def to_json(self) -> str:
        return json.dumps(self.to_document(), indent=2, sort_keys=True)


def _lt(a, b, mode, tol):
    if a is None or b is None:
        return None
    return leq(a, b, mode, tol) and not close(a, b, mode, tol)


def price_report(
    m: MarketModel,
    payoff: PayoffMap,
    mode: str = RATIONAL,
    tol: float = DEFAULT_TOL,
    policy_budget: int = DEFAULT_POLICY_BUDGET,
    naive: bool = True,
) -> PriceReport:
    """All four prices with witnesses and flags; weak duality is asserted before returning."""
    from .arbitrage import check_na
    from .dp import backward_induction

    rep = PriceReport()
    na = check_na(m, space="original", mode=mode)
    rep.na = na.to_document()
    po = superhedge_primal_original(m, payoff, mode)
    pe = superhedge_primal_enlarged(m, payoff, mode)
    de = dual_enlarged(m, payoff, True, mode)
    rep.primal_original, rep.primal_enlarged, rep.dual_enlarged = po.value, pe.value, de.value
    if pe.portfolio is not None:
        rep.witnesses["portfolio"] = pe.portfolio.to_document()
    if de.measure is not None:
        rep.witnesses["measure"] = [
            {"path": node_key(w), "plan": plan_key(c), "weight": format_ext(v)}
            for (w, c), v in sorted(de.measure.weights.items())
        ]
    if naive:
        try:
            nv = naive_model_price(m, payoff, mode, policy_budget)
            rep.naive_model_price = nv.value
            if nv.policy is not None:
                rep.witnesses["policy"] = {node_key(n): a for n, a in sorted(nv.policy.items())}
        except BudgetExceeded as exc:
            rep.errors["naive_model_price"] = f"duality: {exc}"
    if not m.static_options and na.holds:
        try:
            rep.dp_value, _ = backward_induction(m, payoff, mode)
        except Exception as exc:  # noqa: BLE001 - reported, not swallowed
            rep.errors["dp_value"] = f"dp: {exc}"
    if m.static_options and de.measure is not None:
        ext = dynamic_extension_check(m, payoff, de, po.value, mode, tol)
        rep.extension = {"passed": ext.passed, "checks": ext.checks, "value": format_ext(ext.value)}
    rep.flags = {
        "naive_lt_dual": _lt(rep.naive_model_price, rep.dual_enlarged, mode, tol),
        "primal_eq_dual": close(rep.primal_enlarged, rep.dual_enlarged, mode, tol),
        "primal_original_eq_enlarged": close(rep.primal_original, rep.primal_enlarged, mode, tol),
        "na_holds": na.holds,
    }
    assert_weak_duality(rep, mode, tol)
    return rep


def assert_weak_duality(rep: PriceReport, mode=RATIONAL, tol: float = DEFAULT_TOL):
    chain = [rep.naive_model_price, rep.dual_enlarged, rep.primal_enlarged]
    chain = [v for v in chain if v is not None]
    for a, b in zip(chain, chain[1:]):
        if not leq(a, b, mode, tol):
            raise AssertionError(f"weak duality violated: {format_ext(a)} > {format_ext(b)}")
