"""Action space, plan constraints, extended-real payoffs and adapted policies.

A plan is a tuple of action labels, one per time ``0..N``. Infeasible plans
are not errors: the payoff evaluates to ``-inf`` on them.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Callable, Mapping, Optional, Sequence

from ._numeric import NEG_INF, parse_ext, parse_rational
from .market import MarketModel, Node, ScenarioTree, node_key, parse_node_key

DEFAULT_PLAN_BUDGET = 10**6
DEFAULT_POLICY_BUDGET = 10**4

Plan = tuple


class ActionError(ValueError):
    """Invalid action document or payoff definition."""


class BudgetExceeded(RuntimeError):
    """An enumeration would exceed its configured cap."""

    def __init__(self, what: str, size: int, budget: int):
        super().__init__(f"{what}: {size} exceeds budget {budget}")
        self.size = size
        self.budget = budget


def plan_key(plan: Sequence[str]) -> str:
    return "/".join(plan)


def parse_plan_key(key: str) -> Plan:
    return tuple(key.split("/")) if key else ()


@dataclass(frozen=True)
class ActionSpace:
    actions: tuple
    grid_step: Optional[Fraction] = None  # set when the labels discretize a continuum

    def __post_init__(self):
        if not self.actions:
            raise ActionError("action space must be non-empty")
        if len(set(self.actions)) != len(self.actions):
            raise ActionError("action labels must be distinct")
        for a in self.actions:
            if not isinstance(a, str) or a == "" or "/" in a or "|" in a:
                raise ActionError(f"bad action label {a!r}")

    def __len__(self):
        return len(self.actions)

    def index(self, label: str) -> int:
        return self.actions.index(label)

    def value(self, label: str) -> Fraction:
        """Numeric reading of a label (volumes, exercise counts)."""
        try:
            return Fraction(label)
        except ValueError:
            raise ActionError(f"action label {label!r} is not numeric") from None

    def plans(self, length: int):
        return itertools.product(self.actions, repeat=length)

    @classmethod
    def grid(cls, lower, upper, step) -> "ActionSpace":
        lower, upper, step = Fraction(lower), Fraction(upper), Fraction(step)
        if step <= 0 or upper < lower:
            raise ActionError("grid needs step > 0 and upper >= lower")
        count = int((upper - lower) / step)
        labels = tuple(str(lower + i * step) for i in range(count + 1))
        return cls(labels, grid_step=step)


# ---------------------------------------------------------------------------
# constraints


class PlanConstraint:
    kind = "abstract"
    prefix_monotone = True

    def ok(self, plan: Plan, space: ActionSpace) -> bool:
        raise NotImplementedError

    def prefix_ok(self, prefix: Plan, horizon: int, space: ActionSpace) -> bool:
        """False only if no completion of ``prefix`` can satisfy the constraint."""
        return True

    def to_document(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class WindowSum(PlanConstraint):
    """``lower <= sum of action values over times <= upper``."""

    lower: Optional[Fraction] = None
    upper: Optional[Fraction] = None
    times: Optional[tuple] = None
    kind = "window_sum"

    def _times(self, horizon):
        return self.times if self.times is not None else tuple(range(horizon + 1))

    def ok(self, plan, space):
        total = sum(space.value(plan[t]) for t in self._times(len(plan) - 1))
        if self.lower is not None and total < self.lower:
            return False
        return self.upper is None or total <= self.upper

    def prefix_ok(self, prefix, horizon, space):
        times = self._times(horizon)
        vals = [space.value(a) for a in space.actions]
        done = sum(space.value(prefix[t]) for t in times if t < len(prefix))
        left = sum(1 for t in times if t >= len(prefix))
        lo_reach = done + left * min(vals)
        hi_reach = done + left * max(vals)
        if self.upper is not None and lo_reach > self.upper:
            return False
        return self.lower is None or hi_reach >= self.lower

    def to_document(self):
        doc = {"kind": self.kind}
        if self.lower is not None:
            doc["lower"] = str(self.lower)
        if self.upper is not None:
            doc["upper"] = str(self.upper)
        if self.times is not None:
            doc["times"] = list(self.times)
        return doc


@dataclass(frozen=True)
class WaitingPeriod(PlanConstraint):
    """Any two exercises (action value = number exercised) at least ``periods`` apart."""

    periods: int
    kind = "waiting_period"

    def _ok(self, seq, space):
        last = None
        for t, a in enumerate(seq):
            v = space.value(a)
            if v <= 0:
                continue
            if v > 1 and self.periods > 0:
                return False
            if last is not None and t - last < self.periods:
                return False
            last = t
        return True

    def ok(self, plan, space):
        return self._ok(plan, space)

    def prefix_ok(self, prefix, horizon, space):
        return self._ok(prefix, space)

    def to_document(self):
        return {"kind": self.kind, "n": self.periods}


@dataclass(frozen=True)
class PerPeriodCap(PlanConstraint):
    """At most ``cap`` units (options exercised) per time."""

    cap: Fraction
    kind = "per_period_cap"

    def ok(self, plan, space):
        return all(space.value(a) <= self.cap for a in plan)

    def prefix_ok(self, prefix, horizon, space):
        return self.ok(prefix, space)

    def to_document(self):
        return {"kind": self.kind, "cap": str(self.cap)}


@dataclass(frozen=True)
class PrefixAllowed(PlanConstraint):
    """Allowed labels per time and/or per previous label (option-on-option menus)."""

    at_time: Mapping = field(default_factory=dict)  # time -> frozenset of labels
    after: Mapping = field(default_factory=dict)  # previous label -> frozenset of labels
    kind = "prefix_allowed"

    def _ok(self, seq):
        for t, a in enumerate(seq):
            allowed = self.at_time.get(t)
            if allowed is not None and a not in allowed:
                return False
            if t > 0:
                nxt = self.after.get(seq[t - 1])
                if nxt is not None and a not in nxt:
                    return False
        return True

    def ok(self, plan, space):
        return self._ok(plan)

    def prefix_ok(self, prefix, horizon, space):
        return self._ok(prefix)

    def to_document(self):
        doc = {"kind": self.kind}
        if self.at_time:
            doc["at_time"] = {str(t): sorted(v) for t, v in sorted(self.at_time.items())}
        if self.after:
            doc["after"] = {k: sorted(v) for k, v in sorted(self.after.items())}
        return doc


@dataclass(frozen=True)
class CustomPredicate(PlanConstraint):
    """User predicate on full plans; never used for pruning."""

    predicate: Callable = None
    forbidden: Optional[frozenset] = None
    kind = "custom_predicate"
    prefix_monotone = False

    def ok(self, plan, space):
        if self.forbidden is not None and plan in self.forbidden:
            return False
        return self.predicate is None or bool(self.predicate(plan))

    def to_document(self):
        if self.predicate is not None:
            raise ActionError("callable predicates cannot be serialized")
        return {"kind": self.kind, "forbidden": sorted(plan_key(p) for p in self.forbidden or ())}


def constraint_from_document(doc: dict) -> PlanConstraint:
    kind = doc.get("kind")
    try:
        if kind == "window_sum":
            times = doc.get("times")
            return WindowSum(
                None if doc.get("lower") is None else parse_rational(doc["lower"]),
                None if doc.get("upper") is None else parse_rational(doc["upper"]),
                None if times is None else tuple(int(t) for t in times),
            )
        if kind == "waiting_period":
            return WaitingPeriod(int(doc["n"]))
        if kind == "per_period_cap":
            return PerPeriodCap(parse_rational(doc["cap"]))
        if kind == "prefix_allowed":
            at_time = {int(t): frozenset(v) for t, v in doc.get("at_time", {}).items()}
            after = {str(k): frozenset(v) for k, v in doc.get("after", {}).items()}
            return PrefixAllowed(at_time, after)
        if kind == "custom_predicate":
            if "forbidden" not in doc:
                raise ActionError("custom_predicate in JSON needs a 'forbidden' plan list")
            return CustomPredicate(forbidden=frozenset(parse_plan_key(k) for k in doc["forbidden"]))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ActionError):
            raise
        raise ActionError(f"bad {kind} constraint: {exc}") from None
    raise ActionError(f"unknown constraint kind {kind!r}")


# ---------------------------------------------------------------------------
# payoff rules


def _asset(market, node, asset):
    return market.prices[node][asset]


def american_rule(strike, asset=0, call=False):
    """Sum over times of (units exercised) x intrinsic value."""
    strike = Fraction(strike)

    def rule(market, leaf, plan, space):
        total = Fraction(0)
        for t, a in enumerate(plan):
            units = space.value(a)
            if units:
                s = _asset(market, leaf[:t], asset)
                total += units * max(s - strike if call else strike - s, Fraction(0))
        return total

    return rule


def swing_rule(strike, asset=0):
    """Volume bought at ``strike`` each period, valued at spot."""
    strike = Fraction(strike)

    def rule(market, leaf, plan, space):
        return sum(
            (space.value(a) * (_asset(market, leaf[:t], asset) - strike) for t, a in enumerate(plan)),
            Fraction(0),
        )

    return rule


def table_rule(values: Mapping, default=NEG_INF):
    """Explicit ``{leaf: {plan: value}}`` table."""

    def rule(market, leaf, plan, space):
        return values.get(leaf, {}).get(plan, default)

    return rule


_VANILLA = {
    "call": lambda s, k: max(s - k, Fraction(0)),
    "put": lambda s, k: max(k - s, Fraction(0)),
    "forward": lambda s, k: s - k,
    "zero": lambda s, k: Fraction(0),
}


def option_choice_rule(options: Mapping, asset=0):
    """Payoff at maturity of the vanilla named by the final action."""
    for label, (typ, _) in options.items():
        if typ not in _VANILLA:
            raise ActionError(f"option {label!r}: unknown vanilla type {typ!r}")

    def rule(market, leaf, plan, space):
        entry = options.get(plan[-1])
        if entry is None:
            return NEG_INF
        typ, strike = entry
        return _VANILLA[typ](_asset(market, leaf, asset), strike)

    return rule


class PayoffMap:
    """Extended-real payoff ``(leaf, plan) -> R u {-inf}`` bound to a market.

    Constraint violations give ``-inf``. Construction scans every
    (leaf, feasible plan) pair and rejects ``+inf``/NaN values, which makes
    the payoff bounded above by construction.
    """

    def __init__(
        self,
        market: MarketModel,
        space: ActionSpace,
        constraints: Sequence[PlanConstraint],
        rule: Callable,
        name: str = "",
        document: Optional[dict] = None,
        plan_budget: int = DEFAULT_PLAN_BUDGET,
        validate: bool = True,
    ):
        self.market = market
        self.space = space
        self.constraints = tuple(constraints)
        self.rule = rule
        self.name = name
        self.document = document
        self.plan_budget = plan_budget
        if validate:
            self.upper_bound

    @property
    def plan_length(self) -> int:
        return self.market.horizon + 1

    def plan_ok(self, plan: Plan) -> bool:
        return all(c.ok(plan, self.space) for c in self.constraints)

    def prefix_ok(self, prefix: Plan) -> bool:
        h = self.market.horizon
        return all(c.prefix_ok(prefix, h, self.space) for c in self.constraints if c.prefix_monotone)

    def __call__(self, leaf: Node, plan: Plan):
        if len(plan) != self.plan_length:
            raise ActionError(f"plan {plan_key(plan)!r} must have {self.plan_length} actions")
        if not self.plan_ok(plan):
            return NEG_INF
        value = self.rule(self.market, leaf, plan, self.space)
        if isinstance(value, float):
            if value == NEG_INF:
                return NEG_INF
            if math.isnan(value) or math.isinf(value):
                raise ActionError(f"payoff at ({node_key(leaf)}, {plan_key(plan)}) is {value}")
            value = Fraction(value)
        return value

    @cached_property
    def feasible_plan_list(self) -> tuple:
        """Plans satisfying every constraint (leaf-independent part)."""
        return tuple(_enumerate_plans(self, prune=True))

    @cached_property
    def table(self) -> dict:
        """``{reachable leaf: {plan: value}}`` for values above ``-inf``."""
        out = {}
        for leaf in self.market.support.reachable_leaves:
            row = {}
            for plan in self.feasible_plan_list:
                v = self(leaf, plan)
                if v != NEG_INF:
                    row[plan] = v
            out[leaf] = row
        return out

    @cached_property
    def upper_bound(self):
        best = NEG_INF
        for leaf in self.market.tree.leaves():
            for plan in self.feasible_plan_list:
                v = self(leaf, plan)
                if v > best:
                    best = v
        return best

    def with_rule(self, rule: Callable, name: str = "") -> "PayoffMap":
        return PayoffMap(self.market, self.space, self.constraints, rule, name=name or self.name)

    def shifted(self, constant) -> "PayoffMap":
        base = self.rule
        return self.with_rule(lambda m, leaf, plan, sp: _add(base(m, leaf, plan, sp), constant))

    def scaled(self, factor) -> "PayoffMap":
        base = self.rule
        return self.with_rule(lambda m, leaf, plan, sp: _mul(base(m, leaf, plan, sp), factor))

    def truncated(self, level) -> "PayoffMap":
        base = self.rule
        level = Fraction(level)
        return self.with_rule(lambda m, leaf, plan, sp: min(base(m, leaf, plan, sp), level))


def _add(v, c):
    return v if v == NEG_INF else v + c


def _mul(v, c):
    return v if v == NEG_INF else v * c


def _enumerate_plans(payoff: PayoffMap, prune: bool):
    space = payoff.space
    n = payoff.plan_length
    size = len(space) ** n
    if size > payoff.plan_budget:
        raise BudgetExceeded("plan enumeration |A|^(N+1)", size, payoff.plan_budget)
    if not prune:
        for plan in space.plans(n):
            if payoff.plan_ok(plan):
                yield plan
        return

    def rec(prefix):
        if len(prefix) == n:
            if payoff.plan_ok(prefix):
                yield prefix
            return
        for a in space.actions:
            nxt = prefix + (a,)
            if payoff.prefix_ok(nxt):
                yield from rec(nxt)

    if payoff.prefix_ok(()):
        yield from rec(())


def eval_payoff(payoff: PayoffMap, leaf: Node, plan: Plan):
    return payoff(leaf, plan)


def feasible_plans(payoff: PayoffMap, space: ActionSpace, leaf: Node, prune: bool = True) -> list:
    """All plans with a payoff above ``-inf`` at ``leaf``."""
    if space is not payoff.space and space != payoff.space:
        raise ActionError("action space does not match the payoff map")
    return [p for p in _enumerate_plans(payoff, prune) if payoff(leaf, p) != NEG_INF]


# ---------------------------------------------------------------------------
# policies


@dataclass(frozen=True, eq=False)
class ActionPolicy:
    """Adapted action rule: the action at time k depends on the k-step node only."""

    actions: Mapping  # node -> label

    def plan(self, leaf: Node) -> Plan:
        return tuple(self.actions[leaf[:t]] for t in range(len(leaf) + 1))


def policy_count(space: ActionSpace, tree: ScenarioTree) -> int:
    return len(space) ** len(tree.all_nodes())


def enumerate_policies(space: ActionSpace, tree: ScenarioTree, budget: int = DEFAULT_POLICY_BUDGET):
    """Every adapted policy on ``tree``; count is ``prod_k |A|^(#nodes at depth k)``."""
    count = policy_count(space, tree)
    if count > budget:
        raise BudgetExceeded("policy enumeration", count, budget)
    nodes = tree.all_nodes()
    for combo in itertools.product(space.actions, repeat=len(nodes)):
        yield ActionPolicy(dict(zip(nodes, combo)))


# ---------------------------------------------------------------------------
# loading


def load_actions(document, market: MarketModel, plan_budget: int = DEFAULT_PLAN_BUDGET) -> PayoffMap:
    """Build a :class:`PayoffMap` (with its action space) from a JSON action document."""
    if isinstance(document, (str, bytes)) and not str(document).lstrip().startswith("{"):
        with open(document) as fh:
            document = json.load(fh)
    elif isinstance(document, (str, bytes)):
        document = json.loads(document)
    if not isinstance(document, dict):
        raise ActionError("action document must be a JSON object")
    if "actions" not in document or "payoff" not in document:
        raise ActionError("action document needs 'actions' and 'payoff'")
    raw = document["actions"]
    if isinstance(raw, dict) and raw.get("grid"):
        g = raw["grid"]
        space = ActionSpace.grid(parse_rational(g[0]), parse_rational(g[1]), parse_rational(g[2]))
    elif isinstance(raw, list):
        space = ActionSpace(tuple(str(a) for a in raw))
    else:
        raise ActionError("'actions' must be a label list or {'grid': [lower, upper, step]}")
    constraints = [constraint_from_document(c) for c in document.get("constraints", [])]
    pdoc = document["payoff"]
    kind = pdoc.get("kind") if isinstance(pdoc, dict) else None
    asset = int(pdoc.get("asset", 0)) if isinstance(pdoc, dict) else 0
    if not 0 <= asset < market.dimension:
        raise ActionError(f"payoff asset index {asset} out of range")
    try:
        if kind in ("american_put", "american_call"):
            rule = american_rule(parse_rational(pdoc["strike"]), asset, call=kind == "american_call")
            for a in space.actions:
                space.value(a)
        elif kind == "swing":
            rule = swing_rule(parse_rational(pdoc["strike"]), asset)
            for a in space.actions:
                space.value(a)
        elif kind == "table":
            values = {}
            for lk, row in pdoc["values"].items():
                leaf = parse_node_key(lk)
                if leaf not in market.prices or not market.tree.is_leaf(leaf):
                    raise ActionError(f"payoff table: {lk!r} is not a leaf")
                entry = {}
                for pk, v in row.items():
                    plan = parse_plan_key(pk)
                    if len(plan) != market.horizon + 1 or any(a not in space.actions for a in plan):
                        raise ActionError(f"payoff table: bad plan key {pk!r}")
                    entry[plan] = parse_ext(v)
                values[leaf] = entry
            rule = table_rule(values, parse_ext(pdoc.get("default", "-inf")))
        elif kind == "option_choice":
            opts = {
                str(lab): (o["type"], parse_rational(o.get("strike", 0))) for lab, o in pdoc["options"].items()
            }
            rule = option_choice_rule(opts, asset)
        else:
            raise ActionError(f"unknown payoff kind {kind!r}")
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ActionError):
            raise
        raise ActionError(f"bad {kind} payoff: {exc}") from None
    return PayoffMap(market, space, constraints, rule, name=str(document.get("name", kind)), document=document,
                     plan_budget=plan_budget)
