"""The enlarged space of (path, plan) pairs, its atoms, and mixtures of measures.

Measures on the enlarged space are finite weight dictionaries keyed by
``(leaf, plan)``. The martingale rows are conditional constraints multiplied
through by the atom mass, so they stay linear and vanish on null atoms.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Optional, Sequence

from ._numeric import NEG_INF
from .actions import ActionSpace, BudgetExceeded, PayoffMap, plan_key
from .market import MarketModel, node_key

DEFAULT_PATH_BUDGET = 10**6

MINUS = "minus"
PLUS = "plus"


@dataclass(frozen=True)
class EnlargedPath:
    omega: tuple
    plan: tuple
    reachable: bool = True
    feasible: bool = True

    @property
    def key(self):
        return (self.omega, self.plan)


@dataclass(frozen=True)
class EnlargedAtom:
    """Atom at level ``k``: the plus flavor fixes ``c_0..c_k``, the minus flavor ``c_0..c_{k-1}``."""

    level: int
    omega: tuple
    plan: tuple
    flavor: str = PLUS

    def __post_init__(self):
        if len(self.omega) != self.level:
            raise ValueError("atom path prefix must have the atom's level as length")
        want = self.level + 1 if self.flavor == PLUS else self.level
        if len(self.plan) != want:
            raise ValueError(f"{self.flavor} atom at level {self.level} needs a plan prefix of length {want}")

    def contains(self, omega, plan) -> bool:
        return omega[: self.level] == self.omega and plan[: len(self.plan)] == self.plan

    @property
    def key(self) -> str:
        return f"{node_key(self.omega)}|{plan_key(self.plan)}"


def atom_of(omega, plan, level: int, flavor: str = PLUS) -> EnlargedAtom:
    n = level + 1 if flavor == PLUS else level
    return EnlargedAtom(level, tuple(omega[:level]), tuple(plan[:n]), flavor)


def enumerate_enlarged(
    m: MarketModel,
    space: ActionSpace,
    payoff: Optional[PayoffMap] = None,
    budget: int = DEFAULT_PATH_BUDGET,
) -> list:
    """Every ``(leaf, plan)`` pair, tagged by reachability and (given a payoff) feasibility."""
    leaves = m.tree.leaves()
    size = len(leaves) * len(space) ** (m.horizon + 1)
    if size > budget:
        raise BudgetExceeded("enlarged path enumeration", size, budget)
    reach = m.support.reachable_nodes
    out = []
    for leaf in leaves:
        for plan in space.plans(m.horizon + 1):
            ok = True if payoff is None else payoff(leaf, plan) != NEG_INF
            out.append(EnlargedPath(leaf, plan, leaf in reach, ok))
    return out


# ---------------------------------------------------------------------------
# measures


@dataclass
class LiftedMeasure:
    weights: dict  # (leaf, plan) -> weight
    mixing: Optional[dict] = None  # plan -> weight
    components: Optional[dict] = None  # plan -> {leaf: weight}

    def total(self):
        return sum(self.weights.values(), Fraction(0))

    def support(self) -> set:
        return {k for k, v in self.weights.items() if v}

    def expectation(self, fn):
        return sum((w * fn(omega, plan) for (omega, plan), w in self.weights.items() if w), Fraction(0))


def _check_prob(vec: Mapping, what: str):
    if any(v < 0 for v in vec.values()):
        raise ValueError(f"{what} has a negative weight")
    if sum(vec.values()) != 1:
        raise ValueError(f"{what} does not sum to 1")


def lift_measure(P: Mapping, nu: Mapping) -> LiftedMeasure:
    """Product lift ``P(omega) nu(c)``."""
    _check_prob(P, "path measure")
    _check_prob(nu, "mixing measure")
    weights = {(w, c): pw * nc for c, nc in nu.items() if nc for w, pw in P.items() if pw}
    return LiftedMeasure(weights, dict(nu), {c: dict(P) for c, nc in nu.items() if nc})


def lift_mixture(nu: Mapping, components: Mapping) -> LiftedMeasure:
    """``sum_c nu(c) (P_c x delta_c)`` for plan-dependent path measures ``P_c``."""
    _check_prob(nu, "mixing measure")
    weights = {}
    for c, nc in nu.items():
        if not nc:
            continue
        P = components[c]
        _check_prob(P, f"component for plan {plan_key(c)!r}")
        for w, pw in P.items():
            if pw:
                weights[(w, c)] = weights.get((w, c), Fraction(0)) + nc * pw
    return LiftedMeasure(weights, dict(nu), {c: dict(components[c]) for c, nc in nu.items() if nc})


def disintegrate(Q: LiftedMeasure | Mapping):
    """Split into the plan marginal and conditional path measures (null plans omitted)."""
    weights = Q.weights if isinstance(Q, LiftedMeasure) else Q
    nu = {}
    for (w, c), v in weights.items():
        if v:
            nu[c] = nu.get(c, 0) + v
    comps = {c: {} for c in nu}
    for (w, c), v in weights.items():
        if v:
            comps[c][w] = v / nu[c]
    return nu, comps


# ---------------------------------------------------------------------------
# constraint system


@dataclass
class ConstraintRow:
    name: str
    kind: str  # "mass" | "martingale" | "calibration"
    coeffs: dict  # variable index -> coefficient
    rhs: Fraction = Fraction(0)
    atom: Optional[EnlargedAtom] = None
    asset: Optional[int] = None


@dataclass
class EnlargedSystem:
    """Equality rows over nonnegative weights on ``variables`` (a list of (leaf, plan))."""

    variables: list
    rows: list = field(default_factory=list)

    def index(self) -> dict:
        return {v: i for i, v in enumerate(self.variables)}

    def rows_of(self, kind: str) -> list:
        return [r for r in self.rows if r.kind == kind]

    def satisfied(self, weights: Mapping) -> bool:
        x = [weights.get(v, 0) for v in self.variables]
        if any(v < 0 for v in x):
            return False
        return all(sum(a * x[j] for j, a in r.coeffs.items()) == r.rhs for r in self.rows)

    def to_csv(self) -> str:
        buf = io.StringIO()
        out = csv.writer(buf, lineterminator="\n")
        out.writerow(["row", "kind", "atom_key", "asset", "rhs", "coefficients"])
        for r in self.rows:
            terms = ";".join(
                f"{node_key(self.variables[j][0])}|{plan_key(self.variables[j][1])}={a}"
                for j, a in sorted(r.coeffs.items())
            )
            out.writerow(
                [r.name, r.kind, r.atom.key if r.atom else "", "" if r.asset is None else r.asset, r.rhs, terms]
            )
        return buf.getvalue()


def enlarged_martingale_constraints(
    m: MarketModel,
    space: ActionSpace,
    variables: Optional[Sequence] = None,
    calibrate: bool = False,
    payoff: Optional[PayoffMap] = None,
) -> EnlargedSystem:
    """Mass, martingale and (optionally) calibration rows.

    ``variables`` defaults to every pair with a reachable path (or, given a
    payoff, with a reachable path and a finite payoff). The martingale row for
    the increment at time ``k`` lives on the atom fixing ``omega_1..omega_{k-1}``
    and ``c_0..c_{k-1}``. Rows with no variables are dropped.
    """
    if variables is None:
        reach = m.support.reachable_leaves
        plans = list(space.plans(m.horizon + 1))
        variables = [
            (w, c) for w in reach for c in plans if payoff is None or payoff(w, c) != NEG_INF
        ]
    variables = list(variables)
    system = EnlargedSystem(variables)
    system.rows.append(ConstraintRow("mass", "mass", {j: Fraction(1) for j in range(len(variables))}, Fraction(1)))
    for k in range(1, m.horizon + 1):
        groups = {}
        for j, (w, c) in enumerate(variables):
            groups.setdefault((w[: k - 1], c[:k]), []).append(j)
        for (wp, cp), members in sorted(groups.items()):
            atom = EnlargedAtom(k - 1, wp, cp, PLUS)
            for i in range(m.dimension):
                coeffs = {}
                for j in members:
                    inc = m.increment(variables[j][0][:k])[i]
                    if inc:
                        coeffs[j] = inc
                if coeffs:
                    name = f"mart[{k}][{atom.key}][{i}]"
                    system.rows.append(ConstraintRow(name, "martingale", coeffs, Fraction(0), atom, i))
    if calibrate:
        for lam, g in enumerate(m.static_options):
            coeffs = {j: g[w] for j, (w, _) in enumerate(variables) if g[w]}
            system.rows.append(ConstraintRow(f"calib[{lam}]", "calibration", coeffs, Fraction(0)))
    return system
