"""Finite scenario-tree market: asset prices, prior kernels, static options.

Nodes are label tuples ``(w1, ..., wk)``; the root is ``()``. Priors at a
node are a finite list of extreme probability vectors over that node's
successors (in branch-label order); the uncertainty set is their convex
hull. Quasi-sure statements reduce to statements on reachable paths.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Mapping, Sequence

from ._numeric import RATIONAL, parse_rational
from .lp import INFEASIBLE, LinearProgram, solve

Node = tuple


class MarketError(ValueError):
    """Invalid market document or model data."""


class EmptyPolytope(RuntimeError):
    """No one-step martingale measure exists at a node."""

    def __init__(self, node, certificate=None):
        super().__init__(f"no one-step martingale measure at node {node_key(node)!r}")
        self.node = node
        self.certificate = certificate


def node_key(node: Sequence[str]) -> str:
    return "/".join(node)


def parse_node_key(key: str) -> Node:
    return tuple(key.split("/")) if key else ()


@dataclass(frozen=True, eq=False)
class ScenarioTree:
    branches: tuple  # per time step, the tuple of successor labels

    @property
    def horizon(self) -> int:
        return len(self.branches)

    def nodes(self, depth: int) -> list:
        return [tuple(p) for p in itertools.product(*self.branches[:depth])]

    def all_nodes(self) -> list:
        return [n for k in range(self.horizon + 1) for n in self.nodes(k)]

    def leaves(self) -> list:
        return self.nodes(self.horizon)

    def children(self, node: Node) -> list:
        return [node + (lab,) for lab in self.branches[len(node)]]

    def is_leaf(self, node: Node) -> bool:
        return len(node) == self.horizon


@dataclass(frozen=True, eq=False)
class MarketModel:
    tree: ScenarioTree
    dimension: int
    prices: Mapping  # node -> tuple of Fractions
    priors: Mapping  # non-leaf node -> tuple of probability tuples
    static_options: tuple = ()  # tuple of {leaf: Fraction}
    name: str = ""
    meta: dict = field(default_factory=dict)

    @property
    def horizon(self) -> int:
        return self.tree.horizon

    @property
    def num_options(self) -> int:
        return len(self.static_options)

    def increment(self, child: Node) -> tuple:
        """Price increment from ``child[:-1]`` to ``child``."""
        now, before = self.prices[child], self.prices[child[:-1]]
        return tuple(a - b for a, b in zip(now, before))

    def option_vector(self, leaf: Node) -> tuple:
        return tuple(g[leaf] for g in self.static_options)

    @cached_property
    def support(self) -> "SupportStructure":
        return support_structure(self)


@dataclass(frozen=True, eq=False)
class SupportStructure:
    reachable_nodes: frozenset
    reachable_leaves: tuple
    successor_support: Mapping  # node -> tuple of child nodes charged by some prior

    def reachable(self, node: Node) -> bool:
        return node in self.reachable_nodes

    def reachable_at(self, depth: int) -> list:
        return sorted(n for n in self.reachable_nodes if len(n) == depth)

    def is_polar(self, leaves) -> bool:
        """A leaf set is polar iff it contains no reachable leaf."""
        return not any(leaf in self.reachable_nodes for leaf in leaves)


# ---------------------------------------------------------------------------
# loading / serialization


def load_market(document, name: str = "") -> MarketModel:
    """Build a validated :class:`MarketModel` from a JSON document (str/dict/path)."""
    if isinstance(document, (str, bytes)) and not str(document).lstrip().startswith("{"):
        with open(document) as fh:
            document = json.load(fh)
    elif isinstance(document, (str, bytes)):
        document = json.loads(document)
    if not isinstance(document, dict):
        raise MarketError("market document must be a JSON object")
    for key in ("horizon", "branches", "assets", "priors"):
        if key not in document:
            raise MarketError(f"market document missing field {key!r}")
    horizon = document["horizon"]
    if not isinstance(horizon, int) or isinstance(horizon, bool) or horizon < 1:
        raise MarketError("horizon must be a positive integer")
    branches = document["branches"]
    if not isinstance(branches, list) or len(branches) != horizon:
        raise MarketError("branches must list one label set per time step")
    labels = []
    for k, step in enumerate(branches):
        if not isinstance(step, list) or not step:
            raise MarketError(f"branch labels at step {k + 1} must be a non-empty list")
        step = tuple(str(lab) for lab in step)
        if len(set(step)) != len(step):
            raise MarketError(f"duplicate branch labels at step {k + 1}")
        if any("/" in lab or "|" in lab or lab == "" for lab in step):
            raise MarketError(f"branch labels at step {k + 1} may not be empty or contain '/' or '|'")
        labels.append(step)
    tree = ScenarioTree(tuple(labels))
    assets = document["assets"]
    if not isinstance(assets, dict) or "dimension" not in assets or "values" not in assets:
        raise MarketError("assets must contain 'dimension' and 'values'")
    d = assets["dimension"]
    if not isinstance(d, int) or isinstance(d, bool) or d < 1:
        raise MarketError("asset dimension must be a positive integer")
    prices = {}
    raw_values = assets["values"]
    for node in tree.all_nodes():
        key = node_key(node)
        if key not in raw_values:
            raise MarketError(f"missing asset value at node {key!r}")
        vec = raw_values[key]
        if not isinstance(vec, list) or len(vec) != d:
            raise MarketError(f"asset value at node {key!r} must have {d} entries")
        try:
            prices[node] = tuple(parse_rational(v) for v in vec)
        except ValueError as exc:
            raise MarketError(f"node {key!r}: {exc}") from None
    extra = set(raw_values) - {node_key(n) for n in prices}
    if extra:
        raise MarketError(f"asset values given for unknown nodes: {sorted(extra)}")
    priors = {}
    raw_priors = document["priors"]
    if not isinstance(raw_priors, dict):
        raise MarketError("priors must map node keys to lists of probability vectors")
    for k in range(horizon):
        width = len(tree.branches[k])
        for node in tree.nodes(k):
            key = node_key(node)
            if key not in raw_priors:
                raise MarketError(f"missing prior kernels at node {key!r}")
            kernels = raw_priors[key]
            if not isinstance(kernels, list) or not kernels:
                raise MarketError(f"node {key!r}: prior kernel list must be non-empty")
            parsed = []
            for vec in kernels:
                if not isinstance(vec, list) or len(vec) != width:
                    raise MarketError(f"node {key!r}: kernel must have {width} entries")
                try:
                    p = tuple(parse_rational(v) for v in vec)
                except ValueError as exc:
                    raise MarketError(f"node {key!r}: {exc}") from None
                if any(v < 0 or v > 1 for v in p):
                    raise MarketError(f"node {key!r}: kernel weights must lie in [0, 1]")
                if sum(p) != 1:
                    raise MarketError(f"node {key!r}: kernel does not sum to 1")
                parsed.append(p)
            priors[node] = tuple(parsed)
    extra = set(raw_priors) - {node_key(n) for n in priors}
    if extra:
        raise MarketError(f"priors given for unknown or leaf nodes: {sorted(extra)}")
    options = []
    leaves = tree.leaves()
    for i, opt in enumerate(document.get("static_options", [])):
        if not isinstance(opt, dict) or "payoff" not in opt:
            raise MarketError(f"static option {i} must have a 'payoff' table")
        table = opt["payoff"]
        payoff = {}
        for leaf in leaves:
            key = node_key(leaf)
            if key not in table:
                raise MarketError(f"static option {i}: missing payoff at leaf {key!r}")
            try:
                payoff[leaf] = parse_rational(table[key])
            except ValueError as exc:
                raise MarketError(f"static option {i}, leaf {key!r}: {exc}") from None
        extra = set(table) - {node_key(leaf) for leaf in leaves}
        if extra:
            raise MarketError(f"static option {i}: payoff given at non-leaf keys {sorted(extra)}")
        options.append(payoff)
    return MarketModel(tree, d, prices, priors, tuple(options), name=name or str(document.get("name", "")))


def market_to_document(m: MarketModel) -> dict:
    """Canonical JSON-ready document; ``load_market`` inverts it."""
    doc = {}
    if m.name:
        doc["name"] = m.name
    doc["horizon"] = m.horizon
    doc["branches"] = [list(step) for step in m.tree.branches]
    doc["assets"] = {
        "dimension": m.dimension,
        "values": {node_key(n): [str(v) for v in m.prices[n]] for n in m.tree.all_nodes()},
    }
    doc["priors"] = {
        node_key(n): [[str(v) for v in vec] for vec in m.priors[n]]
        for k in range(m.horizon)
        for n in m.tree.nodes(k)
    }
    doc["static_options"] = [
        {"payoff": {node_key(leaf): str(g[leaf]) for leaf in m.tree.leaves()}} for g in m.static_options
    ]
    return doc


def with_options(m: MarketModel, options) -> MarketModel:
    """Copy of ``m`` with a different static option list."""
    return MarketModel(m.tree, m.dimension, m.prices, m.priors, tuple(options), name=m.name, meta=dict(m.meta))


# ---------------------------------------------------------------------------
# reachability and one-step polytopes


def support_structure(m: MarketModel) -> SupportStructure:
    """Forward pass: a node is reachable iff its parent is and some prior charges it."""
    succ = {}
    reachable = {()}
    for k in range(m.horizon):
        for node in m.tree.nodes(k):
            kids = m.tree.children(node)
            charged = tuple(
                child for i, child in enumerate(kids) if any(vec[i] > 0 for vec in m.priors[node])
            )
            succ[node] = charged
            if node in reachable:
                reachable.update(charged)
    leaves = tuple(leaf for leaf in m.tree.leaves() if leaf in reachable)
    return SupportStructure(frozenset(reachable), leaves, succ)


@dataclass(frozen=True)
class OneStepPolytope:
    """``{q >= 0, sum q = 1, sum_i q_i dS(i) = 0}`` over the charged successors."""

    node: Node
    successors: tuple
    increments: tuple  # per successor, the d-vector of price increments

    def rows(self):
        """Equality rows as (coefficient list, rhs): mass first, then one per asset."""
        out = [([Fraction(1)] * len(self.successors), Fraction(1))]
        d = len(self.increments[0]) if self.increments else 0
        for j in range(d):
            out.append(([inc[j] for inc in self.increments], Fraction(0)))
        return out

    def contains(self, q) -> bool:
        if len(q) != len(self.successors) or any(v < 0 for v in q):
            return False
        return all(sum(a * v for a, v in zip(coef, q)) == rhs for coef, rhs in self.rows())

    def vertices(self) -> list:
        """Extreme points, by solving every square subsystem on small supports."""
        rows = self.rows()
        n = len(self.successors)
        found = []
        for size in range(1, min(n, len(rows)) + 1):
            for cols in itertools.combinations(range(n), size):
                sol = _unique_solution([[coef[j] for j in cols] for coef, _ in rows], [rhs for _, rhs in rows])
                if sol is None or any(v < 0 for v in sol):
                    continue
                q = [Fraction(0)] * n
                for j, v in zip(cols, sol):
                    q[j] = v
                q = tuple(q)
                if q not in found:
                    found.append(q)
        return found

    def lp(self, objective=None, restrict=None, sense="max"):
        """LP over the polytope; ``restrict`` limits the support to a successor subset."""
        lp = LinearProgram(sense)
        allowed = set(self.successors if restrict is None else restrict)
        idx = [lp.add_variable(0, None if s in allowed else 0) for s in self.successors]
        for coef, rhs in self.rows():
            lp.add_row({idx[i]: a for i, a in enumerate(coef)}, "==", rhs)
        if objective is not None:
            lp.set_objective({idx[i]: v for i, v in enumerate(objective) if self.successors[i] in allowed})
        return lp, idx


def _unique_solution(a, b):
    """Exact solution of ``a x = b`` if it exists and is unique, else None."""
    rows = [list(r) + [v] for r, v in zip(a, b)]
    ncol = len(a[0]) if a else 0
    piv_row = 0
    for col in range(ncol):
        pick = next((r for r in range(piv_row, len(rows)) if rows[r][col] != 0), None)
        if pick is None:
            return None
        rows[piv_row], rows[pick] = rows[pick], rows[piv_row]
        p = rows[piv_row][col]
        rows[piv_row] = [v / p for v in rows[piv_row]]
        for r in range(len(rows)):
            if r != piv_row and rows[r][col] != 0:
                f = rows[r][col]
                rows[r] = [v - f * w for v, w in zip(rows[r], rows[piv_row])]
        piv_row += 1
    if any(r[-1] != 0 for r in rows[piv_row:]):
        return None
    return [rows[i][-1] for i in range(ncol)]


def one_step_martingale_polytope(m: MarketModel, node: Node, mode: str = RATIONAL) -> OneStepPolytope:
    """Constraint system of one-step martingale measures at a reachable node.

    Raises :class:`EmptyPolytope` (with a Farkas certificate) when it is empty.
    """
    support = m.support
    if m.tree.is_leaf(node):
        raise MarketError(f"node {node_key(node)!r} is a leaf")
    if not support.reachable(node):
        raise MarketError(f"node {node_key(node)!r} is not reachable")
    succ = support.successor_support[node]
    poly = OneStepPolytope(node, succ, tuple(m.increment(c) for c in succ))
    lp, _ = poly.lp()
    out = solve(lp, mode)
    if out.status == INFEASIBLE:
        raise EmptyPolytope(node, out.farkas)
    return poly
