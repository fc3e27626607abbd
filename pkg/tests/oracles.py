"""Independent reference computations for the test suite.

Nothing here calls the package's LP solver, DP engine or constraint
builders. Market data is read straight from the model's dictionaries.
"""

from __future__ import annotations

import itertools
from fractions import Fraction

NEG_INF = float("-inf")


# ---------------------------------------------------------------------------
# dense tableau simplex (Bland's rule, two phases) over Fractions


def _pivot(T, basis, r, c):
    piv = T[r][c]
    T[r] = [v / piv for v in T[r]]
    for i in range(len(T)):
        if i != r and T[i][c] != 0:
            f = T[i][c]
            T[i] = [a - f * b for a, b in zip(T[i], T[r])]
    basis[r] = c


def _run(T, basis, ncols):
    """Minimize the last row's objective; returns False if unbounded."""
    while True:
        obj = T[-1]
        enter = next((j for j in range(ncols) if obj[j] < 0), None)
        if enter is None:
            return True
        best, leave = None, None
        for i in range(len(T) - 1):
            a = T[i][enter]
            if a > 0:
                ratio = T[i][-1] / a
                if best is None or ratio < best or (ratio == best and basis[i] < basis[leave]):
                    best, leave = ratio, i
        if leave is None:
            return False
        _pivot(T, basis, leave, enter)


def dense_lp_max(c, A, b):
    """``max c.x`` s.t. ``A x = b``, ``x >= 0``. Returns (status, value, x)."""
    m, n = len(A), len(c)
    A = [[Fraction(v) for v in row] for row in A]
    b = [Fraction(v) for v in b]
    for i in range(m):
        if b[i] < 0:
            A[i] = [-v for v in A[i]]
            b[i] = -b[i]
    # phase 1 with artificials n..n+m-1
    T = [A[i] + [Fraction(int(i == k)) for k in range(m)] + [b[i]] for i in range(m)]
    T.append([-sum(A[i][j] for i in range(m)) for j in range(n)] + [Fraction(0)] * m + [-sum(b)])
    basis = list(range(n, n + m))
    _run(T, basis, n + m)
    if T[-1][-1] != 0:
        return "infeasible", NEG_INF, None
    # drive artificials out of the basis where possible
    for i in range(m):
        if basis[i] >= n:
            j = next((j for j in range(n) if T[i][j] != 0), None)
            if j is not None:
                _pivot(T, basis, i, j)
    keep = [i for i in range(m) if basis[i] < n]
    T = [T[i][:n] + [T[i][-1]] for i in keep]
    basis = [basis[i] for i in keep]
    obj = [-Fraction(v) for v in c] + [Fraction(0)]
    for i, bj in enumerate(basis):
        if obj[bj] != 0:
            f = obj[bj]
            obj = [a - f * t for a, t in zip(obj, T[i])]
    T.append(obj)
    if not _run(T, basis, n):
        return "unbounded", float("inf"), None
    x = [Fraction(0)] * n
    for i, bj in enumerate(basis):
        x[bj] = T[i][-1]
    return "optimal", sum(Fraction(ci) * xi for ci, xi in zip(c, x)), x


def dense_lp_general(c, rows, lower, upper, sense="min"):
    """General LP via conversion to equality form with split free variables and slacks.

    ``rows`` is a list of (coeff dict, op, rhs); ``lower``/``upper`` may hold None.
    Returns (status, value) with value in the LP's own sense.
    """
    n = len(c)
    cols = []  # (orig var, sign, shift)
    A_rows, rhs = [], []
    # x_j = lower_j + p  or  upper_j - p  or  p - q
    mapping = []
    for j in range(n):
        lo, up = lower[j], upper[j]
        if lo is not None:
            mapping.append([(len(cols), 1)])
            cols.append(j)
        elif up is not None:
            mapping.append([(len(cols), -1)])
            cols.append(j)
        else:
            mapping.append([(len(cols), 1), (len(cols) + 1, -1)])
            cols.extend([j, j])
    shift = [lower[j] if lower[j] is not None else (upper[j] if upper[j] is not None else 0) for j in range(n)]
    extra = []
    for j in range(n):
        if lower[j] is not None and upper[j] is not None:
            extra.append(({j: 1}, "<=", upper[j]))
    nv = len(cols)
    slack = 0
    all_rows = list(rows) + extra
    for coeffs, op, r in all_rows:
        if op != "==":
            slack += 1
    width = nv + slack
    s = nv
    for coeffs, op, r in all_rows:
        row = [Fraction(0)] * width
        rr = Fraction(r)
        for j, a in coeffs.items():
            rr -= Fraction(a) * Fraction(shift[j])
            for col, sign in mapping[j]:
                row[col] += sign * Fraction(a)
        if op == "<=":
            row[s] = Fraction(1)
            s += 1
        elif op == ">=":
            row[s] = Fraction(-1)
            s += 1
        A_rows.append(row)
        rhs.append(rr)
    sign = -1 if sense == "min" else 1
    obj = [Fraction(0)] * width
    const = sum(Fraction(c[j]) * Fraction(shift[j]) for j in range(n))
    for j in range(n):
        for col, sg in mapping[j]:
            obj[col] += sign * sg * Fraction(c[j])
    status, value, _ = dense_lp_max(obj, A_rows, rhs)
    if status != "optimal":
        if status == "infeasible":
            return status, (float("inf") if sense == "min" else NEG_INF)
        return status, (NEG_INF if sense == "min" else float("inf"))
    return status, sign * value + const


# ---------------------------------------------------------------------------
# vertex enumeration


def solve_square(A, b):
    """Unique solution of a (possibly overdetermined) system or None."""
    rows = [list(map(Fraction, r)) + [Fraction(v)] for r, v in zip(A, b)]
    n = len(A[0])
    r = 0
    piv_cols = []
    for col in range(n):
        p = next((i for i in range(r, len(rows)) if rows[i][col] != 0), None)
        if p is None:
            return None
        rows[r], rows[p] = rows[p], rows[r]
        rows[r] = [v / rows[r][col] for v in rows[r]]
        for i in range(len(rows)):
            if i != r and rows[i][col] != 0:
                f = rows[i][col]
                rows[i] = [a - f * bb for a, bb in zip(rows[i], rows[r])]
        piv_cols.append(col)
        r += 1
    if any(row[-1] != 0 for row in rows[r:]):
        return None
    return [rows[i][-1] for i in range(n)]


def polytope_vertices(A, b, n):
    """Vertices of ``{x >= 0 : A x = b}`` in R^n by support enumeration."""
    out = set()
    for size in range(1, min(n, len(A)) + 1):
        for S in itertools.combinations(range(n), size):
            sol = solve_square([[row[j] for j in S] for row in A], b)
            if sol is None or any(v < 0 for v in sol):
                continue
            x = [Fraction(0)] * n
            for j, v in zip(S, sol):
                x[j] = v
            out.add(tuple(x))
    return sorted(out)


# ---------------------------------------------------------------------------
# market-level oracles


def reachable_leaves(m):
    """Forward pass over the raw prior dictionaries."""
    live = [()]
    for k in range(m.horizon):
        nxt = []
        for node in live:
            labels = m.tree.branches[k]
            for i, lab in enumerate(labels):
                if any(vec[i] > 0 for vec in m.priors[node]):
                    nxt.append(node + (lab,))
        live = nxt
    return live


def martingale_rows(m, leaves, calibrate=True):
    """Dense equality system of calibrated martingale measures on ``leaves``."""
    A, b = [[Fraction(1)] * len(leaves)], [Fraction(1)]
    nodes = sorted({leaf[:k] for leaf in leaves for k in range(m.horizon)})
    for node in nodes:
        k = len(node)
        for d in range(m.dimension):
            row = []
            for leaf in leaves:
                if leaf[:k] == node:
                    row.append(m.prices[leaf[: k + 1]][d] - m.prices[node][d])
                else:
                    row.append(Fraction(0))
            if any(row):
                A.append(row)
                b.append(Fraction(0))
    if calibrate:
        for g in m.static_options:
            A.append([g[leaf] for leaf in leaves])
            b.append(Fraction(0))
    return A, b


def european_sup(m, f, calibrate=True):
    """``sup over (calibrated) martingale measures of E[f]``; ``f`` may hold ``-inf``."""
    leaves = [leaf for leaf in reachable_leaves(m) if f[leaf] != NEG_INF]
    if not leaves:
        return NEG_INF
    A, b = martingale_rows(m, leaves, calibrate)
    status, value, _ = dense_lp_max([f[leaf] for leaf in leaves], A, b)
    return value if status == "optimal" else NEG_INF


def european_superhedge(m, f):
    """Primal superhedging price of a European leaf payoff (dynamic stock plus static options)."""
    leaves = reachable_leaves(m)
    nodes = sorted({leaf[:k] for leaf in leaves for k in range(m.horizon)})
    nvars = 1 + len(nodes) * m.dimension + len(m.static_options)
    c = [Fraction(1)] + [Fraction(0)] * (nvars - 1)
    rows = []
    for leaf in leaves:
        if f[leaf] == NEG_INF:
            continue
        coeffs = {0: 1}
        for i, node in enumerate(nodes):
            k = len(node)
            if leaf[:k] == node:
                for d in range(m.dimension):
                    coeffs[1 + i * m.dimension + d] = m.prices[leaf[: k + 1]][d] - m.prices[node][d]
        for lam, g in enumerate(m.static_options):
            coeffs[1 + len(nodes) * m.dimension + lam] = g[leaf]
        rows.append((coeffs, ">=", f[leaf]))
    status, value = dense_lp_general(c, rows, [None] * nvars, [None] * nvars, "min")
    return value


def one_step_sup_by_vertices(m, leaf_values):
    """Λ = ∅ value by composing one-step vertex maxima (no LP at all)."""
    vals = dict(leaf_values)
    reach = set()
    for leaf in reachable_leaves(m):
        for k in range(m.horizon + 1):
            reach.add(leaf[:k])
    for k in range(m.horizon - 1, -1, -1):
        for node in sorted(n for n in reach if len(n) == k):
            kids = [node + (lab,) for i, lab in enumerate(m.tree.branches[k])
                    if any(vec[i] > 0 for vec in m.priors[node])]
            A = [[Fraction(1)] * len(kids)]
            for d in range(m.dimension):
                A.append([m.prices[c][d] - m.prices[node][d] for c in kids])
            best = NEG_INF
            for q in polytope_vertices(A, [1] + [0] * m.dimension, len(kids)):
                tot = Fraction(0)
                for qi, c in zip(q, kids):
                    if qi:
                        if vals[c] == NEG_INF:
                            tot = NEG_INF
                            break
                        tot += qi * vals[c]
                if tot > best:
                    best = tot
            vals[node] = best
    return vals[()]


def brute_force_plans(payoff, leaf):
    """All plans with finite payoff, by full product enumeration."""
    n = payoff.market.horizon + 1
    return {p for p in itertools.product(payoff.space.actions, repeat=n) if payoff(leaf, p) != NEG_INF}


def all_policies(m, actions):
    """Every adapted policy on the full tree as {node: action}."""
    nodes = [n for k in range(m.horizon + 1) for n in itertools.product(*m.tree.branches[:k])]
    for combo in itertools.product(actions, repeat=len(nodes)):
        yield dict(zip(nodes, combo))


def policy_leaf_values(m, payoff, pol):
    return {
        leaf: payoff(leaf, tuple(pol[leaf[:k]] for k in range(m.horizon + 1)))
        for leaf in itertools.product(*m.tree.branches)
    }


def brute_force_model_price(m, payoff, limit=10**4):
    """``max over all adapted policies of sup over calibrated measures``; None above ``limit`` policies."""
    nodes = sum(len(list(itertools.product(*m.tree.branches[:k]))) for k in range(m.horizon + 1))
    if len(payoff.space) ** nodes > limit:
        return None
    cache = {}
    best = NEG_INF
    for pol in all_policies(m, payoff.space.actions):
        f = policy_leaf_values(m, payoff, pol)
        key = tuple(f[leaf] for leaf in sorted(f))
        if key not in cache:
            cache[key] = european_sup(m, f)
        best = max(best, cache[key])
    return best


def conditional_expectation(weights, fn, key):
    """``E[fn | key]`` on positive-mass cells of a finite weight dictionary."""
    mass, acc = {}, {}
    for point, w in weights.items():
        k = key(point)
        mass[k] = mass.get(k, 0) + w
        acc[k] = acc.get(k, 0) + w * fn(point)
    return {k: acc[k] / mass[k] for k in mass if mass[k]}
