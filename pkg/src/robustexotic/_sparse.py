"""Exact sparse Gaussian elimination used by the rational simplex.

Matrices are given column-wise as ``{row: value}`` dicts. Values are gmpy2
``mpq`` when gmpy2 is importable (about an order of magnitude faster than
``fractions.Fraction``), otherwise Fractions.
"""

from __future__ import annotations

from fractions import Fraction

try:  # pragma: no cover - exercised implicitly
    from gmpy2 import mpq as Q
except ImportError:  # pragma: no cover
    Q = Fraction

ZERO = Q(0)
ONE = Q(1)


def to_q(value):
    if isinstance(value, Fraction):
        return Q(value.numerator, value.denominator)
    return Q(value)


def to_fraction(value) -> Fraction:
    return Fraction(int(value.numerator), int(value.denominator))


class Singular(ArithmeticError):
    pass


class SparseLU:
    """Row-operation factorization of a square matrix.

    Supports ``solve`` (B x = r) and ``solve_t`` (y B = c) against the same
    elimination record.
    """

    def __init__(self, columns, m):
        if len(columns) != m:
            raise Singular("basis is not square")
        rows = [dict() for _ in range(m)]
        col_rows = [set() for _ in range(m)]
        for j, col in enumerate(columns):
            for i, v in col.items():
                if v:
                    rows[i][j] = v
                    col_rows[j].add(i)
        active = set(range(m))
        ops = []
        order = []  # (pivot_row, pivot_col)
        for _ in range(m):
            best = None
            best_n = None
            for r in active:
                n = len(rows[r])
                if best_n is None or n < best_n or (n == best_n and r < best):
                    best, best_n = r, n
                    if n <= 1:
                        break
            p = best
            if not rows[p]:
                raise Singular("basis matrix is singular")
            q = min(rows[p], key=lambda j: (len(col_rows[j]), j))
            piv = rows[p][q]
            prow = rows[p]
            active.discard(p)
            for j in prow:
                col_rows[j].discard(p)
            for r in list(col_rows[q]):
                rr = rows[r]
                f = rr[q] / piv
                for j, v in prow.items():
                    nv = rr.get(j, ZERO) - f * v
                    if nv:
                        if j not in rr:
                            col_rows[j].add(r)
                        rr[j] = nv
                    elif j in rr:
                        del rr[j]
                        col_rows[j].discard(r)
                ops.append((r, p, f))
            order.append((p, q))
        self.m = m
        self.rows = rows
        self.ops = ops
        self.order = order
        ucols = [[] for _ in range(m)]
        for p, _ in order:
            for j, v in rows[p].items():
                ucols[j].append((p, v))
        self.ucols = ucols

    def solve(self, rhs):
        """Return x (indexed by column position) with B x = rhs."""
        vec = list(rhs)
        for r, p, f in self.ops:
            if vec[p]:
                vec[r] -= f * vec[p]
        x = [ZERO] * self.m
        for p, q in reversed(self.order):
            row = self.rows[p]
            acc = vec[p]
            for j, v in row.items():
                if j != q and x[j]:
                    acc -= v * x[j]
            x[q] = acc / row[q]
        return x

    def solve_t(self, cost):
        """Return y (indexed by row) with y B = cost."""
        z = [ZERO] * self.m
        for p, q in self.order:
            acc = cost[q]
            for r, v in self.ucols[q]:
                if r != p and z[r]:
                    acc -= z[r] * v
            z[p] = acc / self.rows[p][q]
        for r, p, f in reversed(self.ops):
            if z[r]:
                z[p] -= f * z[r]
        return z


def select_independent(candidates, columns, m, limit):
    """Greedily pick up to ``limit`` linearly independent columns.

    ``candidates`` is an iterable of column indices in priority order.
    """
    pivots = []  # (row, reduced column dict)
    chosen = []
    for j in candidates:
        if len(chosen) >= limit:
            break
        v = {i: val for i, val in columns[j].items() if val}
        for r, pv in pivots:
            a = v.get(r)
            if a:
                f = a / pv[r]
                for i, val in pv.items():
                    nv = v.get(i, ZERO) - f * val
                    if nv:
                        v[i] = nv
                    else:
                        v.pop(i, None)
        if v:
            r = min(v)
            pivots.append((r, v))
            chosen.append(j)
    return chosen
