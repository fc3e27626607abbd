"""Linear programs with exact-rational and float solving plus certificates.

Rational mode runs a revised simplex in exact arithmetic (sparse exact
refactorization each pivot, largest-coefficient entering with a switch to
the smallest-index rule after a run of degenerate pivots). When SciPy is
available the HiGHS dual simplex is used only to propose a starting basis;
every reported rational outcome is produced and certified by the exact
simplex. Float mode returns the HiGHS result with a float certificate.

Certificates are expressed against the user-facing program, in its
minimization form (``max c.x`` is treated as ``min -c.x``):

* optimal: row multipliers ``y`` with sign ``y_r >= 0`` for ``>=`` rows,
  ``y_r <= 0`` for ``<=`` rows, free for ``==`` rows, such that the reduced
  costs ``d = c - sum_r y_r a_r`` are supported by the variable bounds and
  the implied dual bound equals the primal value;
* infeasible: multipliers with the same signs, ``d = -sum_r y_r a_r``
  supported by the bounds and a strictly positive dual bound (Farkas);
* unbounded: a feasible point and an improving recession direction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from ._numeric import DEFAULT_TOL, FLOAT, MODES, RATIONAL
from ._sparse import ONE, ZERO, Singular, SparseLU, select_independent, to_fraction, to_q

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

_OPS = ("==", "<=", ">=")

# Below this many nonzeros the exact simplex runs cold; HiGHS start-up costs more.
_HINT_THRESHOLD = 200
_DEGENERATE_SWITCH = 25


class NumericalBreakdown(RuntimeError):
    """Float-mode solve failed or returned an uncertifiable result."""


@dataclass
class Row:
    coeffs: dict
    op: str
    rhs: Fraction
    name: Optional[str] = None


class LinearProgram:
    """Sparse LP builder. Coefficients are stored as exact Fractions."""

    def __init__(self, sense: str = "min"):
        if sense not in ("min", "max"):
            raise ValueError(f"sense must be 'min' or 'max', got {sense!r}")
        self.sense = sense
        self.lower: list = []
        self.upper: list = []
        self.names: list = []
        self.objective: dict = {}
        self.rows: list[Row] = []

    @property
    def num_vars(self) -> int:
        return len(self.lower)

    def add_variable(self, lower=0, upper=None, name=None, objective=0) -> int:
        lo = None if lower is None else Fraction(lower)
        up = None if upper is None else Fraction(upper)
        if lo is not None and up is not None and up < lo:
            raise ValueError(f"empty bounds for variable {name or len(self.lower)}")
        self.lower.append(lo)
        self.upper.append(up)
        self.names.append(name if name is not None else f"x{len(self.names)}")
        idx = len(self.lower) - 1
        if objective:
            self.objective[idx] = Fraction(objective)
        return idx

    def set_objective(self, coeffs: dict):
        self.objective = {j: Fraction(v) for j, v in coeffs.items() if v}

    def add_row(self, coeffs: dict, op: str, rhs=0, name=None) -> int:
        if op not in _OPS:
            raise ValueError(f"row operator must be one of {_OPS}, got {op!r}")
        clean = {}
        for j, v in coeffs.items():
            if not 0 <= j < self.num_vars:
                raise IndexError(f"variable index {j} out of range")
            v = Fraction(v)
            if v:
                clean[j] = clean.get(j, Fraction(0)) + v
        self.rows.append(Row({j: v for j, v in clean.items() if v}, op, Fraction(rhs), name))
        return len(self.rows) - 1

    def min_objective(self) -> dict:
        if self.sense == "min":
            return dict(self.objective)
        return {j: -v for j, v in self.objective.items()}

    def evaluate(self, x) -> Fraction:
        return sum((v * x[j] for j, v in self.objective.items()), Fraction(0))

    def to_lp_format(self) -> str:
        """Render in CPLEX LP text format for external cross-checking."""

        def term(coeffs):
            parts = []
            for j, v in sorted(coeffs.items()):
                sign = "-" if v < 0 else "+"
                parts.append(f"{sign} {_lp_num(abs(v))} {self.names[j]}")
            text = " ".join(parts) if parts else "0 " + (self.names[0] if self.names else "")
            return text[2:] if text.startswith("+ ") else text

        lines = ["Maximize" if self.sense == "max" else "Minimize", f" obj: {term(self.objective)}"]
        lines.append("Subject To")
        ops = {"==": "=", "<=": "<=", ">=": ">="}
        for r, row in enumerate(self.rows):
            lines.append(f" {row.name or f'c{r}'}: {term(row.coeffs)} {ops[row.op]} {_lp_num(row.rhs)}")
        lines.append("Bounds")
        for j in range(self.num_vars):
            lo, up = self.lower[j], self.upper[j]
            nm = self.names[j]
            if lo is None and up is None:
                lines.append(f" {nm} free")
            elif lo is None:
                lines.append(f" -inf <= {nm} <= {_lp_num(up)}")
            elif up is None:
                if lo != 0:
                    lines.append(f" {nm} >= {_lp_num(lo)}")
            else:
                lines.append(f" {_lp_num(lo)} <= {nm} <= {_lp_num(up)}")
        lines.append("End")
        return "\n".join(lines) + "\n"


def _lp_num(v: Fraction) -> str:
    if v.denominator == 1:
        return str(v.numerator)
    return repr(float(v))


@dataclass
class LpOutcome:
    status: str
    mode: str
    value: object = None  # objective in the LP's own sense; +-inf encoded as float
    x: Optional[list] = None
    duals: Optional[list] = None  # optimal: minimization-form row multipliers
    farkas: Optional[list] = None  # infeasible: row multipliers
    ray: Optional[list] = None  # unbounded: recession direction
    iterations: int = 0
    info: dict = field(default_factory=dict)


# ----------------------------------------------------------------------------
# Standard form: min c.u  s.t.  A u = b, u >= 0


class _Standard:
    def __init__(self, lp: LinearProgram, numeric):
        self.lp = lp
        conv = numeric
        self.var_map = []
        ncols = 0
        self.cols: list[dict] = []
        cost = []

        def new_col(c):
            nonlocal ncols
            self.cols.append({})
            cost.append(c)
            ncols += 1
            return ncols - 1

        c_min = lp.min_objective()
        self.offset = Fraction(0)
        ub_rows = []
        for j in range(lp.num_vars):
            lo, up = lp.lower[j], lp.upper[j]
            cj = c_min.get(j, Fraction(0))
            if lo is not None:
                k = new_col(conv(cj))
                self.var_map.append(("shift", k, lo))
                self.offset += cj * lo
                if up is not None:
                    ub_rows.append((k, up - lo))
            elif up is not None:
                k = new_col(conv(-cj))
                self.var_map.append(("neg", k, up))
                self.offset += cj * up
            else:
                k1 = new_col(conv(cj))
                k2 = new_col(conv(-cj))
                self.var_map.append(("free", k1, k2))
        b = []
        m = 0
        for row in lp.rows:
            rhs = row.rhs
            for j, a in row.coeffs.items():
                kind, k, extra = self.var_map[j]
                if kind == "shift":
                    self.cols[k][m] = conv(a)
                    rhs -= a * extra
                elif kind == "neg":
                    self.cols[k][m] = conv(-a)
                    rhs -= a * extra
                else:
                    self.cols[k][m] = conv(a)
                    self.cols[extra][m] = conv(-a)
            if row.op == ">=":
                s = new_col(conv(0))
                self.cols[s][m] = conv(-1)
            elif row.op == "<=":
                s = new_col(conv(0))
                self.cols[s][m] = conv(1)
            b.append(conv(rhs))
            m += 1
        for k, width in ub_rows:
            self.cols[k][m] = conv(1)
            s = new_col(conv(0))
            self.cols[s][m] = conv(1)
            b.append(conv(width))
            m += 1
        self.m = m
        self.n = ncols
        self.b = b
        self.c = cost
        self.n_user_rows = len(lp.rows)
        # flip rows so that b >= 0
        self.flip = [1] * m
        for i in range(m):
            if b[i] < 0:
                self.flip[i] = -1
                b[i] = -b[i]
        for col in self.cols:
            for i in list(col):
                if self.flip[i] < 0:
                    col[i] = -col[i]

    def user_x(self, u, frac):
        out = []
        for kind, k, extra in self.var_map:
            if kind == "shift":
                out.append(extra + frac(u[k]))
            elif kind == "neg":
                out.append(extra - frac(u[k]))
            else:
                out.append(frac(u[k]) - frac(u[extra]))
        return out

    def user_dir(self, r, frac):
        out = []
        for kind, k, extra in self.var_map:
            if kind == "shift":
                out.append(frac(r[k]))
            elif kind == "neg":
                out.append(-frac(r[k]))
            else:
                out.append(frac(r[k]) - frac(r[extra]))
        return out

    def user_duals(self, y, frac):
        return [frac(y[i]) * self.flip[i] for i in range(self.n_user_rows)]


# ----------------------------------------------------------------------------
# exact revised simplex


def _reduced_costs(cols, c, y, candidates):
    out = {}
    for j in candidates:
        d = c[j]
        for i, a in cols[j].items():
            yi = y[i]
            if yi:
                d -= yi * a
        out[j] = d
    return out


def _simplex(cols, b, c, basis, locked_from, m):
    """Primal simplex from a primal-feasible basis.

    Columns with index >= ``locked_from`` are artificials fixed at zero.
    Returns (status, basis, xB, y, ray_entering, ray_w, iterations).
    """
    n = len(cols)
    basis = list(basis)
    degenerate_run = 0
    iterations = 0
    limit = 50 * (n + m) + 1000
    while True:
        iterations += 1
        if iterations > limit:
            raise RuntimeError("exact simplex exceeded its iteration guard")
        lu = SparseLU([cols[j] for j in basis], m)
        xB = lu.solve(b)
        y = lu.solve_t([c[j] if j < locked_from else ZERO for j in basis])
        in_basis = set(basis)
        cand = [j for j in range(min(n, locked_from)) if j not in in_basis]
        d = _reduced_costs(cols, c, y, cand)
        entering = None
        if degenerate_run >= _DEGENERATE_SWITCH:
            for j in cand:
                if d[j] < 0:
                    entering = j
                    break
        else:
            best = ZERO
            for j in cand:
                if d[j] < best:
                    best = d[j]
                    entering = j
        if entering is None:
            return OPTIMAL, basis, xB, y, None, None, iterations
        w = lu.solve([cols[entering].get(i, ZERO) for i in range(m)])
        leave = None
        best_ratio = None
        for pos, j in enumerate(basis):
            wi = w[pos]
            if j >= locked_from:
                if wi:
                    ratio = ZERO
                else:
                    continue
            elif wi > 0:
                ratio = xB[pos] / wi
            else:
                continue
            if (
                best_ratio is None
                or ratio < best_ratio
                or (ratio == best_ratio and j < basis[leave])
            ):
                best_ratio = ratio
                leave = pos
        if leave is None:
            return UNBOUNDED, basis, xB, y, entering, w, iterations
        degenerate_run = degenerate_run + 1 if best_ratio == 0 else 0
        basis[leave] = entering


def _exact_standard(std: _Standard, hint: bool):
    """Solve the standard-form program exactly. Returns a dict of raw results."""
    m, n = std.m, std.n
    cols = std.cols
    b, c = std.b, std.c
    art = [{i: ONE} for i in range(m)]
    cols1 = cols + art
    c1 = [ZERO] * n + [ONE] * m
    start = None
    hint_used = False
    if hint:
        start = _highs_start(std, cols1)
        hint_used = start is not None
    it1 = 0
    basis = None
    if start is not None:
        xB = SparseLU([cols1[j] for j in start], m).solve(b)
        if all(not xB[p] for p, j in enumerate(start) if j >= n):
            basis = start
    if basis is None:
        if start is None:
            start = list(range(n, n + m))
        status, basis, xB, y, _, _, it1 = _simplex(cols1, b, c1, start, n + m, m)
        phase1_value = sum((xB[p] for p, j in enumerate(basis) if j >= n), ZERO)
        if phase1_value > 0:
            return {"status": INFEASIBLE, "farkas": y, "iterations": it1, "hint": hint_used}
    c2 = c + [ZERO] * m
    status, basis, xB, y, entering, w, it2 = _simplex(cols1, b, c2, basis, n, m)
    u = [ZERO] * n
    for p, j in enumerate(basis):
        if j < n:
            u[j] = xB[p]
    out = {"u": u, "iterations": it1 + it2, "hint": hint_used}
    if status == OPTIMAL:
        out.update(status=OPTIMAL, y=y)
    else:
        ray = [ZERO] * n
        ray[entering] = ONE
        for p, j in enumerate(basis):
            if j < n and w[p]:
                ray[j] = -w[p]
        out.update(status=UNBOUNDED, ray=ray)
    return out


def _highs_matrix(cols, m):
    import numpy as np
    from scipy.sparse import csc_matrix

    data, indices, indptr = [], [], [0]
    for col in cols:
        for i in sorted(col):
            indices.append(i)
            data.append(float(col[i]))
        indptr.append(len(indices))
    return csc_matrix((np.array(data, dtype=float), np.array(indices, dtype=int), np.array(indptr)), shape=(m, len(cols)))


def _highs(cols, b, c, m):
    try:
        import numpy as np
        from scipy.optimize import linprog
    except ImportError:  # pragma: no cover
        return None
    A = _highs_matrix(cols, m)
    return linprog(
        np.array([float(v) for v in c]),
        A_eq=A,
        b_eq=np.array([float(v) for v in b]),
        bounds=(0, None),
        method="highs-ds",
        options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10},
    )


def _highs_start(std: _Standard, cols1):
    """Propose a starting basis for phase one from a HiGHS solve."""
    nnz = sum(len(col) for col in std.cols)
    if nnz < _HINT_THRESHOLD:
        return None
    m, n = std.m, std.n
    res = _highs(std.cols, std.b, std.c, m)
    if res is None:
        return None
    if res.status == 0:
        x = res.x
        duals = res.eqlin.marginals
        support = [j for j in range(n) if x[j] > 1e-9]
        d = {}
        for j in range(n):
            if x[j] > 1e-9:
                continue
            dj = float(std.c[j]) - sum(duals[i] * float(a) for i, a in std.cols[j].items())
            d[j] = dj
        tight = sorted((j for j in d if abs(d[j]) <= 1e-9), key=lambda j: (abs(d[j]), j))
    else:
        # phase-one program: min sum(a) over [A I]
        c1 = [ZERO] * n + [ONE] * m
        res = _highs(cols1, std.b, c1, m)
        if res is None or res.status != 0:
            return None
        x = res.x
        support = [j for j in range(n + m) if x[j] > 1e-9]
        tight = []
    arts = list(range(n, n + m))
    basis = select_independent(support + tight + arts, cols1, m, m)
    if len(basis) != m:
        return None
    try:
        lu = SparseLU([cols1[j] for j in basis], m)
    except Singular:
        return None
    xB = lu.solve(std.b)
    if any(v < 0 for v in xB):
        return None
    return basis


# ----------------------------------------------------------------------------
# float path


def _float_standard(std: _Standard):
    import numpy as np

    m, n = std.m, std.n
    res = _highs(std.cols, std.b, std.c, m)
    if res is None:
        raise NumericalBreakdown("float mode requires scipy")
    if res.status == 0:
        return {"status": OPTIMAL, "u": list(res.x), "y": list(res.eqlin.marginals), "iterations": int(res.nit)}
    if res.status == 2:
        cols1 = std.cols + [{i: 1.0} for i in range(m)]
        c1 = [0.0] * n + [1.0] * m
        r1 = _highs(cols1, std.b, c1, m)
        if r1 is None or r1.status != 0 or r1.fun <= 0:
            raise NumericalBreakdown("HiGHS reported infeasible but phase one disagrees")
        return {"status": INFEASIBLE, "farkas": list(r1.eqlin.marginals), "iterations": int(res.nit)}
    if res.status == 3:
        cols1 = std.cols + [{i: 1.0} for i in range(m)]
        c1 = [0.0] * n + [1.0] * m
        r1 = _highs(cols1, std.b, c1, m)
        if r1 is None or r1.status != 0 or r1.fun > 1e-9:
            raise NumericalBreakdown("could not recover a feasible point for an unbounded program")
        u = list(r1.x[:n])
        # recession direction: A r = 0, r >= 0, c.r = -1
        cols2 = [dict(col) for col in std.cols]
        for j in range(n):
            if std.c[j]:
                cols2[j][m] = float(std.c[j])
        r2 = _highs(cols2, [0.0] * m + [-1.0], [0.0] * n, m + 1)
        if r2 is None or r2.status != 0:
            raise NumericalBreakdown("could not recover a recession direction")
        return {"status": UNBOUNDED, "u": u, "ray": list(r2.x), "iterations": int(res.nit)}
    raise NumericalBreakdown(f"HiGHS failed: {res.message}")


# ----------------------------------------------------------------------------


def solve(lp: LinearProgram, mode: str = RATIONAL, tol: float = DEFAULT_TOL, engine: str = "auto") -> LpOutcome:
    """Solve ``lp``; see module docstring for certificate conventions.

    ``engine`` is ``"auto"`` (HiGHS-proposed start basis when large enough)
    or ``"simplex"`` (cold exact simplex only). Float mode always uses HiGHS.
    """
    if mode not in MODES:
        raise ValueError(f"unknown number mode {mode!r}")
    if engine not in ("auto", "simplex"):
        raise ValueError(f"unknown engine {engine!r}")
    if mode == RATIONAL:
        std = _Standard(lp, to_q)
        raw = _exact_standard(std, hint=(engine == "auto"))
        frac = to_fraction
    else:
        std = _Standard(lp, float)
        raw = _float_standard(std)
        frac = float
    outcome = LpOutcome(status=raw["status"], mode=mode, iterations=raw["iterations"])
    if raw.get("hint"):
        outcome.info["start_basis"] = "highs"
    if raw["status"] == OPTIMAL:
        x = std.user_x(raw["u"], frac)
        outcome.x = x
        outcome.duals = std.user_duals(raw["y"], frac)
        val = sum((v * x[j] for j, v in lp.objective.items()), Fraction(0) if mode == RATIONAL else 0.0)
        outcome.value = val
    elif raw["status"] == INFEASIBLE:
        outcome.farkas = std.user_duals(raw["farkas"], frac)
        outcome.value = -math.inf if lp.sense == "max" else math.inf
    else:
        outcome.x = std.user_x(raw["u"], frac)
        outcome.ray = std.user_dir(raw["ray"], frac)
        outcome.value = math.inf if lp.sense == "max" else -math.inf
    if mode == FLOAT and not check_certificate(lp, outcome, tol):
        raise NumericalBreakdown("float solution failed certificate verification")
    return outcome


# ----------------------------------------------------------------------------
# independent certificate verification


def _row_activity(row: Row, x):
    return sum((a * x[j] for j, a in row.coeffs.items()), 0)


def _sign_ok(op, y, eps):
    if op == ">=":
        return y >= -eps
    if op == "<=":
        return y <= eps
    return True


def _bound_term(lp, d, eps):
    """Dual bound contribution of reduced costs; None if unsupported by bounds."""
    total = 0
    for j, dj in enumerate(d):
        if dj > eps:
            if lp.lower[j] is None:
                return None
            total += lp.lower[j] * dj
        elif dj < -eps:
            if lp.upper[j] is None:
                return None
            total += lp.upper[j] * dj
    return total


def _primal_feasible(lp, x, eps):
    for j in range(lp.num_vars):
        if lp.lower[j] is not None and x[j] < lp.lower[j] - eps:
            return False
        if lp.upper[j] is not None and x[j] > lp.upper[j] + eps:
            return False
    for row in lp.rows:
        act = _row_activity(row, x)
        if row.op == "==" and abs(act - row.rhs) > eps:
            return False
        if row.op == "<=" and act > row.rhs + eps:
            return False
        if row.op == ">=" and act < row.rhs - eps:
            return False
    return True


def check_certificate(lp: LinearProgram, outcome: LpOutcome, tol: float = DEFAULT_TOL) -> bool:
    """Re-verify ``outcome`` against ``lp`` using only the program data.

    Exact in rational mode; in float mode residuals are allowed ``tol``
    absolute and objective comparisons ``1e-7`` relative.
    """
    exact = outcome.mode == RATIONAL
    eps = 0 if exact else tol
    c = lp.min_objective()
    n = lp.num_vars
    try:
        if outcome.status == OPTIMAL:
            x, y = outcome.x, outcome.duals
            if x is None or y is None or len(x) != n or len(y) != len(lp.rows):
                return False
            if not _primal_feasible(lp, x, eps):
                return False
            if not all(_sign_ok(row.op, y[r], eps) for r, row in enumerate(lp.rows)):
                return False
            d = [c.get(j, 0) for j in range(n)]
            for r, row in enumerate(lp.rows):
                if y[r]:
                    for j, a in row.coeffs.items():
                        d[j] -= y[r] * a
            bt = _bound_term(lp, d, eps)
            if bt is None:
                return False
            dual_value = sum((y[r] * row.rhs for r, row in enumerate(lp.rows)), 0) + bt
            primal_value = sum((v * x[j] for j, v in c.items()), 0)
            if exact:
                return dual_value == primal_value and _same(outcome.value, lp, primal_value)
            scale = max(1.0, abs(float(primal_value)))
            return abs(float(dual_value) - float(primal_value)) <= 1e-7 * scale
        if outcome.status == INFEASIBLE:
            y = outcome.farkas
            if y is None or len(y) != len(lp.rows):
                return False
            if not all(_sign_ok(row.op, y[r], eps) for r, row in enumerate(lp.rows)):
                return False
            d = [0] * n
            for r, row in enumerate(lp.rows):
                if y[r]:
                    for j, a in row.coeffs.items():
                        d[j] -= y[r] * a
            bt = _bound_term(lp, d, eps)
            if bt is None:
                return False
            value = sum((y[r] * row.rhs for r, row in enumerate(lp.rows)), 0) + bt
            return value > eps
        if outcome.status == UNBOUNDED:
            x, r = outcome.x, outcome.ray
            if x is None or r is None:
                return False
            if not _primal_feasible(lp, x, eps):
                return False
            for j in range(n):
                if lp.lower[j] is not None and r[j] < -eps:
                    return False
                if lp.upper[j] is not None and r[j] > eps:
                    return False
            for row in lp.rows:
                act = _row_activity(row, r)
                if row.op == "==" and abs(act) > eps:
                    return False
                if row.op == "<=" and act > eps:
                    return False
                if row.op == ">=" and act < -eps:
                    return False
            slope = sum((v * r[j] for j, v in c.items()), 0)
            return slope < -eps
    except TypeError:
        return False
    return False


def _same(value, lp, primal_min_value):
    expected = primal_min_value if lp.sense == "min" else -primal_min_value
    return value == expected
