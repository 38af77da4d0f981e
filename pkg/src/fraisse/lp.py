"""Linear-programming backends.

Two interchangeable engines behind one call: a floating-point engine
(scipy's HiGHS) whose answers are re-checked against primal residuals and
the dual gap, and an exact rational simplex over Fractions for small
instances where the certificate must be arithmetic-exact.

Engine selection: the `engine` argument wins, then the FRAISSE_LP_ENGINE
environment variable ("float" or "exact"), then "float".
"""

import os
from fractions import Fraction

import numpy as np
from scipy.optimize import linprog

ENGINE_ENV_VAR = "FRAISSE_LP_ENGINE"
RESIDUAL_TOL = 1e-9
GAP_TOL = 1e-7


class LPError(Exception):
    """Solver failure that the caller did not ask for."""


class LPInfeasible(LPError):
    pass


class LPUnbounded(LPError):
    pass


class LPResult:
    """Optimal value and one optimal point.

    `exact_value` / `exact_x` are Fractions when the exact engine ran,
    else None. `value` and `x` are always floats.
    """

    def __init__(self, value, x, engine, exact_value=None, exact_x=None):
        self.value = value
        self.x = x
        self.engine = engine
        self.exact_value = exact_value
        self.exact_x = exact_x

    def __repr__(self):
        return f"LPResult(value={self.value!r}, engine={self.engine!r})"


def current_engine(engine=None):
    if engine is None:
        engine = os.environ.get(ENGINE_ENV_VAR, "float")
    if engine not in ("float", "exact"):
        raise LPError(f"unknown LP engine {engine!r} (expected 'float' or 'exact')")
    return engine


def solve_lp(c, a_ub=None, b_ub=None, a_eq=None, b_eq=None, maximize=True, engine=None):
    """Optimize c.x over free variables subject to a_ub x <= b_ub, a_eq x = b_eq.

    Raises LPInfeasible / LPUnbounded accordingly; any other solver
    misbehavior (including a failed residual check) raises LPError.
    """
    engine = current_engine(engine)
    c = np.atleast_1d(np.asarray(c, dtype=float))
    n = c.shape[0]
    a_ub, b_ub = _normalize_block(a_ub, b_ub, n)
    a_eq, b_eq = _normalize_block(a_eq, b_eq, n)
    if engine == "float":
        return _solve_float(c, a_ub, b_ub, a_eq, b_eq, maximize)
    return _solve_exact(c, a_ub, b_ub, a_eq, b_eq, maximize)


def _normalize_block(a, b, n):
    if a is None or len(a) == 0:
        return np.zeros((0, n)), np.zeros(0)
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    if a.shape != (b.shape[0], n):
        raise LPError(f"constraint block shape mismatch: {a.shape} vs ({b.shape[0]}, {n})")
    return a, b


def _solve_float(c, a_ub, b_ub, a_eq, b_eq, maximize):
    sign = -1.0 if maximize else 1.0
    res = linprog(
        sign * c,
        A_ub=a_ub if a_ub.size else None,
        b_ub=b_ub if b_ub.size else None,
        A_eq=a_eq if a_eq.size else None,
        b_eq=b_eq if b_eq.size else None,
        bounds=(None, None),
        method="highs",
    )
    if res.status == 2:
        raise LPInfeasible("LP infeasible")
    if res.status == 3:
        raise LPUnbounded("LP unbounded")
    if res.status != 0:
        raise LPError(f"LP solver failed with status {res.status}: {res.message}")
    x = np.asarray(res.x, dtype=float)
    _check_float_solution(res, x, c, a_ub, b_ub, a_eq, b_eq, maximize)
    value = float(c @ x)
    return LPResult(value, x, "float")


def _check_float_solution(res, x, c, a_ub, b_ub, a_eq, b_eq, maximize):
    # Primal residuals, scaled by the data magnitude.
    scale = 1.0 + max(
        (float(np.max(np.abs(b_ub))) if b_ub.size else 0.0),
        (float(np.max(np.abs(b_eq))) if b_eq.size else 0.0),
        float(np.max(np.abs(x))) if x.size else 0.0,
    )
    if a_ub.size:
        viol = float(np.max(a_ub @ x - b_ub))
        if viol > RESIDUAL_TOL * scale:
            raise LPError(f"inequality residual {viol:.3e} exceeds tolerance")
    if a_eq.size:
        viol = float(np.max(np.abs(a_eq @ x - b_eq)))
        if viol > RESIDUAL_TOL * scale:
            raise LPError(f"equality residual {viol:.3e} exceeds tolerance")
    # Dual gap: HiGHS reports marginals for the minimization it actually solved.
    try:
        y_ub = np.asarray(res.ineqlin.marginals, dtype=float) if b_ub.size else np.zeros(0)
        y_eq = np.asarray(res.eqlin.marginals, dtype=float) if b_eq.size else np.zeros(0)
    except AttributeError:
        return
    dual = float(b_ub @ y_ub) + float(b_eq @ y_eq)
    primal = float(res.fun)
    if abs(primal - dual) > GAP_TOL * (1.0 + abs(primal)):
        raise LPError(f"duality gap {abs(primal - dual):.3e} exceeds tolerance")


# --- exact rational simplex -------------------------------------------------

ZERO = Fraction(0)
ONE = Fraction(1)


def _solve_exact(c, a_ub, b_ub, a_eq, b_eq, maximize):
    cf = [Fraction(v) for v in c.tolist()]
    if not maximize:
        cf = [-v for v in cf]
    rows = []
    rels = []
    for a, b in zip(a_ub.tolist(), b_ub.tolist()):
        rows.append([Fraction(v) for v in a] + [Fraction(b)])
        rels.append("<=")
    for a, b in zip(a_eq.tolist(), b_eq.tolist()):
        rows.append([Fraction(v) for v in a] + [Fraction(b)])
        rels.append("==")
    value, xs = _exact_simplex(cf, rows, rels)
    x = np.array([float(v) for v in xs], dtype=float)
    val = value if maximize else -value
    exact_x = xs if maximize else xs
    return LPResult(float(val), x, "exact", exact_value=val, exact_x=exact_x)


def _exact_simplex(c, rows, rels):
    """Maximize c.x, free x, rows of the form (coeffs, rhs) with <= or ==.

    Two-phase tableau simplex with Bland's rule. Free variables are split
    into positive and negative parts. Returns (optimal value, x).
    """
    n = len(c)
    m = len(rows)
    n_split = 2 * n
    n_slack = sum(1 for r in rels if r == "<=")
    # Column layout: [x+ (n), x- (n), slacks (n_slack), artificials (<= m)].
    tab = []
    basis = []
    slack_at = {}
    si = 0
    for i, r in enumerate(rels):
        if r == "<=":
            slack_at[i] = n_split + si
            si += 1
    n_core = n_split + n_slack
    art_cols = []
    for i, (row, rel) in enumerate(zip(rows, rels)):
        coeffs = row[:-1]
        rhs = row[-1]
        line = [ZERO] * n_core
        for j, v in enumerate(coeffs):
            line[j] = v
            line[n + j] = -v
        if rel == "<=":
            line[slack_at[i]] = ONE
        if rhs < 0:
            line = [-v for v in line]
            rhs = -rhs
            flipped = True
        else:
            flipped = False
        needs_art = rel == "==" or flipped
        tab.append((line, rhs, needs_art, i))

    # Attach artificial columns where a starting basic variable is missing.
    matrix = []
    rhs_col = []
    for line, rhs, needs_art, i in tab:
        matrix.append(list(line))
        rhs_col.append(rhs)
    total = n_core
    for k, (line, rhs, needs_art, i) in enumerate(tab):
        if needs_art:
            col = total
            total += 1
            art_cols.append(col)
            for r in range(m):
                matrix[r].append(ONE if r == k else ZERO)
            basis.append(col)
        else:
            basis.append(slack_at[i])

    # Phase 1: minimize the sum of artificials (maximize its negative).
    if art_cols:
        obj = [ZERO] * total
        for col in art_cols:
            obj[col] = -ONE
        red, val = _reduced_row(obj, matrix, rhs_col, basis)
        val = _pivot_until_opt(matrix, rhs_col, basis, red)
        if val < 0:
            raise LPInfeasible("exact LP infeasible")
        _drive_out_artificials(matrix, rhs_col, basis, art_cols, n_core)
        # Drop artificial columns, and any redundant row whose basic variable
        # is still an artificial (necessarily at level zero).
        keep = n_core
        art = set(art_cols)
        rows_keep = [r for r in range(len(basis)) if basis[r] not in art]
        matrix = [matrix[r][:keep] for r in rows_keep]
        rhs_col = [rhs_col[r] for r in rows_keep]
        basis = [basis[r] for r in rows_keep]
        total = keep

    obj = [ZERO] * total
    for j in range(n):
        obj[j] = c[j]
        obj[n + j] = -c[j]
    red, val0 = _reduced_row(obj, matrix, rhs_col, basis)
    try:
        val = _pivot_until_opt(matrix, rhs_col, basis, red)
    except LPUnbounded:
        raise
    x = [ZERO] * n
    for r, col in enumerate(basis):
        if col < n:
            x[col] += rhs_col[r]
        elif col < 2 * n:
            x[col - n] -= rhs_col[r]
    value = sum(ci * xi for ci, xi in zip(c, x))
    return value, x


def _reduced_row(obj, matrix, rhs_col, basis):
    # Express the objective over the current basis: subtract basic rows.
    red = list(obj) + [ZERO]
    for r, col in enumerate(basis):
        coef = red[col]
        if coef != 0:
            row = matrix[r]
            for j in range(len(row)):
                red[j] -= coef * row[j]
            red[-1] -= coef * rhs_col[r]
    return red, -red[-1]


def _pivot_until_opt(matrix, rhs_col, basis, red):
    m = len(matrix)
    width = len(matrix[0])
    while True:
        enter = -1
        for j in range(width):
            if red[j] > 0:
                enter = j
                break
        if enter < 0:
            return -red[-1]
        leave = -1
        best = None
        for r in range(m):
            a = matrix[r][enter]
            if a > 0:
                ratio = rhs_col[r] / a
                if best is None or ratio < best or (ratio == best and basis[r] < basis[leave]):
                    best = ratio
                    leave = r
        if leave < 0:
            raise LPUnbounded("exact LP unbounded")
        _pivot(matrix, rhs_col, basis, red, leave, enter)


def _pivot(matrix, rhs_col, basis, red, leave, enter):
    piv_row = matrix[leave]
    piv = piv_row[enter]
    inv = ONE / piv
    matrix[leave] = [v * inv for v in piv_row]
    rhs_col[leave] = rhs_col[leave] * inv
    piv_row = matrix[leave]
    piv_rhs = rhs_col[leave]
    for r in range(len(matrix)):
        if r == leave:
            continue
        f = matrix[r][enter]
        if f != 0:
            matrix[r] = [v - f * w for v, w in zip(matrix[r], piv_row)]
            rhs_col[r] -= f * piv_rhs
    f = red[enter]
    if f != 0:
        for j in range(len(piv_row)):
            red[j] -= f * piv_row[j]
        red[-1] -= f * piv_rhs
    basis[leave] = enter


def _drive_out_artificials(matrix, rhs_col, basis, art_cols, n_core):
    art = set(art_cols)
    for r in range(len(basis)):
        if basis[r] in art:
            # Zero-level artificial: pivot on any genuine column, else the
            # row is redundant and harmlessly stays (rhs is 0).
            for j in range(n_core):
                if matrix[r][j] != 0:
                    dummy = [ZERO] * (len(matrix[r]) + 1)
                    _pivot(matrix, rhs_col, basis, dummy, r, j)
                    break
