"""Finite-dimensional real normed spaces presented by norming functionals.

A space is a pair (R^n, W) where the rows f_1..f_N of W are functionals
and the norm is max_i |f_i(x)|. The dual unit ball is by definition the
absolutely convex hull of the rows, which turns every norm, operator norm,
distortion and extension question below into a finite linear program.
The canonical map x -> (f_1(x), ..., f_N(x)) is then an isometry into
linf^N, and spaces with identity norming play the role of the injective
objects everything else extends into.
"""

import math

import numpy as np

from .lp import LPInfeasible, solve_lp

ISO_TOL = 1e-9
MORPHISM_TOL = 1e-7
RANK_TOL = 1e-10


class Modulus:
    """Tolerance amplification of a class: how much an extension may move.

    kind "banach" evaluates to delta itself (a normalization choice for the
    real Banach class, see README); kind "function_system" evaluates to
    2*delta, the loss of forcing a near-morphism back to an exactly unital
    positive one.
    """

    def __init__(self, kind):
        if kind not in ("banach", "function_system"):
            raise ValueError(f"unknown modulus kind {kind!r}")
        self.kind = kind

    def __call__(self, delta):
        if delta < 0:
            raise ValueError("modulus argument must be nonnegative")
        return float(delta) if self.kind == "banach" else 2.0 * float(delta)

    def __repr__(self):
        return f"Modulus({self.kind!r})"

    def __eq__(self, other):
        return isinstance(other, Modulus) and other.kind == self.kind


BANACH = Modulus("banach")
FUNCTION_SYSTEM = Modulus("function_system")


class NormedSpace:
    """R^dim with norm max_i |f_i(x)| for the rows f_i of `norming`.

    The norming matrix must have full column rank, otherwise the formula
    only gives a seminorm and the construction is rejected.
    """

    def __init__(self, norming, label=None):
        w = np.array(norming, dtype=float)
        if w.ndim != 2:
            raise ValueError("norming must be a matrix (rows are functionals)")
        if w.shape[0] < 1 or w.shape[1] < 1:
            raise ValueError("zero-dimensional spaces are rejected")
        if not np.all(np.isfinite(w)):
            raise ValueError("norming entries must be finite")
        sv = np.linalg.svd(w, compute_uv=False)
        if sv[-1] <= RANK_TOL * max(1.0, sv[0]):
            raise ValueError(
                f"norming matrix has rank < {w.shape[1]}: smallest singular value "
                f"{sv[-1]:.3e}, the rows only give a seminorm"
            )
        w.setflags(write=False)
        self.norming = w
        self.dim = w.shape[1]
        self.rows = w.shape[0]
        self.label = label if label is not None else f"space{self.dim}r{self.rows}"

    @property
    def is_linf(self):
        return self.rows == self.dim and np.array_equal(self.norming, np.eye(self.dim))

    def norm(self, x):
        x = np.asarray(x, dtype=float)
        return float(np.max(np.abs(self.norming @ x)))

    def ball_constraints(self, radius=1.0):
        """(A, b) with A x <= b describing the ball of the given radius."""
        a = np.vstack([self.norming, -self.norming])
        b = np.full(2 * self.rows, float(radius))
        return a, b

    def support_value(self, g, radius=1.0, engine=None):
        """max g.x over the ball, as an LP over the polytope."""
        a, b = self.ball_constraints(radius)
        return solve_lp(np.asarray(g, dtype=float), a_ub=a, b_ub=b, engine=engine).value

    def dual_norm(self, g, engine=None):
        """Least coefficient sum representing g over the rows.

        Exact because the dual ball is the absolutely convex hull of the
        rows: g = lambda^T W with minimal sum |lambda|. Returns the value;
        `dual_representation` also returns the coefficients.
        """
        value, _ = self.dual_representation(g, engine=engine)
        return value

    def dual_representation(self, g, engine=None):
        g = np.asarray(g, dtype=float)
        n, nr = self.dim, self.rows
        # Variables (lambda, u); minimize sum u with  -u <= lambda <= u.
        c = np.concatenate([np.zeros(nr), np.ones(nr)])
        eye = np.eye(nr)
        a_ub = np.block([[eye, -eye], [-eye, -eye]])
        b_ub = np.zeros(2 * nr)
        a_eq = np.hstack([self.norming.T, np.zeros((n, nr))])
        res = solve_lp(c, a_ub=a_ub, b_ub=b_ub, a_eq=a_eq, b_eq=g, maximize=False, engine=engine)
        return res.value, res.x[:nr]

    def coordinate_bound(self, engine=None):
        """max_i of the dual norms of the coordinate functionals."""
        return max(self.dual_norm(np.eye(self.dim)[i], engine=engine) for i in range(self.dim))

    def __repr__(self):
        return f"NormedSpace(dim={self.dim}, rows={self.rows}, label={self.label!r})"


class LinfSpace(NormedSpace):
    """linf^n: identity norming. These are the injective targets."""

    def __init__(self, dim, label=None):
        super().__init__(np.eye(int(dim)), label=label or f"linf^{int(dim)}")


class LinearMap:
    """A matrix between two presented spaces; norms are computed lazily."""

    def __init__(self, dom, cod, matrix):
        m = np.array(matrix, dtype=float)
        if m.ndim == 0:
            m = m.reshape(1, 1)
        if m.ndim == 1:
            m = m.reshape(cod.dim, dom.dim)
        if m.shape != (cod.dim, dom.dim):
            raise ValueError(f"matrix shape {m.shape} does not match cod {cod.dim} x dom {dom.dim}")
        if not np.all(np.isfinite(m)):
            raise ValueError("matrix entries must be finite")
        m.setflags(write=False)
        self.dom = dom
        self.cod = cod
        self.matrix = m
        self._cache = {}

    @staticmethod
    def identity(space):
        return LinearMap(space, space, np.eye(space.dim))

    def apply(self, x):
        return self.matrix @ np.asarray(x, dtype=float)

    def __matmul__(self, other):
        if other.cod is not self.dom and other.cod.dim != self.dom.dim:
            raise ValueError("maps are not composable")
        return LinearMap(other.dom, self.cod, self.matrix @ other.matrix)

    def __sub__(self, other):
        if other.dom.dim != self.dom.dim or other.cod.dim != self.cod.dim:
            raise ValueError("maps live on different spaces")
        return LinearMap(self.dom, self.cod, self.matrix - other.matrix)

    def __neg__(self):
        return LinearMap(self.dom, self.cod, -self.matrix)

    def scale(self, t):
        return LinearMap(self.dom, self.cod, float(t) * self.matrix)

    def op_norm(self, engine=None):
        """max over the domain ball of the codomain norm of the image.

        One LP per codomain norming row: max g_j(Tx) over |f_i(x)| <= 1.
        The ball is symmetric, so the negative sign of each row attains the
        same value and a single sign per row suffices.
        """
        key = ("op_norm", engine)
        if key not in self._cache:
            a, b = self.dom.ball_constraints(1.0)
            best = 0.0
            for row in self.cod.norming:
                c = row @ self.matrix
                val = solve_lp(c, a_ub=a, b_ub=b, engine=engine).value
                best = max(best, val)
            self._cache[key] = best
        return self._cache[key]

    def distortion(self, engine=None):
        """Worst norm loss over the ball of radius 2.

        For each domain norming row (one sign suffices, same symmetry as
        op_norm) solve: max f_i(x) - t with t >= |g_j(Tx)| for all j and
        |f_k(x)| <= 2. At the true maximizer some signed row is active, and
        every LP value is dominated by the true maximum, so the max over
        rows is exact.
        """
        key = ("distortion", engine)
        if key not in self._cache:
            if self.op_norm(engine=engine) > 1.0 + MORPHISM_TOL:
                raise ValueError(
                    f"distortion is defined for morphisms; op_norm = {self.op_norm(engine=engine):.6f} > 1"
                )
            n = self.dom.dim
            wt = self.cod.norming @ self.matrix
            ball_a, ball_b = self.dom.ball_constraints(2.0)
            # Variables (x, t).
            a_ub = np.vstack(
                [
                    np.hstack([wt, -np.ones((wt.shape[0], 1))]),
                    np.hstack([-wt, -np.ones((wt.shape[0], 1))]),
                    np.hstack([ball_a, np.zeros((ball_a.shape[0], 1))]),
                ]
            )
            b_ub = np.concatenate([np.zeros(2 * wt.shape[0]), ball_b])
            best = 0.0
            for row in self.dom.norming:
                c = np.concatenate([row, [-1.0]])
                val = solve_lp(c, a_ub=a_ub, b_ub=b_ub, engine=engine).value
                best = max(best, val)
            self._cache[key] = max(best, 0.0)
        return self._cache[key]

    def is_isometry(self, tol=ISO_TOL, engine=None):
        return self.op_norm(engine=engine) <= 1.0 + tol and self.distortion(engine=engine) <= tol

    def __repr__(self):
        return f"LinearMap({self.dom.label} -> {self.cod.label}, {self.cod.dim}x{self.dom.dim})"


def op_norm(t, engine=None):
    return t.op_norm(engine=engine)


def distortion(t, engine=None):
    return t.distortion(engine=engine)


def map_dist(f, g, engine=None):
    """Sup distance of two maps with the same endpoints, as an operator norm."""
    return (f - g).op_norm(engine=engine)


def embed_linf(space):
    """The presentation map x -> (f_1(x), ..., f_N(x)), an exact isometry."""
    return LinearMap(space, LinfSpace(space.rows), np.array(space.norming))


def hahn_banach_extend(j, g, c, check=True, engine=None):
    """Extend the functional g on dom(j) through the isometry j at bound c.

    Returns (h, lam): h is a functional on cod(j) with h(j(x)) = g(x)
    exactly and h = lam^T W for the codomain rows W with sum |lam| minimal.
    Minimality makes the coefficient-sum bound structural: whenever
    c >= the dual norm of g, the returned sum is <= c up to solver noise
    (an infeasibility here would mean the tolerance is too tight, so the
    caller can retry with c * (1 + 1e-9)).
    """
    g = np.asarray(g, dtype=float)
    x_space = j.cod
    if check:
        if j.distortion(engine=engine) > 1e-6:
            raise ValueError("hahn_banach_extend needs an isometric j")
        gnorm = j.dom.dual_norm(g, engine=engine)
        if gnorm > c * (1.0 + 1e-9) + 1e-9:
            raise ValueError(f"functional norm {gnorm:.6e} exceeds the requested bound {c:.6e}")
    n, nr = x_space.dim, x_space.rows
    cvec = np.concatenate([np.zeros(nr), np.ones(nr)])
    eye = np.eye(nr)
    a_ub = np.block([[eye, -eye], [-eye, -eye]])
    b_ub = np.zeros(2 * nr)
    # Agreement on the subspace: lambda^T W J = g, an equality per domain coord.
    wj = (x_space.norming @ j.matrix).T
    a_eq = np.hstack([wj, np.zeros((j.dom.dim, nr))])
    try:
        res = solve_lp(cvec, a_ub=a_ub, b_ub=b_ub, a_eq=a_eq, b_eq=g, maximize=False, engine=engine)
    except LPInfeasible:
        raise ValueError("extension system infeasible: j does not reach the functional's domain")
    lam = res.x[:nr]
    total = res.value
    if total > c * (1.0 + 1e-9) + 1e-9:
        raise ValueError(
            f"minimal representing sum {total:.9e} exceeds the bound {c:.9e}; "
            "the bound is below the functional's true norm"
        )
    h = lam @ x_space.norming
    return h, lam


def extend_morphism(phi, f, delta=None, modulus=BANACH, check=True, engine=None):
    """Extend f through the near-isometry phi into an injective target.

    phi: X -> Xhat with distortion <= delta < 1, f: X -> A a contraction
    into a space with identity norming. Returns h: Xhat -> A with
    op_norm(h) <= 1 and sup distance of h(phi(.)) from f at most
    modulus(delta). Each coordinate of f transfers to range(phi) with norm
    at most 1 + delta and extends by hahn_banach_extend at that bound; the
    banach class then rescales by 1/(1+delta), the unital class projects
    the rows onto states instead (the 2*delta route).
    """
    target = f.cod
    if not target.is_linf:
        raise ValueError("extend_morphism needs an injective (identity-normed) target")
    if delta is None:
        delta = phi.distortion(engine=engine)
    if delta >= 1.0:
        raise ValueError(f"delta = {delta} >= 1: phi is not invertible enough to extend along")
    if check:
        d_meas = phi.distortion(engine=engine)
        if d_meas > delta + MORPHISM_TOL:
            raise ValueError(f"phi has distortion {d_meas:.6e} > promised {delta:.6e}")
        if f.op_norm(engine=engine) > 1.0 + MORPHISM_TOL:
            raise ValueError("f must be a contraction")
    rows = []
    bound = 1.0 + delta
    for r in f.matrix:
        h, _ = hahn_banach_extend(phi, r, bound, check=False, engine=engine)
        rows.append(h)
    h0 = np.array(rows)
    if modulus.kind == "banach":
        return LinearMap(phi.cod, target, h0 / bound)
    from .unital import project_rows_to_states  # unital route, local to avoid a cycle

    return LinearMap(phi.cod, target, project_rows_to_states(phi.cod, h0, engine=engine))


class MarkedSpace:
    """A space together with a basic generating tuple (a basis, as columns)."""

    def __init__(self, space, tuple_vectors):
        vecs = [np.asarray(v, dtype=float) for v in tuple_vectors]
        if len(vecs) != space.dim:
            raise ValueError("a basic tuple must have exactly dim entries")
        a = np.column_stack(vecs)
        sv = np.linalg.svd(a, compute_uv=False)
        if sv[-1] <= RANK_TOL * max(1.0, sv[0]):
            raise ValueError("marked tuple is not linearly independent")
        self.space = space
        self.vectors = vecs
        self.matrix = a

    def __len__(self):
        return len(self.vectors)


def tuple_image_dist(f, marked, targets):
    """max_i of the codomain norm of f(a_i) - b_i."""
    return max(
        f.cod.norm(f.apply(a) - b) for a, b in zip(marked.vectors, targets)
    )


def tuple_dist_upper(a, b, modulus=BANACH, engine=None):
    """Certified upper bound on the marked-tuple distance.

    Searches a candidate family of morphisms f: the exact tuple matcher
    rescaled to a contraction plus a scaling grid, scores each by
    max(distortion, tuple image distance), and returns
    modulus(best) + best. Tuples of different lengths are at distance
    +inf by convention.
    """
    if len(a) != len(b):
        return math.inf
    t0 = b.matrix @ np.linalg.inv(a.matrix)
    base = LinearMap(a.space, b.space, t0)
    nrm = base.op_norm(engine=engine)
    cands = []
    for s in (1.0, 0.999, 0.99, 0.95, 0.9):
        t = s / max(1.0, nrm)
        cands.append(base.scale(t))
    best = math.inf
    for f in cands:
        if f.op_norm(engine=engine) > 1.0 + MORPHISM_TOL:
            continue
        score = max(f.distortion(engine=engine), tuple_image_dist(f, a, b.vectors))
        best = min(best, score)
    if not math.isfinite(best):
        return math.inf
    return modulus(best) + best


def _padded_identity(rows, cols):
    m = np.zeros((rows, cols))
    k = min(rows, cols)
    m[:k, :k] = np.eye(k)
    return m


def gh_dist_upper(x, y, candidates=None, engine=None):
    """Upper bound on the two-sided morphism distance of two spaces.

    Evaluates candidate pairs (f: X -> Y, g: Y -> X) by
    max(I(f), I(g), d(g f, id), d(f g, id)) and returns the best found.
    Dimension mismatch just produces a finite (possibly large) bound.
    """
    pairs = []
    if candidates:
        pairs.extend(candidates)
    pid = _padded_identity(y.dim, x.dim)
    pairs.append((LinearMap(x, y, pid), LinearMap(y, x, pid.T)))
    if x.rows == y.rows:
        # Align the presentations: W_Y M ~ W_X in least squares.
        m, *_ = np.linalg.lstsq(y.norming, x.norming, rcond=None)
        minv, *_ = np.linalg.lstsq(x.norming, y.norming, rcond=None)
        pairs.append((LinearMap(x, y, m), LinearMap(y, x, minv)))
    best = math.inf
    for f, g in pairs:
        nf, ng = f.op_norm(engine=engine), g.op_norm(engine=engine)
        f = f.scale(1.0 / max(1.0, nf))
        g = g.scale(1.0 / max(1.0, ng))
        eps = max(
            f.distortion(engine=engine),
            g.distortion(engine=engine),
            map_dist(g @ f, LinearMap.identity(x), engine=engine),
            map_dist(f @ g, LinearMap.identity(y), engine=engine),
        )
        best = min(best, eps)
    return best
