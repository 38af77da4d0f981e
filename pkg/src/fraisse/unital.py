"""Function systems: order unit structure on presented spaces.

A presented function system is a presented space whose norming rows all
take the value one at a distinguished unit vector; the cone is the set
where every row is nonnegative, so by polyhedral duality the state space
is exactly the convex hull of the rows. That identification is what
makes unitality and positivity checkable by linear programming with no
further approximation: a functional is a state iff it is a convex
combination of presentation rows, and the nearest state is one LP away.
"""

import itertools

import numpy as np

from .certify import (
    Certificate,
    fmt_matrix,
    fmt_real,
    fmt_vector,
    map_from_json,
    map_to_json,
    parse_matrix,
    parse_real,
    parse_vector,
    register_claim,
    space_from_json,
    space_to_json,
)
from .lp import LPInfeasible, solve_lp
from .spaces import LinearMap, LinfSpace, NormedSpace, map_dist

UNIT_TOL = 1e-9


class FunctionSystem(NormedSpace):
    """A presented space with an order unit normed by its own state rows."""

    def __init__(self, norming, unit, label=None):
        super().__init__(norming, label=label)
        u = np.asarray(unit, dtype=float)
        if u.shape != (self.dim,):
            raise ValueError("unit must be a vector of the space dimension")
        vals = self.norming @ u
        if np.max(np.abs(vals - 1.0)) > UNIT_TOL:
            raise ValueError("every norming row must take value 1 at the unit")
        self.unit = u.copy()
        self.unit.setflags(write=False)

    def state(self, weights):
        return StateVector(self, weights)


def simplex_system(n, label=None):
    """The coordinate function system: identity rows, unit all ones."""
    return FunctionSystem(np.eye(n), np.ones(n), label=label or f"simplex({n})")


def system_to_json(system):
    data = space_to_json(system)
    data["unit"] = fmt_vector(system.unit)
    return data


def system_from_json(data):
    base = space_from_json(data)
    return FunctionSystem(base.norming, parse_vector(data["unit"]), label=base.label)


class StateVector:
    """A state given as a convex combination of the presentation rows."""

    def __init__(self, system, weights, tol=1e-9):
        lam = np.asarray(weights, dtype=float)
        if lam.shape != (system.rows,):
            raise ValueError("need one weight per presentation row")
        if np.min(lam) < -tol:
            raise ValueError(f"negative state weight {np.min(lam):.3e}")
        if abs(np.sum(lam) - 1.0) > tol:
            raise ValueError(f"state weights sum to {np.sum(lam)}")
        self.system = system
        self.weights = np.clip(lam, 0.0, None)
        self.weights = self.weights / np.sum(self.weights)

    @property
    def functional(self):
        return self.weights @ self.system.norming

    def __call__(self, x):
        return float(self.functional @ np.asarray(x, dtype=float))


def state_distance(space, row, engine=None):
    """Dual-norm distance from a functional to the state set of a space.

    min over states lam' W and representations (row - state) = mu' W of
    sum |mu|; exact because the dual ball is by definition the absolute
    hull of the rows. Returns (distance, weights of the nearest state).
    """
    w = space.norming
    big_n, n = w.shape
    # variables: lam (big_n), mu+ (big_n), mu- (big_n), t
    nv = 3 * big_n + 1
    tvar = 3 * big_n
    a_eq = []
    b_eq = []
    for c in range(n):
        rowc = np.zeros(nv)
        rowc[:big_n] = w[:, c]
        rowc[big_n : 2 * big_n] = w[:, c]
        rowc[2 * big_n : 3 * big_n] = -w[:, c]
        a_eq.append(rowc)
        b_eq.append(row[c])
    sum_row = np.zeros(nv)
    sum_row[:big_n] = 1.0
    a_eq.append(sum_row)
    b_eq.append(1.0)
    a_ub = []
    b_ub = []
    for i in range(3 * big_n):
        r = np.zeros(nv)
        r[i] = -1.0
        a_ub.append(r)
        b_ub.append(0.0)
    budget = np.zeros(nv)
    budget[big_n : 3 * big_n] = 1.0
    budget[tvar] = -1.0
    a_ub.append(budget)
    b_ub.append(0.0)
    c_obj = np.zeros(nv)
    c_obj[tvar] = 1.0
    res = solve_lp(c_obj, np.array(a_ub), np.array(b_ub), np.array(a_eq), np.array(b_eq), maximize=False, engine=engine)
    lam = np.clip(res.x[:big_n], 0.0, None)
    lam = lam / max(np.sum(lam), 1e-300)
    return max(res.value, 0.0), lam


def project_rows_to_states(space, rows, engine=None):
    """Replace each functional row by its nearest state of the space."""
    out = []
    for r in np.atleast_2d(rows):
        _, lam = state_distance(space, r, engine=engine)
        out.append(lam @ space.norming)
    return np.array(out)


@register_claim("unital_perturbation")
def _recheck_perturbation(inputs):
    f = map_from_json(inputs["f"])
    g = map_from_json(inputs["g"])
    return map_dist(f - g, LinearMap(f.dom, f.cod, np.zeros_like(f.matrix)))


def perturb_to_unital_positive(f, delta, engine=None):
    """Nearest unital positive map to f between function systems.

    One joint LP: the rows of the candidate g, read through the codomain
    states, must be states of the domain, and the sup distance to f is
    minimized. The distance of the optimum is certified against 2*delta,
    the perturbation constant of the class.
    """
    dom, cod = f.dom, f.cod
    if not isinstance(dom, FunctionSystem) or not isinstance(cod, FunctionSystem):
        raise ValueError("perturb_to_unital_positive needs function systems on both sides")
    w_d = dom.norming
    w_c = cod.norming
    n_rows_c, n_c = w_c.shape
    n_rows_d, n_d = w_d.shape
    # variables: G (n_c x n_d), per codomain row: lam (n_rows_d), mu+/- (n_rows_d); then t
    gvars = n_c * n_d
    per = 3 * n_rows_d
    nv = gvars + n_rows_c * per + 1
    tvar = nv - 1

    def gv(i, c):
        return i * n_d + c

    def lamv(l, k):
        return gvars + l * per + k

    a_eq, b_eq, a_ub, b_ub = [], [], [], []
    for l in range(n_rows_c):
        # w_l G = lam_l' W_d  and  w_l f - w_l G = mu_l' W_d
        target = w_c[l] @ f.matrix
        for c in range(n_d):
            row = np.zeros(nv)
            for i in range(n_c):
                row[gv(i, c)] += w_c[l, i]
            for k in range(n_rows_d):
                row[lamv(l, k)] -= w_d[k, c]
            a_eq.append(row)
            b_eq.append(0.0)
            row2 = np.zeros(nv)
            for i in range(n_c):
                row2[gv(i, c)] += w_c[l, i]
            for k in range(n_rows_d):
                row2[lamv(l, n_rows_d + k)] += w_d[k, c]
                row2[lamv(l, 2 * n_rows_d + k)] -= w_d[k, c]
            a_eq.append(row2)
            b_eq.append(target[c])
        srow = np.zeros(nv)
        for k in range(n_rows_d):
            srow[lamv(l, k)] = 1.0
        a_eq.append(srow)
        b_eq.append(1.0)
        for k in range(per):
            r = np.zeros(nv)
            r[lamv(l, k)] = -1.0
            a_ub.append(r)
            b_ub.append(0.0)
        budget = np.zeros(nv)
        for k in range(n_rows_d):
            budget[lamv(l, n_rows_d + k)] = 1.0
            budget[lamv(l, 2 * n_rows_d + k)] = 1.0
        budget[tvar] = -1.0
        a_ub.append(budget)
        b_ub.append(0.0)
    c_obj = np.zeros(nv)
    c_obj[tvar] = 1.0
    res = solve_lp(c_obj, np.array(a_ub), np.array(b_ub), np.array(a_eq), np.array(b_eq), maximize=False, engine=engine)
    g_mat = np.array([[res.x[gv(i, c)] for c in range(n_d)] for i in range(n_c)])
    g = LinearMap(dom, cod, g_mat)
    defect = map_dist(f, g, engine=engine)
    inputs = {"f": map_to_json(f), "g": map_to_json(g), "delta": fmt_real(delta)}
    cert = Certificate("unital_perturbation", inputs, 2.0 * delta, defect, tol=1e-7)
    return g, defect, cert


# ---------------------------------------------------------------------------
# the extending step of the dense-extreme-boundary tower


@register_claim("poulsen_separation_gap")
def _recheck_poulsen(inputs):
    system = system_from_json(inputs["system"])
    idx = int(inputs["new_row"])
    margin, _ = _ext_margin(system, idx)
    return parse_real(inputs["tau"]) - margin


def _ext_margin(system, idx, engine=None):
    """Dual-norm separation of row idx from the hull of the other rows."""
    others = np.delete(system.norming, idx, axis=0)
    # distance from row idx to conv(others) in the dual norm
    w = system.norming
    big_n = others.shape[0]
    n = system.dim
    # variables: nu (big_n) hull weights, mu+/- (rows of w) representation, t
    nv = big_n + 2 * w.shape[0] + 1
    nu0 = 0
    mu0 = big_n
    tvar = nv - 1
    a_eq, b_eq, a_ub, b_ub = [], [], [], []
    for c in range(n):
        row = np.zeros(nv)
        row[nu0 : nu0 + big_n] = others[:, c]
        for k in range(w.shape[0]):
            row[mu0 + k] += w[k, c]
            row[mu0 + w.shape[0] + k] -= w[k, c]
        a_eq.append(row)
        b_eq.append(w[idx, c])
    srow = np.zeros(nv)
    srow[nu0 : nu0 + big_n] = 1.0
    a_eq.append(srow)
    b_eq.append(1.0)
    for k in range(big_n):
        r = np.zeros(nv)
        r[nu0 + k] = -1.0
        a_ub.append(r)
        b_ub.append(0.0)
    for k in range(2 * w.shape[0]):
        r = np.zeros(nv)
        r[mu0 + k] = -1.0
        a_ub.append(r)
        b_ub.append(0.0)
    budget = np.zeros(nv)
    budget[mu0 : mu0 + 2 * w.shape[0]] = 1.0
    budget[tvar] = -1.0
    a_ub.append(budget)
    b_ub.append(0.0)
    c_obj = np.zeros(nv)
    c_obj[tvar] = 1.0
    res = solve_lp(c_obj, np.array(a_ub), np.array(b_ub), np.array(a_eq), np.array(b_eq), maximize=False, engine=engine)
    return max(res.value, 0.0), res.x[nu0 : nu0 + big_n]


class PoulsenStep:
    def __init__(self, system, phi, new_row_index, margin, certificate):
        self.system = system
        self.phi = phi
        self.new_row_index = new_row_index
        self.margin = margin
        self.certificate = certificate


def poulsen_extension_step(system, target, tau=0.5, engine=None):
    """Extend a function system by one coordinate that evaluates a state.

    target is a StateVector (or weight vector) of the current system. The
    new system appends the coordinate x -> target(x); old rows lift with a
    zero in the new slot and the new coordinate functional joins the
    presentation. The lift of the old unit extends by value one, the
    embedding is exactly unital and isometric, and on the image of the old
    system the new row restricts to the chosen state -- which is now
    separated from the hull of the other rows by a measured margin
    (trivially at least one in the new coordinate, but measured in the
    dual norm and certified against tau, not assumed).
    """
    if not isinstance(system, FunctionSystem):
        raise ValueError("poulsen_extension_step needs a function system")
    if not isinstance(target, StateVector):
        target = StateVector(system, target)
    n = system.dim
    func = target.functional
    new_norming = np.zeros((system.rows + 1, n + 1))
    new_norming[: system.rows, :n] = system.norming
    new_norming[system.rows, n] = 1.0
    new_unit = np.concatenate([system.unit, [1.0]])
    grown = FunctionSystem(new_norming, new_unit, label=f"{system.label or 'sys'}+state")
    phi_mat = np.zeros((n + 1, n))
    phi_mat[:n, :] = np.eye(n)
    phi_mat[n, :] = func
    phi = LinearMap(system, grown, phi_mat)
    idx = system.rows
    margin, _ = _ext_margin(grown, idx, engine=engine)
    inputs = {
        "system": system_to_json(grown),
        "new_row": str(idx),
        "tau": fmt_real(tau),
        "target_weights": fmt_vector(target.weights),
    }
    cert = Certificate("poulsen_separation_gap", inputs, 0.0, tau - margin, tol=1e-9)
    return PoulsenStep(grown, phi, idx, margin, cert)


def build_poulsen_chain(depth, targets_per_step=1, seed=0, tau=0.5, engine=None):
    """Seeded tower of function systems with progressively denser extreme rows.

    Starts from the two point simplex system; each step draws mixture
    states (seeded dirichlet over the current rows) and realizes each as
    an exactly extreme row one coordinate up. Step records carry the
    measured separation margins and the measured cover radius of a fixed
    probe family (distance from probe states to the nearest extreme row),
    which is the quantity that is supposed to shrink as the tower grows.
    """
    from .chains import StageChain  # stage container shared with the banach tower
    from .certify import modulus_to_json
    from .spaces import FUNCTION_SYSTEM

    rng = np.random.default_rng(seed)
    system = simplex_system(2)
    stages = [system]
    connectives = []
    records = []
    probes = [rng.dirichlet(np.full(2, 0.7)) for _ in range(4)]
    for k in range(1, depth + 1):
        cur = stages[-1]
        lift = LinearMap.identity(cur)
        grown = cur
        margins = []
        for j in range(targets_per_step):
            if j % 2 == 0:
                weights = rng.dirichlet(np.full(grown.rows, 0.5))
            else:
                # every other target sits on the original edge, so the probe
                # family really does get approximated as the tower grows
                weights = np.zeros(grown.rows)
                weights[:2] = rng.dirichlet(np.full(2, 0.7))
            step = poulsen_extension_step(grown, weights, tau=tau, engine=engine)
            lift = step.phi @ lift
            grown = step.system
            margins.append(step.margin)
        connectives.append(lift)
        stages.append(grown)
        # probe states lift along the tower: their functionals pull back, and
        # the cover radius is the distance to the nearest currently extreme row
        cover = 0.0
        for pw in probes:
            base = np.zeros(grown.rows)
            base[:2] = pw
            probe_func = base @ grown.norming
            best = np.inf
            for idx in range(grown.rows):
                m, _ = _ext_margin(grown, idx, engine=engine)
                if m <= 1e-9:
                    continue
                d = grown.dual_norm(probe_func - grown.norming[idx])
                best = min(best, d)
            cover = max(cover, best)
        records.append(
            {
                "stage": k,
                "margins": [fmt_real(m) for m in margins],
                "cover_radius": fmt_real(cover),
                "dims": grown.dim,
            }
        )
    params = {
        "depth": depth,
        "targets_per_step": targets_per_step,
        "seed": seed,
        "tau": fmt_real(tau),
        "modulus": modulus_to_json(FUNCTION_SYSTEM),
    }
    chain = StageChain("poulsen", stages, connectives, records, params)
    return chain


# ---------------------------------------------------------------------------
# explicit minimality embeddings


class MinimalityResult:
    def __init__(self, phi, defect, eta, block_mass, certificate):
        self.phi = phi
        self.defect = defect
        self.eta = eta
        self.block_mass = block_mass
        self.certificate = certificate


@register_claim("minimality_defect")
def _recheck_minimality(inputs):
    s = parse_vector(inputs["s"])
    t = parse_vector(inputs["t"])
    phi = map_from_json(inputs["phi"])
    pulled = t @ phi.matrix
    return float(np.sum(np.abs(pulled - s)))


def minimality_map(s, t, eps=None, engine=None):
    """Unital isometry of coordinate systems pulling the state t back near s.

    s lives on d coordinates, t on m. The map replicates the functional
    x -> s(x) on the first m - d output coordinates and keeps an identity
    block on the last d, so it is exactly unital, positive, and isometric
    with no tolerance. The d lightest atoms of t ride the identity block
    (matched to the weights of s by exhausting the d! assignments), hence
    the pullback error is at most twice their mass; with
    eta = eps / (2 d) and m at least ceil(1/eta) + d that mass is under
    d * eta and the pullback lands within eps of s. The error is the dual
    norm of the difference, computed both in closed form and by LP.
    """
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    d, m = s.shape[0], t.shape[0]
    if eps is not None:
        eta = eps / (2.0 * d)
        need = int(np.ceil(1.0 / eta)) + d
        if m < need:
            raise ValueError(f"need at least {need} output coordinates for eps={eps}, got {m}")
    else:
        eta = None
    if np.min(s) < -1e-12 or abs(np.sum(s) - 1.0) > 1e-9:
        raise ValueError("s must be a probability vector")
    if np.min(t) < -1e-12 or abs(np.sum(t) - 1.0) > 1e-9:
        raise ValueError("t must be a probability vector")

    light = list(np.argsort(t, kind="stable")[:d])
    block_mass = float(np.sum(t[light]))
    # match the light atoms to coordinates of s for the smallest pullback error
    best_perm, best_err = None, np.inf
    for perm in itertools.permutations(range(d)):
        err = sum(abs(t[light[i]] - block_mass * s[perm[i]]) for i in range(d))
        if err < best_err:
            best_err, best_perm = err, perm

    dom = simplex_system(d)
    cod = simplex_system(m)
    phi_mat = np.zeros((m, d))
    for i in range(m):
        if i in light:
            phi_mat[i, best_perm[light.index(i)]] = 1.0
        else:
            phi_mat[i, :] = s
    phi = LinearMap(dom, cod, phi_mat)

    pulled = t @ phi_mat
    closed = float(np.sum(np.abs(pulled - s)))
    lp_val = dom.dual_norm(pulled - s, engine=engine)
    if abs(closed - lp_val) > 1e-7:
        raise RuntimeError(f"dual norm disagreement: closed {closed} vs LP {lp_val}")
    bound = eps if eps is not None else 2.0 * block_mass
    inputs = {"s": fmt_vector(s), "t": fmt_vector(t), "phi": map_to_json(phi)}
    cert = Certificate("minimality_defect", inputs, bound, closed, tol=1e-9,
                       payload={"block_mass": fmt_real(block_mass)})
    return MinimalityResult(phi, closed, eta, block_mass, cert)


# ---------------------------------------------------------------------------
# quotient and ideal checks


class BallCheckResult:
    def __init__(self, claim, violation, witness, eps, inputs):
        self.claim = claim
        self.violation = violation
        self.witness = witness
        self.eps = eps
        self.inputs = inputs

    @property
    def feasible(self):
        return self.violation <= 1e-9

    def certificate(self):
        return Certificate(self.claim, self.inputs, 0.0, self.violation, tol=1e-9)


@register_claim("facial_quotient")
def _recheck_facial(inputs):
    space = space_from_json(inputs["space"])
    p = parse_matrix(inputs["p"])
    y = parse_vector(inputs["y"])
    eps = parse_real(inputs["eps"])
    return _facial_violation(space, p, y, eps)


def _facial_violation(space, p, y, eps, engine=None):
    w = space.norming
    n = space.dim
    nv = n + 1
    svar = n
    a_ub, b_ub = [], []
    for l in range(w.shape[0]):
        r = np.zeros(nv); r[:n] = -w[l]; r[svar] = -1.0
        a_ub.append(r); b_ub.append(0.0)                     # W v >= -s
        r = np.zeros(nv); r[:n] = w[l]; r[svar] = -1.0
        a_ub.append(r); b_ub.append(1.0)                     # W v <= 1 + s
        for sign in (1.0, -1.0):
            r = np.zeros(nv); r[:n] = -w[l]; r[svar] = -1.0
            a_ub.append(r); b_ub.append(-float(w[l] @ (sign * y)) + eps)  # W(v - sign*y) >= -eps - s
    for q in range(p.shape[0]):
        for sign in (1.0, -1.0):
            r = np.zeros(nv); r[:n] = sign * p[q]; r[svar] = -1.0
            a_ub.append(r); b_ub.append(eps)                 # |P v| <= eps + s
    c_obj = np.zeros(nv); c_obj[svar] = 1.0
    res = solve_lp(c_obj, np.array(a_ub), np.array(b_ub), maximize=False, engine=engine)
    return max(res.value, 0.0)


def facial_quotient_check(system, p, y, eps, engine=None):
    """Order side ideal check at one kernel sample.

    Asks for v in the order interval [0, unit] (up to slack), annihilated
    by the quotient matrix p up to eps, dominating both y and -y in the
    order up to eps. The reported violation is the smallest slack making
    the system feasible: zero for honest facial kernels, quantifiably
    positive when the kernel cannot dominate its own samples.
    """
    p = np.atleast_2d(np.asarray(p, dtype=float))
    y = np.asarray(y, dtype=float)
    violation = _facial_violation(system, p, y, eps, engine=engine)
    inputs = {
        "space": space_to_json(system),
        "p": fmt_matrix(p),
        "y": fmt_vector(y),
        "eps": fmt_real(eps),
    }
    return BallCheckResult("facial_quotient", violation, None, eps, inputs)


@register_claim("biface_ball")
def _recheck_biface(inputs):
    space = space_from_json(inputs["space"])
    p = parse_matrix(inputs["p"])
    x = parse_vector(inputs["x"])
    y = parse_vector(inputs["y"])
    eps = parse_real(inputs["eps"])
    return _biface_violation(space, p, x, y, eps)


def _biface_violation(space, p, x, y, eps, engine=None):
    w = space.norming
    n = space.dim
    nv = n + 1
    svar = n
    a_ub, b_ub = [], []
    for shift in (x + y, x - y):
        base = w @ shift
        for l in range(w.shape[0]):
            for sign in (1.0, -1.0):
                r = np.zeros(nv); r[:n] = sign * w[l]; r[svar] = -1.0
                a_ub.append(r); b_ub.append(1.0 + eps + sign * base[l])  # |W(v - shift)| <= 1 + eps + s
    for q in range(p.shape[0]):
        for sign in (1.0, -1.0):
            r = np.zeros(nv); r[:n] = sign * p[q]; r[svar] = -1.0
            a_ub.append(r); b_ub.append(eps)
    c_obj = np.zeros(nv); c_obj[svar] = 1.0
    res = solve_lp(c_obj, np.array(a_ub), np.array(b_ub), maximize=False, engine=engine)
    return max(res.value, 0.0)


def biface_check(space, p, x, y, eps, engine=None):
    """Two sided ball intersection check for the kernel of p at (x, y).

    x is a unit ball element of the space, y a unit ball element of the
    kernel. A kernel with the ideal intersection property admits v close
    to the kernel with both x + y and x - y within the closed unit ball
    around it, up to eps. Violation zero certifies the instance; a
    positive violation is a quantified counterexample.
    """
    p = np.atleast_2d(np.asarray(p, dtype=float))
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    violation = _biface_violation(space, p, x, y, eps, engine=engine)
    inputs = {
        "space": space_to_json(space),
        "p": fmt_matrix(p),
        "x": fmt_vector(x),
        "y": fmt_vector(y),
        "eps": fmt_real(eps),
    }
    return BallCheckResult("biface_ball", violation, None, eps, inputs)


def kernel_basis(p, tol=1e-10):
    """Orthonormal basis of ker p with deterministic signs."""
    p = np.atleast_2d(np.asarray(p, dtype=float))
    _, sv, vt = np.linalg.svd(p)
    rank = int(np.sum(sv > tol * max(1.0, sv[0] if sv.size else 1.0)))
    basis = vt[rank:].T
    cols = []
    for c in basis.T:
        nz = np.nonzero(np.abs(c) > 1e-12)[0]
        if nz.size and c[nz[0]] < 0:
            c = -c
        cols.append(c)
    return np.column_stack(cols) if cols else np.zeros((p.shape[1], 0))


def find_biface_counterexample(space, p, eps, threshold=None, engine=None):
    """Grid search for a quantified failure of the ball intersection check.

    Scans sign-pattern ball elements x and kernel combinations y scaled to
    the unit ball; returns the first (x, y, violation) with violation
    above the threshold (default: eps), or None.
    """
    p = np.atleast_2d(np.asarray(p, dtype=float))
    if threshold is None:
        threshold = eps
    basis = kernel_basis(p)
    if basis.shape[1] == 0:
        return None
    xs = []
    for bits in itertools.product([-1.0, 0.0, 1.0], repeat=space.dim):
        v = np.array(bits)
        nv = space.norm(v)
        if nv > 1e-12:
            xs.append(v / nv)
    ys = []
    for bits in itertools.product([-1.0, 0.0, 1.0], repeat=basis.shape[1]):
        coef = np.array(bits)
        if not np.any(coef):
            continue
        v = basis @ coef
        nv = space.norm(v)
        if nv > 1e-12:
            ys.append(v / nv)
    for y in ys:
        for x in xs:
            violation = _biface_violation(space, p, x, y, eps, engine=engine)
            if violation > threshold:
                return x, y, violation
    return None
