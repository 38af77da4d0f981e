"""Amalgamation and approximate pushouts of presented spaces.

The near-amalgamation takes two almost-embeddings of a common space E and
reconciles them inside the sup-product of their targets; the approximate
pushout does the same one-sidedly, with a finite witness family standing
in for a product over all compatible test pairs. One witness per norming
row of the codomain is what makes the canonical map into the pushout an
exact isometry, so nothing downstream depends on a property we did not
construct. The arrow-category variant amalgamates a square of maps and
induces the connecting map by injecting the target presentation's rows as
witnesses, which makes its two commutation identities hold exactly.
"""

import numpy as np

from .certify import Certificate, map_to_json, register_claim, map_from_json, fmt_real, parse_real, modulus_to_json, modulus_from_json, fmt_vector, parse_vector
from .lp import solve_lp
from .spaces import (
    BANACH,
    ISO_TOL,
    MORPHISM_TOL,
    LinearMap,
    LinfSpace,
    NormedSpace,
    extend_morphism,
    map_dist,
)

SPAN_TOL = 1e-8


def joint_embed(x, y):
    """Embed two spaces side by side in the sup-product of their presentations."""
    z = LinfSpace(x.rows + y.rows)
    ix = LinearMap(x, z, np.vstack([x.norming, np.zeros((y.rows, x.dim))]))
    iy = LinearMap(y, z, np.vstack([np.zeros((x.rows, y.dim)), y.norming]))
    return z, ix, iy


class AmalgamResult:
    def __init__(self, z, i, j, defect, delta, modulus):
        self.z = z
        self.i = i
        self.j = j
        self.defect = defect
        self.delta = delta
        self.modulus = modulus

    @property
    def bound(self):
        return self.modulus(self.delta)

    def certificate(self, f_x, f_y, tol=1e-7):
        inputs = {
            "f_x": map_to_json(f_x),
            "f_y": map_to_json(f_y),
            "i": map_to_json(self.i),
            "j": map_to_json(self.j),
            "delta": fmt_real(self.delta),
            "modulus": modulus_to_json(self.modulus),
        }
        return Certificate("nap_defect", inputs, self.bound, self.defect, tol=tol)


@register_claim("nap_defect")
def _recheck_nap(inputs):
    i = map_from_json(inputs["i"])
    j = map_from_json(inputs["j"])
    f_x = map_from_json(inputs["f_x"])
    f_y = map_from_json(inputs["f_y"])
    return map_dist(i @ f_x, j @ f_y)


def nap_amalgamate(f_x, f_y, delta=None, modulus=BANACH, engine=None):
    """Amalgamate two almost-embeddings of E into injective targets.

    f_x: E -> X, f_y: E -> Y with distortion <= delta, X and Y identity
    normed. Z is the sup-product X (+) Y; the first leg keeps X and smears
    it into Y by an extension of f_y along f_x, the second symmetrically,
    so both legs are exact isometries and the reconciliation defect is at
    most modulus(delta).
    """
    if f_x.dom.dim != f_y.dom.dim:
        raise ValueError("the two almost-embeddings must share their domain")
    if not (f_x.cod.is_linf and f_y.cod.is_linf):
        raise ValueError("amalgamation targets must be identity normed")
    if delta is None:
        delta = max(f_x.distortion(engine=engine), f_y.distortion(engine=engine))
    if delta >= 1.0:
        raise ValueError(f"delta = {delta} >= 1 rejected")
    h_x = extend_morphism(f_x, f_y, delta=delta, modulus=modulus, check=False, engine=engine)
    h_y = extend_morphism(f_y, f_x, delta=delta, modulus=modulus, check=False, engine=engine)
    nx, ny = f_x.cod.dim, f_y.cod.dim
    z = LinfSpace(nx + ny)
    i = LinearMap(f_x.cod, z, np.vstack([np.eye(nx), h_x.matrix]))
    j = LinearMap(f_y.cod, z, np.vstack([h_y.matrix, np.eye(ny)]))
    defect = map_dist(i @ f_x, j @ f_y, engine=engine)
    return AmalgamResult(z, i, j, defect, delta, modulus)


class PushoutResult:
    def __init__(self, yhat, fhat, j, family, defect, delta, modulus):
        self.yhat = yhat
        self.fhat = fhat
        self.j = j
        self.family = family
        self.defect = defect
        self.delta = delta
        self.modulus = modulus

    @property
    def bound(self):
        return self.modulus(self.delta)

    def family_json(self):
        return [
            {"tag": tag, "g": fmt_vector(g), "h": fmt_vector(h)} for tag, g, h in self.family
        ]

    def certificate(self, phi, f, tol=1e-7, bound=None):
        inputs = {
            "phi": map_to_json(phi),
            "f": map_to_json(f),
            "fhat": map_to_json(self.fhat),
            "j": map_to_json(self.j),
            "delta": fmt_real(self.delta),
            "modulus": modulus_to_json(self.modulus),
            "family": self.family_json(),
        }
        return Certificate(
            "pushout_defect", inputs, self.bound if bound is None else bound, self.defect, tol=tol
        )


@register_claim("pushout_defect")
def _recheck_pushout(inputs):
    phi = map_from_json(inputs["phi"])
    f = map_from_json(inputs["f"])
    fhat = map_from_json(inputs["fhat"])
    j = map_from_json(inputs["j"])
    return map_dist(fhat @ phi, j @ f)


def _independent_columns(cols, tol=SPAN_TOL):
    """Greedy deterministic pick of a well-conditioned spanning subset."""
    picked = []
    idx = []
    for k, col in enumerate(cols.T):
        trial = picked + [col]
        sv = np.linalg.svd(np.column_stack(trial), compute_uv=False)
        if sv[-1] > tol * max(1.0, sv[0]):
            picked = trial
            idx.append(k)
    return np.column_stack(picked), idx


def _coords_in(basis, vectors, what):
    sol, residual, *_ = np.linalg.lstsq(basis, vectors, rcond=None)
    resid = np.max(np.abs(basis @ sol - vectors)) if vectors.size else 0.0
    if resid > 1e-6:
        raise ValueError(f"{what}: generators do not lie in the constructed span (residual {resid:.3e})")
    return sol

def approx_pushout(phi, f, delta=None, modulus=BANACH, extra_pairs=None, over_tuple=None, engine=None):
    """Push f: X -> Y out along the almost-embedding phi: X -> Xhat.

    The witness family holds one scalar pair per norming row h of Y: a
    partner g on Xhat with sup|g(phi(.)) - h(f(.))| <= modulus(delta),
    found by extension along phi. Stacking those coordinates gives
    j: Y -> Yhat exactly isometric; when f is itself an almost-embedding
    (distortion <= delta), rows of Xhat join the family the same way and
    fhat becomes isometric too. Yhat is the linear span of both ranges in
    the sup-product of the family. extra_pairs (tag "extra") are appended
    verbatim: contraction pairs the caller wants carried as coordinates.
    over_tuple restricts the measured defect to a tuple of domain vectors.
    """
    if phi.dom.dim != f.dom.dim:
        raise ValueError("phi and f must share their domain")
    if delta is None:
        delta = phi.distortion(engine=engine)
    if delta >= 1.0:
        raise ValueError(f"delta = {delta} >= 1 rejected")
    if phi.distortion(engine=engine) > delta + MORPHISM_TOL:
        raise ValueError("phi has more distortion than promised")
    if f.op_norm(engine=engine) > 1.0 + MORPHISM_TOL:
        raise ValueError("f must be a contraction")
    one = LinfSpace(1)
    family = []
    for row in f.cod.norming:
        hf = LinearMap(f.dom, one, (row @ f.matrix).reshape(1, -1))
        g = extend_morphism(phi, hf, delta=delta, modulus=modulus, check=False, engine=engine)
        family.append(("cod", g.matrix.ravel().copy(), row.copy()))
    if f.distortion(engine=engine) <= delta + MORPHISM_TOL:
        for row in phi.cod.norming:
            gp = LinearMap(phi.dom, one, (row @ phi.matrix).reshape(1, -1))
            h = extend_morphism(f, gp, delta=delta, modulus=modulus, check=False, engine=engine)
            family.append(("dom", row.copy(), h.matrix.ravel().copy()))
    for g, h in extra_pairs or []:
        family.append(("extra", np.asarray(g, dtype=float).copy(), np.asarray(h, dtype=float).copy()))

    g_rows = np.array([g for _, g, _ in family])
    h_rows = np.array([h for _, _, h in family])
    generators = np.hstack([g_rows, h_rows])
    basis, _ = _independent_columns(generators)
    yhat = NormedSpace(basis, label="pushout")
    fhat = LinearMap(phi.cod, yhat, _coords_in(basis, g_rows, "pushout fhat"))
    j = LinearMap(f.cod, yhat, _coords_in(basis, h_rows, "pushout j"))
    if over_tuple is None:
        defect = map_dist(fhat @ phi, j @ f, engine=engine)
    else:
        diff = fhat @ phi - j @ f
        defect = max(yhat.norm(diff.apply(a)) for a in over_tuple)
    return PushoutResult(yhat, fhat, j, family, defect, delta, modulus)


class ArrowObject:
    """An object of the arrow class: a contraction between two spaces."""

    def __init__(self, t, label=None):
        self.t = t
        self.label = label or f"arrow({t.dom.label} -> {t.cod.label})"

    @property
    def dom(self):
        return self.t.dom

    @property
    def cod(self):
        return self.t.cod

    def __repr__(self):
        return f"ArrowObject({self.label})"


class ArrowMorphism:
    """A pair of maps intertwining two arrows up to a measured defect."""

    def __init__(self, src, dst, a0, a1):
        if a0.dom.dim != src.dom.dim or a0.cod.dim != dst.dom.dim:
            raise ValueError("a0 does not connect the arrow domains")
        if a1.dom.dim != src.cod.dim or a1.cod.dim != dst.cod.dim:
            raise ValueError("a1 does not connect the arrow codomains")
        self.src = src
        self.dst = dst
        self.a0 = a0
        self.a1 = a1

    def square_defect(self, engine=None):
        return map_dist(self.dst.t @ self.a0, self.a1 @ self.src.t, engine=engine)

    def distortion(self, engine=None):
        """Arrow-level distortion: component distortions plus the square defect."""
        return max(
            self.a0.distortion(engine=engine),
            self.a1.distortion(engine=engine),
            self.square_defect(engine=engine),
        )

    def compose(self, other):
        """self after other (other: R -> S, self: S -> T)."""
        return ArrowMorphism(other.src, self.dst, self.a0 @ other.a0, self.a1 @ other.a1)


class ArrowPushoutResult:
    def __init__(self, shat, fhat, j, d0, d1, defect, delta, modulus):
        self.shat = shat
        self.fhat = fhat
        self.j = j
        self.d0 = d0
        self.d1 = d1
        self.defect = defect
        self.delta = delta
        self.modulus = modulus

    @property
    def bound(self):
        return self.modulus(self.delta) + 2.0 * self.delta

    def certificate(self, phi, f, tol=1e-7):
        inputs = {
            "that": map_to_json(phi.dst.t),
            "s": map_to_json(f.dst.t),
            "shat": map_to_json(self.shat.t),
            "phi0": map_to_json(phi.a0),
            "phi1": map_to_json(phi.a1),
            "f0": map_to_json(f.a0),
            "f1": map_to_json(f.a1),
            "fhat0": map_to_json(self.fhat.a0),
            "fhat1": map_to_json(self.fhat.a1),
            "j0": map_to_json(self.j.a0),
            "j1": map_to_json(self.j.a1),
            "delta": fmt_real(self.delta),
            "modulus": modulus_to_json(self.modulus),
        }
        return Certificate("arrow_pushout_defect", inputs, self.bound, self.defect, tol=tol)


@register_claim("arrow_pushout_defect")
def _recheck_arrow(inputs):
    d0 = map_dist(
        map_from_json(inputs["fhat0"]) @ map_from_json(inputs["phi0"]),
        map_from_json(inputs["j0"]) @ map_from_json(inputs["f0"]),
    )
    d1 = map_dist(
        map_from_json(inputs["fhat1"]) @ map_from_json(inputs["phi1"]),
        map_from_json(inputs["j1"]) @ map_from_json(inputs["f1"]),
    )
    return max(d0, d1)


def arrow_pushout(phi, f, delta=None, modulus=BANACH, engine=None):
    """Amalgamate the arrows phi.dst and f.dst over their common source arrow.

    phi: T -> That with arrow distortion <= delta, f: T -> S an exact
    intertwining pair. The codomain square is pushed out first; its
    presentation rows, composed with (fhat1 That, j1 S), ride along as
    witnesses of the domain pushout, and reading those coordinates back
    off gives the connecting contraction Shat with
    Shat fhat0 = fhat1 That and Shat j0 = j1 S exactly. The measured
    defect is the worse of the two squares, bounded by
    modulus(delta) + 2 delta.
    """
    if phi.src is not f.src and (
        phi.src.dom.dim != f.src.dom.dim or phi.src.cod.dim != f.src.cod.dim
    ):
        raise ValueError("phi and f must start at the same arrow")
    if delta is None:
        delta = phi.distortion(engine=engine)
    if delta >= 1.0:
        raise ValueError(f"delta = {delta} >= 1 rejected")
    if f.square_defect(engine=engine) > MORPHISM_TOL:
        raise ValueError("f must intertwine exactly (up to tolerance)")

    d1 = approx_pushout(phi.a1, f.a1, delta=delta, modulus=modulus, engine=engine)
    u = d1.fhat @ phi.dst.t
    v = d1.j @ f.dst.t
    arrow_rows = [
        (row @ u.matrix, row @ v.matrix) for row in d1.yhat.norming
    ]
    base_d0 = approx_pushout(
        phi.a0, f.a0, delta=delta, modulus=modulus, extra_pairs=arrow_rows, engine=engine
    )
    # The arrow witnesses sit in the last k1 rows of the domain pushout's
    # presentation (family order is preserved by the basis pick), so reading
    # those coordinates off a point of Yhat0 gives the sup-coordinates of its
    # image in Yhat1; solving against the Yhat1 basis recovers the connecting
    # contraction exactly on the whole span.
    k1 = len(arrow_rows)
    tail = base_d0.yhat.norming[-k1:, :]
    shat_matrix = _coords_in(d1.yhat.norming, tail, "arrow connecting map")
    shat = ArrowObject(LinearMap(base_d0.yhat, d1.yhat, shat_matrix))
    fhat = ArrowMorphism(phi.dst, shat, base_d0.fhat, d1.fhat)
    j = ArrowMorphism(f.dst, shat, base_d0.j, d1.j)
    defect = max(base_d0.defect, d1.defect)
    return ArrowPushoutResult(shat, fhat, j, base_d0, d1, defect, delta, modulus)
