"""Dense-face state towers, minimality pullbacks, and quotient ball checks.

Three constructions share the simplex machinery. The tower appends one
coordinate per step, each evaluating a freshly drawn target state, and logs
how well the extreme points cover the state space. The minimality map pulls
a state on a large simplex back onto a small one through an exactly unital
positive isometry, giving up only the mass of the lightest atoms. The ball
checks certify which coordinate kernels cut faces out of the unit ball.
"""

import numpy as np

from fraisse.certify import parse_real, verify_certificate
from fraisse.spaces import LinfSpace
from fraisse.unital import (
    biface_check,
    build_poulsen_chain,
    facial_quotient_check,
    find_biface_counterexample,
    kernel_basis,
    minimality_map,
    simplex_system,
)

chain = build_poulsen_chain(depth=4, targets_per_step=2, seed=0)
print("system dims", [s.dim for s in chain.stages])
radii = [parse_real(rec["cover_radius"]) for rec in chain.records]
print("cover radii", " ".join(f"{r:.3f}" for r in radii))
print("content hash", chain.content_hash()[:16])

# pull a ten atom state back onto two atoms, keeping the unit and positivity
# on the nose; the loss is twice the mass parked on the dropped atoms
rng = np.random.default_rng(3)
s = rng.dirichlet(np.ones(2))
t = rng.dirichlet(np.ones(10))
res = minimality_map(s, t, eps=0.5)
print(f"pullback defect {res.defect:.4f} against eps 0.5, block mass {res.block_mass:.4f}")
print(res.certificate.summary_line())

# coordinate kernels cut honest faces
sys3 = simplex_system(3)
p = np.array([[1.0, 0.0, 0.0]])
y = np.array([0.0, 1.0, 0.0])
print("facial", facial_quotient_check(sys3, p, y, eps=1e-6).feasible)

space = LinfSpace(4)
pb = np.hstack([np.eye(2), np.zeros((2, 2))])
x4 = np.array([0.0, 0.0, 1.0, 0.0])
y4 = np.array([0.0, 0.0, 0.0, 1.0])
print("biface", biface_check(space, pb, x4, y4, eps=1e-6).feasible)

# a skew kernel is not a coordinate quotient: the search returns a witness
# pair and the failed certificate still verifies faithfully
skew = np.array([[1.0, -1.0, 0.0]])
print("skew kernel basis", kernel_basis(skew).shape)
found = find_biface_counterexample(LinfSpace(3), skew, eps=0.1)
x, yv, violation = found
bad = biface_check(LinfSpace(3), skew, x, yv, eps=0.1)
cert = bad.certificate()
ok, again = verify_certificate(cert)
print(f"violation {violation:.3f}, certificate passed {cert.passed}, faithful {ok}")
