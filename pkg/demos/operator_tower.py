"""An absorbing operator tower, its test battery, and a matrix state pullback.

The arrow tower folds scaled anchors into itself one stage at a time; each
fold leaves a record with the promised bound, the measured defect, and a
witness pair replaying the absorption. The battery turns those records into
frozen test items. The last section runs the finite matrix analogue: a
counting argument over a projector family finds a light block, and the
compression onto it transports a state of the big algebra onto the small one
within an explicit sampled bound.
"""

import numpy as np

from fraisse.certify import verify_certificate
from fraisse.spaces import LinearMap, LinfSpace
from fraisse.trace_states import (
    MatrixState,
    minimal_embedding,
    projector_family,
    random_density,
)
from fraisse.unital import simplex_system
from fraisse.universal import (
    build_universal_operator_chain,
    build_universal_state_chain,
    check_universal_operator_property,
    check_universal_state_property,
    generate_operator_battery,
    surjectivity_defect,
)

chain = build_universal_operator_chain(depth=4, seed=0)
dims = [(s.t.dom.dim, s.t.cod.dim) for s in chain.stages]
print("arrow stages", dims)
print("content hash", chain.content_hash()[:16])
sj = surjectivity_defect(chain, probes=20, base_stage=1, seed=3)
print("surjectivity defect", " ".join(f"{v:.3f}" for v in sj))

battery = generate_operator_battery(chain, count=6, eps=0.2)
print(f"battery of {len(battery)} items:", ", ".join(b["tag"] for b in battery))
for item in battery[:3]:
    res = check_universal_operator_property(chain, item["l"], eps=0.2, hints=[item["hint"]])
    print(
        f"  {item['tag']}: defect {res.defect:.4f} via {res.via}, "
        f"passed {res.passed}"
    )

# the bare search route recovers the one dimensional anchors from the
# candidate pool alone; the two dimensional templates need their hint
probe = battery[0]["l"]
res = check_universal_operator_property(chain, probe, eps=0.25)
print(f"{battery[0]['tag']} without hint: via {res.via}, passed {res.passed}")
cert = res.certificate(probe, chain.top.t)
ok, _ = verify_certificate(cert)
print("absorption certificate faithful", ok)

states = build_universal_state_chain(depth=4, seed=0)
print("state tower dims", [s.dim for s in states.chain.stages])
print(
    "compatibility defects",
    [states.compatibility_defect(k) for k in range(states.depth)],
)
sigma = np.array([0.25, 0.75])
out = check_universal_state_property(states, simplex_system(2), sigma, eps=0.1)
print(f"state absorption defect {out.defect:.2e}, passed {out.passed}")
print(out.state_certificate.summary_line())

# finite matrix analogue at a small scale: ell = 4 needs 49 blocks
ell = 4
fam = projector_family(2)
k = ell * len(fam) + 1
rng = np.random.default_rng(2)
s = MatrixState(random_density(2 * k, rng))
t = MatrixState(random_density(2, rng))
emb = minimal_embedding(s, t, ell=ell, seed=0, samples=400)
print(
    f"light block norm {emb.block_norm:.4f} and trace {emb.block_trace:.4f} "
    f"against {8.0/ell}"
)
print(emb.certificate.summary_line())
