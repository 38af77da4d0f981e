"""Stage towers: nets, growth, certified extension, coupling, factorization."""

import numpy as np
import pytest

from fraisse.certify import parse_real, verify_certificate
from fraisse.chains import (
    ResourceLimitError,
    StageChain,
    back_and_forth,
    build_gurarij_chain,
    build_morphism_net,
    certify_extension,
    nuclearity_witness,
)
from fraisse.spaces import BANACH, LinearMap, LinfSpace, NormedSpace, map_dist


@pytest.fixture(scope="module")
def small_chain():
    return build_gurarij_chain(depth=3, dim_cap=12, net_resolution=0.25, seed=0)


def test_net_members_are_near_contractions():
    net = build_morphism_net(LinfSpace(1), LinfSpace(2), resolution=0.5, cap=500)
    assert net.certified
    assert len(net) == net.total
    for t in net.maps():
        assert t.op_norm() <= 1.0 + 0.5 + 1e-9


def test_net_covers_a_given_contraction():
    res = 0.5
    net = build_morphism_net(LinfSpace(1), LinfSpace(1), resolution=res, cap=500)
    rng = np.random.default_rng(5)
    for _ in range(10):
        t = LinearMap(LinfSpace(1), LinfSpace(1), [[float(rng.uniform(-1, 1))]])
        best = min(map_dist(t, u) for u in net.maps())
        assert best <= res / 2.0 + 1e-9


def test_net_certified_cap_raises():
    with pytest.raises(ResourceLimitError, match="cap"):
        build_morphism_net(
            LinfSpace(3), LinfSpace(3), resolution=0.05, cap=10, require_certified=True
        )


def test_net_sampling_fallback():
    net = build_morphism_net(LinfSpace(2), LinfSpace(2), resolution=0.25, cap=50)
    assert not net.certified
    assert len(net) <= 50


def test_net_bad_resolution():
    with pytest.raises(ValueError, match="positive"):
        build_morphism_net(LinfSpace(1), LinfSpace(1), resolution=0.0)


def test_chain_growth_and_isometric_connectives(small_chain):
    chain = small_chain
    assert chain.depth == 3
    dims = [s.dim for s in chain.stages]
    assert dims[0] == 1
    assert all(a <= b for a, b in zip(dims, dims[1:]))
    for conn in chain.connectives:
        assert conn.op_norm() <= 1.0 + 1e-9
        assert conn.distortion() <= 1e-9


def test_chain_records_within_bounds(small_chain):
    assert len(small_chain.records) >= 3
    for rec in small_chain.records:
        delta = parse_real(rec["delta"])
        defect = parse_real(rec["defect"])
        assert defect <= BANACH(delta) + 1e-7
        assert rec["mode"] in ("amalgam", "extend")
        assert 0 <= rec["stage"] <= rec["resolved_stage"] <= small_chain.depth


def test_chain_connecting_identities(small_chain):
    chain = small_chain
    ident = chain.connecting(1, 1)
    assert np.array_equal(ident.matrix, np.eye(chain.stages[1].dim))
    via = chain.connecting(1, 3)
    step = chain.connecting(2, 3) @ chain.connecting(1, 2)
    assert np.max(np.abs(via.matrix - step.matrix)) <= 1e-12


def test_chain_determinism_and_roundtrip(small_chain):
    again = build_gurarij_chain(depth=3, dim_cap=12, net_resolution=0.25, seed=0)
    assert again.content_hash() == small_chain.content_hash()
    other = build_gurarij_chain(depth=3, dim_cap=12, net_resolution=0.25, seed=1)
    assert other.content_hash() != small_chain.content_hash()
    back = StageChain.from_json(small_chain.to_json())
    assert back.content_hash() == small_chain.content_hash()
    assert [s.dim for s in back.stages] == [s.dim for s in small_chain.stages]


def test_certify_extension_and_certificate(small_chain):
    chain = small_chain
    k = 1
    src = LinfSpace(1)
    phi = LinearMap(src, LinfSpace(2), [[1.0], [0.0]])
    f = LinearMap(src, chain.stages[k], np.eye(chain.stages[k].dim)[:, :1])
    res = certify_extension(chain, phi, f, k, delta=0.05)
    assert res.defect <= res.bound + 1e-9
    assert res.g.op_norm() <= 1.0 + 1e-7
    f_top = chain.connecting(k, res.stage) @ f
    cert = res.certificate(phi, f_top)
    assert cert.passed
    ok, again = verify_certificate(cert)
    assert ok
    assert again == pytest.approx(res.defect, abs=1e-9)


def test_back_and_forth_trace(small_chain):
    chain = small_chain
    delta = 0.05
    src = LinfSpace(1)
    e0 = np.zeros((chain.stages[1].dim, 1))
    e0[0, 0] = 1.0 - delta / 2.0
    e1 = np.zeros((chain.stages[1].dim, 1))
    e1[min(1, chain.stages[1].dim - 1), 0] = 1.0
    f = LinearMap(src, chain.stages[1], e0)
    g = LinearMap(src, chain.stages[1], e1)
    res = back_and_forth(chain, f, 1, g, 1, delta=delta, rounds=4)
    assert res.defect <= res.bound + 1e-7
    assert all(b <= a + 1e-12 for a, b in zip(res.trace, res.trace[1:]))
    f_top = chain.connecting(1, chain.depth) @ f
    g_top = chain.connecting(1, chain.depth) @ g
    cert = res.certificate(f_top, g_top, BANACH, delta)
    assert cert.passed
    ok, _ = verify_certificate(cert)
    assert ok


def test_nuclearity_witness_linf_exact():
    w = nuclearity_witness(LinfSpace(3))
    assert w.defect == 0.0
    assert w.norm_bound == pytest.approx(1.0)
    assert w.through_dim == 3


def test_nuclearity_witness_presented_space():
    sp = NormedSpace([[1.0, 1.0], [1.0, -1.0], [0.3, 0.9]])
    w = nuclearity_witness(sp)
    assert w.through_dim == sp.rows
    ident = LinearMap.identity(sp)
    assert map_dist(w.rho @ w.gamma, ident) <= w.defect + 1e-9
    cert = w.certificate(sp)
    assert cert.passed
    ok, _ = verify_certificate(cert)
    assert ok
