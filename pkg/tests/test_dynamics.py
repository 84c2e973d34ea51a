import math

import numpy as np
import pytest

from holonorm.dynamics import (ChartAtlas, ProjectiveEndomorphism, assemble_theorem_A, backward_orbit,
                               birkhoff_exponents, build_cocycle, chart_jet, chart_map, convexity_defect,
                               critical_test, estimate_spectrum, finite_time_exponents, from_affine,
                               oseledec_reduce, sample_equilibrium, sample_pullback_pair, to_affine,
                               verify_theorem_A)
from holonorm.exceptions import OrbitError
from holonorm.jets import evaluate
from holonorm.spectrum import LyapunovSpectrum

LOG2 = math.log(2)
Z2 = ProjectiveEndomorphism.power_map(1)
TORUS = ProjectiveEndomorphism.power_map(2)


def test_critical_test_examples():
    assert critical_test(Z2, from_affine([0.0]))[0]
    crit, det = critical_test(Z2, from_affine([1.0]), atlas=ChartAtlas("affine"))
    assert not crit and det == pytest.approx(2.0)
    crit, det = critical_test(TORUS, from_affine([1.0, 1.0]), atlas=ChartAtlas("affine"))
    assert not crit and det == pytest.approx(4.0)


def test_backward_orbit_fixed_point():
    orb = backward_orbit(Z2, from_affine([1.0]), 10, branch="nearest")
    assert np.allclose(to_affine(orb.points)[:, 0], 1.0, atol=1e-14)


def test_backward_orbit_on_circle():
    for seed in range(3):
        orb = backward_orbit(Z2, from_affine([-1.0]), 10, rng_seed=seed)
        z = to_affine(orb.points)[:, 0]
        assert np.allclose(np.abs(z), 1.0, atol=1e-12)
        assert np.isclose(abs(z[1]), 1) and min(abs(z[1] - 1j), abs(z[1] + 1j)) < 1e-12
        assert np.max(orb.residuals) <= 1e-12


def test_backward_orbit_critical_seed():
    with pytest.raises(OrbitError):
        backward_orbit(Z2, from_affine([0.0]), 3)


def test_backward_orbit_residuals_for_polynomial():
    f = ProjectiveEndomorphism.polynomial([-1, 0, 1])
    orb = backward_orbit(f, from_affine([0.3 + 0.2j]), 12, rng_seed=4)
    assert np.max(orb.residuals) <= 1e-12
    assert np.all(orb.radii > 0) and np.all(orb.radii <= 1)


def test_sample_equilibrium_z2():
    X = sample_equilibrium(Z2, from_affine([0.3 + 0.4j]), 30, 500, rng_seed=0)
    z = to_affine(X)[:, 0]
    assert np.max(np.abs(np.abs(z) - 1)) <= 1e-6
    assert birkhoff_exponents(Z2, X)[0] == pytest.approx(LOG2, abs=0.01)


def test_torus_exponents():
    X = sample_equilibrium(TORUS, from_affine([0.8 + 0.3j, 1.2 - 0.5j]), 25, 60, rng_seed=1)
    lam = birkhoff_exponents(TORUS, X)
    assert np.allclose(lam, LOG2, atol=0.02)


def test_cocycle_linear_parts():
    orb = backward_orbit(Z2, from_affine([1.0]), 5, branch="nearest")
    coc = build_cocycle(Z2, orb, ChartAtlas("affine"))
    assert np.allclose(coc.linear_parts[:, 0, 0], 0.5)
    orb = backward_orbit(TORUS, from_affine([1.0, 1.0]), 5, branch="nearest")
    coc = build_cocycle(TORUS, orb, ChartAtlas("affine"))
    assert np.allclose(coc.linear_parts, 0.5 * np.eye(2), atol=1e-14)


def test_cocycle_local_inverse_series():
    # the local inverse of (1 + z)^2 - 1 at 0 is sqrt(1 + z) - 1
    orb = backward_orbit(Z2, from_affine([1.0]), 2, branch="nearest")
    coc = build_cocycle(Z2, orb, ChartAtlas("affine"))
    F = coc.maps[0]
    series = [0.5, -0.125, 0.0625, -0.0390625, 0.02734375]
    assert np.allclose([F.coefficient(0, (m,)) for m in range(1, 6)], series, atol=1e-12)


def test_cocycle_jet_consistency():
    f = ProjectiveEndomorphism.polynomial([-1, 0, 1])
    orb = backward_orbit(f, from_affine([0.3 + 0.2j]), 4, rng_seed=0)
    atlas = ChartAtlas()
    coc = build_cocycle(f, orb, atlas)
    rng = np.random.default_rng(0)
    for n in range(coc.n_min, coc.n_max + 1):
        if n < 0:
            continue
        src, dst = atlas.chart(orb.point(-n - 1)), atlas.chart(orb.point(-n))
        r = 1e-3
        v = r * (rng.random((20, 1)) - 0.5)
        back = coc.map_at(n)(chart_map(f, src, dst, v))
        assert np.max(np.abs(back - v)) <= 1e-9


def test_oseledec_exact_diagonal():
    A = np.repeat(np.diag([0.5, 1 / 3])[None], 10, axis=0)
    spec = LyapunovSpectrum((math.log(3), LOG2), (1, 1))
    od = oseledec_reduce(A[:, ::-1, ::-1], spec, 0.01)
    assert od.mode == "exact-diagonal"
    assert np.allclose(od.C, np.eye(2))


def test_oseledec_recovers_rotated_cocycle():
    th = 0.4
    R = np.array([[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]])
    A = np.repeat((R @ np.diag([1 / 3, 0.5]) @ R.T)[None], 60, axis=0)
    spec = LyapunovSpectrum((math.log(3), LOG2), (1, 1))
    od = oseledec_reduce(A, spec, 0.01, window=20)
    assert od.mode != "exact-diagonal"
    assert np.max(od.leakage) <= 1e-8


def test_finite_time_exponents_product():
    orb = backward_orbit(TORUS, from_affine([np.exp(1j), np.exp(2.5j)]), 12, rng_seed=5)
    coc = build_cocycle(TORUS, orb)
    est = finite_time_exponents(coc.linear_parts)
    assert np.allclose(est, LOG2, atol=0.02)
    spec = estimate_spectrum(coc)
    assert spec.exponents == pytest.approx((LOG2,), abs=0.02) and spec.multiplicities == (2,)


@pytest.fixture(scope="module")
def z2_fixed():
    orb = backward_orbit(Z2, from_affine([1.0]), 13, branch="nearest", n_forward=13)
    data = assemble_theorem_A(Z2, orb)
    return data, verify_theorem_A(data)


def test_theorem_a_fixed_point(z2_fixed):
    data, rep = z2_fixed
    assert rep.ok
    rows = {r["n"]: r for r in rep.rows}
    assert rows[0]["lip_low"] >= 1 - 1e-9 and rows[0]["lip_high"] <= data.h_hat * (1 + 1e-9)
    assert rows[10]["pass"]
    assert all(r["residual"] <= 1e-7 * data.r_hat for r in rep.rows)


def test_theorem_a_chain_is_local_inverse(z2_fixed):
    data, _ = z2_fixed
    W = data.chain.maps[0]
    assert W.coefficient(0, (1,)) == pytest.approx(0.5)
    assert data.result.diagnostics["diagram"].ok


def test_theorem_a_block_bounds_and_slowness(z2_fixed):
    _, rep = z2_fixed
    assert all(b["pass"] for b in rep.block_bounds)
    assert rep.slow == {"rho": True, "r": True, "h_inv": True}


def test_convexity_examples(z2_fixed):
    data, _ = z2_fixed
    rng = np.random.default_rng(0)
    p, q = sample_pullback_pair(data, 0.5, 8, rng)
    same = convexity_defect(data, 0.5, p, p, 8)
    assert same.length == 0 and same.passed
    res = convexity_defect(data, 0.5, p, q, 8)
    assert res.passed and res.inclusion_3 and res.inclusion_4
    assert res.ratio >= 1 - 1e-9
