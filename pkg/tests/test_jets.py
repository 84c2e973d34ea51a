import math

import numpy as np
import pytest

from holonorm.exceptions import DimensionError, IllConditionedError
from holonorm.jets import (CoeffBound, JetMap, cauchy_constant, coefficient_lipschitz_bound, compose, evaluate,
                           formal_inverse, homogeneous_part, lipschitz_radius, sampled_lipschitz)

from conftest import integer_jet


def test_compose_identity_with_identity():
    I = JetMap.identity(2, 4)
    assert compose(I, I) == I


def test_compose_hand_expansion():
    F = JetMap.univariate([1, 1], 2)
    G = JetMap.univariate([2], 2)
    assert compose(F, G) == JetMap.univariate([2, 4], 2)


def test_compose_truncates_above_cap():
    F = JetMap.univariate([0, 1], 3)
    assert compose(F, F) == JetMap.zero(1, 1, 3)


def test_compose_linear_part_is_matrix_product(rng):
    F, G = integer_jet(rng, 3, 4), integer_jet(rng, 3, 4)
    assert np.array_equal(compose(F, G).linear_part(), F.linear_part() @ G.linear_part())


def test_compose_rejects_mismatch():
    with pytest.raises(DimensionError):
        compose(JetMap.identity(2, 3), JetMap.identity(1, 3))
    with pytest.raises(DimensionError):
        compose(JetMap.identity(2, 3), JetMap.identity(2, 4))


def test_homogeneous_part_examples():
    F = JetMap.univariate([1, 1], 3)
    assert homogeneous_part(F, 2) == JetMap.univariate([0, 1], 3)
    assert homogeneous_part(JetMap.linear(np.eye(2), 3), 2) == JetMap.zero(2, 2, 3)
    G = JetMap.univariate([0.5, 0.2, 0.3], 3)
    assert homogeneous_part(G, 3) == JetMap.univariate([0, 0, 0.3], 3)
    with pytest.raises(ValueError):
        homogeneous_part(G, 4)


def test_formal_inverse_examples():
    assert formal_inverse(JetMap.identity(2, 3)) == JetMap.identity(2, 3)
    assert formal_inverse(JetMap.univariate([1, 1], 3)) == JetMap.univariate([1, -1, 2], 3)
    A = np.array([[2.0, 1.0], [0.0, 4.0]])
    assert formal_inverse(JetMap.linear(A, 3)).allclose(JetMap.linear(np.linalg.inv(A), 3), atol=1e-15)


def test_formal_inverse_rejects_singular():
    with pytest.raises(IllConditionedError):
        formal_inverse(JetMap.linear(np.array([[1.0, 0.0], [0.0, 0.0]]), 2))


def test_evaluate_examples():
    F = JetMap.univariate([1, 1], 2)
    assert evaluate(F, [0.0]) == pytest.approx([0.0])
    assert evaluate(F, [0.1])[0] == pytest.approx(0.11, abs=1e-15)
    A = np.array([[1.0, 2.0], [3.0, 4.0]])
    v = np.array([0.5, -1.0])
    assert np.allclose(evaluate(JetMap.linear(A, 3), v), A @ v)


def test_lipschitz_radius_linear_gets_half_radius():
    F = JetMap.linear(np.eye(2) * 0.5, 3)
    assert lipschitz_radius(F, CoeffBound.for_jet(F, 1.0), 0.1) == 0.5


def test_lipschitz_radius_formula():
    # s = 1, r = 1, kappa = 0.1: rho = kappa r^2 / (c s) = 0.1 / c
    F = JetMap.univariate([0, 1], 2)
    rho = lipschitz_radius(F, CoeffBound(1.0, 1.0, cauchy_constant(1)), 0.1)
    assert rho == pytest.approx(0.1 / cauchy_constant(1))


def test_lipschitz_radius_is_conservative_against_exact_derivative():
    # F = a z + z^2: |F'(t) - F'(0)| = 2|t|, so the exact radius is kappa / 2
    F = JetMap.univariate([0.3, 1], 2)
    kappa = 0.05
    rho = lipschitz_radius(F, CoeffBound.for_jet(F, 1.0), kappa)
    assert rho <= kappa / 2
    lo, hi = sampled_lipschitz(F.nonlinear_part(), rho, 500, 1)
    assert hi <= 1.01 * kappa


def test_lipschitz_radius_rejects_nonpositive_kappa():
    F = JetMap.univariate([0.3, 1], 2)
    with pytest.raises(ValueError):
        lipschitz_radius(F, CoeffBound.for_jet(F, 1.0), 0.0)


def test_sampled_lipschitz_examples():
    assert sampled_lipschitz(JetMap.identity(2, 3), 0.5) == pytest.approx((1.0, 1.0))
    lo, hi = sampled_lipschitz(JetMap.univariate([0.3 + 0.4j], 2), 0.5)
    assert lo == pytest.approx(0.5) and hi == pytest.approx(0.5)
    lo, hi = sampled_lipschitz(JetMap.univariate([1, 0.01], 2), 0.1)
    assert 0.998 <= lo <= hi <= 1.002


def test_coefficient_bound_dominates_sampling(rng):
    for _ in range(5):
        F = integer_jet(rng, 2, 3, unimodular=False).scale(0.1)
        r = 0.2
        _, hi = sampled_lipschitz(F.nonlinear_part(), r, 400, 3)
        assert hi <= coefficient_lipschitz_bound(F, r) * (1 + 1e-12)


def test_json_round_trip_is_exact(rng):
    F = JetMap(rng.normal(size=(2, JetMap.zero(2, 2, 4).basis.size)) * (1 + 1j), 2, 4)
    assert JetMap.from_json(F.to_json()) == F
    d = F.to_dict()
    assert set(d) == {"dim_in", "dim_out", "degree_cap", "terms"}
    assert set(d["terms"][0]) == {"out", "alpha", "re", "im"}
