import math

import numpy as np
import pytest

from holonorm.exceptions import ValidationError
from holonorm.spectrum import (CONSTRAINT_NAMES, LyapunovSpectrum, gap_constant, multi_indices,
                               resonant_indices, shifted_resonance_check, suggest_parameters,
                               validate_constraints)

LOG2, LOG4, LOG8 = math.log(2), math.log(4), math.log(8)


def brute_force_gap(spec):
    """Independent enumeration of the halved non-resonant gap."""
    lam = spec.repeated
    top = int(2 * spec.exponents[0] / spec.exponents[-1] + 1e-9)
    best = math.inf
    for deg in range(2, top + 1):
        for alpha in multi_indices(spec.k, deg, deg):
            w = float(np.dot(alpha, lam))
            for L in spec.exponents:
                g = abs(w - L)
                if g > 1e-12:
                    best = min(best, g)
    return min(best / 2, 0.99 * math.log(4))


def test_spectrum_validation():
    with pytest.raises(ValidationError):
        LyapunovSpectrum((LOG2, LOG4), (1, 1))
    with pytest.raises(ValidationError):
        LyapunovSpectrum((-1.0,), (1,))
    s = LyapunovSpectrum((LOG4, LOG2), (1, 2))
    assert s.k == 3 and s.l == 2
    assert s.repeated.tolist() == [LOG4, LOG2, LOG2]


def test_resonant_indices_examples():
    assert resonant_indices(LyapunovSpectrum.single(LOG2), 1) == []
    s = LyapunovSpectrum((LOG4, LOG2), (1, 1))
    assert [tuple(a) for a in resonant_indices(s, 1)] == [(0, 2)]
    assert resonant_indices(s, 2) == []
    s8 = LyapunovSpectrum((LOG8, LOG2), (1, 1))
    assert [tuple(a) for a in resonant_indices(s8, 1)] == [(0, 3)]
    assert resonant_indices(s8, 2) == []
    with pytest.raises(ValueError):
        resonant_indices(s, 3)


def test_resonant_indices_structure():
    s = LyapunovSpectrum((LOG8, LOG4, LOG2), (1, 1, 1))
    for j in (1, 2, 3):
        for alpha in resonant_indices(s, j):
            assert sum(alpha) <= int(s.exponents[j - 1] / s.exponents[-1] + 1e-9)
            assert all(a == 0 for a in alpha[:j])


def test_gap_constant_single_exponent():
    assert gap_constant(LyapunovSpectrum.single(LOG2)) == pytest.approx(LOG2 / 2)


def test_gap_constant_matches_brute_force(rng):
    for spec in [LyapunovSpectrum((LOG4, LOG2), (1, 1)), LyapunovSpectrum((1.3, 0.7), (2, 1))]:
        assert gap_constant(spec) == pytest.approx(brute_force_gap(spec), rel=1e-12)
    for _ in range(20):
        ex = np.sort(rng.uniform(0.3, 1.5, rng.integers(1, 4)))[::-1]
        if len(ex) > 1 and np.min(-np.diff(ex)) < 1e-3:
            continue
        spec = LyapunovSpectrum(tuple(ex), tuple([1] * len(ex)))
        assert gap_constant(spec) == pytest.approx(brute_force_gap(spec), rel=1e-12)


def test_gap_constant_scaling():
    s = LyapunovSpectrum((0.5, 0.3), (1, 1))
    doubled = LyapunovSpectrum((1.0, 0.6), (1, 1))
    assert gap_constant(doubled) == pytest.approx(2 * gap_constant(s))


def test_validate_constraints_example():
    s = LyapunovSpectrum((LOG4, LOG2), (1, 1))
    p = validate_constraints(s, 0.05, 0.001)
    assert p.valid, p.failed()
    assert p.p_star == 3
    assert p.b == pytest.approx(0.5 * min(0.05, p.a))
    assert p.theta == pytest.approx(math.exp(-LOG2 + 0.002))
    assert p.q == 3
    assert p.m == pytest.approx(math.exp(-(LOG4 - 0.05) - 0.001 + 0.05))
    assert p.M == pytest.approx(math.exp(-(LOG2 - 0.05) + 0.001 + 0.05))
    assert p.beta == pytest.approx((p.M * math.exp(0.002)) ** 4 / p.m)
    assert p.beta < 1
    assert set(CONSTRAINT_NAMES) <= set(p.to_dict())


def test_validate_constraints_failures():
    s = LyapunovSpectrum((LOG4, LOG2), (1, 1))
    assert "gamma_below_half_lambda_l" in validate_constraints(s, LOG2, 0.001).failed()
    assert "eps_below_half_gamma" in validate_constraints(s, 0.05, 0.05).failed()


def test_suggest_parameters_is_valid_and_deterministic():
    for spec in [LyapunovSpectrum.single(LOG2), LyapunovSpectrum((LOG4, LOG2), (1, 1))]:
        g, e = suggest_parameters(spec)
        assert validate_constraints(spec, g, e).valid
        assert suggest_parameters(spec) == (g, e)
        if spec.k == 2:
            assert g <= spec.exponents[-1] / 8


def test_shifted_resonance_check_examples():
    s = LyapunovSpectrum((LOG4, LOG2), (1, 1))
    rep = shifted_resonance_check(s, 0.05, 0.001)
    assert rep.ok
    # 2 lambda_2^gamma - Lambda_1^gamma = -gamma
    w = 2 * (LOG2 - 0.05) - (LOG4 - 0.05)
    assert w == pytest.approx(-0.05)
    assert abs(w) > rep.b
    single = LyapunovSpectrum.single(LOG2)
    g, e = suggest_parameters(single)
    assert shifted_resonance_check(single, g, e).ok


def test_json_round_trip():
    s = LyapunovSpectrum((LOG4, LOG2), (2, 1))
    assert LyapunovSpectrum.from_json(s.to_json()) == s
