import math

import numpy as np
import pytest

from holonorm.chain import (ContractionChain, SlowSequence, conjugate_chain, extend, random_admissible_chain,
                            slow_minorant, tame_radius, validate_chain, validate_slow)
from holonorm.exceptions import ValidationError
from holonorm.jets import CoeffBound, JetMap, compose, evaluate, formal_inverse, sampled_lipschitz
from holonorm.spectrum import LyapunovSpectrum, suggest_parameters

LOG2, LOG4 = math.log(2), math.log(4)
EPS = 0.01


def linear_chain(L=11, a=0.5, radius=0.5, extension="constant"):
    spec = LyapunovSpectrum.single(-math.log(a))
    maps = [JetMap.univariate([a], 3) for _ in range(L)]
    return ContractionChain(-(L // 2), maps, [radius] * L, spec, EPS, extension=extension)


def test_slow_sequence_examples():
    assert validate_slow(SlowSequence(0, [2.0] * 10, EPS)).ok
    decay = SlowSequence(0, np.exp(-EPS * np.arange(10) / 2), EPS)
    assert validate_slow(decay).ok
    bad = validate_slow(SlowSequence(0, [1.0, math.exp(2 * EPS)], EPS))
    assert not bad.ok
    assert bad.violations == [("slow", 0)]


def test_slow_sequence_algebra(rng):
    for _ in range(20):
        a = np.exp(np.cumsum(rng.uniform(-EPS, EPS, 30)))
        b = np.exp(np.cumsum(rng.uniform(-EPS, EPS, 30)))
        sa, sb = SlowSequence(-5, a, EPS), SlowSequence(-5, b, EPS)
        assert validate_slow(sa.reciprocal()).ok
        prod = sa * sb
        assert prod.epsilon == pytest.approx(2 * EPS)
        assert validate_slow(prod).ok


def test_slow_minorant_is_below_and_slow(rng):
    v = np.exp(rng.normal(size=40))
    m = slow_minorant(v, EPS)
    assert np.all(m <= v * (1 + 1e-15))
    assert validate_slow(SlowSequence(0, m, EPS)).ok


def test_validate_chain_linear_passes():
    rep = validate_chain(linear_chain())
    assert rep.ok, rep.violations


def test_validate_chain_detects_off_block_entry():
    spec = LyapunovSpectrum((LOG4, LOG2), (1, 1))
    A = np.array([[0.25, 0.1], [0.0, 0.5]])
    ch = ContractionChain(0, [JetMap.linear(A, 2)] * 3, [0.5] * 3, spec, EPS)
    rep = validate_chain(ch)
    assert not rep.checks["block_preservation"].any()


def test_validate_chain_detects_large_lipschitz():
    # derivative bound 0.5 + 2 rho exceeds theta = e^{-log 2 + 2 eps} once rho is not tiny
    spec = LyapunovSpectrum.single(LOG2)
    W = JetMap.univariate([0.5, 1.0], 3)
    ch = ContractionChain(0, [W] * 3, [0.2] * 3, spec, EPS)
    theta = math.exp(-LOG2 + 2 * EPS)
    assert 0.5 + 2 * 0.2 > theta
    rep = validate_chain(ch)
    assert not rep.checks["lipschitz"].any()
    assert rep.checks["block_norms"].all()


def test_extend_policies():
    ch = linear_chain(5)
    maps = [JetMap.univariate([0.5, 0.01 * i], 3) for i in range(5)]
    ch = ch.replace(maps=maps)
    assert extend(ch, ch.n_min + 2) == maps[2]
    assert extend(ch, ch.n_max + 3) == maps[-1]
    per = ch.replace(extension="periodic")
    assert extend(per, per.n_max + 1) == maps[0]
    rej = ch.replace(extension="reject")
    with pytest.raises(ValidationError):
        extend(rej, rej.n_max + 1)


def test_constant_extension_radii_are_slow():
    ch = random_admissible_chain(LyapunovSpectrum.single(LOG2), EPS, (-5, 5), 3)
    ext = [ch.radius_at(n) for n in range(-15, 16)]
    assert validate_slow(SlowSequence(-15, ext, EPS)).ok


def test_tame_radius_linear_is_half():
    K = JetMap.univariate([0.5], 3)
    assert tame_radius(K, 0.5, 0.5, EPS, EPS, CoeffBound.for_jet(K, 1.0)) == 0.5


def test_tame_radius_against_exact_derivative():
    # |K'(t)| = |0.5 + 2t| lies in [0.5 e^{-eps'}, 0.5 e^{eps'}] for |t| <= rho_exact
    K = JetMap.univariate([0.5, 1.0], 3)
    eps_p = 0.01
    bound = CoeffBound.for_jet(K, 1.0)
    phi = tame_radius(K, 0.5, 0.5, EPS, eps_p, bound)
    exact = min(0.5 * (math.exp(eps_p) - 1), 0.5 * (1 - math.exp(-eps_p))) / 2
    c = 8
    assert phi <= exact * (1 + 1e-12)
    assert phi >= exact / (c * bound.sup_bound)
    lo, hi = sampled_lipschitz(K, phi, 1000, 0)
    assert 0.5 * math.exp(-eps_p) <= lo <= hi <= 0.5 * math.exp(eps_p)


def test_tame_radius_never_exceeds_half_reference(rng):
    for _ in range(20):
        K = JetMap.univariate([0.5, *rng.normal(size=2)], 3)
        bound = CoeffBound.for_jet(K, float(rng.uniform(0.1, 2)))
        assert tame_radius(K, 0.5, 0.5, EPS, 0.05, bound) <= bound.radius / 2


def test_tame_radius_rejects_bad_input():
    K = JetMap.univariate([0.5], 3)
    with pytest.raises(ValueError):
        tame_radius(K, 0.6, 0.5, EPS, EPS, CoeffBound.for_jet(K, 1.0))
    with pytest.raises(ValueError):
        tame_radius(K, 1.0, 1.0, EPS, EPS, CoeffBound.for_jet(K, 1.0), self_map=True)


def test_conjugate_by_identity_is_noop():
    ch = linear_chain()
    new, psi = conjugate_chain([JetMap.identity(1, 3)] * len(ch), ch, 0.005)
    assert all(a == b for a, b in zip(new.maps, ch.maps))
    assert np.allclose(psi.as_array(), ch.radii)


def test_conjugate_quadratic_by_hand():
    # M = z + z^2, L = a z: M(L(M^{-1}(z))) = a z + (a^2 - a) z^2 + O(3)
    a = 0.5
    ch = linear_chain(a=a)
    M = JetMap.univariate([1, 1], 3)
    new, psi = conjugate_chain([M] * len(ch), ch, 0.005)
    for W in new.maps:
        assert W.coefficient(0, (1,)) == a
        assert W.coefficient(0, (2,)) == pytest.approx(a * a - a, abs=1e-15)
        assert W == compose(M, compose(ch.maps[0], formal_inverse(M)))


def test_conjugate_diagram_residual():
    a = 0.5
    ch = linear_chain(a=a)
    Ms = [JetMap.univariate([1, 0.3 * math.cos(i), 0.1], 3) for i in range(len(ch) + 1)]
    new, psi = conjugate_chain(Ms, ch, 0.005)
    rng = np.random.default_rng(0)
    for i, (L, Lt) in enumerate(zip(ch.maps, new.maps)):
        r = psi[ch.n_min + i]
        v = r * np.sqrt(rng.random(200)) * np.exp(2j * np.pi * rng.random(200))
        lhs = Ms[i + 1](L(v[:, None]))
        rhs = Lt(Ms[i](v[:, None]))
        # the conjugation holds up to the truncation order 4
        assert np.max(np.abs(lhs - rhs)) <= 1e-10 + 10 * r ** 4


def test_conjugate_rejects_bad_tangent():
    ch = linear_chain()
    with pytest.raises(ValidationError):
        conjugate_chain([JetMap.univariate([2.0], 3)] * len(ch), ch, 0.005)


def test_random_admissible_chain_validates():
    spec = LyapunovSpectrum((LOG4, LOG2), (1, 1))
    g, e = suggest_parameters(spec)
    for s in range(3):
        ch = random_admissible_chain(spec, e, (-10, 10), 4, rng_seed=s)
        assert validate_chain(ch).ok


def test_chain_json_round_trip():
    ch = random_admissible_chain(LyapunovSpectrum((LOG4, LOG2), (1, 1)), EPS, (-3, 3), 3)
    back = ContractionChain.from_json(ch.to_json())
    assert back.n_min == ch.n_min and back.radii == ch.radii
    assert all(a == b for a, b in zip(back.maps, ch.maps))
