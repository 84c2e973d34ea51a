import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from holonorm.dynamics import ProjectiveEndomorphism, from_affine
from holonorm.estimators import ChainLinearizer, InverseBranchDistortion
from holonorm.exceptions import ValidationError

from conftest import fixture_path, load_fixture


def test_chain_linearizer_koenigs():
    est = ChainLinearizer(gamma=0.0, epsilon=0.001).fit(fixture_path("koenigs_chain.json"))
    assert est.phi(0).coefficient(0, (2,)) == pytest.approx(0.4, abs=1e-12)
    assert est.report_.ok
    z = np.array([1e-4, 2e-4j])
    assert np.allclose(est.transform(z)[:, 0], z + 0.4 * z ** 2, rtol=0, atol=1e-10)


def test_chain_linearizer_params_and_clone():
    est = ChainLinearizer(gamma=0.0, epsilon=0.001, index=3)
    assert clone(est).get_params() == est.get_params()
    with pytest.raises(NotFittedError):
        est.transform([[0.0]])


def test_chain_linearizer_rejects_bad_input():
    with pytest.raises(ValidationError):
        ChainLinearizer().fit("{not json")
    est = ChainLinearizer(gamma=0.0, epsilon=0.001).fit(load_fixture("koenigs_chain.json"))
    with pytest.raises(ValidationError):
        est.transform(np.zeros((2, 2)))


def test_inverse_branch_distortion_fixed_point():
    f = ProjectiveEndomorphism.power_map(1)
    est = InverseBranchDistortion(N=10, branch="nearest").fit(f, from_affine([1.0]))
    assert est.report_.ok
    assert est.spectrum_.exponents[0] == pytest.approx(np.log(2), abs=0.02)
    out = est.transform(np.zeros((1, 1)), 3)
    assert np.allclose(out, 0)
    res = est.convexity(0.5, 8, n_pairs=5)
    assert all(r.passed for r in res)
