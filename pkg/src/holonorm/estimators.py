"""Estimator-style wrappers around the normalization and distortion pipelines."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from ._validation import check_chain, check_endomorphism, check_points, check_positive, parse_point
from .dynamics.distortion import (assemble_theorem_A, convexity_defect, sample_pullback_pair,
                                  verify_theorem_A)
from .dynamics.maps import ProjectiveEndomorphism, from_affine
from .dynamics.orbits import backward_orbit
from .normalform import ISOMETRY_SLACK, LINEARIZE_TOL, TAIL_TOL, normalize


class ChainLinearizer(BaseEstimator, TransformerMixin):
    """Linearize a chain of contractions.

    ``fit`` takes a :class:`~holonorm.chain.ContractionChain` (or its JSON);
    ``transform`` applies ``phi_n`` to points of ``D(r_n e^{-n gamma})``.

    Parameters
    ----------
    gamma, epsilon : float, optional
        Shift and slowness; suggested from the spectrum when omitted.
        ``gamma = 0`` runs the unshifted (classical) pipeline.
    index : int
        Default chain index used by :meth:`transform`.
    """

    def __init__(self, gamma=None, epsilon=None, index=0, tail_tol=TAIL_TOL, linearize_tol=LINEARIZE_TOL,
                 isometry_slack=ISOMETRY_SLACK, n_samples=200, random_state=0):
        self.gamma = gamma
        self.epsilon = epsilon
        self.index = index
        self.tail_tol = tail_tol
        self.linearize_tol = linearize_tol
        self.isometry_slack = isometry_slack
        self.n_samples = n_samples
        self.random_state = random_state

    def fit(self, X, y=None):
        chain = check_chain(X)
        check_positive("epsilon", self.epsilon)
        self.result_ = normalize(chain, self.gamma, self.epsilon, tail_tol=self.tail_tol,
                                 linearize_tol=self.linearize_tol, isometry_slack=self.isometry_slack,
                                 n_samples=self.n_samples, rng_seed=self.random_state)
        self.radii_ = self.result_.radii
        self.params_ = self.result_.params
        self.report_ = self.result_.diagnostics["diagram"]
        return self

    def _check_fitted(self):
        if not hasattr(self, "result_"):
            raise NotFittedError("ChainLinearizer is not fitted yet")

    def transform(self, X, index=None):
        self._check_fitted()
        n = self.index if index is None else index
        X = check_points(X, self.result_.chain.k)
        return self.result_.transform(X, n)

    def phi(self, n):
        """The jet ``phi_n``."""
        self._check_fitted()
        return self.result_.phi_at(n)


class InverseBranchDistortion(BaseEstimator):
    """Normalizing maps of the inverse branches of ``f`` along one backward orbit.

    ``fit(f, x0)`` builds the orbit, the chart cocycle, the block reduction
    and the normalized chain, then verifies the two-sided distortion bound.
    ``transform(W, n)`` evaluates the normalizing map at ``x_{-n}`` on chart
    coordinates ``W``.

    Parameters
    ----------
    N : int
        Orbit length; the same number of forward images is recorded.
    branch : {"random", "nearest"}
        Rule for choosing preimages (see :func:`~holonorm.dynamics.backward_orbit`).
    spectrum : LyapunovSpectrum, optional
        Overrides the finite-time estimate.
    """

    def __init__(self, N=12, branch="random", gamma=None, epsilon=None, spectrum=None, degree_cap=5,
                 window=20, n_samples=200, random_state=0):
        self.N = N
        self.branch = branch
        self.gamma = gamma
        self.epsilon = epsilon
        self.spectrum = spectrum
        self.degree_cap = degree_cap
        self.window = window
        self.n_samples = n_samples
        self.random_state = random_state

    def fit(self, f, x0=None):
        if not isinstance(f, ProjectiveEndomorphism):
            f = check_endomorphism(f)
        if x0 is None:
            x0 = from_affine(np.exp(1j * (0.7 + np.arange(f.k))))
        elif np.ndim(x0) == 2 or (len(x0) and isinstance(x0[0], (list, tuple))):
            x0 = parse_point(x0, f.k)
        # one more step than N so that the chain reaches index N
        self.orbit_ = backward_orbit(f, x0, self.N + 1, rng_seed=self.random_state, branch=self.branch,
                                     n_forward=self.N + 1)
        self.data_ = assemble_theorem_A(f, self.orbit_, self.gamma, self.epsilon, spectrum=self.spectrum,
                                        degree_cap=self.degree_cap, window=self.window,
                                        n_samples=self.n_samples, rng_seed=self.random_state)
        self.data_.N = min(self.data_.N, self.N)
        self.report_ = verify_theorem_A(self.data_, n_samples=self.n_samples, rng_seed=self.random_state)
        self.spectrum_ = self.data_.spectrum
        return self

    def _check_fitted(self):
        if not hasattr(self, "data_"):
            raise NotFittedError("InverseBranchDistortion is not fitted yet")

    def transform(self, W, n=0):
        self._check_fitted()
        return self.data_.phi_hat(n, check_points(W, self.data_.spectrum.k))

    def convexity(self, t, n, n_pairs=50, rng_seed=None):
        """``convexity_defect`` on ``n_pairs`` random pairs of ``f^{-n}(B(t r'))``."""
        self._check_fitted()
        rng = np.random.default_rng(self.random_state if rng_seed is None else rng_seed)
        out = []
        for _ in range(n_pairs):
            p, q = sample_pullback_pair(self.data_, t, n, rng)
            out.append(convexity_defect(self.data_, t, p, q, n))
        return out
