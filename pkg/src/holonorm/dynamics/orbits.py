"""Backward orbits, inverse branches and samples of the equilibrium measure."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from ..exceptions import OrbitError, ValidationError
from .maps import (CRITICAL_FLOOR, ChartAtlas, ProjectiveEndomorphism, chart_jacobian, chart_map,
                   critical_test, fs_distance, lemma_radius_constant, normalize_point)

NEWTON_TOL = 1e-12
DISTINCT_TOL = 1e-8
_ATLAS = ChartAtlas()


def _newton(f, y, x, max_iter=60):
    """Solve ``f(y) ~ x`` by Newton steps in unitary charts re-centred at each iterate."""
    dst = _ATLAS.chart(x)
    zero = np.zeros(f.k, dtype=complex)
    for _ in range(max_iter):
        src = _ATLAS.chart(y)
        F = chart_map(f, src, dst, zero)
        if not np.all(np.isfinite(F)):
            return y, False
        J = chart_jacobian(f, src, dst, zero)
        try:
            step = -np.linalg.solve(J, F)
        except np.linalg.LinAlgError:
            return y, False
        if not np.all(np.isfinite(step)) or np.linalg.norm(step) > 1.0:
            return y, False
        y = src.to_point(step)
        if np.linalg.norm(step) < 1e-14:
            break
    return y, True


def _residual(f, y, x):
    return float(fs_distance(f(y), x))


def _starts(f, x, rng, extra):
    """``d^k`` preimages of ``x`` under the power map, then pseudo-random points."""
    x = normalize_point(x)
    d = f.d
    roots = []
    for c in x:
        r = abs(c) ** (1.0 / d)
        a = np.angle(c) / d
        roots.append([r * np.exp(1j * (a + 2 * np.pi * m / d)) for m in range(d)])
    for combo in itertools.product(*roots[1:]):
        yield normalize_point(np.array((roots[0][0],) + combo))
    for _ in range(extra):
        yield normalize_point(rng.normal(size=f.k + 1) + 1j * rng.normal(size=f.k + 1))


def _canonical_order(points):
    """Deterministic ordering of preimages (independent of discovery order)."""
    k1 = points[0].shape[0]
    ref1 = normalize_point(np.arange(1, k1 + 1) + 0.5j)
    ref2 = normalize_point(np.arange(k1, 0, -1) - 0.25j)
    keys = [(round(float(fs_distance(p, ref1)), 9), round(float(fs_distance(p, ref2)), 9)) for p in points]
    return [points[i] for i in sorted(range(len(points)), key=lambda i: keys[i])]


def preimages(f: ProjectiveEndomorphism, x, max_extra: int = None, tol: float = NEWTON_TOL):
    """All (up to ``d^k``) preimages of ``x``, in canonical order.

    Polynomial maps of P^1 use companion-matrix roots; otherwise Newton runs
    from ``d^k`` deterministic starts, then extra pseudo-random ones.
    """
    x = normalize_point(x)
    target = f.topological_degree
    found = []

    def _add(y):
        y, ok = _newton(f, normalize_point(y), x)
        if ok and _residual(f, y, x) <= tol and all(fs_distance(y, z) > DISTINCT_TOL for z in found):
            found.append(y)

    if f.k == 1:
        for y in _p1_roots(f, x):
            _add(y)
    if len(found) < target:
        rng = np.random.default_rng(20240607)
        extra = 8 * target if max_extra is None else max_extra
        for y in _starts(f, x, rng, extra):
            _add(y)
            if len(found) == target:
                break
    if not found:
        raise OrbitError(f"Newton found no preimage of {x}")
    return _canonical_order(found)


def _p1_coefficients(f, X):
    """Coefficients (ascending in t = y_1/y_0) of ``x_0 f_1(1, t) - x_1 f_0(1, t)`` for a batch ``X``."""
    d = f.d
    P = np.zeros((2, d + 1), dtype=complex)
    for m, (E, c) in enumerate(zip(f._exps, f._coefs)):
        for e, v in zip(E, c):
            P[m, e[1]] += v
    X = np.atleast_2d(X)
    return X[:, :1] * P[1] - X[:, 1:2] * P[0]


def _p1_roots(f, x):
    g = _p1_coefficients(f, x)[0]
    scale = np.max(np.abs(g))
    out = []
    top = len(g) - 1
    while top > 0 and abs(g[top]) <= 1e-14 * scale:
        out.append(np.array([0.0, 1.0], dtype=complex))   # root at infinity
        top -= 1
    for t in np.roots(g[: top + 1][::-1]):
        out.append(normalize_point(np.array([1.0, t])))
    return out


@dataclass
class BackwardOrbit:
    """``points[n] = x_{-n}`` for ``0 <= n <= N``; ``forward[m-1] = x_m``.

    ``t[n]`` and ``radii[n]`` belong to the step ``x_{-n} <- x_{-n-1}``.
    """

    f: ProjectiveEndomorphism
    points: np.ndarray
    forward: np.ndarray
    branches: list
    t: np.ndarray
    radii: np.ndarray
    c: float
    residuals: np.ndarray
    rng_seed: int = None
    metadata: dict = field(default_factory=dict)

    @property
    def N(self):
        return len(self.points) - 1

    @property
    def n_forward(self):
        return len(self.forward)

    def point(self, m):
        """``x_m`` for ``-N <= m <= n_forward``."""
        if m <= 0:
            return self.points[-m]
        return self.forward[m - 1]

    def to_dict(self):
        pts = lambda a: [[[float(z.real), float(z.imag)] for z in p] for p in a]
        return {"N": self.N, "points": pts(self.points), "forward": pts(self.forward),
                "branches": list(map(int, self.branches)), "t": self.t.tolist(),
                "radii": self.radii.tolist(), "c": self.c, "rng_seed": self.rng_seed,
                "max_residual": float(np.max(self.residuals, initial=0.0)), **self.metadata}


def backward_orbit(f: ProjectiveEndomorphism, x0, N: int, rng_seed=0, branch: str = "random",
                   n_forward: int = 0, floor: float = CRITICAL_FLOOR, c: float = None) -> BackwardOrbit:
    """Backward orbit ``x_0, x_{-1}, ..., x_{-N}`` avoiding the critical set.

    Parameters
    ----------
    branch : {"random", "nearest"}
        ``random`` picks a regular preimage with the seeded generator;
        ``nearest`` picks the one closest to the current point, which keeps a
        fixed point fixed.
    n_forward : int
        Number of forward images ``x_1, ..., x_{n_forward}`` also recorded.
    c : float, optional
        Inverse-function constant; estimated with :func:`lemma_radius_constant`
        when omitted.
    """
    if branch not in ("random", "nearest"):
        raise ValidationError(f"unknown branch rule {branch!r}")
    if N < 0 or n_forward < 0:
        raise ValidationError("orbit lengths must be nonnegative")
    x = normalize_point(x0)
    crit, det = critical_test(f, x, floor)
    if crit:
        raise OrbitError(f"seed point is critical (|det| = {det:.3g})")
    rng = np.random.default_rng(rng_seed)
    c = lemma_radius_constant(f) if c is None else float(c)
    points, branches, ts, residuals = [x], [], [], []
    for n in range(N):
        cand = [y for y in preimages(f, x) if not critical_test(f, y, floor)[0]]
        if not cand:
            raise OrbitError(f"all preimages of x_{-n} are critical")
        if branch == "random":
            i = int(rng.integers(len(cand)))
        else:
            i = int(np.argmin([fs_distance(y, x) for y in cand]))
        y = cand[i]
        res = _residual(f, y, x)
        if res > NEWTON_TOL:
            raise OrbitError(f"Newton residual {res:.3g} at step {n + 1}")
        J = chart_jacobian(f, _ATLAS.chart(y), _ATLAS.chart(x), np.zeros(f.k))
        ts.append(float(np.linalg.svd(J, compute_uv=False)[-1] ** 2))
        branches.append(i)
        residuals.append(res)
        points.append(y)
        x = y
    fwd = []
    x = points[0]
    for m in range(n_forward):
        x = f.image(x)
        if critical_test(f, x, floor)[0]:
            raise OrbitError(f"forward image x_{m + 1} is critical")
        fwd.append(x)
    t = np.array(ts)
    return BackwardOrbit(f, np.array(points), np.array(fwd).reshape(n_forward, f.k + 1), branches,
                         t, np.minimum(c * t, 1.0), c, np.array(residuals), rng_seed)


def sample_equilibrium(f: ProjectiveEndomorphism, seed_point, depth: int, count: int, rng_seed=0):
    """``count`` endpoints of ``depth``-step random backward walks from ``seed_point``.

    Returns unit homogeneous vectors, shape ``(count, k + 1)``.
    """
    rng = np.random.default_rng(rng_seed)
    x = normalize_point(seed_point)
    if f.k == 1:
        X = np.repeat(x[None, :], count, axis=0)
        for _ in range(depth):
            g = _p1_coefficients(f, X)
            # batched companion matrices of the monic polynomials
            lead = g[:, -1:]
            if np.any(np.abs(lead) < 1e-300):
                raise OrbitError("preimage at infinity during equilibrium sampling")
            mon = g[:, :-1] / lead
            d = f.d
            Cm = np.zeros((count, d, d), dtype=complex)
            Cm[:, 1:, :-1] = np.eye(d - 1)
            Cm[:, :, -1] = -mon
            roots = np.linalg.eigvals(Cm)
            pick = roots[np.arange(count), rng.integers(d, size=count)]
            X = normalize_point(np.stack([np.ones(count), pick], axis=-1))
        return X
    out = np.empty((count, f.k + 1), dtype=complex)
    for s in range(count):
        y = x
        for _ in range(depth):
            cand = preimages(f, y)
            y = cand[int(rng.integers(len(cand)))]
        out[s] = y
    return out


def birkhoff_exponents(f: ProjectiveEndomorphism, samples, length: int = 1):
    """Lyapunov exponents averaged over ``samples`` by QR along forward orbits of ``length`` steps.

    With ``length = 1`` this is the Birkhoff average of the log singular
    values of the chart derivative (exact for k = 1 by invariance of the
    measure).  Long forward orbits amplify the sampling error, as the samples
    only approximate the support.  Returned in decreasing order.
    """
    logs = np.zeros(f.k)
    for x in np.atleast_2d(samples):
        Q = np.eye(f.k, dtype=complex)
        acc = np.zeros(f.k)
        for _ in range(length):
            fx = f.image(x)
            J = chart_jacobian(f, _ATLAS.chart(x), _ATLAS.chart(fx), np.zeros(f.k))
            Q, R = np.linalg.qr(J @ Q)
            acc += np.log(np.abs(np.diag(R)))
            x = fx
        logs += np.sort(acc)[::-1] / length
    return logs / len(np.atleast_2d(samples))
