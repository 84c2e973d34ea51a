"""Holomorphic endomorphisms of P^k in homogeneous coordinates, and charts."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from ..exceptions import DimensionError, ValidationError
from ..jets import JetMap, get_basis

CRITICAL_FLOOR = 1e-10


def normalize_point(x):
    """Unit representative of ``[x]``; accepts affine coordinates of length k."""
    x = np.asarray(x, dtype=complex)
    n = np.linalg.norm(x, axis=-1, keepdims=True)
    if np.any(n == 0):
        raise ValidationError("the zero vector is not a point of P^k")
    return x / n


def from_affine(a):
    """``[1 : a]`` as a unit homogeneous vector."""
    a = np.atleast_1d(np.asarray(a, dtype=complex))
    return normalize_point(np.concatenate([np.ones(a.shape[:-1] + (1,)), a], axis=-1))


def to_affine(x):
    x = np.asarray(x, dtype=complex)
    return x[..., 1:] / x[..., :1]


class ProjectiveEndomorphism:
    """``f = [f_0 : ... : f_k]`` with homogeneous components of degree ``d``.

    ``components[m]`` maps exponent tuples of length ``k + 1`` to complex
    coefficients.
    """

    def __init__(self, k, d, components, check=True):
        self.k = int(k)
        self.d = int(d)
        if self.k < 1 or self.d < 2:
            raise ValidationError(f"need k >= 1 and d >= 2, got k={k}, d={d}")
        if len(components) != self.k + 1:
            raise DimensionError(f"need {self.k + 1} components, got {len(components)}")
        self._exps, self._coefs = [], []
        for comp in components:
            items = [(tuple(int(a) for a in alpha), complex(c)) for alpha, c in dict(comp).items() if c != 0]
            for alpha, _ in items:
                if len(alpha) != self.k + 1 or sum(alpha) != self.d or min(alpha) < 0:
                    raise ValidationError(f"monomial {alpha} is not homogeneous of degree {self.d} in {self.k + 1} variables")
            if not items:
                raise ValidationError("a component is identically zero")
            self._exps.append(np.array([a for a, _ in items], dtype=np.int64))
            self._coefs.append(np.array([c for _, c in items], dtype=complex))
        if check:
            self.check_nondegenerate()

    # -- constructors -------------------------------------------------
    @classmethod
    def power_map(cls, k, d=2):
        """``[x_0^d : ... : x_k^d]``."""
        comps = []
        for m in range(k + 1):
            alpha = [0] * (k + 1)
            alpha[m] = d
            comps.append({tuple(alpha): 1.0})
        return cls(k, d, comps)

    @classmethod
    def polynomial(cls, coefficients):
        """One-variable polynomial ``p(z) = sum_i c_i z^i`` (ascending), as a map of P^1."""
        c = list(coefficients)
        while c and c[-1] == 0:
            c.pop()
        d = len(c) - 1
        if d < 2:
            raise ValidationError("polynomial degree must be >= 2")
        top = {(d - i, i): ci for i, ci in enumerate(c) if ci != 0}
        return cls(1, d, [{(d, 0): 1.0}, top])

    # -- evaluation ---------------------------------------------------
    @property
    def topological_degree(self):
        return self.d ** self.k

    def __call__(self, X):
        X = np.asarray(X, dtype=complex)
        out = np.empty(X.shape, dtype=complex)
        for m, (E, c) in enumerate(zip(self._exps, self._coefs)):
            out[..., m] = np.prod(X[..., None, :] ** E, axis=-1) @ c
        return out

    def jacobian(self, X):
        """Homogeneous Jacobian ``(..., k+1, k+1)``."""
        X = np.asarray(X, dtype=complex)
        J = np.zeros(X.shape + (self.k + 1,), dtype=complex)
        for m, (E, c) in enumerate(zip(self._exps, self._coefs)):
            for i in range(self.k + 1):
                Ei = E.copy()
                has = Ei[:, i] > 0
                if not has.any():
                    continue
                Ei[has, i] -= 1
                mono = np.prod(X[..., None, :] ** Ei[has], axis=-1)
                J[..., m, i] = mono @ (c[has] * E[has, i])
        return J

    def image(self, x):
        """Unit representative of ``f(x)``."""
        return normalize_point(self(x))

    def iterate(self, x, n):
        for _ in range(n):
            x = self.image(x)
        return x

    def check_nondegenerate(self, n_samples=256, floor=1e-8, rng_seed=0):
        """Components share no zero besides the origin (sampled on the unit sphere)."""
        rng = np.random.default_rng(rng_seed)
        X = rng.normal(size=(n_samples, self.k + 1)) + 1j * rng.normal(size=(n_samples, self.k + 1))
        X = normalize_point(X)
        m = float(np.min(np.linalg.norm(self(X), axis=-1)))
        if m < floor:
            raise ValidationError(f"components nearly share a common zero (min |f| = {m:.3g} on the sphere)")
        return m

    # -- serialization ------------------------------------------------
    def to_dict(self):
        comps = []
        for E, c in zip(self._exps, self._coefs):
            comps.append([{"alpha": [int(a) for a in e], "re": float(v.real), "im": float(v.imag)}
                          for e, v in zip(E, c)])
        return {"k": self.k, "d": self.d, "components": comps}

    @classmethod
    def from_dict(cls, d):
        try:
            comps = [{tuple(t["alpha"]): complex(t.get("re", 0.0), t.get("im", 0.0)) for t in comp}
                     for comp in d["components"]]
            return cls(int(d["k"]), int(d["d"]), comps)
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed endomorphism spec: {exc}") from exc

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, s):
        return cls.from_dict(json.loads(s))

    def __repr__(self):
        return f"ProjectiveEndomorphism(k={self.k}, d={self.d})"


# -- charts ---------------------------------------------------------------

def unitary_frame(x):
    """Unitary ``U`` with ``U e_0 = x`` (x a unit vector), via a Householder reflection."""
    x = normalize_point(x)
    x0 = x[0]
    beta = x0 / abs(x0) if abs(x0) > 0 else 1.0
    v = x.copy()
    v[0] -= beta
    nv = np.vdot(v, v).real
    H = np.eye(len(x), dtype=complex)
    if nv > 1e-30:
        H -= 2.0 * np.outer(v, v.conj()) / nv
    return beta * H


@dataclass(frozen=True)
class Chart:
    """``psi(v) = [M (1, v)]`` with ``psi(0) = center``."""

    center: np.ndarray
    M: np.ndarray
    Minv: np.ndarray
    kind: str = "unitary"

    def to_point(self, v):
        v = np.asarray(v, dtype=complex)
        ones = np.ones(v.shape[:-1] + (1,), dtype=complex)
        return normalize_point(np.concatenate([ones, v], axis=-1) @ self.M.T)

    def to_coords(self, X):
        W = np.asarray(X, dtype=complex) @ self.Minv.T
        return W[..., 1:] / W[..., :1]


class ChartAtlas:
    """Charts centred at arbitrary points.

    ``unitary`` rotates the reference chart ``[1 : v]`` by a unitary matrix
    (Fubini-Study isometry); ``affine`` translates the standard chart
    ``x_0 = 1`` and needs ``x_0 != 0``.
    """

    def __init__(self, kind="unitary"):
        if kind not in ("unitary", "affine"):
            raise ValueError(f"unknown atlas kind {kind!r}")
        self.kind = kind

    def chart(self, x):
        x = normalize_point(x)
        if self.kind == "unitary":
            U = unitary_frame(x)
            return Chart(x, U, U.conj().T, "unitary")
        if abs(x[0]) < 1e-8:
            raise ValidationError("affine chart is undefined on the hyperplane x_0 = 0")
        a = x[1:] / x[0]
        k = len(a)
        M = np.eye(k + 1, dtype=complex)
        M[1:, 0] = a
        Minv = np.eye(k + 1, dtype=complex)
        Minv[1:, 0] = -a
        return Chart(x, M, Minv, "affine")

    @staticmethod
    def distortion(radius):
        """Euclidean/Fubini-Study ratio bound ``1 + tan^2 R`` on the chart ball of FS radius ``R``."""
        if not 0 <= radius < math.pi / 4:
            raise ValueError("radius must lie in [0, pi/4)")
        return 1.0 + math.tan(radius) ** 2


def fs_distance(X, Y):
    """Fubini-Study distance (diameter pi/2) between homogeneous vectors."""
    X, Y = np.asarray(X, dtype=complex), np.asarray(Y, dtype=complex)
    nx, ny = np.linalg.norm(X, axis=-1), np.linalg.norm(Y, axis=-1)
    # |X wedge Y| computed from the 2x2 minors, no cancellation against |X||Y|
    k1 = X.shape[-1]
    s = 0.0
    for i in range(k1):
        for j in range(i + 1, k1):
            s = s + np.abs(X[..., i] * Y[..., j] - X[..., j] * Y[..., i]) ** 2
    return np.arcsin(np.clip(np.sqrt(s) / (nx * ny), 0.0, 1.0))


def fs_distance_chart(u, v):
    """FS distance between ``[1 : u]`` and ``[1 : v]`` (unitary-chart coordinates)."""
    u, v = np.asarray(u, dtype=complex), np.asarray(v, dtype=complex)
    dv = v - u
    s = np.sum(np.abs(dv) ** 2, axis=-1)
    k = u.shape[-1]
    for i in range(k):
        for j in range(i + 1, k):
            s = s + np.abs(u[..., i] * dv[..., j] - u[..., j] * dv[..., i]) ** 2
    na = np.sqrt(1 + np.sum(np.abs(u) ** 2, axis=-1))
    nb = np.sqrt(1 + np.sum(np.abs(v) ** 2, axis=-1))
    return np.arcsin(np.clip(np.sqrt(s) / (na * nb), 0.0, 1.0))


# -- chart expressions of f ------------------------------------------------

def chart_map(f: ProjectiveEndomorphism, src: Chart, dst: Chart, v):
    """``dst^{-1} o f o src`` evaluated at chart coordinates ``v``."""
    v = np.asarray(v, dtype=complex)
    ones = np.ones(v.shape[:-1] + (1,), dtype=complex)
    X = np.concatenate([ones, v], axis=-1) @ src.M.T
    W = f(X) @ dst.Minv.T
    return W[..., 1:] / W[..., :1]


def chart_jacobian(f: ProjectiveEndomorphism, src: Chart, dst: Chart, v):
    """Derivative of :func:`chart_map` at ``v``, shape ``(..., k, k)``."""
    v = np.asarray(v, dtype=complex)
    ones = np.ones(v.shape[:-1] + (1,), dtype=complex)
    X = np.concatenate([ones, v], axis=-1) @ src.M.T
    W = f(X) @ dst.Minv.T
    dW = dst.Minv @ f.jacobian(X) @ src.M[:, 1:]
    W0 = W[..., :1, None]
    return (dW[..., 1:, :] * W0 - W[..., 1:, None] * dW[..., :1, :]) / W0**2


def _series_mul(basis, a, b):
    """Product of series ``(const, coeffs)`` truncated at the basis degree."""
    ca, sa = a
    cb, sb = b
    return ca * cb, ca * sb + cb * sa + basis.mul(sa, sb)


def chart_jet(f: ProjectiveEndomorphism, src: Chart, dst: Chart, degree_cap: int, const_tol: float = 1e-9) -> JetMap:
    """Taylor jet of ``dst^{-1} o f o src`` at 0 (requires ``f(src.center) = dst.center``)."""
    k = f.k
    basis = get_basis(k, degree_cap)
    # X_i(v) = M[i, 0] + sum_j M[i, j+1] v_j
    lin = basis.degree_slices[1]
    X = []
    for i in range(k + 1):
        s = np.zeros(basis.size, dtype=complex)
        s[lin] = src.M[i, 1:]
        X.append((src.M[i, 0], s))
    pw = [[(1.0 + 0j, np.zeros(basis.size, dtype=complex))] for _ in range(k + 1)]
    for i in range(k + 1):
        for _ in range(f.d):
            pw[i].append(_series_mul(basis, pw[i][-1], X[i]))
    comps = []
    for E, c in zip(f._exps, f._coefs):
        const, ser = 0j, np.zeros(basis.size, dtype=complex)
        for e, coef in zip(E, c):
            term = (1.0 + 0j, np.zeros(basis.size, dtype=complex))
            for i, ei in enumerate(e):
                if ei:
                    term = _series_mul(basis, term, pw[i][ei])
            const += coef * term[0]
            ser += coef * term[1]
        comps.append((const, ser))
    consts = np.array([c for c, _ in comps])
    sers = np.array([s for _, s in comps])
    Wc = dst.Minv @ consts
    Ws = dst.Minv @ sers
    c0, s0 = Wc[0], Ws[0]
    if abs(c0) < 1e-300:
        raise ValidationError("f(center) lies on the chart's hyperplane at infinity")
    # 1 / (c0 + s0) = (1/c0) sum_m (-s0/c0)^m
    u = -s0 / c0
    inv = (1.0 / c0, np.zeros(basis.size, dtype=complex))
    term = (1.0 + 0j, np.zeros(basis.size, dtype=complex))
    acc_c, acc_s = 1.0 + 0j, np.zeros(basis.size, dtype=complex)
    for _ in range(degree_cap):
        term = _series_mul(basis, term, (0j, u))
        acc_s = acc_s + term[1]
    inv = (acc_c / c0, acc_s / c0)
    out = np.empty((k, basis.size), dtype=complex)
    for i in range(k):
        const, ser = _series_mul(basis, (Wc[i + 1], Ws[i + 1]), inv)
        if abs(const) > const_tol:
            raise ValidationError(f"chart map does not fix the origin (constant {abs(const):.3g})")
        out[i] = ser
    return JetMap(out, k, degree_cap)


def critical_test(f: ProjectiveEndomorphism, x, floor: float = CRITICAL_FLOOR, atlas: ChartAtlas = None):
    """``(is_critical, |det|)`` for the chart-expressed derivative at ``x``."""
    atlas = atlas or ChartAtlas()
    x = normalize_point(x)
    src, dst = atlas.chart(x), atlas.chart(f.image(x))
    J = chart_jacobian(f, src, dst, np.zeros(f.k))
    det = abs(np.linalg.det(J))
    return bool(det < floor), float(det)


def lemma_radius_constant(f: ProjectiveEndomorphism, n_samples: int = 64, rng_seed: int = 0) -> float:
    """``c = 1 / (4 max(1, sup |d^2 F|) max(1, sup |dF|))`` over sampled unitary charts."""
    rng = np.random.default_rng(rng_seed)
    atlas = ChartAtlas()
    pts = normalize_point(rng.normal(size=(n_samples, f.k + 1)) + 1j * rng.normal(size=(n_samples, f.k + 1)))
    s1 = s2 = 1.0
    for x in pts:
        J = chart_jet(f, atlas.chart(x), atlas.chart(f.image(x)), 2)
        s1 = max(s1, float(np.linalg.norm(J.linear_part(), 2)))
        sl = J.basis.degree_slices[2]
        s2 = max(s2, 2.0 * float(np.linalg.norm(J.coeffs[:, sl])))
    return 1.0 / (4.0 * s1 * s2)
