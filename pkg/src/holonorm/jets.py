"""Truncated multivariate power series maps ("jets") fixing the origin.

A :class:`JetMap` stores the Taylor coefficients of a map ``C^k -> C^m``
up to a degree cap ``D``.  Monomials are indexed in graded-lexicographic
order by a cached :class:`JetBasis`; coefficients live in a dense
``(m, M)`` complex array where ``M`` is the number of monomials of degree
``1..D``.  All heavy routines also accept stacked coefficient arrays with
leading batch axes, which is how the normal-form pipeline processes whole
chains at once.
"""
from __future__ import annotations

import functools
import itertools
import json
from dataclasses import dataclass

import numpy as np

from .exceptions import DimensionError, IllConditionedError

CONDITION_CAP = 1e12


def cauchy_constant(k: int) -> float:
    """Dimensional constant of the polydisc Cauchy estimate.

    With ``|F_i| <= s`` on the polydisc of radius ``r``, every second
    partial derivative is bounded by ``8 s / r**2`` on the half polydisc,
    and the Frobenius norm of ``d_t F - d_0 F`` by ``8 k**2 s |t|_inf / r**2``.
    """
    return 8.0 * k * k


def _exponents_of_degree(k, deg):
    out = []
    for combo in itertools.combinations_with_replacement(range(k), deg):
        alpha = [0] * k
        for i in combo:
            alpha[i] += 1
        out.append(tuple(alpha))
    # graded-lex: within a degree, larger leading exponents first
    return sorted(set(out), reverse=True)


class JetBasis:
    """Monomial bookkeeping for ``k`` variables up to degree ``D``."""

    def __init__(self, k: int, D: int):
        if k < 1 or D < 1:
            raise ValueError(f"need k >= 1 and D >= 1, got k={k}, D={D}")
        self.k = k
        self.D = D
        exps = []
        self.degree_slices = {}
        for deg in range(1, D + 1):
            start = len(exps)
            exps.extend(_exponents_of_degree(k, deg))
            self.degree_slices[deg] = slice(start, len(exps))
        self.exponents = np.array(exps, dtype=np.int64).reshape(-1, k)
        self.degrees = self.exponents.sum(axis=1)
        self.size = len(exps)
        self.index = {alpha: i for i, alpha in enumerate(exps)}

        # alpha = parent + e_var, used to build powers G**alpha recursively
        self.parent = np.full(self.size, -1, dtype=np.int64)
        self.parent_var = np.full(self.size, -1, dtype=np.int64)
        for i, alpha in enumerate(exps):
            if sum(alpha) == 1:
                self.parent_var[i] = alpha.index(1)
                continue
            var = next(j for j, a in enumerate(alpha) if a > 0)
            beta = list(alpha)
            beta[var] -= 1
            self.parent[i] = self.index[tuple(beta)]
            self.parent_var[i] = var

        I, J, K = [], [], []
        for i, a in enumerate(exps):
            for j, b in enumerate(exps):
                if self.degrees[i] + self.degrees[j] <= D:
                    I.append(i)
                    J.append(j)
                    K.append(self.index[tuple(x + y for x, y in zip(a, b))])
        self._mul_i = np.array(I, dtype=np.int64)
        self._mul_j = np.array(J, dtype=np.int64)
        scatter = np.zeros((len(K), self.size))
        scatter[np.arange(len(K)), K] = 1.0
        self._scatter = scatter

    def degree_mask(self, p):
        return self.degrees == p

    def mul(self, a, b):
        """Truncated product of scalar series without constant term."""
        if len(self._mul_i) == 0:
            return np.zeros(np.broadcast_shapes(a.shape, b.shape), dtype=complex)
        return (a[..., self._mul_i] * b[..., self._mul_j]) @ self._scatter

    def monomial_values(self, v):
        """Values of all monomials at points ``v`` of shape ``(..., k)``."""
        v = np.asarray(v, dtype=complex)
        out = np.empty(v.shape[:-1] + (self.size,), dtype=complex)
        for i in range(self.size):
            if self.parent[i] < 0:
                out[..., i] = v[..., self.parent_var[i]]
            else:
                out[..., i] = out[..., self.parent[i]] * v[..., self.parent_var[i]]
        return out

    def __repr__(self):
        return f"JetBasis(k={self.k}, D={self.D})"


@functools.lru_cache(maxsize=None)
def get_basis(k: int, D: int) -> JetBasis:
    return JetBasis(k, D)


def powers(G, basis_in: JetBasis, basis_out: JetBasis):
    """All monomials ``G**alpha`` for ``alpha`` in ``basis_in``.

    ``G`` has shape ``(..., basis_in.k, basis_out.size)``; the result has
    shape ``(..., basis_in.size, basis_out.size)``.
    """
    shape = G.shape[:-2] + (basis_in.size, basis_out.size)
    pw = np.empty(shape, dtype=complex)
    for i in range(basis_in.size):
        var = basis_in.parent_var[i]
        if basis_in.parent[i] < 0:
            pw[..., i, :] = G[..., var, :]
        else:
            pw[..., i, :] = basis_out.mul(pw[..., basis_in.parent[i], :], G[..., var, :])
    return pw


def compose_coeffs(F, G, basis_F: JetBasis, basis_G: JetBasis):
    """Coefficients of ``F o G`` truncated at ``basis_G.D``.

    ``F``: ``(..., m, basis_F.size)``, ``G``: ``(..., basis_F.k, basis_G.size)``.
    Leading axes broadcast.
    """
    return F @ powers(G, basis_F, basis_G)


def identity_coeffs(basis: JetBasis):
    c = np.zeros((basis.k, basis.size), dtype=complex)
    c[:, basis.degree_slices[1]] = np.eye(basis.k)
    return c


def linear_coeffs(A, basis: JetBasis):
    A = np.asarray(A, dtype=complex)
    c = np.zeros(A.shape[:-1] + (basis.size,), dtype=complex)
    c[..., basis.degree_slices[1]] = A
    return c


def inverse_coeffs(F, basis: JetBasis, cond_cap: float = CONDITION_CAP):
    """Formal inverse of (stacked) square jets; exact up to degree ``D``."""
    A = F[..., basis.degree_slices[1]]
    cond = np.linalg.cond(A)
    if np.any(~np.isfinite(cond)) or np.any(cond > cond_cap):
        raise IllConditionedError(
            f"linear part has condition number {np.max(cond):.3g} > {cond_cap:.3g}"
        )
    Ainv = np.linalg.inv(A)
    N = F.copy()
    N[..., basis.degree_slices[1]] = 0.0
    ident = identity_coeffs(basis)
    G = linear_coeffs(Ainv, basis)
    # each pass fixes one more degree of G from F(G(w)) = w
    for _ in range(basis.D - 1):
        G = Ainv @ (ident - compose_coeffs(N, G, basis, basis))
    return G


@dataclass(frozen=True)
class CoeffBound:
    """Sup bound ``s`` of a map on the polydisc of radius ``radius``."""

    radius: float
    sup_bound: float
    second_derivative_bound: float

    @classmethod
    def for_jet(cls, F: "JetMap", radius: float) -> "CoeffBound":
        s = sup_bound(F, radius)
        return cls(radius, s, cauchy_constant(F.dim_in) * s / radius**2)


class JetMap:
    """Truncated power-series map fixing the origin.

    Parameters
    ----------
    coeffs : array_like, shape (dim_out, M)
        Coefficients indexed by output component and monomial of
        ``get_basis(dim_in, degree_cap)``.
    dim_in, degree_cap : int
    """

    __slots__ = ("dim_in", "dim_out", "degree_cap", "basis", "_coeffs")

    def __init__(self, coeffs, dim_in: int, degree_cap: int):
        basis = get_basis(dim_in, degree_cap)
        c = np.array(coeffs, dtype=complex)
        if c.ndim != 2 or c.shape[1] != basis.size:
            raise DimensionError(
                f"coefficient array of shape {c.shape} does not fit {basis}"
            )
        c.setflags(write=False)
        self.dim_in = dim_in
        self.dim_out = c.shape[0]
        self.degree_cap = degree_cap
        self.basis = basis
        self._coeffs = c

    @property
    def coeffs(self):
        return self._coeffs

    # construction ---------------------------------------------------------
    @classmethod
    def identity(cls, k, degree_cap):
        return cls(identity_coeffs(get_basis(k, degree_cap)), k, degree_cap)

    @classmethod
    def zero(cls, dim_in, dim_out, degree_cap):
        return cls(np.zeros((dim_out, get_basis(dim_in, degree_cap).size)), dim_in, degree_cap)

    @classmethod
    def linear(cls, A, degree_cap):
        A = np.atleast_2d(np.asarray(A, dtype=complex))
        basis = get_basis(A.shape[1], degree_cap)
        return cls(linear_coeffs(A, basis), A.shape[1], degree_cap)

    @classmethod
    def from_terms(cls, terms, dim_in, dim_out, degree_cap):
        """Build from ``{(out, alpha): coefficient}``."""
        basis = get_basis(dim_in, degree_cap)
        c = np.zeros((dim_out, basis.size), dtype=complex)
        for (out, alpha), value in terms.items():
            alpha = tuple(int(a) for a in alpha)
            if len(alpha) != dim_in:
                raise DimensionError(f"multi-index {alpha} has wrong length for k={dim_in}")
            if alpha not in basis.index:
                raise ValueError(f"multi-index {alpha} outside degrees 1..{degree_cap}")
            c[out, basis.index[alpha]] += value
        return cls(c, dim_in, degree_cap)

    @classmethod
    def univariate(cls, coefficients, degree_cap=None):
        """1-D jet from ``[c1, c2, ...]`` meaning ``c1 z + c2 z**2 + ...``."""
        coefficients = list(coefficients)
        D = degree_cap or len(coefficients)
        c = np.zeros((1, D), dtype=complex)
        n = min(D, len(coefficients))
        c[0, :n] = coefficients[:n]
        return cls(c, 1, D)

    # views ----------------------------------------------------------------
    def terms(self):
        out = {}
        for i, j in zip(*np.nonzero(self._coeffs)):
            out[(int(i), tuple(int(a) for a in self.basis.exponents[j]))] = complex(self._coeffs[i, j])
        return out

    def coefficient(self, out, alpha):
        return complex(self._coeffs[out, self.basis.index[tuple(alpha)]])

    def linear_part(self):
        """The ``(dim_out, dim_in)`` matrix of the degree-one slice."""
        return np.array(self._coeffs[:, self.basis.degree_slices[1]])

    def nonlinear_part(self):
        c = self._coeffs.copy()
        c[:, self.basis.degree_slices[1]] = 0
        return JetMap(c, self.dim_in, self.degree_cap)

    def is_linear(self):
        return not np.any(self._coeffs[:, self.basis.degrees > 1])

    def with_degree_cap(self, D):
        """Truncate or zero-pad to a new degree cap."""
        new = get_basis(self.dim_in, D)
        c = np.zeros((self.dim_out, new.size), dtype=complex)
        for j, alpha in enumerate(map(tuple, self.basis.exponents)):
            if alpha in new.index:
                c[:, new.index[alpha]] = self._coeffs[:, j]
        return JetMap(c, self.dim_in, D)

    def norm(self):
        """Max-modulus coefficient norm."""
        return float(np.max(np.abs(self._coeffs), initial=0.0))

    # algebra ----------------------------------------------------------------
    def __add__(self, other):
        _check_same_space(self, other)
        return JetMap(self._coeffs + other._coeffs, self.dim_in, self.degree_cap)

    def __sub__(self, other):
        _check_same_space(self, other)
        return JetMap(self._coeffs - other._coeffs, self.dim_in, self.degree_cap)

    def __neg__(self):
        return JetMap(-self._coeffs, self.dim_in, self.degree_cap)

    def scale(self, c):
        return JetMap(c * self._coeffs, self.dim_in, self.degree_cap)

    def __matmul__(self, other):
        return compose(self, other)

    def __call__(self, v):
        return evaluate(self, v)

    def __eq__(self, other):
        if not isinstance(other, JetMap):
            return NotImplemented
        return (
            self.dim_in == other.dim_in
            and self.degree_cap == other.degree_cap
            and np.array_equal(self._coeffs, other._coeffs)
        )

    __hash__ = None

    def allclose(self, other, atol=1e-12):
        _check_same_space(self, other)
        return bool(np.allclose(self._coeffs, other._coeffs, rtol=0, atol=atol))

    def __repr__(self):
        return f"JetMap(dim_in={self.dim_in}, dim_out={self.dim_out}, degree_cap={self.degree_cap}, nnz={np.count_nonzero(self._coeffs)})"

    # serialization ----------------------------------------------------------
    def to_dict(self):
        terms = [
            {"out": out, "alpha": list(alpha), "re": value.real, "im": value.imag}
            for (out, alpha), value in sorted(
                self.terms().items(), key=lambda kv: (kv[0][0], self.basis.index[kv[0][1]])
            )
        ]
        return {
            "dim_in": self.dim_in,
            "dim_out": self.dim_out,
            "degree_cap": self.degree_cap,
            "terms": terms,
        }

    @classmethod
    def from_dict(cls, d):
        terms = {}
        for t in d["terms"]:
            key = (int(t["out"]), tuple(t["alpha"]))
            terms[key] = terms.get(key, 0) + complex(t["re"], t.get("im", 0.0))
        return cls.from_terms(terms, int(d["dim_in"]), int(d["dim_out"]), int(d["degree_cap"]))

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, s):
        return cls.from_dict(json.loads(s))


def _check_same_space(F, G):
    if F.dim_in != G.dim_in or F.dim_out != G.dim_out:
        raise DimensionError(f"dimension mismatch: {F!r} vs {G!r}")
    if F.degree_cap != G.degree_cap:
        raise DimensionError(f"degree-cap mismatch: {F.degree_cap} vs {G.degree_cap}")


def compose(F: JetMap, G: JetMap) -> JetMap:
    """Truncation of ``F o G`` to the common degree cap."""
    if F.dim_in != G.dim_out:
        raise DimensionError(f"cannot compose: F.dim_in={F.dim_in}, G.dim_out={G.dim_out}")
    if F.degree_cap != G.degree_cap:
        raise DimensionError(f"degree-cap mismatch: {F.degree_cap} vs {G.degree_cap}")
    c = compose_coeffs(F.coeffs, G.coeffs, F.basis, G.basis)
    return JetMap(c, G.dim_in, G.degree_cap)


def homogeneous_part(F: JetMap, p: int) -> JetMap:
    if not 1 <= p <= F.degree_cap:
        raise ValueError(f"degree {p} outside 1..{F.degree_cap}")
    c = np.where(F.basis.degree_mask(p), F.coeffs, 0)
    return JetMap(c, F.dim_in, F.degree_cap)


def formal_inverse(F: JetMap, cond_cap: float = CONDITION_CAP) -> JetMap:
    """Compositional inverse, exact in every coefficient up to the degree cap."""
    if F.dim_in != F.dim_out:
        raise DimensionError("formal inverse needs a square jet")
    return JetMap(inverse_coeffs(F.coeffs, F.basis, cond_cap), F.dim_in, F.degree_cap)


def evaluate(F: JetMap, v):
    """Evaluate at one point ``(k,)`` or a batch ``(n, k)``."""
    v = np.asarray(v, dtype=complex)
    if v.shape[-1] != F.dim_in:
        raise DimensionError(f"point dimension {v.shape[-1]} != dim_in {F.dim_in}")
    return F.basis.monomial_values(v) @ F.coeffs.T


def sup_bound(F: JetMap, radius: float) -> float:
    """Bound on ``max_i |F_i|`` over the closed polydisc of ``radius``."""
    weights = float(radius) ** F.basis.degrees
    return float(np.max(np.abs(F.coeffs) @ weights))


def coefficient_lipschitz_bound(F: JetMap, radius: float) -> float:
    """Rigorous bound on ``Lip(F - d_0 F)`` over the polydisc of ``radius``.

    Uses the Frobenius norm of the entrywise bound
    ``sum_alpha |c_{i,alpha}| alpha_j radius**(|alpha|-1)`` on the Jacobian.
    """
    basis = F.basis
    mask = basis.degrees > 1
    if not np.any(mask):
        return 0.0
    w = float(radius) ** (basis.degrees[mask] - 1)
    abs_c = np.abs(F.coeffs[:, mask]) * w  # (m, M')
    J = abs_c @ basis.exponents[mask]  # (m, k)
    return float(np.sqrt(np.sum(J**2)))


def coefficient_lipschitz_radius(F: JetMap, kappa: float, cap: float = 1.0) -> float:
    """Largest radius (up to ``cap``) where :func:`coefficient_lipschitz_bound` <= kappa."""
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    if coefficient_lipschitz_bound(F, cap) <= kappa:
        return float(cap)
    lo, hi = 0.0, float(cap)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if coefficient_lipschitz_bound(F, mid) <= kappa:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * hi:
            break
    return lo


def lipschitz_radius(F: JetMap, bound: CoeffBound, kappa: float) -> float:
    """Radius on which ``Lip(F - d_0 F) <= kappa`` from the Cauchy bound.

    Returns ``kappa / second_derivative_bound`` capped at half the reference
    radius; a linear jet gets the cap.
    """
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    half = 0.5 * bound.radius
    if F.is_linear() or bound.second_derivative_bound == 0:
        return half
    return min(kappa / bound.second_derivative_bound, half)


def random_polydisc_points(rng, n, k, radius):
    """Uniform samples from the polydisc ``D^k(radius)``."""
    mod = radius * np.sqrt(rng.random((n, k)))
    arg = 2 * np.pi * rng.random((n, k))
    return mod * np.exp(1j * arg)


def sampled_lipschitz(F, radius, n_samples=1000, rng_seed=0):
    """Min and max of ``|F(u) - F(v)| / |u - v|`` over sampled pairs.

    ``F`` is a :class:`JetMap` or any callable on point batches with a
    ``dim_in`` attribute.  Half of the pairs are near-diagonal so the local
    derivative is probed too.
    """
    if radius <= 0 or n_samples < 2:
        raise ValueError("need radius > 0 and n_samples >= 2")
    rng = np.random.default_rng(rng_seed)
    k = F.dim_in
    u = random_polydisc_points(rng, n_samples, k, radius)
    v = random_polydisc_points(rng, n_samples, k, radius)
    half = n_samples // 2
    # near-diagonal pairs, pulled back inside the polydisc
    v[:half] = u[:half] + random_polydisc_points(rng, half, k, 1e-3 * radius)
    over = np.abs(v[:half]) > radius
    v[:half][over] = u[:half][over]
    dist = np.linalg.norm(u - v, axis=1)
    while np.any(dist == 0):
        bad = dist == 0
        v[bad] = random_polydisc_points(rng, int(bad.sum()), k, radius)
        dist = np.linalg.norm(u - v, axis=1)
    ratios = np.linalg.norm(F(u) - F(v), axis=1) / dist
    return float(ratios.min()), float(ratios.max())
