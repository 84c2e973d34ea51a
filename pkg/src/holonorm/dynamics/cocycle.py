"""The inverse-branch cocycle in charts and its Oseledec block reduction."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..exceptions import PipelineError, ValidationError
from ..jets import JetMap, formal_inverse
from ..spectrum import LyapunovSpectrum
from .maps import ChartAtlas, chart_jacobian, chart_jet
from .orbits import BackwardOrbit

LINEAR_CHECK_TOL = 1e-12
LEAKAGE_TOL = 1e-6
EXACT_BLOCK_TOL = 1e-14


@dataclass
class CocycleData:
    """``maps[n - n_min]`` is ``F_n^{-1}``, from the chart at ``x_{-n}`` to the chart at ``x_{-n-1}``.

    ``derivatives`` holds the chart derivative of ``f`` at ``x_{-n-1}``.
    """

    n_min: int
    maps: list
    derivatives: np.ndarray
    orbit: BackwardOrbit
    atlas: ChartAtlas
    degree_cap: int
    linear_error: float = 0.0

    @property
    def k(self):
        return self.orbit.f.k

    @property
    def n_max(self):
        return self.n_min + len(self.maps) - 1

    @property
    def indices(self):
        return np.arange(self.n_min, self.n_max + 1)

    @property
    def linear_parts(self):
        return np.stack([F.linear_part() for F in self.maps])

    def map_at(self, n):
        return self.maps[n - self.n_min]

    def chart(self, n):
        """Chart centred at ``x_{-n}``."""
        return self.atlas.chart(self.orbit.point(-n))


def build_cocycle(f, orbit: BackwardOrbit, atlas: ChartAtlas = None, degree_cap: int = 5) -> CocycleData:
    """Jets of the local inverses ``F_n^{-1}`` for ``-n_forward <= n <= N - 1``.

    The jet of ``F = psi_{x_{-n}}^{-1} o f o psi_{x_{-n-1}}`` is computed by
    series substitution and inverted by formal reversion; its linear part is
    checked against the inverse of the chart Jacobian.
    """
    atlas = atlas or ChartAtlas()
    if orbit.f is not f and orbit.f.to_dict() != f.to_dict():
        raise ValidationError("orbit was built for a different map")
    n_min, n_max = -orbit.n_forward, orbit.N - 1
    if n_max < n_min:
        raise ValidationError("orbit too short for a cocycle")
    charts = {m: atlas.chart(orbit.point(m)) for m in range(-orbit.N, orbit.n_forward + 1)}
    maps, ders, err = [], [], 0.0
    zero = np.zeros(f.k)
    for n in range(n_min, n_max + 1):
        src, dst = charts[-n - 1], charts[-n]
        F = chart_jet(f, src, dst, degree_cap)
        J = chart_jacobian(f, src, dst, zero)
        Finv = formal_inverse(F)
        Jinv = np.linalg.inv(J)
        e = float(np.max(np.abs(Finv.linear_part() - Jinv)) / max(1.0, np.max(np.abs(Jinv))))
        if e > LINEAR_CHECK_TOL:
            raise PipelineError("build_cocycle", f"linear part mismatch {e:.3g} at index {n}")
        err = max(err, e)
        maps.append(Finv)
        ders.append(J)
    return CocycleData(n_min, maps, np.array(ders), orbit, atlas, degree_cap, err)


def finite_time_exponents(linear_parts):
    """Exponents ``-(1/L) sum log |R_ii|`` of the product of contracting linear parts, decreasing."""
    A = np.asarray(linear_parts)
    k = A.shape[-1]
    Q = np.eye(k, dtype=complex)
    acc = np.zeros(k)
    for An in A:
        Q, R = np.linalg.qr(An @ Q)
        acc += np.log(np.abs(np.diag(R)))
    return np.sort(-acc / len(A))[::-1]


def estimate_spectrum(cocycle: CocycleData, tol: float = 0.05) -> LyapunovSpectrum:
    """Finite-time spectrum, merging exponents closer than ``tol`` into one block."""
    ex = finite_time_exponents(cocycle.linear_parts)
    groups = [[ex[0]]]
    for x in ex[1:]:
        if groups[-1][-1] - x < tol:
            groups[-1].append(x)
        else:
            groups.append([x])
    return LyapunovSpectrum(tuple(float(np.mean(g)) for g in groups), tuple(len(g) for g in groups))


@dataclass
class OseledecData:
    """Change of basis ``C_n`` for ``n_min <= n <= n_max + 1``.

    ``conjugated[n - n_min] = C_{n+1} A_n C_n^{-1}`` with off-block entries
    removed; ``leakage`` is what was removed, relative to ``|A_n|``.
    """

    n_min: int
    C: np.ndarray
    Cinv: np.ndarray
    h: np.ndarray
    spectrum: LyapunovSpectrum
    mode: str
    leakage: np.ndarray
    conjugated: np.ndarray
    block_margin: float
    margin: float = 1.0
    diagnostics: dict = field(default_factory=dict)

    @property
    def h_eps(self):
        return float(np.max(self.h))

    def C_at(self, n):
        return self.C[n - self.n_min]

    def Cinv_at(self, n):
        return self.Cinv[n - self.n_min]

    def h_at(self, n):
        return float(self.h[n - self.n_min])


def _block_mask(spectrum):
    k = spectrum.k
    mask = np.zeros((k, k), dtype=bool)
    for sl in spectrum.block_slices():
        mask[sl, sl] = True
    return mask


def _block_margin(A, spectrum, epsilon):
    """Smallest log-distance of block singular values to the edges of ``e^{-Lambda_j +- eps}``."""
    worst = np.inf
    for j, sl in enumerate(spectrum.block_slices()):
        s = np.linalg.svd(A[..., sl, sl], compute_uv=False)
        logs = np.log(s)
        lam = spectrum.exponents[j]
        worst = min(worst, float(np.min(epsilon - np.abs(logs + lam))))
    return worst


def _filtration_bases(A, lo, hi, n, spectrum, L):
    """Orthonormal block bases at index ``n`` from forward/backward products."""
    k = spectrum.k
    mult = spectrum.multiplicities
    cum = np.concatenate([[0], np.cumsum(mult)])
    fwd = [A[i - lo] for i in range(n, min(n + L, hi + 1))]
    bwd = [A[i - lo] for i in range(max(n - L, lo), n)]
    V = U = None
    if fwd:
        P = np.eye(k, dtype=complex)
        for An in fwd:
            P = An @ P
        _, _, Vh = np.linalg.svd(P)
        V = Vh.conj().T            # columns by decreasing singular value
    if bwd:
        P = np.eye(k, dtype=complex)
        for An in bwd:
            P = An @ P
        U, _, _ = np.linalg.svd(P)
    cols = []
    for j in range(spectrum.l):
        kj = mult[j]
        if V is not None:
            # most contracted directions come last; block 1 is the most contracted
            F = V[:, k - cum[j + 1]:]
        if U is not None:
            G = U[:, : k - cum[j]]
        if V is None:
            cols.append(U[:, k - cum[j + 1]: k - cum[j]])
            continue
        if U is None:
            cols.append(V[:, k - cum[j + 1]: k - cum[j]])
            continue
        M = F.conj().T @ G
        a, _, _ = np.linalg.svd(M)
        cols.append(F @ a[:, :kj])
    return np.concatenate(cols, axis=1)


def oseledec_reduce(cocycle, spectrum: LyapunovSpectrum, epsilon: float, window: int = 20,
                    margin: float = 1.0, leakage_tol: float = LEAKAGE_TOL, mode: str = "auto") -> OseledecData:
    """Block-diagonalize the linear cocycle.

    Parameters
    ----------
    cocycle : CocycleData or array_like, shape (L, k, k)
        Linear parts ``A_n`` (contractions) indexed from ``cocycle.n_min`` (or 0).
    margin : float
        Scale ``s >= 1`` with ``|C_n v| >= s |v|``; exact-diagonal mode uses ``C_n = s Id``.
    mode : {"auto", "exact", "finite-time"}
        ``exact`` requires block-diagonal linear parts whose block singular
        values lie in the exponent band; ``auto`` falls back to finite-time
        estimates from singular vectors of partial products over ``window`` steps.
    """
    if isinstance(cocycle, CocycleData):
        A, n_min = cocycle.linear_parts, cocycle.n_min
    else:
        A, n_min = np.asarray(cocycle, dtype=complex), 0
    if A.ndim != 3 or A.shape[1:] != (spectrum.k, spectrum.k):
        raise ValidationError(f"linear parts of shape {A.shape} do not fit a spectrum of dimension {spectrum.k}")
    if margin < 1:
        raise ValidationError("margin must be >= 1")
    L = len(A)
    n_max = n_min + L - 1
    mask = _block_mask(spectrum)
    norms = np.linalg.norm(A, 2, axis=(1, 2))
    off = np.max(np.abs(np.where(mask, 0, A)), axis=(1, 2)) / norms
    exact = bool(np.all(off <= EXACT_BLOCK_TOL)) and _block_margin(A, spectrum, epsilon) >= 0
    if mode == "exact" and not exact:
        raise PipelineError("oseledec_reduce", "linear parts are not block diagonal within the exponent band")
    k = spectrum.k
    if exact and mode != "finite-time":
        C = np.repeat((margin * np.eye(k, dtype=complex))[None], L + 1, axis=0)
        Cinv = np.repeat((np.eye(k, dtype=complex) / margin)[None], L + 1, axis=0)
        conj = np.where(mask, A, 0)
        return OseledecData(n_min, C, Cinv, np.full(L + 1, margin), spectrum, "exact-diagonal", off,
                            conj, _block_margin(conj, spectrum, epsilon), margin)
    B = np.stack([_filtration_bases(A, n_min, n_max, n, spectrum, window) for n in range(n_min, n_max + 2)])
    Binv = np.linalg.inv(B)
    s = margin * float(np.max(np.linalg.norm(B, 2, axis=(1, 2))))
    C, Cinv = s * Binv, B / s
    h = s * np.linalg.norm(Binv, 2, axis=(1, 2))
    raw = np.einsum("nij,njk,nkl->nil", Binv[1:], A, B[:-1])
    rn = np.linalg.norm(raw, 2, axis=(1, 2))
    leak = np.max(np.abs(np.where(mask, 0, raw)), axis=(1, 2)) / rn
    if np.max(leak) > leakage_tol:
        n_bad = int(np.argmax(leak)) + n_min
        raise PipelineError("oseledec_reduce", f"off-block leakage {np.max(leak):.3g} at index {n_bad} "
                            f"exceeds {leakage_tol:.3g} (orbit too short or exponents too close)")
    conj = np.where(mask, raw, 0)
    return OseledecData(n_min, C, Cinv, h, spectrum, "finite-time", leak, conj,
                        _block_margin(conj, spectrum, epsilon), margin, {"window": window})
