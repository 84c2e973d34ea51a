"""Distortion of inverse branches along a backward orbit.

Assembles the normalizing maps of an orbit from the chain of chart
inverses, and checks the two-sided distortion bound, the conjugacy diagram
and the path-length bound for pulled-back balls.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from ..chain import ContractionChain, SlowSequence, slow_minorant, validate_slow
from ..exceptions import ConstraintError, PipelineError, ValidationError
from ..jets import JetMap, coefficient_lipschitz_radius, compose, formal_inverse
from ..normalform import ISOMETRY_SLACK, normalize
from ..spectrum import LyapunovSpectrum, suggest_parameters, validate_constraints
from .cocycle import CocycleData, OseledecData, build_cocycle, estimate_spectrum, oseledec_reduce
from .maps import ChartAtlas, chart_jacobian, chart_map, fs_distance_chart
from .orbits import BackwardOrbit

DIAGRAM_RTOL = 1e-7
ROUNDING = 1e-12


def jet_jacobian(F: JetMap, v):
    """Derivative of a jet at points ``v`` of shape ``(..., k)``; returns ``(..., m, k)``."""
    v = np.asarray(v, dtype=complex)
    E = F.basis.exponents
    out = np.zeros(v.shape[:-1] + (F.dim_out, F.dim_in), dtype=complex)
    for j in range(F.dim_in):
        has = E[:, j] > 0
        Ej = E[has].copy()
        Ej[:, j] -= 1
        mono = np.prod(v[..., None, :] ** Ej, axis=-1) * E[has, j]
        out[..., :, j] = mono @ F.coeffs[:, has].T
    return out


def _newton_jet_inverse(F: JetMap, Finv: JetMap, xi, iters=6):
    """Solve ``F(v) = xi`` from the reversion guess ``Finv(xi)``."""
    v = Finv(xi)
    for _ in range(iters):
        r = F(v) - xi
        if np.max(np.abs(r), initial=0.0) == 0:
            break
        v = v - np.linalg.solve(jet_jacobian(F, v), r[..., None])[..., 0]
    return v


def _ball_points(rng, n, k, radius):
    """Uniform samples in the complex Euclidean ball of ``radius`` in C^k."""
    z = rng.normal(size=(n, k)) + 1j * rng.normal(size=(n, k))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    return z * (radius * rng.random(n) ** (1.0 / (2 * k)))[:, None]


@dataclass
class TheoremAData:
    """Normalizing maps of one backward orbit.

    ``phi_hat(n, w)`` takes unitary-chart coordinates ``w`` at ``x_{-n}`` to
    ``phi_n(C_n w)``; ``D(n)`` is ``A^gamma_{n-1} ... A^gamma_0``.
    """

    orbit: BackwardOrbit
    cocycle: CocycleData
    oseledec: OseledecData
    chain: ContractionChain
    result: object
    spectrum: LyapunovSpectrum
    gamma: float
    epsilon: float
    r0: float
    r_hat: float
    rho_hat: float
    h_hat: float
    h_eps: float
    h_chart: float
    n_hat: int
    N: int
    lemma_radii: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    @property
    def f(self):
        return self.orbit.f

    @property
    def r_prime(self):
        return self.r_hat / self.h_hat

    def domain_radius(self, n):
        """FS radius ``r_hat e^{-n(gamma + 2 eps)}`` of the domain at ``x_{-n}``."""
        return self.r_hat * math.exp(-n * (self.gamma + 2 * self.epsilon))

    def phi_hat(self, n, w):
        w = np.asarray(w, dtype=complex)
        return self.result.phi_at(n)(w @ self.oseledec.C_at(n).T)

    def phi_hat_inverse(self, n, xi):
        phi = self.result.phi_at(n)
        key = ("phi_inv", n)
        if key not in self.diagnostics.setdefault("_cache", {}):
            self.diagnostics["_cache"][key] = formal_inverse(phi)
        v = _newton_jet_inverse(phi, self.diagnostics["_cache"][key], np.asarray(xi, dtype=complex))
        return v @ self.oseledec.Cinv_at(n).T

    def D(self, n):
        k = self.spectrum.k
        M = np.eye(k, dtype=complex)
        lin = self.result.shifted.linear_parts(np.arange(0, n))
        for A in lin:
            M = A @ M
        return M

    def chart(self, n):
        return self.cocycle.chart(n)

    def pullback(self, n, w):
        """``f_x^{-n}``: chart coordinates at ``x_0`` to chart coordinates at ``x_{-n}``."""
        y = np.atleast_2d(np.asarray(w, dtype=complex))
        f = self.f
        for m in range(n):
            src, dst = self.chart(m + 1), self.chart(m)
            target = y
            y = self.cocycle.map_at(m)(target)
            for _ in range(8):
                r = chart_map(f, src, dst, y) - target
                if np.max(np.abs(r)) <= 1e-300:
                    break
                y = y - np.linalg.solve(chart_jacobian(f, src, dst, y), r[..., None])[..., 0]
        return y

    def push(self, n, y):
        """``f^n``: chart coordinates at ``x_{-n}`` to chart coordinates at ``x_0``."""
        y = np.atleast_2d(np.asarray(y, dtype=complex))
        for m in range(n, 0, -1):
            y = chart_map(self.f, self.chart(m), self.chart(m - 1), y)
        return y

    def slow_sequences(self):
        """``rho``, ``r`` and ``1/h`` along the orbit, as ``SlowSequence`` objects."""
        eps = self.epsilon
        od = self.oseledec
        return {
            "rho": self.chain.radius_sequence(),
            "r": self.result.radii,
            "h_inv": SlowSequence(od.n_min, 1.0 / od.h, eps),
        }

    def to_dict(self):
        return {
            "k": self.spectrum.k, "exponents": list(self.spectrum.exponents),
            "multiplicities": list(self.spectrum.multiplicities),
            "gamma": self.gamma, "epsilon": self.epsilon, "r0": self.r0, "r_hat": self.r_hat,
            "rho_hat": self.rho_hat, "h_hat": self.h_hat, "h_eps": self.h_eps, "h_chart": self.h_chart,
            "n_hat": self.n_hat, "N": self.N, "oseledec_mode": self.oseledec.mode,
            "lemma_constant": self.orbit.c,
            **{k: v for k, v in self.diagnostics.items() if not k.startswith("_")},
        }


def _chain_radii(maps, lemma, Cinv, theta, k, epsilon):
    raw = []
    for W, rl, Ci in zip(maps, lemma, Cinv):
        kappa = theta - float(np.linalg.norm(W.linear_part(), 2))
        if kappa <= 0:
            raise PipelineError("assemble_theorem_A", "linear part exceeds the contraction bound")
        # the inverse-function radius lives in raw chart coordinates
        r_c = rl / (math.sqrt(k) * float(np.linalg.norm(Ci, 2)))
        raw.append(min(r_c, coefficient_lipschitz_radius(W, kappa, cap=1.0)))
    return slow_minorant(raw, epsilon)


def assemble_theorem_A(f, orbit: BackwardOrbit, gamma=None, epsilon=None, spectrum: LyapunovSpectrum = None,
                       degree_cap: int = 5, window: int = 20, margin: float = None,
                       isometry_slack: float = ISOMETRY_SLACK, n_samples: int = 200, rng_seed: int = 0,
                       atlas: ChartAtlas = None) -> TheoremAData:
    """Normalize the chain ``W_n = C_{n+1} o F_n^{-1} o C_n^{-1}`` of an orbit.

    Parameters
    ----------
    spectrum : LyapunovSpectrum, optional
        Takes precedence over the finite-time estimate.
    margin : float, optional
        Lower bound ``|C_n v| >= margin |v|``; defaults to ``e^{4 * isometry_slack}``
        so the distortion band at ``n = 0`` absorbs the isometry slack of
        the normalizing maps.
    """
    atlas = atlas or ChartAtlas()
    if atlas.kind != "unitary":
        raise ValidationError("distortion constants are only available for the unitary atlas")
    cocycle = build_cocycle(f, orbit, atlas, degree_cap)
    spec = spectrum if spectrum is not None else estimate_spectrum(cocycle)
    if spec.k != f.k:
        raise ValidationError(f"spectrum dimension {spec.k} != {f.k}")
    if gamma is None:
        g, e = suggest_parameters(spec)
        gamma = g
        epsilon = e if epsilon is None else epsilon
    elif epsilon is None:
        epsilon = suggest_parameters(spec)[1]
    params = validate_constraints(spec, gamma, epsilon)
    if not params.valid:
        raise ConstraintError(f"(gamma, eps) = ({gamma}, {epsilon}) fails {params.failed()}")
    margin = math.exp(4 * isometry_slack) if margin is None else margin
    od = oseledec_reduce(cocycle, spec, epsilon, window=window, margin=margin)

    k = f.k
    maps = []
    mask = np.zeros((k, k), dtype=bool)
    for sl in spec.block_slices():
        mask[sl, sl] = True
    lin_slice = cocycle.maps[0].basis.degree_slices[1]
    for n in cocycle.indices:
        n = int(n)
        W = compose(JetMap.linear(od.C_at(n + 1), degree_cap),
                    compose(cocycle.map_at(n), JetMap.linear(od.Cinv_at(n), degree_cap)))
        c = np.array(W.coeffs)
        c[:, lin_slice] = np.where(mask, c[:, lin_slice], 0)
        maps.append(JetMap(c, k, degree_cap))
    der = cocycle.derivatives
    t = np.linalg.svd(der, compute_uv=False)[:, -1] ** 2
    lemma = np.minimum(orbit.c * t, 1.0)
    theta = math.exp(-spec.exponents[-1] + 2 * epsilon)
    radii = _chain_radii(maps, lemma, od.Cinv[:-1], theta, k, epsilon)
    chain = ContractionChain(cocycle.n_min, maps, radii, spec, epsilon)
    result = normalize(chain, gamma, epsilon, isometry_slack=isometry_slack, n_samples=n_samples,
                       rng_seed=rng_seed)

    r0 = float(result.radii[0])
    h_eps = od.h_at(0)
    h_chart = ChartAtlas.distortion(min(r0, 0.5))
    h_hat = h_chart * h_eps * math.exp(2 * isometry_slack)
    r_hat = r0 / h_hat
    lam_l = spec.exponents[-1]
    rate = -lam_l + 4 * epsilon + gamma
    if rate >= 0:
        raise ConstraintError("4 eps + gamma must be below the smallest exponent")
    n_hat = max(0, math.ceil(math.log(h_eps) / -rate - 1e-12)) if h_eps > 1 else 0
    N = min(orbit.N, int(result.indices[-1]))
    if n_hat > N:
        raise PipelineError("assemble_theorem_A", f"n_hat = {n_hat} exceeds the orbit length {N}")
    data = TheoremAData(orbit, cocycle, od, chain, result, spec, gamma, epsilon, r0, r_hat, 4 * r0,
                        h_hat, h_eps, h_chart, n_hat, N, lemma)
    data.diagnostics["normalize_ok"] = bool(result.diagnostics["diagram"].ok)
    data.diagnostics["oseledec_leakage"] = float(np.max(od.leakage))
    data.diagnostics["block_margin"] = od.block_margin
    return data


@dataclass
class TheoremAReport:
    rows: list
    slow: dict
    block_bounds: list
    n_hat: int
    r_hat: float
    h_hat: float

    @property
    def ok(self):
        return (all(r["pass"] for r in self.rows) and all(self.slow.values())
                and all(b["pass"] for b in self.block_bounds))

    def to_dict(self):
        return {"rows": self.rows, "slow": self.slow, "block_bounds": self.block_bounds,
                "n_hat": self.n_hat, "r_hat": self.r_hat, "h_hat": self.h_hat, "ok": self.ok}

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        cols = ["n", "lip_low", "lip_high", "bound_low", "bound_high", "residual", "pass"]
        w.writerow(cols)
        for r in self.rows:
            w.writerow([r["n"]] + [repr(float(r[c])) for c in cols[1:-1]] + [int(r["pass"])])
        return buf.getvalue()


def verify_theorem_A(data: TheoremAData, n_samples: int = 200, rng_seed: int = 0,
                     rtol: float = DIAGRAM_RTOL) -> TheoremAReport:
    """Sandwich bound and diagram residual for ``n = 0`` and ``n_hat <= n <= N``."""
    rng = np.random.default_rng(rng_seed)
    k = data.spectrum.k
    g, e = data.gamma, data.epsilon
    tol = rtol * data.r_hat
    phi0_w = None
    w = _ball_points(rng, n_samples, k, math.tan(data.r_hat))
    phi0_w = data.phi_hat(0, w)
    rows = []
    ns = sorted({0, *range(max(data.n_hat, 1), data.N + 1)})
    for n in ns:
        R = math.tan(data.domain_radius(n))
        u = _ball_points(rng, n_samples, k, R)
        half = n_samples // 2
        v = np.concatenate([_ball_points(rng, half, k, R),
                            u[half:] + _ball_points(rng, n_samples - half, k, 1e-2 * R)])
        # keep the perturbed points inside the ball
        over = np.linalg.norm(v, axis=1) > R
        v[over] *= (R / np.linalg.norm(v[over], axis=1))[:, None]
        dist = fs_distance_chart(u, v)
        keep = dist > 0
        ratio = np.linalg.norm(data.phi_hat(n, u[keep]) - data.phi_hat(n, v[keep]), axis=1) / dist[keep]
        y = data.pullback(n, w)
        res = float(np.max(np.linalg.norm(data.phi_hat(n, y) - phi0_w @ data.D(n).T, axis=1)))
        inside = float(np.max(np.arctan(np.linalg.norm(y, axis=1)))) / data.domain_radius(n) if n else 1.0
        lo, hi = math.exp(n * (g - 2 * e)), math.exp(n * (g + 3 * e)) * data.h_hat
        row = {"n": n, "lip_low": float(ratio.min()), "lip_high": float(ratio.max()),
               "bound_low": lo, "bound_high": hi, "residual": res, "containment": inside}
        row["pass"] = bool(row["lip_low"] >= lo * (1 - ROUNDING) and row["lip_high"] <= hi * (1 + ROUNDING)
                           and res <= tol and (n < data.n_hat or inside <= 1 + ROUNDING))
        rows.append(row)
    slow = {name: bool(validate_slow(seq).ok) for name, seq in data.slow_sequences().items()}
    blocks = []
    for n in ns:
        D = data.D(n)
        for j, sl in enumerate(data.spectrum.block_slices()):
            lam = data.spectrum.exponents[j]
            cols = np.linalg.norm(D[:, sl], axis=0)
            lo, hi = math.exp(-n * lam + n * (g - e)), math.exp(-n * lam + n * (g + e))
            off = float(np.max(np.abs(np.delete(D[:, sl], np.arange(sl.start, sl.stop), axis=0)), initial=0.0))
            blocks.append({"n": n, "j": j + 1, "min": float(cols.min()), "max": float(cols.max()),
                           "bound_low": lo, "bound_high": hi, "off_block": off,
                           "pass": bool(cols.min() >= lo * (1 - ROUNDING) and cols.max() <= hi * (1 + ROUNDING)
                                        and off == 0.0)})
    return TheoremAReport(rows, slow, blocks, data.n_hat, data.r_hat, data.h_hat)


@dataclass
class ConvexityResult:
    length: float
    bound: float
    distance: float
    passed: bool
    inclusion_3: bool
    inclusion_4: bool
    failed_inclusion: str = None

    @property
    def ratio(self):
        return self.length / self.distance if self.distance > 0 else 0.0


def sample_pullback_pair(data: TheoremAData, t: float, n: int, rng):
    """Two points of ``f^{-n}(B_{x_0}(t r'))`` in chart coordinates at ``x_{-n}``."""
    w = _ball_points(rng, 2, data.spectrum.k, math.tan(t * data.r_prime))
    y = data.pullback(n, w)
    return y[0], y[1]


def convexity_defect(data: TheoremAData, t: float, p, q, n: int, segments: int = 256) -> ConvexityResult:
    """Length of the path ``phi_hat_n^{-1}([phi_hat_n(p), phi_hat_n(q)])`` against ``e^{5 n eps} h_hat d(p, q)``.

    ``p`` and ``q`` are chart coordinates at ``x_{-n}``.
    """
    if not 0 < t <= 1:
        raise ValidationError("t must lie in (0, 1]")
    p, q = np.asarray(p, dtype=complex), np.asarray(q, dtype=complex)
    d = float(fs_distance_chart(p, q))
    bound = math.exp(5 * n * data.epsilon) * data.h_hat * d
    if d == 0:
        return ConvexityResult(0.0, 0.0, 0.0, True, True, True)
    s = np.linspace(0.0, 1.0, segments + 1)[:, None]
    xp, xq = data.phi_hat(n, p[None])[0], data.phi_hat(n, q[None])[0]
    seg = (1 - s) * xp + s * xq
    # (3): the segment lies in D_n(polydisc of radius t r_hat)
    pre = np.linalg.solve(data.D(n), seg.T).T
    inc3 = bool(np.max(np.abs(pre)) <= t * data.r_hat * (1 + ROUNDING))
    path = data.phi_hat_inverse(n, seg)
    # (4): the path lies in f^{-n}(B_{x_0}(t r_hat))
    img = data.push(n, path)
    inc4 = bool(np.max(np.arctan(np.linalg.norm(img, axis=1))) <= t * data.r_hat * (1 + ROUNDING))
    length = float(np.sum(fs_distance_chart(path[:-1], path[1:])))
    failed = None if inc3 and inc4 else ("(3)" if not inc3 else "(4)")
    return ConvexityResult(length, bound, d, bool(length <= bound and inc3 and inc4), inc3, inc4, failed)
