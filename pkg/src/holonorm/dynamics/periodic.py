"""Periodic points of polynomial maps of P^1 and the repelling-cycle sums."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as P

from ..exceptions import ValidationError
from .maps import ProjectiveEndomorphism, from_affine
from .orbits import sample_equilibrium

COMPANION_MAX_DEGREE = 32
REPELLING_FLOOR = 1e-8
N_MAX_DEFAULT = 12


def polynomial_coefficients(f: ProjectiveEndomorphism):
    """Ascending coefficients of ``p`` when ``f = [x_0^d : x_0^d p(x_1/x_0)]``."""
    if f.k != 1:
        raise ValidationError("periodic-point enumeration needs k = 1")
    d = f.d
    E0, c0 = f._exps[0], f._coefs[0]
    if len(c0) != 1 or tuple(E0[0]) != (d, 0):
        raise ValidationError("the first component must be a multiple of x_0^d (polynomial map)")
    out = np.zeros(d + 1, dtype=complex)
    for e, c in zip(f._exps[1], f._coefs[1]):
        out[e[1]] += c / c0[0]
    if out[-1] == 0:
        raise ValidationError("polynomial degree is below the algebraic degree")
    return out


def _iterate(p, dp, z, n):
    """``p^n(z)`` and ``(p^n)'(z)``."""
    w = np.array(z, dtype=complex)
    dw = np.ones_like(w)
    for _ in range(n):
        dw = dw * P.polyval(w, dp)
        w = P.polyval(w, p)
    return w, dw


def _preimage_tree(p, z, n):
    """All ``d^n`` points of ``p^{-n}(z)``."""
    pts = np.array([z], dtype=complex)
    for _ in range(n):
        out = []
        for w in pts:
            c = p.copy()
            c[0] -= w
            out.append(np.roots(c[::-1]))
        pts = np.concatenate(out)
    return pts


def _newton_ratio(p, dp, z, n, escape=1e10):
    """``(p^n(z) - z) / ((p^n)'(z) - 1)`` without overflow.

    An orbit leaving the disc of radius ``escape`` after ``i`` steps is
    finished with ``p^m(w) / (p^m)'(w) ~ w / d^m``.
    """
    d = len(p) - 1
    w = np.array(z, dtype=complex)
    dw = np.ones_like(w)
    ratio = np.empty_like(w)
    live = np.ones(w.shape, dtype=bool)
    with np.errstate(all="ignore"):
        for i in range(n):
            out = live & (np.abs(w) > escape)
            ratio[out] = w[out] / (float(d) ** (n - i) * dw[out])
            live &= ~out
            dw[live] = dw[live] * P.polyval(w[live], dp)
            w[live] = P.polyval(w[live], p)
        ratio[live] = (w[live] - z[live]) / (dw[live] - 1)
    ratio[~np.isfinite(ratio)] = 0.0
    return ratio


def _aberth(p, dp, n, z, tol=1e-15, max_iter=200, chunk=512):
    """Simultaneous (Aberth) iteration for the roots of ``p^n(z) - z``.

    Roots stop moving once their correction falls below ``tol`` (relative).
    """
    z = z.copy()
    active = np.ones(len(z), dtype=bool)
    for _ in range(max_iter):
        idx = np.nonzero(active)[0]
        if len(idx) == 0:
            return z, True
        ratio = _newton_ratio(p, dp, z[idx], n)
        s = np.empty(len(idx), dtype=complex)
        with np.errstate(all="ignore"):
            for a in range(0, len(idx), chunk):
                rows = idx[a:a + chunk]
                diff = z[rows, None] - z[None, :]
                diff[np.arange(len(rows)), rows] = np.inf
                s[a:a + chunk] = (1.0 / diff).sum(axis=1)
            step = ratio / (1 - ratio * s)
        step[~np.isfinite(step)] = 0.0
        z[idx] -= step
        active[idx] = np.abs(step) > tol * (1 + np.abs(z[idx]))
    return z, not active.any()


def periodic_points(f: ProjectiveEndomorphism, n: int):
    """All finite solutions of ``f^n(z) = z`` with multipliers.

    Returns ``(points, multipliers, reliable)``.  Companion-matrix roots are
    used up to degree 32; above that, Aberth iteration started from the
    ``n``-th preimages of a repelling fixed point.
    """
    if n < 1:
        raise ValidationError("period must be >= 1")
    p = polynomial_coefficients(f)
    dp = P.polyder(p)
    d = f.d
    deg = d ** n
    if deg <= COMPANION_MAX_DEGREE:
        comp = np.array([0, 1], dtype=complex)
        for _ in range(n):
            acc = np.array([p[-1]])
            for c in p[-2::-1]:         # Horner: p(comp)
                acc = P.polyadd(P.polymul(acc, comp), [c])
            comp = acc
        comp = P.polysub(comp, [0, 1])
        z = np.roots(comp[::-1])
        # Newton polish on the iterate
        for _ in range(3):
            g, dg = _iterate(p, dp, z, n)
            ok = np.abs(dg - 1) > 0
            z[ok] -= (g[ok] - z[ok]) / (dg[ok] - 1)
        converged = True
    else:
        # start from the n-th preimages of a repelling fixed point, which
        # are spread over the Julia set like the periodic points
        fixed = np.roots(P.polysub(p, [0, 1])[::-1])
        z0 = fixed[int(np.argmax(np.abs(P.polyval(fixed, dp))))]
        z, converged = _aberth(p, dp, n, _preimage_tree(p, z0, n))
    with np.errstate(all="ignore"):
        g, dg = _iterate(p, dp, z, n)
    diff = np.abs(z[:, None] - z[None, :])
    np.fill_diagonal(diff, np.inf)
    sep = float(np.min(diff))
    resid = float(np.max(np.abs(_newton_ratio(p, dp, z, n))))
    reliable = bool(converged and len(z) == deg and resid < 1e-3 * sep)
    return z, dg, reliable


@dataclass
class PeriodicRow:
    n: int
    count: int
    repelling: int
    S_n: float
    lambda_hat: float
    reliable: bool

    @property
    def gap(self):
        return abs(self.S_n - self.lambda_hat)


@dataclass
class RepellingExperiment:
    rows: list
    lambda_hat: float
    seed: int
    metadata: dict = field(default_factory=dict)

    def to_csv(self, header_lines=()):
        lines = [f"# {h}" for h in header_lines]
        lines.append("n,count,S_n,lambda_hat,gap")
        for r in self.rows:
            lines.append(f"{r.n},{r.count},{r.S_n!r},{r.lambda_hat!r},{r.gap!r}")
        return "\n".join(lines) + "\n"

    def to_dict(self):
        return {"lambda_hat": self.lambda_hat, "seed": self.seed,
                "rows": [{"n": r.n, "count": r.count, "repelling": r.repelling, "S_n": r.S_n,
                          "lambda_hat": r.lambda_hat, "gap": r.gap, "reliable": r.reliable} for r in self.rows],
                **self.metadata}


def repelling_sum(f: ProjectiveEndomorphism, n: int, floor: float = REPELLING_FLOOR):
    """``(count, #repelling, S_n, reliable)`` with ``S_n = d^{-n} sum log |f'(p)|`` over repelling ``p``.

    Every fixed point of ``f^n`` counts, including those of lower period.
    """
    z, mult, reliable = periodic_points(f, n)
    p = polynomial_coefficients(f)
    rep = np.abs(mult) > 1 + floor
    S = float(np.sum(np.log(np.abs(P.polyval(z[rep], P.polyder(p))))) / f.d ** n)
    if len(z) != f.d ** n:
        reliable = False
    return len(z), int(rep.sum()), S, reliable


def birkhoff_estimate(f: ProjectiveEndomorphism, seed_point=None, depth: int = 30, count: int = 4000,
                      rng_seed: int = 0):
    """Average of ``log |p'|`` over equilibrium samples."""
    p = polynomial_coefficients(f)
    seed_point = from_affine([0.1234 + 0.0567j]) if seed_point is None else seed_point
    X = sample_equilibrium(f, seed_point, depth, count, rng_seed)
    z = X[:, 1] / X[:, 0]
    return float(np.mean(np.log(np.abs(P.polyval(z, P.polyder(p))))))


def repelling_experiment(f: ProjectiveEndomorphism, n_max: int = N_MAX_DEFAULT, rng_seed: int = 0,
                         samples: int = 4000, depth: int = 30, n_cap: int = N_MAX_DEFAULT) -> RepellingExperiment:
    """Rows ``n = 1..n_max`` of the repelling-cycle sums with an independent exponent estimate."""
    if n_max > n_cap:
        raise ValidationError(f"n_max = {n_max} exceeds the configured cap {n_cap}")
    lam = birkhoff_estimate(f, depth=depth, count=samples, rng_seed=rng_seed)
    rows = []
    for n in range(1, n_max + 1):
        count, rep, S, ok = repelling_sum(f, n)
        rows.append(PeriodicRow(n, count, rep, S, lam, ok))
    return RepellingExperiment(rows, lam, rng_seed, {"periodic_points": "all fixed points of f^n (any period dividing n)"})
