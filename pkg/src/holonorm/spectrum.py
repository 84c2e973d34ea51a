"""Lyapunov-spectrum bookkeeping: resonances, gap constant, admissible (gamma, eps).

Exponents are positive contraction rates in nats, listed in decreasing order
``Lambda_1 > ... > Lambda_l`` with multiplicities ``k_1, ..., k_l``.  Block
``j`` is 1-based throughout the public API, matching how resonances are
usually written down.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConstraintError, ToleranceConflictError, ValidationError

RESONANCE_TOL = 1e-12
CONFLICT_TOL = 1e-9
GAP_CAP = 0.99 * math.log(4.0)
SEARCH_FLOOR = 1e-9


def _floor(x, tol=RESONANCE_TOL):
    # exponents like log 4 / log 2 land a few ulps below an integer
    return int(math.floor(x + tol))


@dataclass(frozen=True)
class LyapunovSpectrum:
    exponents: tuple
    multiplicities: tuple

    def __post_init__(self):
        ex = tuple(float(x) for x in self.exponents)
        mu = tuple(int(m) for m in self.multiplicities)
        object.__setattr__(self, "exponents", ex)
        object.__setattr__(self, "multiplicities", mu)
        if not ex or len(ex) != len(mu):
            raise ValidationError("exponents and multiplicities must be nonempty and aligned")
        if any(x <= 0 or not math.isfinite(x) for x in ex):
            raise ValidationError(f"exponents must be positive and finite: {ex}")
        if any(m < 1 for m in mu):
            raise ValidationError(f"multiplicities must be >= 1: {mu}")
        if any(a <= b for a, b in zip(ex, ex[1:])):
            raise ValidationError(f"exponents must be strictly decreasing: {ex}")

    @classmethod
    def single(cls, value, multiplicity=1):
        return cls((value,), (multiplicity,))

    @property
    def k(self):
        return sum(self.multiplicities)

    @property
    def l(self):
        return len(self.exponents)

    @property
    def repeated(self):
        """The k-tuple ``lambda_i`` (each exponent repeated by multiplicity)."""
        return np.repeat(np.array(self.exponents), self.multiplicities)

    @property
    def block_of(self):
        """0-based block index for every coordinate."""
        return np.repeat(np.arange(self.l), self.multiplicities)

    def block_slices(self):
        out, start = [], 0
        for m in self.multiplicities:
            out.append(slice(start, start + m))
            start += m
        return out

    def shifted(self, gamma):
        return ShiftedSpectrum(self, gamma)

    def scaled(self, c):
        return LyapunovSpectrum(tuple(c * x for x in self.exponents), self.multiplicities)

    def to_dict(self):
        return {"exponents": list(self.exponents), "multiplicities": list(self.multiplicities)}

    @classmethod
    def from_dict(cls, d):
        ex = d["exponents"]
        return cls(tuple(ex), tuple(d.get("multiplicities", [1] * len(ex))))

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, s):
        return cls.from_dict(json.loads(s))


@dataclass(frozen=True)
class ShiftedSpectrum:
    base: LyapunovSpectrum
    gamma: float

    def __post_init__(self):
        if self.gamma < 0 or self.gamma >= self.base.exponents[-1]:
            raise ValidationError(
                f"shift gamma={self.gamma} must lie in [0, {self.base.exponents[-1]})"
            )

    @property
    def exponents(self):
        return tuple(x - self.gamma for x in self.base.exponents)

    @property
    def repeated(self):
        return self.base.repeated - self.gamma

    def as_spectrum(self):
        return LyapunovSpectrum(self.exponents, self.base.multiplicities)


def multi_indices(k, lo, hi):
    """All ``alpha`` in N^k with ``lo <= |alpha| <= hi`` in graded-lex order."""
    out = []
    for deg in range(lo, hi + 1):
        block = set()
        for combo in itertools.combinations_with_replacement(range(k), deg):
            alpha = [0] * k
            for i in combo:
                alpha[i] += 1
            block.add(tuple(alpha))
        out.extend(sorted(block, reverse=True))
    return out


def _weights(lam, alphas):
    if not alphas:
        return np.zeros(0)
    return np.asarray(alphas, dtype=float) @ lam


def resonant_indices(spec: LyapunovSpectrum, j: int, tol: float = RESONANCE_TOL):
    """Multi-indices with ``alpha . lambda = Lambda_j`` and ``|alpha| >= 2``."""
    if not 1 <= j <= spec.l:
        raise ValueError(f"block index j={j} outside 1..{spec.l}")
    target = spec.exponents[j - 1]
    maxdeg = _floor(target / spec.exponents[-1])
    alphas = multi_indices(spec.k, 2, maxdeg)
    w = _weights(spec.repeated, alphas)
    return [a for a, x in zip(alphas, w) if abs(x - target) <= tol]


def gap_constant(spec: LyapunovSpectrum, tol: float = RESONANCE_TOL) -> float:
    """Half the smallest non-resonant gap over ``2 <= |alpha| <= [2 Lambda_1 / Lambda_l]``.

    Capped at ``0.99 ln 4``.
    """
    maxdeg = _floor(2 * spec.exponents[0] / spec.exponents[-1])
    alphas = multi_indices(spec.k, 2, maxdeg)
    w = _weights(spec.repeated, alphas)
    gaps = np.abs(w[:, None] - np.array(spec.exponents)[None, :])
    nonres = gaps[gaps > tol]
    smallest = float(nonres.min()) if nonres.size else math.inf
    if smallest <= CONFLICT_TOL:
        raise ToleranceConflictError(
            f"gap {smallest:.3g} is above the resonance tolerance {tol:g} "
            f"but numerically zero; adjust tol"
        )
    return min(0.5 * smallest, GAP_CAP)


CONSTRAINT_NAMES = (
    "gamma_below_half_lambda_l",
    "gamma_floor_ratio",
    "gamma_ratio_margin",
    "eps_below_half_gamma",
    "eps_gamma_sum",
    "eps_below_b",
    "contact_order",
)


@dataclass(frozen=True)
class ConstraintParams:
    """Constants derived from a spectrum and a choice of (gamma, eps)."""

    a: float
    b: float
    gamma: float
    epsilon: float
    ratio: float
    p_star: int
    q: int
    m: float
    M: float
    theta: float
    beta: float
    flags: dict = field(default_factory=dict)
    expert_mode: bool = False

    @property
    def valid(self):
        return all(self.flags.values())

    @property
    def floor_ratio(self):
        return self.p_star - 1

    @property
    def series_rate(self):
        """Certified decay exponent ``b - ([ratio] + 3) eps`` of the homological series."""
        return self.b - (self.floor_ratio + 3) * self.epsilon

    def failed(self):
        return [k for k, v in self.flags.items() if not v]

    def to_dict(self):
        d = {
            "a": self.a,
            "b": self.b,
            "gamma": self.gamma,
            "epsilon": self.epsilon,
            "ratio": self.ratio,
            "p_star": self.p_star,
            "q": self.q,
            "m": self.m,
            "M": self.M,
            "theta": self.theta,
            "beta": self.beta,
            "expert_mode": self.expert_mode,
            "valid": self.valid,
        }
        d.update({name: bool(v) for name, v in self.flags.items()})
        return d


def validate_constraints(spec: LyapunovSpectrum, gamma: float, epsilon: float, a=None) -> ConstraintParams:
    """Evaluate every admissibility inequality; failures are flagged, not raised.

    ``gamma == 0`` is the expert (unshifted) mode: the gamma-dependent bounds
    on epsilon are evaluated with ``gamma`` replaced by ``a / 4``.
    """
    if gamma < 0 or epsilon <= 0:
        raise ConstraintError("need gamma >= 0 and epsilon > 0")
    if a is None:
        a = gap_constant(spec)
    lam1, laml = spec.exponents[0], spec.exponents[-1]
    expert = gamma == 0
    g_eff = a / 4 if expert else gamma
    sh1, shl = lam1 - gamma, laml - gamma
    if shl <= 0:
        ratio = math.inf
        fl = 0
    else:
        ratio = sh1 / shl
        fl = _floor(ratio)
    b = 0.5 * min(g_eff, a)
    q = fl + 1
    m = math.exp(-sh1 - epsilon + gamma)
    M = math.exp(-shl + epsilon + gamma)
    theta = math.exp(-laml + 2 * epsilon)
    beta = (M * math.exp(2 * epsilon)) ** (q + 1) / m
    flags = {
        "gamma_below_half_lambda_l": g_eff < laml / 2,
        "gamma_floor_ratio": g_eff * (fl - 1) < a / 2,
        "gamma_ratio_margin": 4 * g_eff * (ratio + 1) <= shl,
        "eps_below_half_gamma": 2 * epsilon < g_eff,
        "eps_gamma_sum": 4 * epsilon + 2 * g_eff < laml,
        "eps_below_b": epsilon * (fl + 3) < b,
        "contact_order": (M * math.exp(2 * epsilon)) ** (q + 1) < m * math.exp(-epsilon),
    }
    return ConstraintParams(
        a=a, b=b, gamma=gamma, epsilon=epsilon, ratio=ratio, p_star=fl + 1, q=q,
        m=m, M=M, theta=theta, beta=beta, flags=flags, expert_mode=expert,
    )


_GAMMA_FLAGS = ("gamma_below_half_lambda_l", "gamma_floor_ratio", "gamma_ratio_margin")


def suggest_parameters(spec: LyapunovSpectrum):
    """Deterministic admissible ``(gamma, eps)`` by halving from ``Lambda_l / 4``."""
    a = gap_constant(spec)
    gamma = spec.exponents[-1] / 4
    while True:
        flags = validate_constraints(spec, gamma, gamma / 8, a).flags
        if all(flags[f] for f in _GAMMA_FLAGS):
            break
        gamma /= 2
        if gamma < SEARCH_FLOOR:
            raise ConstraintError("no admissible gamma above the search floor")
    eps = gamma / 4
    while not validate_constraints(spec, gamma, eps, a).valid:
        eps /= 2
        if eps < SEARCH_FLOOR:
            raise ConstraintError("no admissible epsilon above the search floor")
    return gamma, eps


@dataclass
class ResonanceReport:
    b: float
    min_margin: float
    violations: list

    @property
    def ok(self):
        return not self.violations


def shifted_weights(spec: LyapunovSpectrum, gamma: float, alphas):
    """``alpha . lambda^gamma - Lambda_j^gamma`` for every alpha (rows) and j (cols)."""
    lam = spec.repeated - gamma
    return _weights(lam, alphas)[:, None] - (np.array(spec.exponents) - gamma)[None, :]


def shifted_resonance_check(spec: LyapunovSpectrum, gamma: float, epsilon: float, a=None) -> ResonanceReport:
    """Confirm the shifted spectrum keeps every relation at distance > b."""
    params = validate_constraints(spec, gamma, epsilon, a)
    alphas = multi_indices(spec.k, 2, params.floor_ratio)
    if not alphas:
        return ResonanceReport(params.b, math.inf, [])
    w = shifted_weights(spec, gamma, alphas)
    violations = [
        (j + 1, alphas[i], float(w[i, j]))
        for i, j in zip(*np.nonzero(np.abs(w) <= params.b))
    ]
    return ResonanceReport(params.b, float(np.abs(w).min()), violations)
