"""Slow sequences, finite-window contraction chains and their radius calculus."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import PipelineError, ValidationError
from .jets import (
    CoeffBound,
    JetMap,
    cauchy_constant,
    coefficient_lipschitz_bound,
    coefficient_lipschitz_radius,
    compose,
    formal_inverse,
    sampled_lipschitz,
    sup_bound,
)
from .spectrum import LyapunovSpectrum

POLICIES = ("constant", "periodic", "reject")
BLOCK_TOL = 1e-14
LIP_SLACK = 1e-6


def _wrap(n, n_min, length, policy):
    if 0 <= n - n_min < length:
        return n - n_min
    if policy == "constant":
        return 0 if n < n_min else length - 1
    if policy == "periodic":
        return (n - n_min) % length
    raise ValidationError(f"index {n} outside window [{n_min}, {n_min + length - 1}] with policy 'reject'")


def slow_minorant(values, epsilon):
    """Largest eps-slow sequence below ``values``: ``min_m v_m e^{eps |n - m|}``."""
    r = np.array(values, dtype=float)
    grow = math.exp(epsilon)
    for i in range(1, len(r)):
        r[i] = min(r[i], r[i - 1] * grow)
    for i in range(len(r) - 2, -1, -1):
        r[i] = min(r[i], r[i + 1] * grow)
    return r


@dataclass
class ChainReport:
    """Per-index findings of a validator.

    ``checks`` maps a check name to a boolean array over the window;
    ``measures`` holds the measured quantities behind each check.
    """

    indices: np.ndarray
    checks: dict = field(default_factory=dict)
    measures: dict = field(default_factory=dict)

    @property
    def ok(self):
        return all(bool(np.all(v)) for v in self.checks.values())

    @property
    def violations(self):
        return [
            (name, int(self.indices[i]))
            for name, v in self.checks.items()
            for i in np.nonzero(~np.asarray(v))[0]
        ]

    def summary(self):
        return {name: bool(np.all(v)) for name, v in self.checks.items()}


@dataclass(frozen=True)
class SlowSequence:
    """Positive values on the window ``n_min .. n_min + len(values) - 1``.

    eps-fast quantities are stored as their reciprocals.
    """

    n_min: int
    values: tuple
    epsilon: float
    extension_policy: str = "constant"

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if not self.values:
            raise ValidationError("empty window")
        if self.extension_policy not in POLICIES:
            raise ValidationError(f"unknown extension policy {self.extension_policy!r}")

    @property
    def n_max(self):
        return self.n_min + len(self.values) - 1

    @property
    def indices(self):
        return np.arange(self.n_min, self.n_max + 1)

    def as_array(self):
        return np.array(self.values)

    def __len__(self):
        return len(self.values)

    def __getitem__(self, n):
        return self.values[_wrap(n, self.n_min, len(self.values), self.extension_policy)]

    def reciprocal(self):
        return SlowSequence(self.n_min, 1.0 / self.as_array(), self.epsilon, self.extension_policy)

    def __mul__(self, other):
        if not isinstance(other, SlowSequence) or other.n_min != self.n_min or len(other) != len(self):
            return NotImplemented
        return SlowSequence(self.n_min, self.as_array() * other.as_array(),
                            self.epsilon + other.epsilon, self.extension_policy)

    def minorant(self):
        """Largest eps-slow sequence below this one."""
        return SlowSequence(self.n_min, slow_minorant(self.values, self.epsilon),
                            self.epsilon, self.extension_policy)


def validate_slow(seq: SlowSequence, rtol: float = 1e-12) -> ChainReport:
    v = seq.as_array()
    report = ChainReport(seq.indices[:-1])
    if len(v) < 2:
        report.indices = seq.indices
        report.checks["slow"] = np.array([bool(v[0] > 0)])
        return report
    ratio = v[1:] / v[:-1]
    lo, hi = math.exp(-seq.epsilon), math.exp(seq.epsilon)
    report.measures["log_ratio"] = np.log(ratio)
    report.checks["slow"] = (ratio >= lo * (1 - rtol)) & (ratio <= hi * (1 + rtol)) & (v[:-1] > 0)
    return report


@dataclass(frozen=True)
class ContractionChain:
    """Origin-fixing jets ``W_n`` on polydiscs of radius ``radii[n]``.

    The linear parts must preserve the coordinate blocks given by the
    spectrum multiplicities.
    """

    n_min: int
    maps: tuple
    radii: tuple
    spectrum: LyapunovSpectrum
    epsilon: float
    gamma: float = 0.0
    extension: str = "constant"

    def __post_init__(self):
        object.__setattr__(self, "maps", tuple(self.maps))
        object.__setattr__(self, "radii", tuple(float(r) for r in self.radii))
        if not self.maps or len(self.maps) != len(self.radii):
            raise ValidationError("maps and radii must be nonempty and aligned")
        k = self.spectrum.k
        caps = {W.degree_cap for W in self.maps}
        if len(caps) != 1:
            raise ValidationError(f"all maps need one degree cap, got {sorted(caps)}")
        for W in self.maps:
            if W.dim_in != k or W.dim_out != k:
                raise ValidationError(f"map dimension {W.dim_in}->{W.dim_out} != spectrum dimension {k}")
        if self.extension not in POLICIES:
            raise ValidationError(f"unknown extension policy {self.extension!r}")
        if any(r <= 0 for r in self.radii):
            raise ValidationError("radii must be positive")

    @property
    def k(self):
        return self.spectrum.k

    @property
    def degree_cap(self):
        return self.maps[0].degree_cap

    @property
    def n_max(self):
        return self.n_min + len(self.maps) - 1

    @property
    def indices(self):
        return np.arange(self.n_min, self.n_max + 1)

    @property
    def base_spectrum(self):
        """Unshifted spectrum ``Lambda_j = Lambda_j^gamma + gamma``."""
        if self.gamma == 0:
            return self.spectrum
        return LyapunovSpectrum(tuple(x + self.gamma for x in self.spectrum.exponents),
                                self.spectrum.multiplicities)

    def params(self, a=None):
        from .spectrum import validate_constraints

        return validate_constraints(self.base_spectrum, self.gamma, self.epsilon, a)

    @property
    def theta(self):
        return math.exp(-self.spectrum.exponents[-1] + 2 * self.epsilon)

    def __len__(self):
        return len(self.maps)

    def map_at(self, n):
        return self.maps[_wrap(n, self.n_min, len(self.maps), self.extension)]

    def radius_at(self, n):
        return self.radii[_wrap(n, self.n_min, len(self.maps), self.extension)]

    def radius_sequence(self):
        return SlowSequence(self.n_min, self.radii, self.epsilon, self.extension)

    def coefficient_array(self, indices=None):
        """Stacked coefficients ``(len(indices), k, M)`` with extension applied."""
        if indices is None:
            indices = self.indices
        pos = [_wrap(int(n), self.n_min, len(self.maps), self.extension) for n in indices]
        stack = np.stack([W.coeffs for W in self.maps])
        return stack[pos]

    def linear_parts(self, indices=None):
        c = self.coefficient_array(indices)
        return c[..., self.maps[0].basis.degree_slices[1]]

    def replace(self, **changes):
        fields = dict(n_min=self.n_min, maps=self.maps, radii=self.radii, spectrum=self.spectrum,
                      epsilon=self.epsilon, gamma=self.gamma, extension=self.extension)
        fields.update(changes)
        return ContractionChain(**fields)

    def to_dict(self):
        params = {"gamma": self.gamma, "epsilon": self.epsilon}
        try:
            params.update(self.params().to_dict())
        except Exception:  # params are informative only
            pass
        return {
            "window": [self.n_min, self.n_max],
            "spectrum": self.spectrum.to_dict(),
            "params": params,
            "blocks": list(self.spectrum.multiplicities),
            "maps": [W.to_dict() for W in self.maps],
            "radii": list(self.radii),
            "extension": self.extension,
        }

    @classmethod
    def from_dict(cls, d):
        n_min, n_max = (int(x) for x in d["window"])
        spectrum = LyapunovSpectrum.from_dict(d["spectrum"])
        if "blocks" in d and list(d["blocks"]) != list(spectrum.multiplicities):
            raise ValidationError(f"blocks {d['blocks']} disagree with multiplicities {spectrum.multiplicities}")
        maps = [JetMap.from_dict(m) for m in d["maps"]]
        if len(maps) != n_max - n_min + 1:
            raise ValidationError(f"window [{n_min}, {n_max}] needs {n_max - n_min + 1} maps, got {len(maps)}")
        params = d.get("params", {})
        if "epsilon" not in params:
            raise ValidationError("chain params need at least 'epsilon'")
        return cls(n_min, maps, d["radii"], spectrum, float(params["epsilon"]),
                   float(params.get("gamma", 0.0)), d.get("extension", "constant"))

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_json(cls, s):
        return cls.from_dict(json.loads(s))


def extend(chain: ContractionChain, n: int) -> JetMap:
    """``W_n`` for any integer ``n`` under the chain's extension policy."""
    return chain.map_at(n)


def block_leakage(A, spectrum: LyapunovSpectrum):
    """Largest off-block entry modulus of ``A`` (stacked or single)."""
    blk = spectrum.block_of
    off = blk[:, None] != blk[None, :]
    return np.max(np.abs(A[..., off]), axis=-1, initial=0.0)


def block_singular_values(A, spectrum: LyapunovSpectrum):
    """Per block, (min, max) singular values of the diagonal blocks of ``A``."""
    out = []
    for sl in spectrum.block_slices():
        s = np.linalg.svd(A[..., sl, sl], compute_uv=False)
        out.append((s[..., -1], s[..., 0]))
    return out


def validate_chain(chain: ContractionChain, n_samples: int = 200, rng_seed: int = 0) -> ChainReport:
    """Check block preservation, block norms, Lipschitz bound and slowness.

    The coefficient bound on ``Lip W_n`` decides pass/fail; the sampled
    Lipschitz constant is recorded alongside as a diagnostic.
    """
    spec, eps = chain.spectrum, chain.epsilon
    A = chain.linear_parts()
    report = ChainReport(chain.indices)
    leak = block_leakage(A, spec)
    report.measures["block_leakage"] = leak
    report.checks["block_preservation"] = leak <= BLOCK_TOL

    ok = np.ones(len(chain), dtype=bool)
    for (smin, smax), lam in zip(block_singular_values(A, spec), spec.exponents):
        lo, hi = math.exp(-lam - eps), math.exp(-lam + eps)
        ok &= (smin >= lo * (1 - 1e-12)) & (smax <= hi * (1 + 1e-12))
    report.checks["block_norms"] = ok

    theta = chain.theta
    bound = np.empty(len(chain))
    sampled = np.empty(len(chain))
    for i, (W, r) in enumerate(zip(chain.maps, chain.radii)):
        bound[i] = np.linalg.norm(W.linear_part(), 2) + coefficient_lipschitz_bound(W, r)
        sampled[i] = sampled_lipschitz(W, r, max(n_samples, 2), rng_seed + i)[1]
    report.measures["lipschitz_bound"] = bound
    report.measures["lipschitz_sampled"] = sampled
    report.measures["theta"] = theta
    report.checks["lipschitz"] = bound <= theta * (1 + LIP_SLACK)

    slow = validate_slow(chain.radius_sequence())
    report.checks["radii_slow"] = np.append(slow.checks["slow"], True) if len(chain) > 1 else slow.checks["slow"]
    return report


def tame_radius(K: JetMap, alpha: float, beta: float, epsilon: float, epsilon_prime: float,
                bound: CoeffBound, kappa_default: float = 1.0, self_map: bool = False) -> float:
    """Radius on which ``alpha e^{-eps'} |u-v| <= |K(u)-K(v)| <= beta e^{eps'} |u-v|``.

    ``bound.radius**2 / (c s) * min{(e^{eps'}-1) beta, (1-e^{-eps'}) alpha, kappa}``,
    capped at half the reference radius.
    """
    if not 0 < alpha <= beta:
        raise ValueError(f"need 0 < alpha <= beta, got {alpha}, {beta}")
    if self_map and beta * math.exp(epsilon_prime) > math.exp(-epsilon):
        raise ValueError("self-mapping radius requires beta e^{eps'} <= e^{-eps}")
    half = 0.5 * bound.radius
    if K.is_linear() or bound.sup_bound == 0:
        return half
    factor = min((math.exp(epsilon_prime) - 1) * beta, (1 - math.exp(-epsilon_prime)) * alpha, kappa_default)
    phi = bound.radius**2 / (cauchy_constant(K.dim_in) * bound.sup_bound) * factor
    return min(phi, half)


def bilipschitz_radius(T: JetMap, log_band: float, cap: float = 1.0) -> float:
    """Radius where a tangent-to-identity jet is ``e^{+-log_band}``-bi-Lipschitz."""
    return coefficient_lipschitz_radius(T, 1 - math.exp(-log_band), cap)


def _shrink_to_self_map(maps, psi, epsilon, max_halvings=80):
    """Scale a slow radius sequence until each map sends D(e^eps psi_n) into D(e^eps psi_{n+1})."""
    grow = math.exp(epsilon)
    psi = np.array(psi, dtype=float)
    for _ in range(max_halvings):
        ok = all(
            sup_bound(L, grow * psi[i]) <= grow * psi[min(i + 1, len(psi) - 1)]
            for i, L in enumerate(maps)
        )
        if ok:
            return psi
        psi *= 0.5
    raise PipelineError("conjugate_chain", "could not find self-mapping radii")


def conjugate_chain(M_maps, chain: ContractionChain, epsilon_prime: float):
    """Conjugate ``L_n`` to ``M_{n+1} o L_n o M_n^{-1}``.

    ``M_maps`` covers the window, optionally with one extra entry for
    ``n_max + 1``; otherwise the chain's extension policy supplies it.
    Returns the new chain and the radii ``psi_n`` as a :class:`SlowSequence`.
    """
    M_maps = list(M_maps)
    L = len(chain)
    if len(M_maps) not in (L, L + 1):
        raise ValidationError(f"need {L} or {L + 1} conjugating maps, got {len(M_maps)}")
    if len(M_maps) == L:
        M_maps.append(M_maps[_wrap(chain.n_max + 1, chain.n_min, L, chain.extension)])
    k = chain.k
    for M in M_maps:
        if not np.allclose(M.linear_part(), np.eye(k), rtol=0, atol=1e-14):
            raise ValidationError("conjugating maps must be tangent to the identity")
    eps = chain.epsilon
    beta = max(np.linalg.norm(W.linear_part(), 2) for W in chain.maps)
    if not beta * math.exp(epsilon_prime) < math.exp(-eps):
        raise ValidationError(f"contraction margin violated: beta e^eps' = {beta * math.exp(epsilon_prime):.4g}")
    inv = [formal_inverse(M) for M in M_maps[:-1]]
    new_maps = [compose(M_maps[i + 1], compose(W, inv[i])) for i, W in enumerate(chain.maps)]
    psi = conjugation_radii(M_maps, new_maps, chain.radii, eps, epsilon_prime)
    new_chain = chain.replace(maps=new_maps, radii=psi)
    return new_chain, SlowSequence(chain.n_min, psi, eps, chain.extension)


def conjugation_radii(M_maps, new_maps, radii, epsilon, epsilon_prime):
    """Slow radii where each ``M_n`` is ``e^{+-eps'}``-bi-Lipschitz and the
    conjugated maps send ``D(e^eps psi_n)`` into ``D(e^eps psi_{n+1})``."""
    raw = np.array([
        min(r, bilipschitz_radius(M, epsilon_prime, cap=r))
        for M, r in zip(M_maps, radii)
    ])
    return _shrink_to_self_map(new_maps, slow_minorant(raw, epsilon), epsilon)


def random_admissible_chain(spectrum: LyapunovSpectrum, epsilon: float, window=(-20, 20),
                            degree_cap: int = 5, radius: float = 1.0, rng_seed: int = 0,
                            extension: str = "constant", rotate: bool = False) -> ContractionChain:
    """Random chain satisfying the structural hypotheses for ``(spectrum, eps)``.

    Linear parts are diagonal with moduli ``e^{-lambda_i + u}``, ``|u| <= 0.9 eps``;
    they are positive unless ``rotate`` adds random, slowly turning phases.
    Nonlinear coefficients are one random complex tensor with an eps-slow
    modulus drift (plus small phase noise when ``rotate``),
    rescaled (as by the coordinate change ``z -> s z``) so that the
    coefficient bound gives ``Lip W_n <= theta`` on ``0.99 * radius``.
    """
    rng = np.random.default_rng(rng_seed)
    n_min, n_max = window
    L = n_max - n_min + 1
    k = spectrum.k
    basis = JetMap.zero(k, k, degree_cap).basis
    lam = spectrum.repeated
    theta = math.exp(-spectrum.exponents[-1] + 2 * epsilon)
    maps = []
    radius_lip = math.inf
    base = rng.uniform(-1, 1, (k, basis.size)) + 1j * rng.uniform(-1, 1, (k, basis.size))
    drift = 0.0
    angle = 2 * np.pi * rng.random(k) if rotate else np.zeros(k)
    for _ in range(L):
        u = 0.9 * epsilon * rng.uniform(-1, 1, k)
        if rotate:
            angle = angle + epsilon * rng.uniform(-1, 1, k)
        phase = np.exp(1j * angle)
        # nonlinear part: fixed shape times an eps-slow modulation
        drift = float(np.clip(drift + 0.5 * epsilon * rng.uniform(-1, 1), -2.0, 2.0))
        c = base * math.exp(drift)
        if rotate:
            c = c * np.exp(0.1j * rng.uniform(-1, 1, base.shape))
        c[:, basis.degree_slices[1]] = np.diag(np.exp(-lam + u) * phase)
        W = JetMap(c, k, degree_cap)
        maps.append(W)
        slack = theta - np.linalg.norm(W.linear_part(), 2)
        radius_lip = min(radius_lip, coefficient_lipschitz_radius(W, slack, cap=1.0))
    scale = (radius_lip / radius) ** (basis.degrees - 1)
    maps = [JetMap(W.coeffs * scale, k, degree_cap) for W in maps]
    return ContractionChain(n_min, maps, [0.99 * radius] * L, spectrum, epsilon, 0.0, extension)
