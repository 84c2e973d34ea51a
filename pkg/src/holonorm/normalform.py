"""Linearization of contraction chains: spectrum shift, degree-by-degree
cancellation through homological equations, and tail linearization.

All work after :func:`shift_spectrum` happens on the shifted chain.  Values
beyond the data window come from the chain's extension policy.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .chain import (
    ChainReport,
    ContractionChain,
    SlowSequence,
    conjugation_radii,
    slow_minorant,
    validate_chain,
)
from .exceptions import ConstraintError, PipelineError, ResonanceError, ValidationError
from .jets import (
    JetMap,
    coefficient_lipschitz_bound,
    coefficient_lipschitz_radius,
    compose_coeffs,
    get_basis,
    identity_coeffs,
    inverse_coeffs,
    linear_coeffs,
    powers,
    sampled_lipschitz,
    random_polydisc_points,
)
from .spectrum import ShiftedSpectrum, multi_indices

TAIL_TOL = 1e-12
RESIDUAL_TOL = 1e-8
ZERO_TOL = 1e-10
LINEARIZE_TOL = 1e-13
ISOMETRY_SLACK = 2.5e-7
SANDWICH_SLACK = 1e-6


@dataclass(frozen=True)
class ShiftFamily:
    """``Delta_n = e^{n gamma} Id``."""

    gamma: float

    def factor(self, n):
        return math.exp(n * self.gamma)

    def degree_factors(self, n, degrees):
        """Factor on a degree-``d`` coefficient of ``Delta_{n+1} o W o Delta_n^{-1}``."""
        return np.exp(self.gamma * ((n + 1) - n * np.asarray(degrees, dtype=float)))

    def conjugate(self, W: JetMap, n: int) -> JetMap:
        return JetMap(W.coeffs * self.degree_factors(n, W.basis.degrees), W.dim_in, W.degree_cap)

    def precompose(self, T: JetMap, n: int) -> JetMap:
        """``T o Delta_n``."""
        return JetMap(T.coeffs * np.exp(n * self.gamma * T.basis.degrees), T.dim_in, T.degree_cap)


def _stage(name):
    """Wrap unexpected failures of a pipeline stage with its name."""

    def deco(fn):
        def wrapped(*args, **kwargs):
            try:
                return fn(*args, **kwargs)
            except (PipelineError, ValidationError, ConstraintError):
                raise
            except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
                raise PipelineError(name, str(exc)) from exc

        wrapped.__name__ = fn.__name__
        wrapped.__doc__ = fn.__doc__
        wrapped.__wrapped__ = fn
        return wrapped

    return deco


def shift_spectrum(chain: ContractionChain, gamma: float) -> ContractionChain:
    """The chain ``W_n^gamma = Delta_{n+1} o W_n o Delta_n^{-1}``.

    Radii are the eps-slow minorant of ``rho_n min(1, e^{n gamma})``, which
    lies inside the image ``Delta_n(D(rho_n))`` of the original domain.
    """
    if chain.gamma != 0:
        raise ValidationError("chain is already shifted")
    if gamma == 0:
        return chain
    if chain.theta * math.exp(gamma) >= 1:
        raise ConstraintError(f"theta e^gamma = {chain.theta * math.exp(gamma):.4g} >= 1")
    shifted = ShiftedSpectrum(chain.spectrum, gamma).as_spectrum()
    fam = ShiftFamily(gamma)
    maps = [fam.conjugate(W, int(n)) for W, n in zip(chain.maps, chain.indices)]
    raw = np.array(chain.radii) * np.minimum(1.0, np.exp(gamma * chain.indices))
    radii = slow_minorant(raw, chain.epsilon)
    return chain.replace(maps=maps, radii=radii, spectrum=shifted, gamma=gamma)


@dataclass
class HomologicalSolution:
    """Degree-``p`` solution ``H_n`` on the window.

    ``coeffs`` has shape ``(L + 1, k, M_p)``: the window plus one index past
    ``n_max`` (needed to conjugate at ``n_max``).
    """

    p: int
    n_min: int
    coeffs: np.ndarray
    degree_cap: int
    depth: int
    tail_bound: float
    residuals: np.ndarray
    weights: np.ndarray
    forward: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    @property
    def indices(self):
        return np.arange(self.n_min, self.n_min + len(self.coeffs))

    def full_coeffs(self):
        """Coefficients embedded in the chain's full basis."""
        k = self.coeffs.shape[1]
        basis = get_basis(k, self.degree_cap)
        out = np.zeros(self.coeffs.shape[:2] + (basis.size,), dtype=complex)
        out[..., basis.degree_slices[self.p]] = self.coeffs
        return out

    def maps(self):
        k = self.coeffs.shape[1]
        return [JetMap(c, k, self.degree_cap) for c in self.full_coeffs()]

    def map_at(self, n):
        return self.maps()[n - self.n_min]


def _resonance_table(chain, p, b):
    """Weights ``alpha . lambda^gamma - lambda^gamma_i`` for every row i and
    degree-``p`` monomial, raising on the first one within ``b``."""
    spec = chain.spectrum
    alphas = multi_indices(spec.k, p, p)
    lam = spec.repeated
    w = np.asarray(alphas, dtype=float) @ lam
    weights = w[None, :] - lam[:, None]
    blocks = spec.block_of
    for j in range(spec.l):
        rows = np.nonzero(blocks == j)[0]
        for a, alpha in enumerate(alphas):
            if abs(weights[rows[0], a]) <= b:
                raise ResonanceError(j + 1, alpha, float(weights[rows[0], a]), b)
    return weights


def _series_depth(norm_a, params, tail_tol):
    rate = params.series_rate
    if rate <= 0:
        raise PipelineError("solve_homological", f"series rate b - (ratio + 3) eps = {rate:.3g} is not positive")
    cap = 10 * math.ceil(math.log(1 / tail_tol) / params.b)
    if norm_a <= tail_tol:
        return 0, rate, cap
    depth = math.ceil(math.log(norm_a / tail_tol) / rate)
    if depth > cap:
        raise PipelineError("solve_homological", f"tail depth {depth} exceeds cap {cap}")
    return depth, rate, cap


@_stage("solve_homological")
def solve_homological(chain: ContractionChain, p: int, tail_tol: float = TAIL_TOL) -> HomologicalSolution:
    """Solve ``G_n^(p) + H_{n+1} o A_n - A_n o H_n = 0`` on a shifted chain.

    Each (output block, monomial) entry takes the forward branch when its
    shifted weight exceeds ``b`` and the backward branch when it is below
    ``-b``.  Both series are summed as the equivalent two-sided recursions
    started ``depth`` indices outside the window, so the identity holds to
    rounding at every window index and the truncation only moves ``H``
    within the certified tail bound.
    """
    k, D = chain.k, chain.degree_cap
    if not 2 <= p <= D:
        raise ValueError(f"degree p={p} outside 2..{D}")
    params = chain.params()
    weights = _resonance_table(chain, p, params.b)
    forward = weights > params.b

    bp = get_basis(k, p)
    sl = bp.degree_slices[p]
    G_win = chain.coefficient_array()[..., sl]
    norm_a = float(np.max(np.linalg.norm(G_win, axis=(1, 2))))
    depth, rate, cap = _series_depth(norm_a, params, tail_tol)
    ext = 0 if chain.extension == "reject" else depth
    lo, hi = chain.n_min - ext, chain.n_max + 1 + ext
    idx = np.arange(lo, min(hi, chain.n_max) + 1) if chain.extension == "reject" else np.arange(lo, hi + 1)
    stack = chain.coefficient_array(idx)[..., : bp.size]
    A = stack[..., bp.degree_slices[1]]
    G = stack[..., sl]
    P = powers(linear_coeffs(A, bp), bp, bp)[..., sl, sl]

    N, Mp = len(idx), sl.stop - sl.start
    C = np.zeros((N + 1, k, Mp), dtype=complex)
    fmask, bmask = forward.astype(float), (~forward).astype(float)
    if forward.any():
        Ainv = np.linalg.inv(A)
        c = np.zeros((k, Mp), dtype=complex)
        for t in range(N - 1, -1, -1):
            c = fmask * (Ainv[t] @ (G[t] + c @ P[t]))
            C[t] += c
    if (~forward).any():
        Pinv = np.linalg.inv(P)
        c = np.zeros((k, Mp), dtype=complex)
        for t in range(N):
            c = bmask * ((A[t] @ c - G[t]) @ Pinv[t])
            C[t + 1] += c

    start = chain.n_min - lo
    L = len(chain)
    stop = min(start + L + 1, N)
    Cw = C[start:stop]
    res = G[start:start + L] + Cw[1:L + 1] @ P[start:start + L] - A[start:start + L] @ Cw[:L]
    if len(Cw) < L + 1:
        # reject policy: no index past the window, H_{n_max+1} taken as zero
        Cw = np.concatenate([Cw, np.zeros((L + 1 - len(Cw), k, Mp), dtype=complex)])
    residuals = np.max(np.abs(res), axis=(1, 2)) if len(res) else np.zeros(0)
    tail = norm_a * math.exp(-rate * depth) if ext else norm_a
    diagnostics = {
        "series_rate": rate,
        "depth_cap": cap,
        "extended_window": [int(lo), int(idx[-1])],
        "backward_tail_assumed_symmetric": bool((~forward).any()),
    }
    return HomologicalSolution(p, chain.n_min, Cw, D, depth, tail, residuals, weights, forward, diagnostics)


@_stage("kill_degree")
def kill_degree(chain: ContractionChain, p: int, radii=None, solution: HomologicalSolution = None,
                tail_tol: float = TAIL_TOL):
    """Conjugate away the degree-``p`` part with ``S_n = Id + H_n``.

    Returns the chain of ``S_{n+1} o G_n o S_n^{-1}``, the maps ``S_n`` for
    ``n_min .. n_max + 1`` and the radii ``tau_n`` as a :class:`SlowSequence`.
    """
    if solution is None:
        solution = solve_homological(chain, p, tail_tol)
    basis = chain.maps[0].basis
    S = identity_coeffs(basis) + solution.full_coeffs()
    G = chain.coefficient_array()
    # with the identity as written, S_{n+1} o G_n o S_n^{-1} is the conjugate
    # that loses its degree-p part (the same convention as conjugate_chain)
    Sinv = inverse_coeffs(S[:-1], basis)
    out = compose_coeffs(S[1:], compose_coeffs(G, Sinv, basis, basis), basis, basis)
    # degrees below p are untouched by construction; copy them to keep them exact
    low = basis.degrees < p
    out[..., low] = G[..., low]
    S_maps = [JetMap(c, chain.k, chain.degree_cap) for c in S]
    new_maps = [JetMap(c, chain.k, chain.degree_cap) for c in out]
    if radii is None:
        radii = chain.radii
    p_star = chain.params().p_star
    if not np.any(solution.coeffs):
        tau = np.array(radii, dtype=float)
    else:
        tau = conjugation_radii(S_maps, new_maps, radii, chain.epsilon, chain.epsilon / p_star)
    new_chain = chain.replace(maps=new_maps, radii=tau)
    return new_chain, S_maps, SlowSequence(chain.n_min, tau, chain.epsilon, chain.extension)


@dataclass
class ContactImprovement:
    chain: ContractionChain
    T1: list
    radii: SlowSequence
    solutions: list
    tau: SlowSequence


def _bilipschitz_radii(maps, caps, log_band, factor=1.0):
    kappa = 1 - math.exp(-log_band)
    return np.array([factor * coefficient_lipschitz_radius(T, kappa, cap=c / factor) for T, c in zip(maps, caps)])


@_stage("improve_contact")
def improve_contact(chain: ContractionChain, tail_tol: float = TAIL_TOL, log_band=None) -> ContactImprovement:
    """Kill degrees ``2 .. p*`` in turn; ``T^1 = S^(p*) o ... o S^(2)``.

    ``radii`` are where ``T^1_n`` is ``e^{+-log_band}``-bi-Lipschitz
    (``log_band`` defaults to eps) intersected with the conjugation radii,
    for ``n_min .. n_max + 1``.
    """
    params = chain.params()
    basis = chain.maps[0].basis
    L = len(chain)
    T1 = np.broadcast_to(identity_coeffs(basis), (L + 1,) + identity_coeffs(basis).shape).copy()
    current, tau = chain, SlowSequence(chain.n_min, chain.radii, chain.epsilon, chain.extension)
    solutions = []
    for p in range(2, min(params.p_star, chain.degree_cap) + 1):
        sol = solve_homological(current, p, tail_tol)
        current, S_maps, tau = kill_degree(current, p, tau.values, sol)
        S = np.stack([S.coeffs for S in S_maps])
        T1 = compose_coeffs(S, T1, basis, basis)
        solutions.append(sol)
    T1_maps = [JetMap(c, chain.k, chain.degree_cap) for c in T1]
    band = chain.epsilon if log_band is None else log_band
    caps = [tau[int(n)] for n in range(chain.n_min, chain.n_max + 2)]
    raw = np.minimum(caps, _bilipschitz_radii(T1_maps, caps, band))
    r = SlowSequence(chain.n_min, slow_minorant(raw, chain.epsilon), chain.epsilon, chain.extension)
    return ContactImprovement(current, T1_maps, r, solutions, tau)


@dataclass
class TailLinearization:
    n_min: int
    maps: list
    steps: int
    increments: np.ndarray
    ratios: np.ndarray
    beta: float

    @property
    def indices(self):
        return np.arange(self.n_min, self.n_min + len(self.maps))

    @property
    def max_ratio(self):
        return float(np.max(self.ratios)) if self.ratios.size else 0.0


@_stage("linearize_tail")
def linearize_tail(chain: ContractionChain, params=None, tol: float = LINEARIZE_TOL, max_steps: int = 400,
                   zero_tol: float = ZERO_TOL) -> TailLinearization:
    """``T^2_n = lim_p (A_{p,n})^{-1} o X_{p,n}`` for ``n_min .. n_max + 1``.

    The iterates are built as ``Y_p = K_{p,n} o Y_{p-1}`` with
    ``K_{p,n} = A_{p,n}^{-1} o X_{n+p-1} o A_{p-1,n}``, which keeps every
    coefficient at unit scale.  Stops once the largest coefficient increment
    drops below ``tol``.  Increment ratios are recorded from the second step
    on, wherever the increment is above the rounding floor.
    """
    if params is None:
        params = chain.params()
    if not params.flags["contact_order"]:
        raise PipelineError("linearize_tail", "contact-order condition (M e^{2 eps})^{q+1} < m e^{-eps} fails")
    basis = chain.maps[0].basis
    q = params.q
    mid = (basis.degrees >= 2) & (basis.degrees <= q)
    if chain.extension == "reject":
        count = len(chain) - 1
        if count < 1:
            raise PipelineError("linearize_tail", "window too short under policy 'reject'")
    else:
        count = len(chain) + 1
    idx0 = np.arange(chain.n_min, chain.n_min + count)
    steps_cap = max_steps if chain.extension != "reject" else len(chain) - count + 1

    def X_at(n_arr):
        X = chain.coefficient_array(n_arr)
        bad = np.max(np.abs(X[..., mid]), axis=(1, 2), initial=0.0)
        if np.any(bad > zero_tol):
            i = int(np.argmax(bad))
            raise PipelineError("linearize_tail", f"X_{int(n_arr[i])} has degree 2..{q} part {bad[i]:.3g} > {zero_tol:g}")
        X[..., mid] = 0.0
        return X

    k = chain.k
    ident = identity_coeffs(basis)
    Y = np.broadcast_to(ident, (count,) + ident.shape).copy()
    A_prev = np.broadcast_to(np.eye(k, dtype=complex), (count, k, k)).copy()
    increments, ratios = [], []
    floor = 1e3 * np.finfo(float).eps
    prev = None
    steps = 0
    for p in range(1, steps_cap + 1):
        X = X_at(idx0 + p - 1)
        A_step = X[..., basis.degree_slices[1]]
        A_p = A_step @ A_prev
        K = np.linalg.solve(A_p, compose_coeffs(X, linear_coeffs(A_prev, basis), basis, basis))
        Y_new = compose_coeffs(K, Y, basis, basis)
        inc = np.linalg.norm(Y_new - Y, axis=(1, 2))
        scale = np.maximum(1.0, np.linalg.norm(Y_new, axis=(1, 2)))
        increments.append(inc)
        if prev is not None and p >= 3:
            ok = prev > floor * scale
            ratios.extend((inc[ok] / prev[ok]).tolist())
            if p >= 4 and np.max(inc) >= np.max(prev) and np.max(inc) > floor * np.max(scale):
                raise PipelineError("linearize_tail", f"increments stopped decreasing at step {p}")
        Y, A_prev, prev = Y_new, A_p, inc
        steps = p
        if np.max(inc) < tol:
            break
    else:
        if chain.extension != "reject":
            raise PipelineError("linearize_tail", f"no convergence within {steps_cap} steps")
    maps = [JetMap(c, k, chain.degree_cap) for c in Y]
    return TailLinearization(chain.n_min, maps, steps, np.array(increments), np.array(ratios), params.beta)


@dataclass
class NormalizationResult:
    """Everything produced by :func:`normalize`.

    ``radii`` are the shifted-frame radii ``r_n`` for ``n_min .. n_eff + 1``;
    ``phi_n`` is defined on ``D(r_n e^{-n gamma})`` of the original chain.
    """

    chain: ContractionChain
    shifted: ContractionChain
    shift: ShiftFamily
    params: object
    X: ContractionChain
    T1: list
    T2: list
    phi: list
    radii: SlowSequence
    solutions: list
    tail: TailLinearization
    isometry_slack: float
    diagnostics: dict = field(default_factory=dict)

    @property
    def n_min(self):
        return self.radii.n_min

    @property
    def indices(self):
        return self.radii.indices

    @property
    def diagram_indices(self):
        return self.indices[:-1]

    def phi_at(self, n):
        return self.phi[n - self.n_min]

    def original_radius(self, n):
        """``r_n^gamma = r_n e^{-n gamma}``."""
        return self.radii[n] * math.exp(-n * self.shift.gamma)

    def transform(self, points, n):
        return self.phi_at(n)(points)

    def to_dict(self):
        report = self.diagnostics.get("diagram")
        rows = []
        for i, n in enumerate(self.indices):
            row = {"index": int(n), "r_n": self.radii.values[i], "phi": self.phi[i].to_dict()}
            if report is not None and i < len(report.indices):
                row["residual"] = float(report.measures["residual"][i])
                row["coefficient_residual"] = float(report.measures["coefficient_residual"][i])
            rows.append(row)
        return {
            "gamma": self.shift.gamma,
            "epsilon": self.chain.epsilon,
            "params": self.params.to_dict(),
            "isometry_slack": self.isometry_slack,
            "indices": rows,
            "tail_ratios": self.tail.ratios.tolist(),
            "tail_steps": self.tail.steps,
            "homological": [
                {"p": s.p, "depth": s.depth, "tail_bound": s.tail_bound,
                 "max_residual": float(np.max(s.residuals, initial=0.0)), **s.diagnostics}
                for s in self.solutions
            ],
            "ok": bool(report.ok) if report is not None else None,
        }

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)

    def to_csv(self):
        report = self.diagnostics.get("diagram")
        if report is None:
            report = verify_diagram(self)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["index", "residual", "lip_min", "lip_max", "r_n"])
        for i, n in enumerate(report.indices):
            m = report.measures
            w.writerow([int(n), repr(float(m["residual"][i])), repr(float(m["lip_min"][i])),
                        repr(float(m["lip_max"][i])), repr(float(m["r_n"][i]))])
        return buf.getvalue()


def normalize(chain: ContractionChain, gamma=None, epsilon=None, tail_tol: float = TAIL_TOL,
              linearize_tol: float = LINEARIZE_TOL, isometry_slack: float = ISOMETRY_SLACK,
              n_samples: int = 200, rng_seed: int = 0, validate: bool = True) -> NormalizationResult:
    """Run shift, contact improvement and tail linearization; assemble
    ``phi_n = T^2_n o T^1_n o Delta_n``.

    ``isometry_slack`` is the log-band allowed to each of ``T^1`` and ``T^2``;
    it must be tiny because the sandwich at ``n = 0`` is an isometry band.
    When ``gamma``/``epsilon`` are omitted they come from
    :func:`~holonorm.spectrum.suggest_parameters` and the chain, respectively.
    """
    from .spectrum import _GAMMA_FLAGS, suggest_parameters, validate_constraints

    if gamma is None:
        g, e = suggest_parameters(chain.spectrum)
        gamma = g
        epsilon = e if epsilon is None else epsilon
    if epsilon is not None and epsilon != chain.epsilon:
        chain = chain.replace(epsilon=float(epsilon))
    params = validate_constraints(chain.spectrum, gamma, chain.epsilon)
    failed = params.failed()
    if gamma == 0:
        # expert mode: the gamma inequalities say nothing about an unshifted
        # chain; a resonance is refused by solve_homological instead
        failed = [name for name in failed if name not in _GAMMA_FLAGS]
    if failed:
        raise ConstraintError(f"(gamma, eps) = ({gamma}, {chain.epsilon}) fails {failed}")
    if validate:
        report = validate_chain(chain, n_samples=n_samples, rng_seed=rng_seed)
        if not report.ok:
            raise ValidationError(f"input chain fails validation: {report.violations[:5]}")
    if not 0 < isometry_slack < chain.epsilon:
        raise ValueError("isometry_slack must lie in (0, eps)")

    shifted = shift_spectrum(chain, gamma) if gamma else chain
    contact = improve_contact(shifted, tail_tol, log_band=isometry_slack)
    tail = linearize_tail(contact.chain, params, linearize_tol)
    count = len(tail.maps)
    basis = chain.maps[0].basis
    T1 = np.stack([T.coeffs for T in contact.T1[:count]])
    T2 = np.stack([T.coeffs for T in tail.maps])
    TT = compose_coeffs(T2, T1, basis, basis)
    fam = ShiftFamily(gamma)
    idx = np.arange(chain.n_min, chain.n_min + count)
    k, D = chain.k, chain.degree_cap
    TT_maps = [JetMap(c, k, D) for c in TT]
    phi = [fam.precompose(T, int(n)) for T, n in zip(TT_maps, idx)]

    caps = np.array([shifted.radius_at(int(n)) for n in idx])
    r1 = contact.radii.as_array()[:count]
    r2 = _bilipschitz_radii(tail.maps, 2 * caps, isometry_slack, factor=0.5)
    raw = np.minimum.reduce([caps, r1, r2])
    radii = SlowSequence(chain.n_min, slow_minorant(raw, chain.epsilon), chain.epsilon, chain.extension)

    result = NormalizationResult(
        chain=chain, shifted=shifted, shift=fam, params=params, X=contact.chain,
        T1=contact.T1[:count], T2=tail.maps, phi=phi, radii=radii, solutions=contact.solutions,
        tail=tail, isometry_slack=isometry_slack,
    )
    result.diagnostics["conjugation_radii"] = contact.tau
    result.diagnostics["effective_window"] = [int(idx[0]), int(idx[-1]) - 1]
    result.diagnostics["diagram"] = verify_diagram(result, n_samples=n_samples, rng_seed=rng_seed)
    return result


def sandwich_band(n, gamma, epsilon):
    """``[min, max]`` of ``e^{n(gamma - 2 eps)}`` and ``e^{n(gamma + 2 eps)}``."""
    a, b = math.exp(n * (gamma - 2 * epsilon)), math.exp(n * (gamma + 2 * epsilon))
    return min(a, b), max(a, b)


def verify_diagram(result: NormalizationResult, n_samples: int = 1000, rng_seed: int = 0,
                   tol: float = RESIDUAL_TOL) -> ChainReport:
    """Per diagram index: pointwise and coefficient residual of
    ``phi_{n+1} o W_n = A_n^gamma o phi_n``, containment of
    ``phi_n(D(r_n^gamma))`` in ``D(4 r_n)``, and the sampled bi-Lipschitz band."""
    idx = result.diagram_indices
    gamma, eps = result.shift.gamma, result.chain.epsilon
    report = ChainReport(idx)
    rng = np.random.default_rng(rng_seed)
    m = {key: np.empty(len(idx)) for key in
         ("residual", "coefficient_residual", "containment_ratio", "lip_min", "lip_max",
          "bound_low", "bound_high", "r_n", "r_gamma")}
    k = result.chain.k
    for i, n in enumerate(idx):
        n = int(n)
        W = result.chain.map_at(n)
        A_g = math.exp(gamma) * W.linear_part()
        left = result.phi_at(n + 1) @ W
        right = JetMap.linear(A_g, W.degree_cap) @ result.phi_at(n)
        m["coefficient_residual"][i] = float(np.max(np.abs(left.coeffs - right.coeffs)))
        rg = result.original_radius(n)
        v = random_polydisc_points(rng, n_samples, k, rg)
        phi_v = result.phi_at(n)(v)
        res = np.linalg.norm(result.phi_at(n + 1)(W(v)) - phi_v @ A_g.T, axis=1)
        m["residual"][i] = float(np.max(res))
        m["containment_ratio"][i] = float(np.max(np.abs(phi_v)) / (4 * result.radii[n]))
        lo, hi = sampled_lipschitz(result.phi_at(n), rg, n_samples, rng_seed + i)
        m["lip_min"][i], m["lip_max"][i] = lo, hi
        m["bound_low"][i], m["bound_high"][i] = sandwich_band(n, gamma, eps)
        m["r_n"][i], m["r_gamma"][i] = result.radii[n], rg
    report.measures.update(m)
    report.checks["diagram"] = m["residual"] <= tol
    report.checks["containment"] = m["containment_ratio"] < 1
    report.checks["sandwich"] = (m["lip_min"] >= m["bound_low"] * (1 - SANDWICH_SLACK)) & (
        m["lip_max"] <= m["bound_high"] * (1 + SANDWICH_SLACK))
    return report


def bilipschitz_band(T: JetMap, radius: float):
    """Coefficient-certified ``(1 - kappa, 1 + kappa)`` band of a map tangent to the identity."""
    kappa = coefficient_lipschitz_bound(T, radius)
    return 1 - kappa, 1 + kappa
