"""Command line front end.

Exit codes: 0 pass, 2 unreadable input, 3 validation (including failed
checks), 4 pipeline failure, 5 dynamics (orbit or periodic-point) failure.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from dataclasses import asdict, dataclass

import numpy as np

from . import __version__
from ._validation import check_chain, check_endomorphism, check_spectrum, parse_point
from .chain import validate_chain
from .dynamics.maps import from_affine
from .dynamics.periodic import N_MAX_DEFAULT, repelling_experiment
from .estimators import InverseBranchDistortion
from .exceptions import (ConstraintError, HolonormError, OrbitError, PipelineError, ToleranceConflictError,
                         ValidationError)
from .normalform import RESIDUAL_TOL, normalize
from .spectrum import gap_constant, resonant_indices, suggest_parameters, validate_constraints

EXIT_OK, EXIT_INPUT, EXIT_VALIDATION, EXIT_PIPELINE, EXIT_DYNAMICS = 0, 2, 3, 4, 5
THEOREM_A_N = 12
CONVEXITY_N = 8
CONVEXITY_T = (0.25, 0.5, 1.0)


class InputError(Exception):
    pass


@dataclass
class RunConfig:
    subcommand: str
    input: str
    gamma: float = None
    epsilon: float = None
    window: int = None
    samples: int = None
    seed: int = 0
    out: str = None
    tol: float = None
    input_sha256: str = ""

    def __post_init__(self):
        for name in ("epsilon", "tol"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise InputError(f"--{name} must be positive")
        if self.gamma is not None and self.gamma < 0:
            raise InputError("--gamma must be nonnegative")
        for name in ("window", "samples"):
            v = getattr(self, name)
            if v is not None and v < 1:
                raise InputError(f"--{name} must be at least 1")

    def hash(self):
        """Digest of every setting that influences the output (the output directory does not)."""
        d = asdict(self)
        d.pop("out")
        d.pop("input")
        d["version"] = __version__
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]

    def meta(self):
        return {"config_hash": self.hash(), "seed": self.seed, "version": __version__,
                "config": {k: v for k, v in asdict(self).items() if k != "out"}}

    def header(self):
        return [f"holonorm {__version__}", f"config_hash {self.hash()}", f"seed {self.seed}"]


def _read_input(path):
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
        doc = json.loads(raw)
    except (OSError, json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise InputError(f"{path}: expected a JSON object")
    return doc, hashlib.sha256(raw).hexdigest()


def _with_header(csv_text, header):
    return "".join(f"# {h}\n" for h in header) + csv_text


def _write(cfg, name, text):
    if cfg.out is None:
        return None
    os.makedirs(cfg.out, exist_ok=True)
    path = os.path.join(cfg.out, name)
    with open(path, "w", newline="\n") as fh:
        fh.write(text)
    return path


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, complex):
        return [o.real, o.imag]
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(f"cannot serialize {type(o).__name__}")


def _dumps(obj):
    return json.dumps(obj, sort_keys=True, indent=2, default=_json_default) + "\n"


# -- subcommands -------------------------------------------------------------


def cmd_resonance(cfg, doc):
    try:
        spec = check_spectrum(doc)
    except (ValidationError, ValueError) as exc:
        raise InputError(str(exc)) from exc
    a = gap_constant(spec)
    if cfg.gamma is None:
        gamma, eps = suggest_parameters(spec)
        eps = eps if cfg.epsilon is None else cfg.epsilon
    else:
        gamma = cfg.gamma
        eps = cfg.epsilon if cfg.epsilon is not None else suggest_parameters(spec)[1]
    params = validate_constraints(spec, gamma, eps, a)
    report = {
        "spectrum": spec.to_dict(),
        "resonant": {str(j): [list(al) for al in resonant_indices(spec, j)] for j in range(1, spec.l + 1)},
        "gap": a,
        "gamma": gamma,
        "epsilon": eps,
        "constraints": params.to_dict(),
        "meta": cfg.meta(),
    }
    text = _dumps(report)
    sys.stdout.write(text)
    _write(cfg, "resonance.json", text)
    return EXIT_OK if params.valid else EXIT_VALIDATION


def cmd_normalize(cfg, doc):
    try:
        chain = check_chain(doc)
    except (ValidationError, ValueError, KeyError, TypeError) as exc:
        raise InputError(str(exc)) from exc
    if cfg.window is not None:
        lo, hi = max(chain.n_min, -cfg.window), min(chain.n_max, cfg.window)
        if lo > hi:
            raise InputError(f"--window {cfg.window} leaves no index of [{chain.n_min}, {chain.n_max}]")
        chain = chain.replace(n_min=lo, maps=chain.maps[lo - chain.n_min: hi - chain.n_min + 1],
                              radii=list(chain.radii[lo - chain.n_min: hi - chain.n_min + 1]))
    samples = cfg.samples or 200
    tol = cfg.tol or RESIDUAL_TOL
    report = validate_chain(chain, n_samples=samples, rng_seed=cfg.seed)
    if not report.ok:
        raise ValidationError(f"chain fails validation: {report.violations[:3]}")
    result = normalize(chain, cfg.gamma, cfg.epsilon, n_samples=samples, rng_seed=cfg.seed)
    diag = result.diagnostics["diagram"]
    worst = float(np.max(diag.measures["residual"]))
    ok = bool(diag.ok and worst <= tol)
    out = result.to_dict()
    out["max_residual"] = worst
    out["pass"] = ok
    out["meta"] = cfg.meta()
    _write(cfg, "normalize.json", _dumps(out))
    _write(cfg, "normalize.csv", _with_header(result.to_csv(), cfg.header()))
    phi0 = result.phi_at(0)
    quad = [[list(map(int, al)), [float(c.real), float(c.imag)]]
            for al, c in zip(phi0.basis.exponents[phi0.basis.degree_slices[2]],
                             phi0.coeffs[0, phi0.basis.degree_slices[2]])] if phi0.degree_cap >= 2 else []
    summary = {"pass": ok, "max_residual": worst, "gamma": result.shift.gamma, "epsilon": result.chain.epsilon,
               "r_0": float(result.radii[0]), "phi_0_quadratic_first_component": quad, "meta": cfg.meta()}
    sys.stdout.write(_dumps(summary))
    return EXIT_OK if ok else EXIT_VALIDATION


def _orbit_settings(doc, f, cfg):
    seed_point = parse_point(doc["seed_point"], f.k) if "seed_point" in doc else \
        from_affine(np.exp(1j * (0.7 + np.arange(f.k))))
    N = cfg.window if cfg.window is not None else int(doc.get("N", THEOREM_A_N))
    branch = doc.get("branch", "random")
    spectrum = check_spectrum(doc["spectrum"]) if "spectrum" in doc else None
    return seed_point, N, branch, spectrum


def cmd_theorem_a(cfg, doc):
    try:
        f = check_endomorphism(doc)
        seed_point, N, branch, spectrum = _orbit_settings(doc, f, cfg)
    except (ValidationError, ValueError, KeyError, TypeError) as exc:
        raise InputError(str(exc)) from exc
    samples = cfg.samples or 200
    est = InverseBranchDistortion(N=N, branch=branch, gamma=cfg.gamma, epsilon=cfg.epsilon,
                                  spectrum=spectrum, n_samples=samples, random_state=cfg.seed)
    est.fit(f, seed_point)
    data, report = est.data_, est.report_
    n_conv = min(CONVEXITY_N, data.N)
    pairs = int(doc.get("convexity_pairs", 50))
    convexity = []
    for t in CONVEXITY_T:
        res = est.convexity(t, n_conv, pairs)
        convexity.append({"t": t, "n": n_conv, "pairs": pairs, "pass": all(r.passed for r in res),
                          "max_ratio": max(r.ratio for r in res),
                          "failed_inclusions": sorted({r.failed_inclusion for r in res if r.failed_inclusion})})
    ok = bool(report.ok and all(c["pass"] for c in convexity))
    if cfg.tol is not None:
        ok = ok and all(r["residual"] <= cfg.tol for r in report.rows)
    summary = {"pass": ok, "theorem_a": data.to_dict(), "report": report.to_dict(), "convexity": convexity,
               "orbit": {"N": N, "branch": branch, "seed_point": data.orbit.points[0]},
               "meta": cfg.meta()}
    _write(cfg, "theorem_a.csv", _with_header(report.to_csv(), cfg.header()))
    _write(cfg, "theorem_a.json", _dumps(summary))
    lines = [f"theorem-a: {'PASS' if ok else 'FAIL'}",
             f"  exponents {list(data.spectrum.exponents)} multiplicities {list(data.spectrum.multiplicities)}",
             f"  gamma {data.gamma:.6g} epsilon {data.epsilon:.6g} n_hat {data.n_hat} N {data.N}",
             f"  rows {sum(r['pass'] for r in report.rows)}/{len(report.rows)} pass; slow {report.slow}",
             *(f"  convexity t={c['t']}: {'pass' if c['pass'] else 'FAIL'} max ratio {c['max_ratio']:.6g}"
               for c in convexity),
             f"  config_hash {cfg.hash()} seed {cfg.seed} version {__version__}"]
    print("\n".join(lines))
    return EXIT_OK if ok else EXIT_VALIDATION


def cmd_repelling(cfg, doc):
    try:
        f = check_endomorphism(doc)
    except (ValidationError, ValueError, KeyError, TypeError) as exc:
        raise InputError(str(exc)) from exc
    if f.k != 1:
        raise ValidationError("the repelling-cycle experiment needs k = 1")
    n_max = cfg.window if cfg.window is not None else int(doc.get("n_max", N_MAX_DEFAULT))
    exp = repelling_experiment(f, n_max, rng_seed=cfg.seed, samples=cfg.samples or 4000)
    for r in exp.rows:
        if r.count != f.d ** r.n:
            raise OrbitError(f"found {r.count} solutions of f^{r.n}(z) = z, expected {f.d ** r.n}")
    header = cfg.header() + ["periodic points: all fixed points of f^n, including lower periods",
                             "S_n: d^-n * sum of log|f'(p)| over repelling p"]
    csv_text = exp.to_csv(header)
    _write(cfg, "repelling.csv", csv_text)
    _write(cfg, "repelling.json", _dumps({**exp.to_dict(), "meta": cfg.meta()}))
    sys.stdout.write(csv_text)
    unreliable = [r.n for r in exp.rows if not r.reliable]
    if unreliable:
        print(f"# unreliable rows: {unreliable}", file=sys.stderr)
    return EXIT_OK


COMMANDS = {"resonance": cmd_resonance, "normalize": cmd_normalize, "theorem-a": cmd_theorem_a,
            "repelling": cmd_repelling}


def build_parser():
    ap = argparse.ArgumentParser(prog="holonorm", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"holonorm {__version__}")
    ap.add_argument("subcommand", choices=sorted(COMMANDS))
    ap.add_argument("input", help="JSON input (spectrum, chain or endomorphism spec)")
    ap.add_argument("--gamma", type=float, help="spectral shift; 0 forces the unshifted pipeline")
    ap.add_argument("--epsilon", type=float, help="slowness parameter")
    ap.add_argument("--window", type=int,
                    help="normalize: keep indices in [-N, N]; theorem-a: orbit length; repelling: largest period")
    ap.add_argument("--samples", type=int, help="sample count (verification points or equilibrium samples)")
    ap.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    ap.add_argument("--out", help="directory for the JSON/CSV outputs")
    ap.add_argument("--tol", type=float, help="residual tolerance for the pass verdict")
    return ap


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        doc, digest = _read_input(args.input)
        cfg = RunConfig(args.subcommand, args.input, args.gamma, args.epsilon, args.window, args.samples,
                        args.seed, args.out, args.tol, digest)
        return COMMANDS[args.subcommand](cfg, doc)
    except InputError as exc:
        print(f"holonorm: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OrbitError as exc:
        print(f"holonorm: dynamics failure: {exc}", file=sys.stderr)
        return EXIT_DYNAMICS
    except PipelineError as exc:
        print(f"holonorm: pipeline failure at stage {exc.stage}: {exc}", file=sys.stderr)
        return EXIT_PIPELINE
    except (ValidationError, ConstraintError, ToleranceConflictError) as exc:
        print(f"holonorm: validation failure: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except HolonormError as exc:
        print(f"holonorm: {exc}", file=sys.stderr)
        return EXIT_PIPELINE


if __name__ == "__main__":
    sys.exit(main())
