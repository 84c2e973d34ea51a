"""Holomorphic endomorphisms of P^k, their inverse branches and the distortion checks."""
from .maps import (ChartAtlas, Chart, ProjectiveEndomorphism, chart_jacobian, chart_jet, chart_map,
                   critical_test, from_affine, fs_distance, lemma_radius_constant, normalize_point,
                   to_affine)
from .orbits import BackwardOrbit, backward_orbit, birkhoff_exponents, preimages, sample_equilibrium
from .cocycle import (CocycleData, OseledecData, build_cocycle, estimate_spectrum,
                      finite_time_exponents, oseledec_reduce)
from .distortion import (ConvexityResult, TheoremAData, TheoremAReport, assemble_theorem_A,
                         convexity_defect, sample_pullback_pair, verify_theorem_A)
from .periodic import (PeriodicRow, RepellingExperiment, birkhoff_estimate, periodic_points,
                       repelling_experiment, repelling_sum)

__all__ = [
    "ChartAtlas", "Chart", "ProjectiveEndomorphism", "chart_jacobian", "chart_jet", "chart_map",
    "critical_test", "from_affine", "fs_distance", "lemma_radius_constant", "normalize_point",
    "to_affine", "BackwardOrbit", "backward_orbit", "birkhoff_exponents", "preimages",
    "sample_equilibrium", "CocycleData", "OseledecData", "build_cocycle", "estimate_spectrum",
    "finite_time_exponents", "oseledec_reduce", "ConvexityResult", "TheoremAData", "TheoremAReport",
    "assemble_theorem_A", "convexity_defect", "sample_pullback_pair", "verify_theorem_A",
    "PeriodicRow", "RepellingExperiment", "birkhoff_estimate", "periodic_points",
    "repelling_experiment", "repelling_sum",
]
