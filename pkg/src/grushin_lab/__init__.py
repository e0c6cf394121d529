"""Numerical laboratory for Baouendi-Grushin Hardy and Rellich inequalities."""

from .extremals import (
    AtomSum,
    ExtremalSpec,
    hardy_extremal,
    random_bump,
    rellich_extremal,
    spline_profile,
)
from .functionals import (
    CASE_IDS,
    EstimateRequired,
    HypothesisError,
    InequalityCase,
    evaluate_case,
    evaluate_term,
    gap,
    rayleigh_quotient,
    sharp_constant,
)
from .geometry import GrushinParams, Point, dilate, gauge, gauge_gradient, gauge_gradient_norm
from .lab import (
    estimate_remainder_constant,
    fuzz_inequality,
    kappa_consistency,
    minimize_quotient,
    run_identity_suite,
    sharpness_sweep,
)
from .operators import RadialProfile, ScalarField, compose_radial, grushin_gradient, grushin_laplacian
from .quadrature import QuadratureDomain, integrate_mc, integrate_reduced, kappa

__version__ = "0.1.0"

__all__ = [
    "AtomSum",
    "CASE_IDS",
    "EstimateRequired",
    "ExtremalSpec",
    "GrushinParams",
    "HypothesisError",
    "InequalityCase",
    "Point",
    "QuadratureDomain",
    "RadialProfile",
    "ScalarField",
    "compose_radial",
    "dilate",
    "estimate_remainder_constant",
    "evaluate_case",
    "evaluate_term",
    "fuzz_inequality",
    "gap",
    "gauge",
    "gauge_gradient",
    "gauge_gradient_norm",
    "grushin_gradient",
    "grushin_laplacian",
    "hardy_extremal",
    "integrate_mc",
    "integrate_reduced",
    "kappa",
    "kappa_consistency",
    "minimize_quotient",
    "random_bump",
    "rayleigh_quotient",
    "rellich_extremal",
    "run_identity_suite",
    "sharp_constant",
    "sharpness_sweep",
    "spline_profile",
]
