"""Versioned table of every default used by the command-line front end."""

from __future__ import annotations

import copy

DEFAULTS_VERSION = "1.0"

DEFAULTS = {
    "version": DEFAULTS_VERSION,
    "quadrature_tol": 1e-9,
    "optimizer_quadrature_tol": 1e-8,
    "identities": {
        "points": 1000,
        "seed": 0,
        "tolerances": {
            "gauge_gradient": 1e-7,
            "gauge_gradient_norm": 1e-7,
            "radial_laplacian": 1e-5,
            "rellich_identity": 1e-8,
            "orthogonality": 1e-5,
            "divergence": 1e-5,
        },
    },
    "fuzz": {"samples": 100, "seed": 0, "spline_fraction": 0.1, "violation_threshold": -1e-6},
    "sharpness": {"eps": [0.2, 0.1, 0.05, 0.025], "delta": [0.05], "target_rel_tol": 0.01},
    "minimize": {
        "knots": 12,
        "log_span": 60.0,
        "restarts": 3,
        "maxfev": 2000,
        "seed": 0,
        "target_rel_tol": 0.02,
    },
    "remainder": {"knots": 10, "log_span": 8.0, "restarts": 3, "maxfev": 2000, "seed": 0},
    "kappa": {"windows": [[1.0, 2.0], [2.0, 4.0], [0.5, 1.0]], "tol": 1e-4, "mc_samples": 0, "seed": 0},
    "ball_margin": 0.95,
    "ckn_q": 1.5,
}


def defaults() -> dict:
    """A deep copy of ``DEFAULTS``."""
    return copy.deepcopy(DEFAULTS)
