"""Experiment drivers.

Identity suites, randomized inequality checks, sharpness sweeps with
polynomial extrapolation in epsilon, and Nelder-Mead searches for best
quotients and remainder constants over spline profiles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Union

import numpy as np
from scipy.optimize import minimize

from . import functionals as fn
from ._parallel import map_ordered
from .extremals import (
    AtomSum,
    BumpConfig,
    ExtremalSpec,
    hardy_extremal,
    log_knots,
    random_atom_sum,
    random_spline,
    rellich_extremal,
    spline_profile,
)
from .functionals import InequalityCase, rayleigh_quotient, sharp_constant
from .geometry import GrushinParams, gauge_gradient_norm, sample_annulus_points
from .operators import (
    RadialProfile,
    ResidualReport,
    verify_divergence_identity,
    verify_gauge_gradient,
    verify_rellich_identity,
    verify_orthogonality,
    verify_radial_laplacian,
)
from .quadrature import (
    KAPPA_WINDOWS,
    QuadratureDomain,
    QuadratureError,
    angular_factor,
    integrate_mc,
    kappa_window,
)

VIOLATION_THRESHOLD = -1e-6
BOUND_SLACK = 1e-6

IDENTITY_TOLERANCES = {
    "gauge_gradient": 1e-7,
    "gauge_gradient_norm": 1e-7,
    "radial_laplacian": 1e-5,
    "rellich_identity": 1e-8,
    "orthogonality": 1e-5,
    "divergence": 1e-5,
}


def _bound(target: float) -> float:
    return target - BOUND_SLACK * (1.0 + abs(target))


# ---------------------------------------------------------------------------
# identities


@dataclass(frozen=True)
class IdentityCheck:
    name: str
    n_points: int
    max_residual: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.max_residual < self.tol


@dataclass(frozen=True)
class IdentityReport:
    params: GrushinParams
    n_points: int
    seed: int
    checks: tuple[IdentityCheck, ...]

    @property
    def vacuous(self) -> bool:
        return not self.checks

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failures(self) -> tuple[IdentityCheck, ...]:
        return tuple(c for c in self.checks if not c.passed)


def _ratio_profile() -> RadialProfile:
    return RadialProfile(
        lambda t: t * t / (1.0 + t * t),
        lambda t: 2.0 * t / (1.0 + t * t) ** 2,
        lambda t: (2.0 - 6.0 * t * t) / (1.0 + t * t) ** 3,
    )


def _linear_profile() -> RadialProfile:
    return RadialProfile(
        lambda t: np.asarray(t, dtype=float),
        lambda t: np.ones(np.shape(t)),
        lambda t: np.zeros(np.shape(t)),
    )


def run_identity_suite(
    params: GrushinParams,
    n_points: int = 1000,
    seed: int = 0,
    tol: Union[None, float, Mapping[str, float]] = None,
) -> IdentityReport:
    """Closed forms against finite differences at ``n_points`` random points.

    ``tol`` is either one tolerance for every identity or a mapping that
    overrides entries of ``IDENTITY_TOLERANCES``.  ``n_points=0`` gives an
    empty, vacuously passing report.
    """
    if n_points < 0:
        raise ValueError("n_points must be nonnegative")
    tols = dict(IDENTITY_TOLERANCES)
    if isinstance(tol, Mapping):
        unknown = set(tol) - set(tols)
        if unknown:
            raise ValueError(f"unknown identities in tol: {sorted(unknown)}")
        tols.update(tol)
    elif tol is not None:
        tols = {k: float(tol) for k in tols}
    if n_points == 0:
        return IdentityReport(params, 0, seed, ())

    pts = sample_annulus_points(params, n_points, seed)
    reports: list[ResidualReport] = list(verify_gauge_gradient(params, pts))
    for name, f in (("linear", _linear_profile()), ("ratio", _ratio_profile())):
        rep = verify_radial_laplacian(params, f, pts)
        reports.append(ResidualReport(f"radial_laplacian[{name}]", rep.n_points, rep.max_residual))
    rep = verify_rellich_identity(params, 3.0, pts)
    reports.append(rep)
    reports.append(verify_orthogonality(params, pts))
    half = params.m / (2.0 * params.gamma)
    for a, t in ((1.0, 0.0), (2.0, half)):
        rep = verify_divergence_identity(params, a, t, pts)
        reports.append(ResidualReport(f"divergence[a={a:g},t={t:g}]", rep.n_points, rep.max_residual))

    checks = []
    for rep in reports:
        key = rep.name.split("[")[0]
        checks.append(IdentityCheck(rep.name, rep.n_points, float(rep.max_residual), tols[key]))
    return IdentityReport(params, n_points, seed, tuple(checks))


# ---------------------------------------------------------------------------
# fuzzing


SPLINE_FRACTION = 0.1


@dataclass(frozen=True)
class FuzzSample:
    index: int
    kind: str  # "bump" | "spline" | "zero"
    lhs: float
    gap: float
    normalized_gap: float
    status: str  # "ok" | "violation" | "divergent_lhs" | "inconclusive"
    detail: str = ""


@dataclass(frozen=True)
class FuzzReport:
    case: InequalityCase
    samples: int
    min_normalized_gap: float
    violations: int
    divergent_lhs: int
    inconclusive: int
    seed: int
    results: tuple[FuzzSample, ...] = field(repr=False, default=())

    @property
    def passed(self) -> bool:
        return self.violations == 0


def _sample_supports(case: InequalityCase):
    if case.on_ball:
        R = fn.BALL_MARGIN * case.radius
        return BumpConfig(r_out_range=(R, R)), (R * math.exp(-4.0), R)
    return BumpConfig(), (0.05, 3.0)


def _classify(index, kind, ev) -> FuzzSample:
    if ev.lhs_infinite:
        return FuzzSample(index, kind, math.inf, ev.gap, math.nan, "divergent_lhs")
    ng = -1.0 if ev.gap == -math.inf else ev.gap / (1.0 + ev.lhs)
    status = "violation" if ng < VIOLATION_THRESHOLD else "ok"
    return FuzzSample(index, kind, ev.lhs, ev.gap, ng, status)


def fuzz_inequality(
    case: InequalityCase,
    n_samples: int = 100,
    seed: int = 0,
    tol: float = fn.DEFAULT_TOL,
    include_zero: bool = False,
    threads: Optional[int] = None,
) -> FuzzReport:
    """Gap of ``case`` on random test functions.

    Sample ``i`` draws from ``default_rng([seed, i])``: a cut-off atom sum with
    probability 0.9, a random spline profile otherwise.  ``include_zero``
    appends the zero function.  Samples whose quadrature fails are counted as
    inconclusive and left out of the minimum.
    """
    if n_samples < 0:
        raise ValueError("n_samples must be nonnegative")
    bump_cfg, spline_support = _sample_supports(case)
    P = case.params

    def run(i):
        if i == n_samples:
            kind = "zero"
            r_out = bump_cfg.r_out_range[1]
            phi = AtomSum((), (0.5 * r_out, r_out)).field(P)
        else:
            rng = np.random.default_rng([seed, i])
            if rng.random() < SPLINE_FRACTION:
                kind = "spline"
                phi = random_spline(rng, spline_support)
            else:
                kind = "bump"
                phi = random_atom_sum(rng, bump_cfg).field(P)
        try:
            ev = fn.evaluate_case(case, phi, tol)
        except QuadratureError as exc:
            return FuzzSample(i, kind, math.nan, math.nan, math.nan, "inconclusive", str(exc))
        if math.isnan(ev.gap):
            return FuzzSample(i, kind, ev.lhs, ev.gap, math.nan, "inconclusive", "both sides diverge")
        return _classify(i, kind, ev)

    idx = list(range(n_samples + (1 if include_zero else 0)))
    results = tuple(map_ordered(run, idx, threads))
    finite = [r.normalized_gap for r in results if r.status in ("ok", "violation")]
    return FuzzReport(
        case,
        len(results),
        float(min(finite)) if finite else math.nan,
        sum(r.status == "violation" for r in results),
        sum(r.status == "divergent_lhs" for r in results),
        sum(r.status == "inconclusive" for r in results),
        seed,
        results,
    )


# ---------------------------------------------------------------------------
# sharpness sweeps

SWEEP_CASES = ("H_LP_33", "R1_41", "R2_45")


@dataclass(frozen=True)
class SweepRow:
    epsilon: float
    delta: float
    quotient: float


@dataclass(frozen=True)
class SweepReport:
    case: InequalityCase
    rows: tuple[SweepRow, ...]
    extrapolated_limit: float
    target: float
    relative_gap: float
    limits: tuple[tuple[float, float], ...] = ()

    @property
    def min_quotient(self) -> float:
        return min(r.quotient for r in self.rows)

    @property
    def above_target(self) -> bool:
        """Every quotient respects the proven lower bound."""
        return all(r.quotient >= _bound(self.target) for r in self.rows)


def sweep_family(case: InequalityCase):
    """Near-extremal family used by ``sharpness_sweep`` for ``case``."""
    if case.id == "H_LP_33":
        if case.p != 2:
            raise ValueError("the Hardy sweep needs p = 2")
        return hardy_extremal
    if case.id in ("R1_41", "R2_45"):
        return rellich_extremal
    raise ValueError(f"no sharpness sweep for {case.id}; expected one of {SWEEP_CASES}")


def tail_factor(case: InequalityCase, epsilon: float) -> float:
    """Quotient of the outer ``rho^-b`` branch alone, as a function of epsilon.

    At ``epsilon = 0`` this is the sharp constant.
    """
    sweep_family(case)
    b = critical_power(case) + epsilon
    Q = case.Q
    num_t, den_t = case.lhs, case.principal
    kn, _ = fn._tail_amplitude(num_t, 1.0, b, Q)
    kd, _ = fn._tail_amplitude(den_t, 1.0, b, Q)
    ang = angular_factor(case.params, num_t.weight_exponent) / angular_factor(
        case.params, den_t.weight_exponent
    )
    return ang * kn**num_t.power / kd**den_t.power


def extrapolate(eps, quotients) -> float:
    """Constant term of the least-squares quadratic in epsilon."""
    return float(np.polyfit(np.asarray(eps, float), np.asarray(quotients, float), 2)[-1])


def sharpness_sweep(
    case: InequalityCase,
    eps_list,
    delta_list=(0.05,),
    tol: float = fn.DEFAULT_TOL,
    threads: Optional[int] = None,
) -> SweepReport:
    """Rayleigh quotients of the near-extremal family on an (epsilon, delta) grid.

    For each delta the quotients are fitted by ``L + c1 eps + c2 eps^2``.  The
    reported limit is the one for the smallest delta.
    """
    family = sweep_family(case)
    eps = [float(e) for e in eps_list]
    if len(eps) < 3:
        raise ValueError("a sweep needs at least 3 epsilon values")
    if any(b >= a for a, b in zip(eps, eps[1:])):
        raise ValueError("eps_list must be strictly decreasing")
    deltas = [float(d) for d in delta_list]
    if not deltas:
        raise ValueError("delta_list must not be empty")
    grid = [(e, d) for d in deltas for e in eps]

    def run(ed):
        e, d = ed
        return rayleigh_quotient(case, family(ExtremalSpec(e, d, case.alpha, case.params)), tol)

    quotients = map_ordered(run, grid, threads)
    rows = tuple(SweepRow(e, d, float(q)) for (e, d), q in zip(grid, quotients))
    limits = []
    for d in deltas:
        qs = [r.quotient for r in rows if r.delta == d]
        limits.append((d, extrapolate(eps, qs)))
    target = sharp_constant(case)
    L = min(limits)[1]
    return SweepReport(case, rows, L, target, abs(L - target) / abs(target), tuple(limits))


# ---------------------------------------------------------------------------
# quotient minimisation


@dataclass(frozen=True)
class SplineFamily:
    """Profiles ``rho^(-power) S(ln rho)`` with knots log-spaced over ``log_span``.

    By default the knots are centred on ``rho = 1``; with ``upper`` they end
    there instead.  ``power=None`` selects the dilation-critical exponent of the
    case.  ``fixed`` pins the interior coefficients, so the search reduces to a
    single evaluation.
    """

    n_knots: int = 12
    log_span: float = 60.0
    upper: Optional[float] = None
    power: Optional[float] = None
    fixed: Optional[tuple[float, ...]] = None

    def __post_init__(self):
        if not 8 <= self.n_knots <= 16:
            raise ValueError("spline families use 8 to 16 knots")
        if not self.log_span > 0:
            raise ValueError("log_span must be positive")
        if self.fixed is not None and len(self.fixed) != self.n_knots - 2:
            raise ValueError(f"fixed needs {self.n_knots - 2} coefficients")

    def knots(self) -> tuple[float, ...]:
        if self.upper is None:
            lo, hi = math.exp(-self.log_span / 2.0), math.exp(self.log_span / 2.0)
        else:
            hi = self.upper
            lo = hi * math.exp(-self.log_span)
        return log_knots(lo, hi, self.n_knots)

    def profile(self, coeffs, power: float) -> RadialProfile:
        return spline_profile(self.knots(), coeffs, power=power)


@dataclass(frozen=True)
class SimplexConfig:
    restarts: int = 3
    maxfev: int = 2000
    xatol: float = 1e-6
    fatol: float = 1e-10

    def __post_init__(self):
        if self.restarts < 1 or self.maxfev < 1:
            raise ValueError("restarts and maxfev must be positive")


@dataclass(frozen=True)
class RestartTrace:
    start: int
    value: float
    evaluations: int
    success: bool


@dataclass(frozen=True)
class EstimateReport:
    case: InequalityCase
    term: str
    best_constant_estimate: float
    converged: bool
    evaluations: int
    skipped: int
    restarts: tuple[RestartTrace, ...]
    best_coeffs: tuple[float, ...]
    power: float
    target: Optional[float] = None
    seed: int = 0
    sampled: tuple[float, ...] = field(repr=False, default=())

    @property
    def above_target(self) -> bool:
        return self.target is None or self.best_constant_estimate >= _bound(self.target)

    @property
    def relative_excess(self) -> Optional[float]:
        if self.target is None:
            return None
        return (self.best_constant_estimate - self.target) / abs(self.target)


def critical_power(case: InequalityCase) -> float:
    """Exponent making the principal quotient dilation invariant."""
    if case.id == "H_LP_33":
        return (case.Q + case.alpha - case.p) / case.p
    shift = 2.0 if case.id.startswith("H") else 4.0
    return (case.Q + case.alpha - shift) / 2.0


def _simplex(objective, n, family: SplineFamily, cfg: SimplexConfig, seed: int):
    """Seeded restarts of Nelder-Mead; records every finite objective value."""
    sampled: list[float] = []
    state = {"skipped": 0, "best": (math.inf, None)}

    def wrapped(c):
        c = np.array(c, dtype=float)
        v = objective(c)
        if v is None:
            state["skipped"] += 1
            return math.inf
        sampled.append(v)
        if v < state["best"][0]:
            state["best"] = (v, c)
        return v

    if family.fixed is not None:
        x = np.asarray(family.fixed, dtype=float)
        v = wrapped(x)
        traces = (RestartTrace(0, v, 1, math.isfinite(v)),)
        return v, x, traces, sampled, state["skipped"]

    rng = np.random.default_rng(seed)
    traces = []
    base = np.sin(np.pi * np.arange(1, n + 1) / (n + 1))
    for i in range(cfg.restarts):
        x0 = base + 0.3 * rng.standard_normal(n)
        start = len(sampled)
        res = minimize(
            wrapped,
            x0,
            method="Nelder-Mead",
            options=dict(maxfev=cfg.maxfev, xatol=cfg.xatol, fatol=cfg.fatol, adaptive=True),
        )
        # the budget can stop the search before its best point enters the simplex
        v = min(sampled[start:], default=math.inf)
        traces.append(RestartTrace(i, float(v), int(res.nfev), bool(res.success)))
    best_v, best_x = state["best"]
    if best_x is None:
        best_x = np.full(n, math.nan)
    return best_v, best_x, tuple(traces), sampled, state["skipped"]


def minimize_quotient(
    case: InequalityCase,
    family: SplineFamily = SplineFamily(),
    optimizer: SimplexConfig = SimplexConfig(),
    seed: int = 0,
    tol: float = 1e-8,
) -> EstimateReport:
    """Smallest Rayleigh quotient of ``case`` found over the spline family."""
    target = sharp_constant(case)
    if case.on_ball and family.upper is None:
        raise ValueError("ball cases need a family anchored at the ball margin (set upper)")
    power = critical_power(case) if family.power is None else float(family.power)
    n = family.n_knots - 2

    def objective(c):
        if not np.any(c):
            return None
        try:
            return rayleigh_quotient(case, family.profile(c, power), tol)
        except (QuadratureError, ValueError):
            return None

    v, x, traces, sampled, skipped = _simplex(objective, n, family, optimizer, seed)
    return EstimateReport(
        case,
        case.principal.label,
        v,
        any(t.success for t in traces),
        sum(t.evaluations for t in traces),
        skipped,
        traces,
        tuple(x.tolist()),
        power,
        target,
        seed,
        tuple(sampled),
    )


REMAINDER_CASES = ("H_IMPROVED_31", "H_CKN_34", "R1_BALL_42", "R1_CKN_44", "R2_BALL_46")


def remainder_family(case: InequalityCase, n_knots: int = 10, log_span: float = 8.0) -> SplineFamily:
    """Knots log-spaced over ``[0.95 r e^-log_span, 0.95 r]``."""
    return SplineFamily(n_knots=n_knots, log_span=log_span, upper=fn.BALL_MARGIN * case.radius)


def remainder_term(case: InequalityCase) -> fn.Term:
    for tm in case.rhs:
        if tm.coefficient is None:
            return tm
    raise ValueError(f"{case.id} has no remainder with an unknown constant")


def remainder_ratio(case: InequalityCase, phi, tol: float = fn.DEFAULT_TOL) -> Optional[float]:
    """``(LHS - explicit terms) / (prefactor * remainder)``; ``None`` if the remainder vanishes."""
    rem = remainder_term(case)
    ev = fn.evaluate_case(case, phi, tol)
    r = ev.terms[rem.label]
    if r.infinite or ev.lhs_infinite or not math.isfinite(ev.gap):
        return None
    denom = rem.prefactor * r.value
    if denom == 0.0:
        return None
    return ev.gap / denom


def estimate_remainder_constant(
    case: InequalityCase,
    family: Optional[SplineFamily] = None,
    optimizer: SimplexConfig = SimplexConfig(),
    seed: int = 0,
    tol: float = 1e-8,
) -> EstimateReport:
    """Infimum of ``remainder_ratio`` over a spline family on the ball.

    For the Poincare-type remainders this estimates ``1 / (C^2 r^2)``; for the
    gradient-norm remainders it estimates ``1 / C``.
    """
    if case.id not in REMAINDER_CASES:
        raise ValueError(f"{case.id} has no remainder estimate; expected one of {REMAINDER_CASES}")
    family = remainder_family(case) if family is None else family
    if family.upper is None:
        raise ValueError("remainder families must be anchored at the ball margin")
    power = critical_power(case) if family.power is None else float(family.power)
    n = family.n_knots - 2

    def objective(c):
        if not np.any(c):
            return None
        try:
            return remainder_ratio(case, family.profile(c, power), tol)
        except (QuadratureError, ValueError):
            return None

    v, x, traces, sampled, skipped = _simplex(objective, n, family, optimizer, seed)
    return EstimateReport(
        case,
        remainder_term(case).label,
        v,
        any(t.success for t in traces),
        sum(t.evaluations for t in traces),
        skipped,
        traces,
        tuple(x.tolist()),
        power,
        None,
        seed,
        tuple(sampled),
    )



# ---------------------------------------------------------------------------
# polar constant


@dataclass(frozen=True)
class KappaReport:
    params: GrushinParams
    windows: tuple[tuple[float, float, float], ...]  # (a, b, kappa)
    closed_form: float
    window_spread: float
    mc_value: Optional[float] = None
    mc_stderr: Optional[float] = None
    tol: float = 1e-4

    @property
    def kappa(self) -> float:
        return self.windows[0][2]

    @property
    def mc_sigmas(self) -> Optional[float]:
        if self.mc_value is None:
            return None
        return abs(self.mc_value - self.kappa) / self.mc_stderr

    @property
    def passed(self) -> bool:
        ok = self.window_spread <= self.tol
        if self.mc_value is not None:
            ok = ok and self.mc_sigmas <= 3.0
        return ok


def kappa_consistency(
    params: GrushinParams,
    windows=KAPPA_WINDOWS,
    mc_samples: int = 0,
    seed: int = 0,
    tol: float = 1e-4,
    threads: Optional[int] = None,
) -> KappaReport:
    """Polar constant on several gauge annuli, with an optional Monte Carlo check.

    The Monte Carlo estimate uses the first window.
    """
    vals = tuple((float(a), float(b), kappa_window(params, a, b)) for a, b in windows)
    ref = vals[0][2]
    spread = max(abs(v - ref) for _, _, v in vals) / ref
    mc = se = None
    if mc_samples > 0:
        a, b = vals[0][0], vals[0][1]
        Q = params.Q
        res = integrate_mc(
            lambda p: gauge_gradient_norm(p, params) ** 2,
            QuadratureDomain.rho_annulus(params, a, b),
            mc_samples,
            seed,
            threads=threads,
        )
        vol = (b**Q - a**Q) / Q
        mc, se = res.value / vol, res.abs_error / vol
    return KappaReport(params, vals, angular_factor(params, 1.0), spread, mc, se, tol)
