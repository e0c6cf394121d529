"""Test-function families.

* ``rellich_extremal`` / ``hardy_extremal``: the power-law near-extremisers,
  with the corner at ``rho = 1`` replaced by a cubic Hermite blend on
  ``[1 - delta, 1 + delta]``.
* ``AtomSum``: sums of ``c r^(2i) s^(2j) exp(-a r^2 - b s^2)`` times a smooth
  gauge cutoff, with closed-form jets.  ``random_bump`` draws one.
* ``spline_profile``: ``rho^(-p) S(ln rho)`` with ``S`` a clamped cubic spline,
  used for quotient minimisation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.interpolate import CubicHermiteSpline, CubicSpline

from .geometry import GrushinParams
from .operators import Jet, PowerTail, RadialProfile, ScalarField, Support, radial_jet


@dataclass(frozen=True)
class ExtremalSpec:
    epsilon: float
    delta: float
    alpha: float
    params: GrushinParams

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if not 0 < self.delta < 0.5:
            raise ValueError("delta must lie in (0, 0.5)")


def _blended_profile(inner, d_inner, outer_exp: float, delta: float) -> RadialProfile:
    """Inner branch on [0, 1-delta], rho^-b on [1+delta, inf), Hermite blend between."""
    b = outer_exp
    x0, x1 = 1.0 - delta, 1.0 + delta
    herm = CubicHermiteSpline(
        [x0, x1], [inner(x0), x1 ** (-b)], [d_inner(x0), -b * x1 ** (-b - 1.0)]
    )
    dh, d2h = herm.derivative(1), herm.derivative(2)

    def pick(t, f_in, f_mid, f_out):
        t = np.asarray(t, dtype=float)
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            return np.where(t <= x0, f_in(t), np.where(t >= x1, f_out(t), f_mid(np.clip(t, x0, x1))))

    f = lambda t: pick(t, inner, herm, lambda u: u ** (-b))
    df = lambda t: pick(t, d_inner, dh, lambda u: -b * u ** (-b - 1.0))
    d2f = lambda t: pick(t, lambda u: np.zeros_like(u), d2h, lambda u: b * (b + 1.0) * u ** (-b - 2.0))
    return RadialProfile(f, df, d2f, (0.0, np.inf), (x0, x1), PowerTail(1.0, b, x1))


def rellich_exponent(spec: ExtremalSpec) -> float:
    return (spec.params.Q + spec.alpha - 4.0) / 2.0 + spec.epsilon


def hardy_exponent(spec: ExtremalSpec) -> float:
    return (spec.params.Q + spec.alpha - 2.0) / 2.0 + spec.epsilon


def rellich_extremal(spec: ExtremalSpec) -> RadialProfile:
    """``b (rho - 1) + 1`` inside the unit ball, ``rho^-b`` outside, ``b = (Q+alpha-4)/2 + eps``."""
    if not spec.params.Q + spec.alpha - 4.0 > 0:
        raise ValueError("the Rellich family needs Q + alpha - 4 > 0")
    b = rellich_exponent(spec)
    inner = lambda t: b * (np.asarray(t, dtype=float) - 1.0) + 1.0
    d_inner = lambda t: np.full(np.shape(t), b, dtype=float)
    return _blended_profile(inner, d_inner, b, spec.delta)


def hardy_extremal(spec: ExtremalSpec) -> RadialProfile:
    """1 inside the unit ball, ``rho^-b`` outside, ``b = (Q+alpha-2)/2 + eps``."""
    if not spec.params.Q + spec.alpha - 2.0 > 0:
        raise ValueError("the Hardy family needs Q + alpha - 2 > 0")
    b = hardy_exponent(spec)
    inner = lambda t: np.ones(np.shape(t), dtype=float)
    d_inner = lambda t: np.zeros(np.shape(t), dtype=float)
    return _blended_profile(inner, d_inner, b, spec.delta)


# ---------------------------------------------------------------------------
# cutoffs and atoms


def smoothstep_cutoff(r_in: float, r_out: float) -> RadialProfile:
    """1 for rho <= r_in, 0 for rho >= r_out, quintic smoothstep in between."""
    if not 0 < r_in < r_out:
        raise ValueError("cutoff needs 0 < r_in < r_out")
    h = r_out - r_in

    def u(t):
        return np.clip((np.asarray(t, dtype=float) - r_in) / h, 0.0, 1.0)

    f = lambda t: 1.0 - (10.0 - 15.0 * u(t) + 6.0 * u(t) ** 2) * u(t) ** 3
    df = lambda t: -30.0 * u(t) ** 2 * (1.0 - u(t)) ** 2 / h
    d2f = lambda t: -60.0 * u(t) * (1.0 - u(t)) * (1.0 - 2.0 * u(t)) / h**2
    return RadialProfile(f, df, d2f, (0.0, r_out), (r_in, r_out))


def _power_gauss_jet(x, n: int, a: float):
    """Value, first, second derivative and d/x of x^(2n) exp(-a x^2)."""
    x = np.asarray(x, dtype=float)
    e = np.exp(-a * x * x)
    x2 = x * x
    if n == 0:
        v = e
        over = -2.0 * a * e
        d2 = (-2.0 * a + 4.0 * a * a * x2) * e
    else:
        p = x2 ** (n - 1)  # x^(2n-2)
        v = p * x2 * e
        over = (2.0 * n - 2.0 * a * x2) * p * e
        d2 = (2.0 * n * (2.0 * n - 1.0) - 2.0 * a * (4.0 * n + 1.0) * x2 + 4.0 * a * a * x2 * x2) * p * e
    return v, over * x, d2, over


@dataclass(frozen=True)
class Atom:
    i: int
    j: int
    a: float
    b: float
    c: float

    def __post_init__(self):
        if self.i < 0 or self.j < 0 or int(self.i) != self.i or int(self.j) != self.j:
            raise ValueError("atom exponents must be nonnegative integers")
        if not (self.a > 0 and self.b > 0):
            raise ValueError("atom rates must be positive")

    def jet(self, r, s) -> Jet:
        u, ur, urr, ur_r = _power_gauss_jet(r, self.i, self.a)
        w, ws, wss, ws_s = _power_gauss_jet(s, self.j, self.b)
        c = self.c
        return Jet(c * u * w, c * ur * w, c * u * ws, c * urr * w, c * u * wss, c * ur_r * w, c * u * ws_s)


@dataclass(frozen=True)
class AtomSum:
    atoms: tuple[Atom, ...]
    cutoff: Optional[tuple[float, float]] = None

    def jet(self, r, s, gamma: float) -> Jet:
        total = None
        for at in self.atoms:
            j = at.jet(r, s)
            total = j if total is None else total + j
        if total is None:
            z = np.zeros(np.broadcast(np.asarray(r), np.asarray(s)).shape)
            total = Jet(*(z,) * 7)
        if self.cutoff is not None:
            chi = radial_jet(smoothstep_cutoff(*self.cutoff), r, s, gamma)
            total = total.times(chi)
        return total

    def field(self, params: GrushinParams) -> ScalarField:
        g = params.gamma
        if self.cutoff is not None:
            support = Support.ball(self.cutoff[1])
            breaks = tuple(self.cutoff)
        else:
            support, breaks = Support.whole(), ()
        return ScalarField.from_jet(params, lambda r, s: self.jet(r, s, g), support, breaks)


@dataclass(frozen=True)
class BumpConfig:
    n_atoms: tuple[int, int] = (1, 5)
    max_i: int = 2
    max_j: int = 2
    rate_range: tuple[float, float] = (0.3, 3.0)
    coef_range: tuple[float, float] = (-1.0, 1.0)
    r_out_range: tuple[float, float] = (1.0, 3.0)
    r_in_fraction: tuple[float, float] = (0.3, 0.8)

    def __post_init__(self):
        lo, hi = self.n_atoms
        if not 1 <= lo <= hi:
            raise ValueError("atom count range must satisfy 1 <= lo <= hi")
        for name in ("rate_range", "r_out_range", "r_in_fraction"):
            a, b = getattr(self, name)
            if not 0 < a <= b:
                raise ValueError(f"{name} must be positive and ordered")
        if self.r_in_fraction[1] >= 1:
            raise ValueError("r_in_fraction must stay below 1")


def random_atom_sum(rng: np.random.Generator, config: BumpConfig = BumpConfig()) -> AtomSum:
    n = int(rng.integers(config.n_atoms[0], config.n_atoms[1] + 1))
    atoms = []
    for _ in range(n):
        atoms.append(
            Atom(
                int(rng.integers(0, config.max_i + 1)),
                int(rng.integers(0, config.max_j + 1)),
                float(rng.uniform(*config.rate_range)),
                float(rng.uniform(*config.rate_range)),
                float(rng.uniform(*config.coef_range)),
            )
        )
    r_out = float(rng.uniform(*config.r_out_range))
    r_in = r_out * float(rng.uniform(*config.r_in_fraction))
    return AtomSum(tuple(atoms), (r_in, r_out))


def random_bump(seed, config: BumpConfig = BumpConfig(), params: Optional[GrushinParams] = None) -> ScalarField:
    """Cut-off atom sum drawn from ``default_rng(seed)``."""
    if params is None:
        raise ValueError("random_bump needs GrushinParams")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return random_atom_sum(rng, config).field(params)


# ---------------------------------------------------------------------------
# splines


@dataclass(frozen=True)
class SplineProfile:
    """``rho^(-power) S(ln rho)`` where ``S`` interpolates ``coeffs`` at the interior knots.

    ``S`` vanishes together with its derivative at the first and last knot.
    """

    knots: tuple[float, ...]
    coeffs: tuple[float, ...]
    power: float = 0.0
    _spline: object = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        kn = np.asarray(self.knots, dtype=float)
        if kn.ndim != 1 or kn.size < 4:
            raise ValueError("a spline profile needs at least 4 knots")
        if np.any(kn <= 0) or np.any(np.diff(kn) <= 0):
            raise ValueError("knots must be positive and strictly increasing")
        co = np.asarray(self.coeffs, dtype=float)
        if co.shape != (kn.size - 2,):
            raise ValueError(f"expected {kn.size - 2} interior coefficients, got {co.size}")
        vals = np.concatenate([[0.0], co, [0.0]])
        sp = CubicSpline(np.log(kn), vals, bc_type="clamped")
        object.__setattr__(self, "knots", tuple(kn.tolist()))
        object.__setattr__(self, "coeffs", tuple(co.tolist()))
        object.__setattr__(self, "_spline", sp)

    def profile(self) -> RadialProfile:
        sp = self._spline
        d1, d2 = sp.derivative(1), sp.derivative(2)
        lo, hi = self.knots[0], self.knots[-1]
        p = float(self.power)

        def inside(t):
            t = np.asarray(t, dtype=float)
            return (t > lo) & (t < hi), np.log(np.clip(t, lo, hi)), np.clip(t, lo, hi)

        def f(t):
            m, u, tc = inside(t)
            return np.where(m, tc ** (-p) * sp(u), 0.0)

        def df(t):
            m, u, tc = inside(t)
            return np.where(m, tc ** (-p - 1.0) * (d1(u) - p * sp(u)), 0.0)

        def d2f(t):
            m, u, tc = inside(t)
            return np.where(
                m, tc ** (-p - 2.0) * (d2(u) - (2.0 * p + 1.0) * d1(u) + p * (p + 1.0) * sp(u)), 0.0
            )

        return RadialProfile(f, df, d2f, (lo, hi), tuple(self.knots))


def spline_profile(knots, coeffs, support=None, power: float = 0.0) -> RadialProfile:
    """Clamped cubic-spline profile in ``ln rho``.

    With ``support=(a, b)`` the knots are given in ``[0, 1]`` and mapped
    log-linearly onto ``[a, b]``.
    """
    kn = np.asarray(knots, dtype=float)
    if np.any(np.diff(kn) <= 0):
        raise ValueError("knots must be strictly increasing")
    if support is not None:
        a, b = support
        if not 0 < a < b:
            raise ValueError("spline support must satisfy 0 < a < b")
        if kn[0] < 0 or kn[-1] > 1:
            raise ValueError("relative knots must lie in [0, 1]")
        kn = np.exp(np.log(a) + kn * (np.log(b) - np.log(a)))
    return SplineProfile(tuple(kn), tuple(np.asarray(coeffs, dtype=float)), power).profile()


def log_knots(lo: float, hi: float, n: int) -> tuple[float, ...]:
    return tuple(np.exp(np.linspace(np.log(lo), np.log(hi), n)).tolist())


def random_spline(rng: np.random.Generator, support: tuple[float, float], n_knots: int = 8) -> RadialProfile:
    kn = log_knots(support[0], support[1], n_knots)
    return spline_profile(kn, rng.standard_normal(n_knots - 2))
