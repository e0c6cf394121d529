"""Sub-elliptic gradient, Grushin Laplacian and pointwise identity checks.

Test functions come in two flavours:

``RadialProfile``
    a function of the gauge alone, f(rho), with exact f' and f''.
``ScalarField``
    a general field with block gradients and block Laplacians.  Bi-radial
    fields (functions of r = |x| and s = |y|) additionally carry a *jet*
    evaluator in (r, s), which is what the quadrature layer integrates.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np

from . import finite_diff as fd
from .geometry import (
    TINY,
    GrushinParams,
    Point,
    block_norms,
    gauge,
    gauge_gradient,
    gauge_gradient_norm,
    gauge_rs,
    sample_annulus_points,
)


@dataclass(frozen=True)
class Support:
    """Where a test function may be nonzero."""

    kind: str = "whole"  # "whole" | "ball" | "rectangle"
    radius: float = np.inf
    r_range: tuple[float, float] = (0.0, np.inf)
    s_range: tuple[float, float] = (0.0, np.inf)

    @classmethod
    def whole(cls) -> "Support":
        return cls()

    @classmethod
    def ball(cls, radius: float) -> "Support":
        if not radius > 0:
            raise ValueError("support radius must be positive")
        return cls("ball", float(radius))

    @classmethod
    def rectangle(cls, r_range, s_range) -> "Support":
        return cls("rectangle", np.inf, tuple(r_range), tuple(s_range))

    @property
    def bounded(self) -> bool:
        return self.kind == "ball"


@dataclass(frozen=True)
class PowerTail:
    """``f(rho) = coef * rho**(-exponent)`` for ``rho >= start``."""

    coef: float
    exponent: float
    start: float


@dataclass(frozen=True)
class RadialProfile:
    f: Callable
    df: Callable
    d2f: Callable
    support: tuple[float, float] = (0.0, np.inf)
    breakpoints: tuple[float, ...] = ()
    tail: Optional[PowerTail] = None

    def __call__(self, rho):
        return self.f(rho)

    @property
    def outer(self) -> float:
        return self.support[1]


class Jet(NamedTuple):
    """Value and (r, s) derivatives of a bi-radial function F(r, s).

    ``r1_over_r`` is F_r / r and ``s1_over_s`` is F_s / s, kept separately so
    that block Laplacians stay finite on the coordinate axes.
    """

    v: np.ndarray
    r1: np.ndarray
    s1: np.ndarray
    rr: np.ndarray
    ss: np.ndarray
    r1_over_r: np.ndarray
    s1_over_s: np.ndarray

    def __add__(self, other):  # type: ignore[override]
        return Jet(*(a + b for a, b in zip(self, other)))

    def scale(self, c) -> "Jet":
        return Jet(*(c * a for a in self))

    def times(self, other: "Jet") -> "Jet":
        a, b = self, other
        return Jet(
            a.v * b.v,
            a.r1 * b.v + a.v * b.r1,
            a.s1 * b.v + a.v * b.s1,
            a.rr * b.v + 2.0 * a.r1 * b.r1 + a.v * b.rr,
            a.ss * b.v + 2.0 * a.s1 * b.s1 + a.v * b.ss,
            a.r1_over_r * b.v + a.v * b.r1_over_r,
            a.s1_over_s * b.v + a.v * b.s1_over_s,
        )

    def lap_x(self, m: int):
        return self.rr + (m - 1) * self.r1_over_r

    def lap_y(self, k: int):
        return self.ss + (k - 1) * self.s1_over_s

    def grushin_grad_sq(self, r, gamma: float):
        return self.r1**2 + r ** (2.0 * gamma) * self.s1**2

    def grushin_lap(self, r, params: GrushinParams):
        return self.lap_x(params.m) + r ** (2.0 * params.gamma) * self.lap_y(params.k)


def gauge_jet(r, s, gamma: float) -> Jet:
    """Jet of rho(r, s) itself, computed by differentiating the gauge."""
    g = gamma
    r = np.asarray(r, dtype=float)
    s = np.asarray(s, dtype=float)
    rho = gauge_rs(r, s, g)
    P = rho ** (-1.0 - 2.0 * g)
    r2g = r ** (2.0 * g)
    rho_e = rho ** (2.0 + 2.0 * g)
    r_over = P * r2g
    s_over = (1.0 + g) * P
    return Jet(
        rho,
        r_over * r,
        s_over * s,
        (1.0 + 2.0 * g) * P * r2g * (1.0 - r ** (2.0 + 2.0 * g) / rho_e),
        s_over * (1.0 - (1.0 + 2.0 * g) * (1.0 + g) * s**2 / rho_e),
        r_over,
        s_over,
    )


def radial_jet(f: RadialProfile, r, s, gamma: float) -> Jet:
    """Jet of f(rho(r, s)) by the Cartesian chain rule."""
    gj = gauge_jet(r, s, gamma)
    rho = gj.v
    f0, f1, f2 = f.f(rho), f.df(rho), f.d2f(rho)
    return Jet(
        f0,
        f1 * gj.r1,
        f1 * gj.s1,
        f2 * gj.r1**2 + f1 * gj.rr,
        f2 * gj.s1**2 + f1 * gj.ss,
        f1 * gj.r1_over_r,
        f1 * gj.s1_over_s,
    )


@dataclass(frozen=True)
class ScalarField:
    params: GrushinParams
    value: Callable
    grad_x: Callable
    grad_y: Callable
    lap_x: Callable
    lap_y: Callable
    support: Support = field(default_factory=Support.whole)
    jet: Optional[Callable] = None
    breakpoints: tuple[float, ...] = ()

    @classmethod
    def from_jet(
        cls,
        params: GrushinParams,
        jet: Callable,
        support: Support = Support.whole(),
        breakpoints=(),
    ) -> "ScalarField":
        """Build point evaluators from a bi-radial jet ``jet(r, s) -> Jet``."""

        def _rs(x, y):
            return block_norms(Point(x, y))

        def value(x, y):
            return jet(*_rs(x, y)).v

        def grad_x(x, y):
            return jet(*_rs(x, y)).r1_over_r[..., None] * np.asarray(x, dtype=float)

        def grad_y(x, y):
            return jet(*_rs(x, y)).s1_over_s[..., None] * np.asarray(y, dtype=float)

        def lap_x(x, y):
            return jet(*_rs(x, y)).lap_x(params.m)

        def lap_y(x, y):
            return jet(*_rs(x, y)).lap_y(params.k)

        return cls(params, value, grad_x, grad_y, lap_x, lap_y, support, jet, tuple(breakpoints))

    @property
    def biradial(self) -> bool:
        return self.jet is not None

    def __call__(self, p: Point):
        return self.value(p.x, p.y)


def compose_radial(f: RadialProfile, params: GrushinParams) -> ScalarField:
    """The field z -> f(rho(z)), with derivatives from the Cartesian chain rule."""
    support = Support.ball(f.outer) if np.isfinite(f.outer) else Support.whole()
    return ScalarField.from_jet(
        params,
        lambda r, s: radial_jet(f, r, s, params.gamma),
        support,
        tuple(f.breakpoints) + (f.support[1],) * bool(np.isfinite(f.support[1])),
    )


def dilate_field(phi: ScalarField, lam: float) -> ScalarField:
    """The field phi o delta_lam (bi-radial fields only)."""
    if not phi.biradial:
        raise ValueError("dilation is implemented for bi-radial fields")
    if not lam > 0:
        raise ValueError("dilation factor must be positive")
    c = 1.0 + phi.params.gamma
    ls = lam**c

    def jet(r, s):
        j = phi.jet(lam * np.asarray(r), ls * np.asarray(s))
        return Jet(j.v, lam * j.r1, ls * j.s1, lam**2 * j.rr, ls**2 * j.ss,
                   lam**2 * j.r1_over_r, ls**2 * j.s1_over_s)

    sup = phi.support
    if sup.kind == "ball":
        sup = Support.ball(sup.radius / lam)
    return ScalarField.from_jet(
        phi.params, jet, sup, tuple(b / lam for b in phi.breakpoints)
    )


def grushin_gradient(phi: ScalarField, p: Point, params: GrushinParams) -> np.ndarray:
    p.check(params)
    r, _ = block_norms(p)
    gy = phi.grad_y(p.x, p.y) * (r**params.gamma)[..., None]
    return np.concatenate([phi.grad_x(p.x, p.y), gy], axis=-1)


def grushin_laplacian(phi: ScalarField, p: Point, params: GrushinParams):
    p.check(params)
    r, _ = block_norms(p)
    return phi.lap_x(p.x, p.y) + r ** (2.0 * params.gamma) * phi.lap_y(p.x, p.y)


def radial_laplacian(f: RadialProfile, p: Point, params: GrushinParams):
    """Grushin Laplacian of f(rho) through the one-dimensional reduction."""
    rho = gauge(p, params)
    if np.any(rho == 0.0):
        raise ValueError("radial Laplacian is undefined at the origin")
    w = gauge_gradient_norm(p, params) ** 2
    return w * (f.d2f(rho) + (params.Q - 1.0) * f.df(rho) / rho)


def power_profile(exponent: float) -> RadialProfile:
    """f(rho) = rho**exponent on (0, inf)."""
    a = float(exponent)
    return RadialProfile(
        lambda t: np.asarray(t, dtype=float) ** a,
        lambda t: a * np.asarray(t, dtype=float) ** (a - 1.0),
        lambda t: a * (a - 1.0) * np.asarray(t, dtype=float) ** (a - 2.0),
    )


# ---------------------------------------------------------------------------
# identity checks


@dataclass(frozen=True)
class ResidualReport:
    name: str
    n_points: int
    max_residual: float
    residuals: np.ndarray = field(repr=False, default_factory=lambda: np.zeros(0))

    def passed(self, tol: float) -> bool:
        return bool(self.max_residual < tol)


def _scaled(lhs, rhs):
    """Residual divided by (1 + magnitude of the larger side)."""
    lhs = np.asarray(lhs, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    return np.abs(lhs - rhs) / (1.0 + np.maximum(np.abs(lhs), np.abs(rhs)))


def _report(name, res) -> ResidualReport:
    res = np.atleast_1d(np.asarray(res, dtype=float))
    mx = float(np.max(res)) if res.size else 0.0
    return ResidualReport(name, int(res.size), mx, res)


def _points_or_default(params, points, seed=0, n=1000) -> Point:
    if points is None:
        return sample_annulus_points(params, n, seed)
    points.check(params)
    return points


def _normalised(p: Point, params: GrushinParams, normalise: bool = True):
    """Dilate each point onto the unit gauge sphere.

    Finite differences are taken at the normalised point ``z' = delta_(1/lam) z``
    on ``u o delta_lam`` (``lam = rho(z)``), so a fixed step resolves the
    anisotropic scales ``|x| ~ rho`` and ``|y| ~ rho^(1+gamma)`` equally well.
    The frame is homogeneous, so ``X(u o delta_lam) = lam (X u) o delta_lam``.
    With ``normalise=False`` the differences are taken at ``z`` itself, which
    suits functions varying on a fixed scale (Gaussian atoms).
    """
    g = params.gamma
    if normalise:
        lam = gauge(p, params)
        if np.any(lam == 0.0):
            raise ValueError("finite-difference checks are undefined at the origin")
    else:
        lam = np.ones(p.x.shape[:-1])
    ly = lam ** (1.0 + g)
    zn = Point(p.x / lam[..., None], p.y / ly[..., None]).z

    def lift(u):
        def un(z):
            q = Point.from_z(z, params)
            return u(q.x * lam[..., None], q.y * ly[..., None])

        return un

    rn = np.linalg.norm(zn[..., : params.m], axis=-1)
    return zn, lam, rn, lift


def fd_frame_gradient(
    u: Callable, p: Point, params: GrushinParams, richardson: bool = True, normalise: bool = True
) -> np.ndarray:
    """``(X_1 u, ..., X_m u, Y_1 u, ..., Y_k u)`` of ``u(x, y)`` by central differences."""
    zn, lam, rn, lift = _normalised(p, params, normalise)
    d = fd.gradient(lift(u), zn, fd.ETA_FIRST, richardson)
    d[..., params.m :] *= (rn**params.gamma)[..., None]
    return d / lam[..., None]


def fd_gauge_gradient(p: Point, params: GrushinParams, richardson: bool = True) -> np.ndarray:
    """Sub-elliptic gradient of rho by central differences."""
    return fd_frame_gradient(lambda x, y: gauge(Point(x, y), params), p, params, richardson)


def fd_grushin_laplacian(
    value: Callable, p: Point, params: GrushinParams, richardson: bool = True, normalise: bool = True
):
    """Delta_x u + |x|^(2 gamma) Delta_y u for ``value(x, y)`` by second differences."""
    zn, lam, rn, lift = _normalised(p, params, normalise)
    lx, ly = fd.block_laplacians(lift(value), zn, params.m, fd.ETA_SECOND, richardson)
    return (lx + rn ** (2.0 * params.gamma) * ly) / lam**2


def fd_frame_divergence(V: Callable, p: Point, params: GrushinParams, richardson: bool = True):
    """``sum_j X_j V_j + sum_j Y_j V_(m+j)`` for ``V(x, y) -> (..., m+k)``."""
    zn, lam, rn, lift = _normalised(p, params)
    m = params.m
    total = 0.0
    for j in range(params.n):
        comp = lift(lambda x, y, j=j: V(x, y)[..., j])
        d = fd.partial(comp, zn, j, fd.ETA_FIRST, richardson)
        total = total + (d if j < m else rn**params.gamma * d)
    return total / lam


def verify_gauge_gradient(params, points: Optional[Point] = None, richardson=True):
    """Closed-form nabla_gamma rho and |nabla_gamma rho| against finite differences.

    Returns the componentwise report (error relative to the gradient norm) and
    the norm report.
    """
    p = _points_or_default(params, points)
    closed = gauge_gradient(p, params)
    approx = fd_gauge_gradient(p, params, richardson)
    nrm = gauge_gradient_norm(p, params)
    comp = np.linalg.norm(closed - approx, axis=-1) / nrm
    norm_err = np.abs(np.linalg.norm(approx, axis=-1) - nrm) / nrm
    return _report("gauge_gradient", comp), _report("gauge_gradient_norm", norm_err)


def verify_radial_laplacian(
    params, f: RadialProfile, points: Optional[Point] = None, richardson=True
) -> ResidualReport:
    """The one-dimensional reduction of Delta_gamma f(rho) versus second differences."""
    p = _points_or_default(params, points)

    def value(x, y):
        return f.f(gauge(Point(x, y), params))

    lhs = radial_laplacian(f, p, params)
    rhs = fd_grushin_laplacian(value, p, params, richardson)
    return _report("radial_laplacian", _scaled(lhs, rhs))


def verify_rellich_identity(
    params, alpha: float, points: Optional[Point] = None, method: str = "closed"
) -> ResidualReport:
    """Delta_gamma rho^(alpha-2) = (Q+alpha-4)(alpha-2) rho^(alpha-4) |nabla_gamma rho|^2.

    ``method="closed"`` evaluates the left side by the Cartesian chain rule on
    the gauge (independent of the radial reduction); ``method="fd"`` uses
    second differences of rho^(alpha-2).
    """
    p = _points_or_default(params, points)
    f = power_profile(alpha - 2.0)
    if method == "closed":
        lhs = grushin_laplacian(compose_radial(f, params), p, params)
    elif method == "fd":
        lhs = fd_grushin_laplacian(lambda x, y: f.f(gauge(Point(x, y), params)), p, params)
    else:
        raise ValueError(f"unknown method {method!r}")
    rho = gauge(p, params)
    w = gauge_gradient_norm(p, params) ** 2
    Q = params.Q
    rhs = (Q + alpha - 4.0) * (alpha - 2.0) * rho ** (alpha - 4.0) * w
    return _report("rellich_identity", _scaled(lhs, rhs))


verify_identity_eq42 = verify_rellich_identity


def verify_orthogonality(params, points: Optional[Point] = None, richardson=True) -> ResidualReport:
    """nabla_gamma(|nabla_gamma rho|) . nabla_gamma rho = 0, by finite differences."""
    p = _points_or_default(params, points)
    r, _ = block_norms(p)
    if np.any(r < TINY):
        raise ValueError("orthogonality check needs points with x != 0")

    a = fd_frame_gradient(lambda x, y: gauge_gradient_norm(Point(x, y), params), p, params, richardson)
    b = gauge_gradient(p, params)
    dot = np.abs(np.sum(a * b, axis=-1))
    scale = 1.0 + np.linalg.norm(a, axis=-1) * np.linalg.norm(b, axis=-1)
    return _report("orthogonality", dot / scale)


def verify_divergence_identity(
    params, a: float, t: float, points: Optional[Point] = None, richardson=True
) -> ResidualReport:
    """div_gamma(rho^a |nabla rho|^t nabla rho) = (Q+a-1) rho^(a-1) |nabla rho|^(t+2)."""
    lim = params.m / params.gamma
    if not -lim < t < lim:
        raise ValueError(f"t must lie in (-m/gamma, m/gamma) = ({-lim}, {lim})")
    p = _points_or_default(params, points)
    r, _ = block_norms(p)
    if np.any(r < TINY):
        raise ValueError("divergence check needs points with x != 0")

    def V(x, y):
        q = Point(x, y)
        scale = gauge(q, params) ** a * gauge_gradient_norm(q, params) ** t
        return scale[..., None] * gauge_gradient(q, params)

    lhs = fd_frame_divergence(V, p, params, richardson)
    rho = gauge(p, params)
    nrm = gauge_gradient_norm(p, params)
    rhs = (params.Q + a - 1.0) * rho ** (a - 1.0) * nrm ** (t + 2.0)
    return _report("divergence", _scaled(lhs, rhs))
