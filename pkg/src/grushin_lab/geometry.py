"""Ambient structure of the Baouendi-Grushin setting.

Points are ``z = (x, y)`` with ``x`` in R^m and ``y`` in R^k.  Every function
here is vectorised over leading batch dimensions: ``x`` has shape ``(..., m)``
and ``y`` has shape ``(..., k)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# |x| below this is treated as exactly zero (keeps |x|**gamma finite for large gamma)
TINY = 1e-300


@dataclass(frozen=True)
class GrushinParams:
    m: int
    k: int
    gamma: float

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 1:
            raise ValueError(f"m must be a positive integer, got {self.m!r}")
        if int(self.k) != self.k or self.k < 1:
            raise ValueError(f"k must be a positive integer, got {self.k!r}")
        if not np.isfinite(self.gamma) or self.gamma <= 0:
            raise ValueError(f"gamma must be positive, got {self.gamma!r}")
        object.__setattr__(self, "m", int(self.m))
        object.__setattr__(self, "k", int(self.k))
        object.__setattr__(self, "gamma", float(self.gamma))

    @property
    def Q(self) -> float:
        return self.m + (1.0 + self.gamma) * self.k

    @property
    def n(self) -> int:
        return self.m + self.k

    @property
    def gamma_is_even_integer(self) -> bool:
        g = self.gamma
        return g == round(g) and int(round(g)) % 2 == 0


@dataclass(frozen=True)
class Point:
    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.atleast_1d(np.asarray(self.x, dtype=float))
        y = np.atleast_1d(np.asarray(self.y, dtype=float))
        if x.shape[:-1] != y.shape[:-1]:
            raise ValueError("x and y batch shapes differ")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @classmethod
    def from_z(cls, z, params: GrushinParams) -> "Point":
        z = np.asarray(z, dtype=float)
        if z.shape[-1] != params.n:
            raise ValueError(f"expected last axis of length {params.n}")
        return cls(z[..., : params.m], z[..., params.m :])

    @property
    def z(self) -> np.ndarray:
        return np.concatenate([self.x, self.y], axis=-1)

    def check(self, params: GrushinParams) -> None:
        if self.x.shape[-1] != params.m or self.y.shape[-1] != params.k:
            raise ValueError(
                f"point dimensions ({self.x.shape[-1]}, {self.y.shape[-1]}) do not "
                f"match (m, k) = ({params.m}, {params.k})"
            )


@dataclass(frozen=True)
class ReducedPoint:
    r: float
    s: float

    def __post_init__(self):
        if self.r < 0 or self.s < 0:
            raise ValueError("reduced coordinates must be nonnegative")


def homogeneous_dimension(params: GrushinParams) -> float:
    return params.Q


def _norm(v: np.ndarray) -> np.ndarray:
    """Euclidean norm along the last axis without underflow of the squares."""
    scale = np.max(np.abs(v), axis=-1)
    safe = np.where(scale > 0, scale, 1.0)
    return scale * np.sqrt(np.sum((v / safe[..., None]) ** 2, axis=-1))


def block_norms(p: Point) -> tuple[np.ndarray, np.ndarray]:
    r = _norm(p.x)
    s = _norm(p.y)
    return np.where(r < TINY, 0.0, r), s


def gauge_rs(r, s, gamma: float):
    """Gauge as a function of r = |x| and s = |y|."""
    r = np.asarray(r, dtype=float)
    s = np.asarray(s, dtype=float)
    e = 2.0 * (1.0 + gamma)
    with np.errstate(under="ignore"):
        rho = (r**e + (1.0 + gamma) ** 2 * s**2) ** (1.0 / e)
    lost = (rho == 0.0) & ((r > 0) | (s > 0))
    if np.any(lost):
        # underflow of r**e or s**2: redo in logarithms
        with np.errstate(divide="ignore"):
            lg = np.logaddexp(e * np.log(r), 2.0 * np.log((1.0 + gamma) * s))
        rho = np.where(lost, np.exp(lg / e), rho)
    return rho


def gradnorm_sq_rs(r, s, gamma: float):
    """|grad_gamma rho|^2 = (r / rho)^(2 gamma); undefined at the origin."""
    rho = gauge_rs(r, s, gamma)
    with np.errstate(invalid="ignore", divide="ignore"):
        return (np.asarray(r, dtype=float) / rho) ** (2.0 * gamma)


def gauge(p: Point, params: GrushinParams):
    p.check(params)
    r, s = block_norms(p)
    return gauge_rs(r, s, params.gamma)


def _require_off_origin(rho) -> None:
    if np.any(np.asarray(rho) == 0.0):
        raise ValueError("the gauge vanishes at the origin; quantity undefined there")


def gauge_gradient_norm(p: Point, params: GrushinParams):
    p.check(params)
    r, s = block_norms(p)
    rho = gauge_rs(r, s, params.gamma)
    _require_off_origin(rho)
    return (r / rho) ** params.gamma


def gauge_gradient(p: Point, params: GrushinParams) -> np.ndarray:
    """Components (X_1 rho, ..., X_m rho, Y_1 rho, ..., Y_k rho)."""
    p.check(params)
    g = params.gamma
    r, s = block_norms(p)
    rho = gauge_rs(r, s, g)
    _require_off_origin(rho)
    P = rho ** (-1.0 - 2.0 * g)
    r2g = r ** (2.0 * g)
    gx = (P * r2g)[..., None] * p.x
    gy = ((1.0 + g) * P * r**g)[..., None] * p.y
    return np.concatenate([gx, gy], axis=-1)


def dilate(p: Point, lam: float, params: GrushinParams) -> Point:
    if not lam > 0:
        raise ValueError(f"dilation factor must be positive, got {lam!r}")
    p.check(params)
    return Point(lam * p.x, lam ** (1.0 + params.gamma) * p.y)


def in_rho_ball(p: Point, R: float, params: GrushinParams):
    if not R > 0:
        raise ValueError("ball radius must be positive")
    return gauge(p, params) < R


def point_from_polar(rho, u, params: GrushinParams, dir_x, dir_y) -> Point:
    """Point with gauge ``rho`` and ``|x| = u * rho`` along unit directions."""
    g = params.gamma
    rho = np.asarray(rho, dtype=float)
    u = np.asarray(u, dtype=float)
    r = rho * u
    s = rho ** (1.0 + g) * np.sqrt(np.clip(1.0 - u ** (2.0 + 2.0 * g), 0.0, None)) / (1.0 + g)
    return Point(r[..., None] * dir_x, s[..., None] * dir_y)


def _unit_vectors(rng: np.random.Generator, n: int, d: int) -> np.ndarray:
    v = rng.standard_normal((n, d))
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def sample_annulus_points(
    params: GrushinParams,
    n: int,
    seed: int = 0,
    rho_range: tuple[float, float] = (0.1, 10.0),
    min_x_fraction: float = 0.05,
) -> Point:
    """Random points with rho in ``rho_range`` and ``|x| >= min_x_fraction * rho``.

    rho is log-uniform and ``|x|/rho`` is uniform, so both the degenerate
    neighbourhood and the y = 0 plane get sampled.
    """
    rng = np.random.default_rng(seed)
    lo, hi = rho_range
    rho = np.exp(rng.uniform(np.log(lo), np.log(hi), n))
    u = rng.uniform(min_x_fraction, 1.0, n)
    return point_from_polar(
        rho, u, params, _unit_vectors(rng, n, params.m), _unit_vectors(rng, n, params.k)
    )
