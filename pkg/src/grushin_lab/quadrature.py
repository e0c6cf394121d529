"""Symmetry-reduced quadrature for bi-radial integrands.

Every integrand handled here depends on ``z = (x, y)`` only through
``r = |x|`` and ``s = |y|``.  Two reduced coordinate systems are used:

* the rectangle ``(r, s)`` with measure ``sigma_m sigma_k r^(m-1) s^(k-1) dr ds``;
* gauge-polar coordinates ``(rho, theta)``, ``theta`` in ``[0, pi/2]``, with

      r = rho * sin(theta)^(1/(1+g)),   s = rho^(1+g) cos(theta) / (1+g),

  under which ``dz = c * rho^(Q-1) sin(theta)^((m-1-g)/(1+g)) cos(theta)^(k-1) drho dtheta``
  with ``c = sigma_m sigma_k / (1+g)^k``, and ``|grad_g rho|^2 = sin(theta)^(2g/(1+g))``.

Singular endpoints (``rho = 0``, ``theta = 0``, ``r = 0``, ``s = 0``) are
treated by geometrically graded Gauss-Legendre cells with ratio 1/2; the
omitted innermost cell is estimated from the decay of the per-level
contributions.  Refinement raises the Gauss order, the number of cells per
level and the grading depth together; successive estimates give the error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, NamedTuple, Optional

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import special

from ._parallel import map_ordered
from .geometry import GrushinParams, Point, block_norms, gauge

# (gauss order, cells per level/segment, grading depth)
SCHEDULE = ((6, 1, 20), (8, 2, 28), (10, 4, 36), (12, 8, 44))
DIVERGENCE_WINDOW = 10
GROWTH_FACTOR = 10.0
# per-level decay ratios above this are not extrapolated
MAX_TAIL_RATIO = 0.99


class QuadratureError(RuntimeError):
    """A quadrature did not converge where a finite value was required."""


class ConsistencyError(RuntimeError):
    """Independent estimates of the same quantity disagree."""


def sphere_surface(d: int) -> float:
    """Surface measure of the unit sphere in R^d (sigma_1 = 2)."""
    if int(d) != d or d < 1:
        raise ValueError(f"sphere dimension must be a positive integer, got {d!r}")
    return 2.0 * math.pi ** (d / 2.0) / math.gamma(d / 2.0)


def angular_factor(params: GrushinParams, e: float) -> float:
    """``integral over theta of |grad rho|^(2e)`` in gauge-polar coordinates.

    So ``int_{a<rho<b} g(rho) |grad rho|^(2e) dz = angular_factor(e) * int_a^b g rho^(Q-1) drho``.
    Returns ``inf`` when ``m + 2 gamma e <= 0``.
    """
    m, k, g = params.m, params.k, params.gamma
    a = (m + 2.0 * g * e) / (2.0 * (1.0 + g))
    if a <= 0:
        return math.inf
    c = sphere_surface(m) * sphere_surface(k) / (1.0 + g) ** k
    return c * 0.5 * math.exp(special.betaln(a, k / 2.0))


def ball_volume(params: GrushinParams, R: float) -> float:
    return angular_factor(params, 0.0) * R**params.Q / params.Q


@dataclass(frozen=True)
class Envelope:
    """Majorant ``|F| <= coef * rho^(-rate)`` (power) or ``coef * exp(-rate rho^2)`` (gaussian)."""

    kind: str
    coef: float
    rate: float

    def __post_init__(self):
        if self.kind not in ("power", "gaussian"):
            raise ValueError(f"unknown envelope kind {self.kind!r}")
        if not self.coef >= 0 or not self.rate > 0:
            raise ValueError("envelope needs coef >= 0 and rate > 0")

    def tail_bound(self, params: GrushinParams, R: float) -> float:
        """Bound on ``int_{rho > R} |F| dz``."""
        Q = params.Q
        a0 = angular_factor(params, 0.0)
        if self.kind == "power":
            if self.rate <= Q:
                return math.inf
            return self.coef * a0 * R ** (Q - self.rate) / (self.rate - Q)
        a = self.rate
        return (
            self.coef
            * a0
            * math.gamma(Q / 2.0)
            / (2.0 * a ** (Q / 2.0))
            * special.gammaincc(Q / 2.0, a * R * R)
        )


@dataclass(frozen=True)
class QuadratureDomain:
    kind: str  # "rho_annulus" | "reduced_rectangle" | "whole_space"
    params: GrushinParams
    a: float = 0.0
    b: float = math.inf
    r_range: tuple[float, float] = (0.0, math.inf)
    s_range: tuple[float, float] = (0.0, math.inf)
    envelope: Optional[Envelope] = None

    def __post_init__(self):
        if self.kind == "rho_annulus":
            if not (0.0 <= self.a < self.b < math.inf):
                raise ValueError("annulus needs 0 <= a < b < inf")
        elif self.kind == "reduced_rectangle":
            (r0, r1), (s0, s1) = self.r_range, self.s_range
            if not (0.0 <= r0 < r1 < math.inf and 0.0 <= s0 < s1 < math.inf):
                raise ValueError("rectangle ranges must be finite, nonnegative and nonempty")
        elif self.kind == "whole_space":
            if self.envelope is None:
                raise ValueError("whole-space domains need a decay envelope")
        else:
            raise ValueError(f"unknown domain kind {self.kind!r}")

    @classmethod
    def rho_annulus(cls, params, a, b) -> "QuadratureDomain":
        return cls("rho_annulus", params, float(a), float(b))

    @classmethod
    def rho_ball(cls, params, R) -> "QuadratureDomain":
        return cls("rho_annulus", params, 0.0, float(R))

    @classmethod
    def reduced_rectangle(cls, params, r_range, s_range) -> "QuadratureDomain":
        return cls(
            "reduced_rectangle",
            params,
            r_range=tuple(map(float, r_range)),
            s_range=tuple(map(float, s_range)),
        )

    @classmethod
    def whole_space(cls, params, envelope: Envelope) -> "QuadratureDomain":
        return cls("whole_space", params, envelope=envelope)


@dataclass(frozen=True)
class QuadratureResult:
    value: float
    abs_error: float
    evaluations: int
    converged: bool
    diverged: bool = False
    history: tuple[float, ...] = field(default=(), repr=False)

    def scaled(self, c: float) -> "QuadratureResult":
        if self.diverged:
            return self
        return QuadratureResult(
            c * self.value, abs(c) * self.abs_error, self.evaluations, self.converged,
            False, tuple(c * h for h in self.history),
        )


def _divergent_result(evals, history=()) -> QuadratureResult:
    return QuadratureResult(math.inf, math.inf, evals, False, True, tuple(history))


# ---------------------------------------------------------------------------
# one-dimensional rules


@lru_cache(maxsize=None)
def _gauss(n: int):
    x, w = leggauss(n)
    return x, w


class _Rule(NamedTuple):
    nodes: np.ndarray
    weights: np.ndarray
    level: np.ndarray  # grading level of each node, -1 if not graded
    n_levels: int


def _cells(lo, hi, n):
    x, w = _gauss(n)
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    return (mid[:, None] + half[:, None] * x).ravel(), (half[:, None] * w).ravel()


def _graded_segment(b, n, nsub, L, lo_scale=1.0):
    """Cells [b 2^-(j+1), b 2^-j], j < L; the level-j cell is split in max(1, nsub >> j)."""
    lo, hi, lev = [], [], []
    for j in range(L):
        ca, cb = b * 0.5 ** (j + 1), b * 0.5**j
        parts = max(1, nsub >> j)
        edges = np.linspace(ca, cb, parts + 1)
        lo.extend(edges[:-1])
        hi.extend(edges[1:])
        lev.extend([j] * parts)
    nodes, weights = _cells(lo, hi, n)
    return nodes, weights, np.repeat(np.asarray(lev), n)


def _plain_segment(a, b, n, nsub):
    if b / a > 2.0:
        t0, t1 = math.log(a), math.log(b)
        ncell = max(1, math.ceil(math.log2(b / a))) * nsub
        edges = np.linspace(t0, t1, ncell + 1)
        t, wt = _cells(edges[:-1], edges[1:], n)
        x = np.exp(t)
        return x, wt * x
    edges = np.linspace(a, b, nsub + 1)
    return _cells(edges[:-1], edges[1:], n)


def _rule(a, b, breakpoints, n, nsub, L) -> _Rule:
    pts = sorted({float(p) for p in breakpoints if a < p < b})
    edges = [a, *pts, b]
    nodes, weights, levels = [], [], []
    n_levels = 0
    for lo, hi in zip(edges[:-1], edges[1:]):
        if lo == 0.0:
            x, w, lev = _graded_segment(hi, n, nsub, L)
            n_levels = L
        else:
            x, w = _plain_segment(lo, hi, n, nsub)
            lev = np.full(x.shape, -1)
        nodes.append(x)
        weights.append(w)
        levels.append(lev)
    return _Rule(np.concatenate(nodes), np.concatenate(weights), np.concatenate(levels), n_levels)


def _level_matrix(rule: _Rule) -> np.ndarray:
    M = np.zeros((rule.nodes.size, rule.n_levels))
    idx = np.nonzero(rule.level >= 0)[0]
    M[idx, rule.level[idx]] = 1.0
    return M


def _reduce(vw: np.ndarray, rule: _Rule):
    """Sum the weighted values along the last axis, extrapolating the graded tail.

    Returns (total, level contributions) where contributions has shape (..., L).
    """
    regular = np.sum(np.where(rule.level < 0, vw, 0.0), axis=-1)
    if rule.n_levels == 0:
        return regular, np.zeros(vw.shape[:-1] + (0,))
    c = vw @ _level_matrix(rule)
    total = regular + np.sum(c, axis=-1)
    if rule.n_levels >= 2:
        c1, c0 = c[..., -1], c[..., -2]
        with np.errstate(divide="ignore", invalid="ignore"):
            q = np.where(c0 != 0.0, c1 / c0, 0.0)
        ok = (q > 0.0) & (q < MAX_TAIL_RATIO)
        total = total + np.where(ok, c1 * q / np.where(ok, 1.0 - q, 1.0), 0.0)
    return total, c


def _diverging(c: np.ndarray, total: float) -> bool:
    """Non-decaying level contributions, or a 10-fold growth over the last levels."""
    if c.size < DIVERGENCE_WINDOW + 1:
        return False
    tail = np.abs(c[-DIVERGENCE_WINDOW:])
    if not np.all(np.isfinite(c)):
        return True
    if tail[-1] <= 1e-13 * (abs(total) + 1e-300):
        return False
    if np.all(tail[1:] >= (1.0 - 1e-6) * tail[:-1]):
        return True
    partial = np.cumsum(c)
    before = abs(partial[-DIVERGENCE_WINDOW - 1])
    return bool(before > 0 and abs(partial[-1]) > GROWTH_FACTOR * before)


# ---------------------------------------------------------------------------
# refinement driver


def _judge(history, flags, tol, evals, final: bool) -> Optional[QuadratureResult]:
    if len(flags) >= 2 and flags[-1] and flags[-2]:
        return _divergent_result(evals, history)
    val = history[-1]
    if not np.isfinite(val):
        if len(history) >= 2 and not np.isfinite(history[-2]):
            return _divergent_result(evals, history)
    elif len(history) >= 2 and np.isfinite(history[-2]):
        err = abs(history[-1] - history[-2])
        if err <= tol * (1.0 + abs(val)) and not flags[-1]:
            return QuadratureResult(float(val), float(err), evals, True, False, tuple(history))
    if not final:
        return None
    if len(history) >= 2 and np.isfinite(history[-1]) and np.isfinite(history[-2]):
        err = abs(history[-1] - history[-2])
    else:
        err = math.inf
    return QuadratureResult(float(val), float(err), evals, False, False, tuple(history))


def _refine_multi(step: Callable, tol: float) -> list[QuadratureResult]:
    """Run ``step(n, nsub, L) -> (estimates, evaluations, diverging)`` over the schedule.

    ``estimates`` and ``diverging`` are arrays with one entry per integrand;
    each integrand stops being tracked once it has converged or diverged.
    """
    hist: list[list[float]] = []
    flags: list[list[bool]] = []
    done: dict[int, QuadratureResult] = {}
    evals = 0
    for n, nsub, L in SCHEDULE:
        vals, ne, div = step(n, nsub, L)
        vals, div = np.atleast_1d(vals), np.atleast_1d(div)
        if not hist:
            hist = [[] for _ in range(vals.size)]
            flags = [[] for _ in range(vals.size)]
        evals += ne
        for i in range(vals.size):
            if i in done:
                continue
            hist[i].append(float(vals[i]))
            flags[i].append(bool(div[i]))
            res = _judge(hist[i], flags[i], tol, evals, final=False)
            if res is not None:
                done[i] = res
        if len(done) == len(hist):
            break
    for i in range(len(hist)):
        if i not in done:
            done[i] = _judge(hist[i], flags[i], tol, evals, final=True)
    return [done[i] for i in range(len(hist))]


def _refine(step: Callable, tol: float) -> QuadratureResult:
    return _refine_multi(step, tol)[0]


def integrate_1d(h: Callable, a: float, b: float, tol: float = 1e-10, breakpoints=()) -> QuadratureResult:
    """``int_a^b h(t) dt`` for finite ``a < b``; graded toward 0 when ``a == 0``."""
    if not (0.0 <= a < b < math.inf):
        raise ValueError("integrate_1d needs 0 <= a < b < inf")

    def step(n, nsub, L):
        rule = _rule(a, b, breakpoints, n, nsub, L)
        vw = np.asarray(h(rule.nodes), dtype=float) * rule.weights
        total, c = _reduce(vw, rule)
        return float(total), rule.nodes.size, _diverging(c, float(total))

    return _refine(step, tol)


def integrate_radial(
    g: Callable, params: GrushinParams, a: float, b: float, weight_power: float = 0.0,
    tol: float = 1e-10, breakpoints=(),
) -> QuadratureResult:
    """``int_{a<rho<b} g(rho) |grad rho|^(2 e) dz`` with ``e = weight_power``."""
    Q = params.Q
    res = integrate_1d(lambda t: g(t) * t ** (Q - 1.0), a, b, tol, breakpoints)
    ang = angular_factor(params, weight_power)
    if res.diverged:
        return res
    if not np.isfinite(ang):
        if res.value == 0.0 and res.converged:
            return res
        return _divergent_result(res.evaluations, res.history)
    return res.scaled(ang)


# ---------------------------------------------------------------------------
# two-dimensional integration


def _polar_jacobian_theta(theta, params: GrushinParams):
    m, k, g = params.m, params.k, params.gamma
    c = sphere_surface(m) * sphere_surface(k) / (1.0 + g) ** k
    S, C = np.sin(theta), np.cos(theta)
    return c * S ** ((m - 1.0 - g) / (1.0 + g)) * C ** (k - 1.0)


def polar_to_reduced(rho, theta, gamma: float):
    """(r, s) for gauge-polar coordinates, broadcasting ``rho`` against ``theta``."""
    rho = np.asarray(rho, dtype=float)
    S, C = np.sin(theta), np.cos(theta)
    r = rho * S ** (1.0 / (1.0 + gamma))
    s = rho ** (1.0 + gamma) * C / (1.0 + gamma)
    return r, s


def _tensor_step(F, outer: _Rule, inner: _Rule, grid):
    """Iterated integral: inner axis first (with its own tail extrapolation), then outer.

    ``F`` may return shape ``(No, Ni)`` or ``(C, No, Ni)`` for ``C`` integrands.
    """
    vals, jac = grid(outer.nodes, inner.nodes)
    with np.errstate(invalid="ignore", over="ignore"):
        raw = np.asarray(F(*vals), dtype=float)
        stacked = raw.ndim == 3
        v = (raw if stacked else raw[None]) * jac
    v = np.where(jac == 0.0, 0.0, v)
    inner_total, c_in = _reduce(v * inner.weights, inner)
    total, c_out = _reduce(inner_total * outer.weights, outer)
    div = np.zeros(total.shape, dtype=bool)
    for i in range(total.size):
        agg_in = outer.weights @ c_in[i] if c_in.shape[-1] else c_in[i, 0]
        div[i] = _diverging(c_out[i], float(total[i])) or (
            agg_in.size > 0 and _diverging(agg_in, float(total[i]))
        )
    return total, v[0].size, div


def _polar_annulus(F, params, a, b, tol, breakpoints) -> QuadratureResult:
    g = params.gamma
    Q = params.Q

    def grid(rho, theta):
        r, s = polar_to_reduced(rho[:, None], theta[None, :], g)
        jac = rho[:, None] ** (Q - 1.0) * _polar_jacobian_theta(theta, params)[None, :]
        return (r, s), jac

    def step(n, nsub, L):
        outer = _rule(a, b, breakpoints, n, nsub, L)
        inner = _rule(0.0, 0.5 * math.pi, (0.25 * math.pi,), n, nsub, L)
        return _tensor_step(F, outer, inner, grid)

    return _refine_multi(step, tol)


def _rectangle(F, params, r_range, s_range, tol) -> QuadratureResult:
    m, k = params.m, params.k
    c = sphere_surface(m) * sphere_surface(k)

    def grid(r, s):
        jac = c * r[:, None] ** (m - 1.0) * s[None, :] ** (k - 1.0)
        return (np.broadcast_to(r[:, None], jac.shape), np.broadcast_to(s[None, :], jac.shape)), jac

    def step(n, nsub, L):
        outer = _rule(*r_range, (), n, nsub, L)
        inner = _rule(*s_range, (), n, nsub, L)
        return _tensor_step(F, outer, inner, grid)

    return _refine_multi(step, tol)


def truncation_radius(params: GrushinParams, envelope: Envelope, tol: float, start: float = 1.0):
    R = start
    for _ in range(200):
        bound = envelope.tail_bound(params, R)
        if bound <= tol:
            return R, bound
        R *= 2.0
    raise QuadratureError("envelope tail bound does not fall below the tolerance")


def integrate_reduced(F: Callable, dom: QuadratureDomain, tol: float = 1e-10, breakpoints=()) -> QuadratureResult:
    """``int F(|x|, |y|) dz`` over ``dom``; ``F`` must broadcast over arrays ``(r, s)``.

    ``breakpoints`` are gauge values where ``F`` is not smooth.
    """
    return integrate_reduced_many(F, dom, tol, breakpoints)[0]


def integrate_reduced_many(F: Callable, dom: QuadratureDomain, tol: float = 1e-10, breakpoints=()) -> list[QuadratureResult]:
    """Like ``integrate_reduced`` for ``F`` returning a stack ``(C, ...)`` of integrands.

    All integrands share one evaluation grid per refinement level.
    """
    params = dom.params
    if dom.kind == "rho_annulus":
        return _polar_annulus(F, params, dom.a, dom.b, tol, breakpoints)
    if dom.kind == "reduced_rectangle":
        return _rectangle(F, params, dom.r_range, dom.s_range, tol)
    R, bound = truncation_radius(params, dom.envelope, tol)
    # dyadic shells resolve integrands concentrated well inside the truncation ball
    shells = tuple(R * 0.5 ** np.arange(1, 8))
    out = []
    for res in _polar_annulus(F, params, 0.0, R, tol, tuple(breakpoints) + shells):
        if res.diverged:
            out.append(res)
            continue
        out.append(QuadratureResult(
            res.value, float(res.abs_error + bound), res.evaluations,
            bool(res.converged and bound <= tol), False, res.history,
        ))
    return out


# ---------------------------------------------------------------------------
# Monte Carlo oracle


def _box(dom: QuadratureDomain, tol: float):
    params = dom.params
    g = params.gamma
    if dom.kind == "reduced_rectangle":
        return dom.r_range[1], dom.s_range[1], 0.0
    if dom.kind == "rho_annulus":
        b = dom.b
        return b, b ** (1.0 + g) / (1.0 + g), 0.0
    R, bound = truncation_radius(params, dom.envelope, tol)
    return R, R ** (1.0 + g) / (1.0 + g), bound


def _accept(p: Point, dom: QuadratureDomain, R: float):
    r, s = block_norms(p)
    if dom.kind == "reduced_rectangle":
        (r0, r1), (s0, s1) = dom.r_range, dom.s_range
        return (r >= r0) & (r < r1) & (s >= s0) & (s < s1)
    rho = gauge(p, dom.params)
    if dom.kind == "rho_annulus":
        return (rho >= dom.a) & (rho < dom.b)
    return rho < R


def integrate_mc(
    F: Callable[[Point], np.ndarray], dom: QuadratureDomain, n: int, seed: int = 0,
    chunk_size: int = 1 << 16, tol: float = 1e-10, threads: int | None = None,
) -> QuadratureResult:
    """Box-rejection Monte Carlo estimate with its standard error.

    Chunk ``i`` draws from ``Philox(key=(seed, i))`` so the estimate depends only
    on ``(seed, n, chunk_size)``; chunk sums are combined in index order.
    """
    if n < 1:
        raise ValueError("sample count must be positive")
    params = dom.params
    m, k = params.m, params.k
    X, Y, tail = _box(dom, tol)
    volume = (2.0 * X) ** m * (2.0 * Y) ** k
    n_chunks = -(-n // chunk_size)

    def chunk(i):
        size = min(chunk_size, n - i * chunk_size)
        rng = np.random.Generator(np.random.Philox(key=np.array([seed, i], dtype=np.uint64)))
        x = rng.uniform(-X, X, (size, m))
        y = rng.uniform(-Y, Y, (size, k))
        p = Point(x, y)
        acc = _accept(p, dom, X)
        vals = np.zeros(size)
        if np.any(acc):
            vals[acc] = np.asarray(F(Point(x[acc], y[acc])), dtype=float)
        return float(vals.sum()), float(np.dot(vals, vals)), int(acc.sum())

    parts = map_ordered(chunk, range(n_chunks), threads)
    s1 = s2 = 0.0
    accepted = 0
    for a, b, c in parts:
        s1 += a
        s2 += b
        accepted += c
    if accepted == 0:
        raise ValueError("Monte Carlo sampling accepted no points in the domain")
    mean = s1 / n
    var = max(s2 / n - mean * mean, 0.0)
    value = volume * mean
    se = volume * math.sqrt(var / max(n - 1, 1))
    return QuadratureResult(value, se + tail, n, True, False)


# ---------------------------------------------------------------------------
# polar constant


KAPPA_WINDOWS = ((1.0, 2.0), (2.0, 4.0), (0.5, 1.0))


def kappa_window(params: GrushinParams, a: float, b: float, tol: float = 1e-11) -> float:
    """``int_{a<rho<b} |grad rho|^2 dz / int_a^b rho^(Q-1) drho`` by 2D quadrature."""
    g = params.gamma
    Q = params.Q
    res = integrate_reduced(
        lambda r, s: (r ** (2.0 * g + 2.0) / (r ** (2.0 * g + 2.0) + (1.0 + g) ** 2 * s**2)) ** (g / (1.0 + g)),
        QuadratureDomain.rho_annulus(params, a, b),
        tol,
    )
    if not res.converged:
        raise QuadratureError(f"kappa window ({a}, {b}) did not converge")
    return res.value / ((b**Q - a**Q) / Q)


@lru_cache(maxsize=256)
def _kappa_cached(params: GrushinParams, tol: float) -> float:
    vals = [kappa_window(params, a, b, min(tol, 1e-11)) for a, b in KAPPA_WINDOWS]
    ref = vals[0]
    spread = max(abs(v - ref) for v in vals) / ref
    if spread > tol:
        raise ConsistencyError(f"kappa depends on the window (relative spread {spread:.3e})")
    return ref


def kappa(params: GrushinParams, tol: float = 1e-4) -> float:
    """Polar constant: ``int_{a<rho<b} g(rho)|grad rho|^2 dz = kappa int_a^b g rho^(Q-1) drho``.

    Estimated on the window (1, 2) and checked against (2, 4) and (0.5, 1);
    a relative spread above ``tol`` raises ``ConsistencyError``.
    """
    return _kappa_cached(params, float(tol))


def tail_integral(params: GrushinParams, eps: float, start: float = 1.0, gradient_weight: bool = True) -> float:
    """``int_{rho > start} rho^(-Q-2 eps) |grad rho|^2 dz``.

    With ``gradient_weight=False`` the ``|grad rho|^2`` factor is dropped.
    """
    if not eps > 0:
        raise ValueError("the tail integral diverges unless eps > 0")
    const = kappa(params) if gradient_weight else angular_factor(params, 0.0)
    return const * start ** (-2.0 * eps) / (2.0 * eps)
