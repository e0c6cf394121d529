"""Hardy and Rellich inequalities as evaluatable cases.

Each case has one left-hand term and a list of right-hand terms.  A term is

    ( int  rho^a |grad rho|^b  |D phi|^p  [ln(r/rho)^-2]  dz )^outer

where ``D phi`` is ``phi``, ``grad_gamma phi`` or ``Delta_gamma phi``.  Terms whose
constant is known carry it in ``coefficient``; the others carry
``coefficient=None`` and an explicit ``prefactor`` multiplying the unknown
constant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Union

import numpy as np
from scipy.optimize import brentq

from .geometry import GrushinParams, Point, block_norms, gauge_rs
from .operators import RadialProfile, ScalarField
from .quadrature import (
    QuadratureDomain,
    QuadratureError,
    QuadratureResult,
    angular_factor,
    integrate_radial,
    integrate_reduced_many,
)

DEFAULT_TOL = 1e-9
BALL_MARGIN = 0.95

CASE_IDS = (
    "H_BASE",
    "H_IMPROVED_31",
    "H_LOG_32",
    "H_LP_33",
    "H_CKN_34",
    "R1_41",
    "R1_BALL_42",
    "R1_LOG_43",
    "R1_CKN_44",
    "R2_45",
    "R2_BALL_46",
    "R2_LOG_47",
    "R2_CKN",
)

ALIASES = {
    "H": "H_BASE",
    "H-BASE": "H_BASE",
    "H-IMPROVED": "H_IMPROVED_31",
    "H-LOG": "H_LOG_32",
    "H-LP": "H_LP_33",
    "H-CKN": "H_CKN_34",
    "R1": "R1_41",
    "R1-BALL": "R1_BALL_42",
    "R1-LOG": "R1_LOG_43",
    "R1-CKN": "R1_CKN_44",
    "R2": "R2_45",
    "R2-BALL": "R2_BALL_46",
    "R2-LOG": "R2_LOG_47",
    "R2-CKN": "R2_CKN",
}

BALL_CASES = frozenset(
    {"H_IMPROVED_31", "H_LOG_32", "H_CKN_34", "R1_BALL_42", "R1_LOG_43",
     "R1_CKN_44", "R2_BALL_46", "R2_LOG_47", "R2_CKN"}
)
CKN_CASES = frozenset({"H_CKN_34", "R1_CKN_44", "R2_CKN"})
SHARP_CASES = frozenset({"H_BASE", "H_LP_33", "R1_41", "R2_45"})


class HypothesisError(ValueError):
    """A case parameter lies outside the range where the inequality is asserted."""

    def __init__(self, case_id: str, hypothesis: str, detail: str = ""):
        self.case_id = case_id
        self.hypothesis = hypothesis
        msg = f"{case_id}: hypothesis violated: {hypothesis}"
        super().__init__(msg + (f" ({detail})" if detail else ""))


class EstimateRequired(LookupError):
    """The term's constant is only known to exist; it must be estimated."""


def resolve_case_id(name: str) -> str:
    key = name.strip().upper().replace("_", "-")
    if key in ALIASES:
        return ALIASES[key]
    canon = name.strip().upper()
    if canon in CASE_IDS:
        return canon
    raise HypothesisError(str(name), "known case identifier", f"choose one of {', '.join(CASE_IDS)}")


@dataclass(frozen=True)
class Term:
    label: str
    operand: str  # "value" | "grad" | "lap"
    power: float = 2.0
    rho_power: float = 0.0
    grad_power: float = 0.0
    log_weight: bool = False
    outer_power: float = 1.0
    coefficient: Optional[float] = None
    prefactor: float = 1.0

    @property
    def weight_exponent(self) -> float:
        """Total power of |grad rho|^2 carried by the term for a radial function."""
        e = 0.5 * self.grad_power
        if self.operand == "grad":
            e += 0.5 * self.power
        elif self.operand == "lap":
            e += self.power
        return e


@dataclass(frozen=True)
class InequalityCase:
    id: str
    params: GrushinParams
    alpha: float = 0.0
    t: float = 0.0
    p: float = 2.0
    q: Optional[float] = None
    radius: Optional[float] = None
    notes: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self):
        cid = resolve_case_id(self.id)
        object.__setattr__(self, "id", cid)
        if cid in BALL_CASES and self.radius is None:
            object.__setattr__(self, "radius", 1.0)
        if cid in CKN_CASES and self.q is None:
            object.__setattr__(self, "q", 1.5)
        if self.radius is not None and not self.radius > 0:
            raise HypothesisError(cid, "ball radius r > 0")
        object.__setattr__(self, "notes", tuple(self.notes) + _validate(self))

    @property
    def Q(self) -> float:
        return self.params.Q

    @property
    def on_ball(self) -> bool:
        return self.radius is not None

    @property
    def lhs(self) -> Term:
        return _terms(self)[0]

    @property
    def rhs(self) -> tuple[Term, ...]:
        return _terms(self)[1:]

    @property
    def principal(self) -> Term:
        return self.rhs[0]

    def term(self, label: str) -> Term:
        for tm in _terms(self):
            if tm.label == label:
                return tm
        raise KeyError(f"{self.id} has no term {label!r}")

    @property
    def beyond_hypotheses(self) -> bool:
        return any(n.startswith("beyond stated hypotheses") for n in self.notes)


def _validate(c: InequalityCase) -> tuple[str, ...]:
    P = c.params
    Q, a, t = P.Q, c.alpha, c.t
    notes: list[str] = []
    cid = c.id
    if cid == "H_BASE":
        if a != 0 or t != 0 or c.p != 2:
            raise HypothesisError(cid, "alpha = t = 0 and p = 2")
        if not Q > 2:
            raise HypothesisError(cid, "Q > 2")
    elif cid == "H_IMPROVED_31":
        if not Q + a - 2 > 0:
            raise HypothesisError(cid, "Q + alpha - 2 > 0")
        lim = P.m / P.gamma
        if not -lim < t < lim:
            raise HypothesisError(cid, "-m/gamma < t < m/gamma")
        if not P.gamma_is_even_integer:
            notes.append("beyond stated hypotheses: gamma is not an even positive integer")
    elif cid in ("H_LOG_32",):
        if not Q + a - 2 > 0:
            raise HypothesisError(cid, "Q + alpha - 2 > 0")
    elif cid == "H_LP_33":
        if not c.p >= 1:
            raise HypothesisError(cid, "p >= 1")
        if not Q + a - c.p > 0:
            raise HypothesisError(cid, "Q + alpha - p > 0")
    elif cid == "H_CKN_34":
        if not 1 < c.q < 2:
            raise HypothesisError(cid, "1 < q < 2")
        if not Q + a - 2 > 0:
            raise HypothesisError(cid, "Q + alpha - 2 > 0")
    elif cid == "R1_41":
        if not a > 2:
            raise HypothesisError(cid, "alpha > 2")
        if a >= Q:
            notes.append("beyond proof: alpha >= Q (the Hardy step needs Q - alpha > 0)")
    elif cid in ("R1_BALL_42", "R1_LOG_43", "R1_CKN_44"):
        if not 4 - Q < a < Q:
            raise HypothesisError(cid, "4 - Q < alpha < Q")
        if cid == "R1_CKN_44" and not 1 < c.q < 2:
            raise HypothesisError(cid, "1 < q < 2")
    else:  # R2 family
        if not 2 < a < Q:
            raise HypothesisError(cid, "2 < alpha < Q")
        if cid == "R2_CKN" and not 1 < c.q < 2:
            raise HypothesisError(cid, "1 < q < 2")
    if cid in ("R1_41", "R2_45", "H_BASE") and c.radius is not None:
        raise HypothesisError(cid, "whole-space case (no ball radius)")
    if cid not in ("H_IMPROVED_31", "H_LOG_32", "H_CKN_34", "H_LP_33", "H_BASE") and t != 0:
        raise HypothesisError(cid, "t = 0 for second-order cases")
    return tuple(notes)


def hardy_constant(Q: float, alpha: float) -> float:
    return ((Q + alpha - 2.0) / 2.0) ** 2


def _terms(c: InequalityCase) -> tuple[Term, ...]:
    Q, a, t, p, q = c.Q, c.alpha, c.t, c.p, c.q
    cid = c.id
    if cid == "H_BASE":
        return (
            Term("lhs", "grad"),
            Term("hardy", "value", 2.0, -2.0, 2.0, coefficient=((Q - 2.0) / 2.0) ** 2),
        )
    if cid == "H_LP_33":
        return (
            Term("lhs", "grad", p, a, t),
            Term("hardy", "value", p, a - p, t + p, coefficient=((Q + a - p) / p) ** p),
        )
    if cid.startswith("H_"):
        lhs = Term("lhs", "grad", 2.0, a, t)
        hardy = Term("hardy", "value", 2.0, a - 2.0, t + 2.0, coefficient=hardy_constant(Q, a))
        if cid == "H_IMPROVED_31":
            extra = Term("poincare", "value", 2.0, a, t)
        elif cid == "H_LOG_32":
            extra = Term("log", "value", 2.0, a - 2.0, t + 2.0, log_weight=True, coefficient=0.25)
        else:
            extra = Term("ckn", "grad", q, q * a / 2.0, q * t / 2.0, outer_power=2.0 / q)
        return lhs, hardy, extra
    lhs = Term("lhs", "lap", 2.0, a, -2.0)
    c_r2 = (Q - a) * (Q + 3.0 * a - 8.0) / 4.0
    if cid.startswith("R1"):
        main = Term(
            "rellich", "value", 2.0, a - 4.0, 2.0,
            coefficient=(Q + a - 4.0) ** 2 * (Q - a) ** 2 / 16.0,
        )
        if cid == "R1_41":
            return lhs, main
        if cid == "R1_BALL_42":
            extra = Term("poincare", "value", 2.0, a - 2.0, prefactor=(Q + a - 4.0) * (Q - a) / 2.0)
        elif cid == "R1_LOG_43":
            extra = Term("log", "value", 2.0, a - 4.0, 2.0, log_weight=True,
                         coefficient=(Q + a - 4.0) * (Q - a) / 8.0)
        else:
            extra = Term("ckn", "grad", q, q * a / 2.0, outer_power=2.0 / q, prefactor=c_r2)
        return lhs, main, extra
    main = Term("rellich2", "grad", 2.0, a - 2.0, coefficient=(Q - a) ** 2 / 4.0)
    if cid == "R2_45":
        return lhs, main
    if cid == "R2_BALL_46":
        extra = Term("poincare", "value", 2.0, a - 2.0, prefactor=c_r2)
    elif cid == "R2_LOG_47":
        extra = Term("log", "value", 2.0, a - 4.0, 2.0, log_weight=True, coefficient=c_r2 / 4.0)
    else:
        extra = Term("ckn", "grad", q, q * (a - 2.0) / 2.0, outer_power=2.0 / q, prefactor=c_r2)
    return lhs, main, extra


def term_constant(case: InequalityCase, label: str) -> float:
    tm = case.term(label)
    if tm.coefficient is None:
        raise EstimateRequired(f"{case.id}: the constant of term {label!r} must be estimated")
    return tm.coefficient


def sharp_constant(case: InequalityCase) -> float:
    """Explicit constant of the principal right-hand term."""
    return term_constant(case, case.principal.label)


# ---------------------------------------------------------------------------
# evaluation

TestFunction = Union[ScalarField, RadialProfile]


@dataclass(frozen=True)
class FunctionalValue:
    name: str
    value: float
    quadrature: QuadratureResult
    infinite: bool = False


def _check_support(case: InequalityCase, phi: TestFunction) -> None:
    if not case.on_ball:
        return
    if isinstance(phi, RadialProfile):
        outer = phi.outer
    else:
        outer = phi.support.radius if phi.support.kind == "ball" else math.inf
    limit = BALL_MARGIN * case.radius
    if not outer <= limit * (1.0 + 1e-12):
        raise ValueError(
            f"{case.id}: test function must vanish for rho >= {limit:g} "
            f"({BALL_MARGIN:g} of the ball radius); support reaches {outer:g}"
        )


def _radial_operand(term: Term, f: RadialProfile, Q: float):
    """Signed D phi of a radial profile as a function of rho."""
    if term.operand == "value":
        return f.f
    if term.operand == "grad":
        return f.df
    return lambda t: f.d2f(t) + (Q - 1.0) * f.df(t) / t


ROOT_SCAN = 64
KINK_LEVELS = 24


def _sign_changes(h, a: float, b: float, breakpoints) -> tuple[float, ...]:
    """Roots of ``h`` on ``(a, b)`` bracketed by a log-spaced scan of every segment.

    ``|h|^p`` with ``p`` not an even integer has a kink at each root, which
    would otherwise stall the Gauss rules.
    """
    edges = sorted({a, b, *(x for x in breakpoints if a < x < b)})
    roots = []
    for lo, hi in zip(edges, edges[1:]):
        if lo > 0 and hi / lo > 2.0:
            t = np.geomspace(lo, hi, ROOT_SCAN + 1)
        else:
            t = np.linspace(lo, hi, ROOT_SCAN + 1)
        t[0], t[-1] = lo + 1e-9 * (hi - lo), hi - 1e-9 * (hi - lo)
        v = np.asarray(h(t), dtype=float)
        for i in np.nonzero(np.sign(v[:-1]) * np.sign(v[1:]) < 0)[0]:
            roots.append(brentq(h, t[i], t[i + 1], xtol=1e-14, rtol=1e-14))
    return tuple(roots)


def _kink_grading(kinks, edges) -> tuple[float, ...]:
    """Breakpoints ``c +- d 2^-j`` clustering geometrically at every kink ``c``."""
    edges = sorted(set(edges) | set(kinks))
    out = []
    for c in kinks:
        i = edges.index(c)
        for side, nb in ((-1.0, edges[i - 1] if i > 0 else None), (1.0, edges[i + 1] if i + 1 < len(edges) else None)):
            if nb is None:
                continue
            d = 0.5 * abs(nb - c)
            out.extend(c + side * d * 0.5 ** np.arange(KINK_LEVELS))
    return tuple(out)


def _tail_amplitude(term: Term, coef: float, b: float, Q: float):
    if term.operand == "value":
        return abs(coef), -b
    if term.operand == "grad":
        return abs(coef * b), -b - 1.0
    return abs(coef * b * (b + 2.0 - Q)), -b - 2.0


def _radial_term(case: InequalityCase, term: Term, f: RadialProfile, tol: float) -> QuadratureResult:
    P = case.params
    Q = P.Q
    signed = _radial_operand(term, f, Q)
    op = lambda t: np.abs(signed(t))
    R = case.radius

    def g(t):
        t = np.asarray(t, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            v = t**term.rho_power * op(t) ** term.power
            if term.log_weight:
                v = v / np.log(R / t) ** 2
        return np.where(op(t) == 0.0, 0.0, v)

    a, b = f.support
    tail = None
    if not math.isfinite(b):
        if f.tail is None:
            raise ValueError("profiles with unbounded support need an analytic power tail")
        tail = f.tail
        b = tail.start
    breaks = tuple(f.breakpoints)
    if term.power % 2.0 != 0.0:
        roots = _sign_changes(lambda t: float(signed(t)) if np.ndim(t) == 0 else signed(t), a, b, breaks)
        kinks = (*roots, b) if a == 0.0 else (a, *roots, b)
        breaks += _kink_grading(kinks, (a, b, *breaks))
    res = integrate_radial(g, P, a, b, term.weight_exponent, tol, breaks)
    if res.diverged or tail is None:
        return res
    K, expo = _tail_amplitude(term, tail.coef, tail.exponent, Q)
    K = K**term.power
    E = term.rho_power + term.power * expo + Q
    if K == 0.0:
        return res
    if E >= 0 or term.log_weight:
        return QuadratureResult(math.inf, math.inf, res.evaluations, False, True)
    tail_val = angular_factor(P, term.weight_exponent) * K * tail.start**E / (-E)
    return QuadratureResult(res.value + tail_val, res.abs_error, res.evaluations, res.converged)


def _field_terms(case: InequalityCase, terms, phi: ScalarField, tol: float) -> list[QuadratureResult]:
    """All ``terms`` for a bi-radial field on one shared quadrature grid."""
    if not phi.biradial:
        raise ValueError("only bi-radial fields can be integrated by symmetry reduction")
    if phi.support.kind != "ball":
        raise ValueError("fields must have bounded gauge-ball support to be integrated")
    if phi.params != case.params:
        raise ValueError("field and case use different (m, k, gamma)")
    P = phi.params
    g_ = P.gamma
    R = case.radius

    def F(r, s):
        j = phi.jet(r, s)
        rho = gauge_rs(r, s, g_)
        ops = {}
        out = []
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            for tm in terms:
                if tm.operand not in ops:
                    if tm.operand == "value":
                        ops["value"] = np.abs(j.v)
                    elif tm.operand == "grad":
                        ops["grad"] = np.sqrt(j.grushin_grad_sq(r, g_))
                    else:
                        ops["lap"] = np.abs(j.grushin_lap(r, P))
                op = ops[tm.operand]
                v = rho**tm.rho_power * op**tm.power
                if tm.grad_power != 0.0:
                    v = v * (r / rho) ** (g_ * tm.grad_power)
                if tm.log_weight:
                    v = v / np.log(R / rho) ** 2
                out.append(np.where(op == 0.0, 0.0, v))
        return np.stack(out)

    dom = QuadratureDomain.rho_ball(P, phi.support.radius)
    return integrate_reduced_many(F, dom, tol, phi.breakpoints)


def _finish(case: InequalityCase, tm: Term, res: QuadratureResult) -> FunctionalValue:
    if res.diverged:
        return FunctionalValue(tm.label, math.inf, res, True)
    if not res.converged:
        raise QuadratureError(
            f"{case.id}/{tm.label}: quadrature did not converge "
            f"(estimate {res.value:.6g}, error {res.abs_error:.2e})"
        )
    val = max(res.value, 0.0)
    if tm.outer_power != 1.0:
        val = val**tm.outer_power
    return FunctionalValue(tm.label, float(val), res, False)


def evaluate_terms(case: InequalityCase, terms, phi: TestFunction, tol: float = DEFAULT_TOL) -> list[FunctionalValue]:
    terms = [case.term(t) if isinstance(t, str) else t for t in terms]
    _check_support(case, phi)
    if isinstance(phi, RadialProfile):
        results = [_radial_term(case, tm, phi, tol) for tm in terms]
    else:
        results = _field_terms(case, terms, phi, tol)
    return [_finish(case, tm, res) for tm, res in zip(terms, results)]


def evaluate_term(case: InequalityCase, term: Union[str, Term], phi: TestFunction, tol: float = DEFAULT_TOL) -> FunctionalValue:
    """Integral of one term of ``case`` for the test function ``phi``."""
    return evaluate_terms(case, [term], phi, tol)[0]


@dataclass(frozen=True)
class CaseEvaluation:
    case: InequalityCase
    terms: dict
    lhs: float
    gap: float
    lhs_infinite: bool
    violation_candidate: bool


def evaluate_case(case: InequalityCase, phi: TestFunction, tol: float = DEFAULT_TOL) -> CaseEvaluation:
    """All terms, and the gap ``LHS - sum(explicit constant * term)``."""
    terms = (case.lhs, *case.rhs)
    vals = {tm.label: v for tm, v in zip(terms, evaluate_terms(case, terms, phi, tol))}
    lhs = vals["lhs"]
    explicit = [(tm.coefficient, vals[tm.label]) for tm in case.rhs if tm.coefficient is not None]
    rhs_inf = any(v.infinite for _, v in explicit)
    if lhs.infinite:
        gap = math.inf if not rhs_inf else math.nan
        cand = False
    elif rhs_inf:
        gap = -math.inf
        cand = True
    else:
        gap = lhs.value - sum(c * v.value for c, v in explicit)
        cand = False
    return CaseEvaluation(case, vals, lhs.value, gap, lhs.infinite, cand)


def gap(case: InequalityCase, phi: TestFunction, tol: float = DEFAULT_TOL) -> float:
    """``LHS - sum(explicit constant * term)``; ``+inf`` for a divergent left side.

    ``-inf`` marks a divergent right-hand term with a finite left side, which
    would contradict the inequality and needs review.
    """
    return evaluate_case(case, phi, tol).gap


def rayleigh_quotient(case: InequalityCase, phi: TestFunction, tol: float = DEFAULT_TOL) -> float:
    """Left side divided by the principal right-hand term."""
    num, den = evaluate_terms(case, [case.lhs, case.principal], phi, tol)
    if den.infinite:
        raise ValueError("principal term diverges")
    if den.value == 0.0:
        raise ValueError("principal term vanishes; quotient undefined")
    return num.value / den.value


# ---------------------------------------------------------------------------
# weights


def base_hardy_weight(p: Point, params: GrushinParams):
    """``|x|^(2g) / (|x|^(2+2g) + (1+g)^2 |y|^2)``."""
    r, s = block_norms(p)
    g = params.gamma
    return r ** (2.0 * g) / (r ** (2.0 + 2.0 * g) + (1.0 + g) ** 2 * s**2)


def gauge_hardy_weight(p: Point, params: GrushinParams):
    """``|grad rho|^2 / rho^2``."""
    r, s = block_norms(p)
    g = params.gamma
    rho = gauge_rs(r, s, g)
    return (r / rho) ** (2.0 * g) / rho**2


def with_params(case: InequalityCase, **changes) -> InequalityCase:
    return replace(case, notes=(), **changes)
