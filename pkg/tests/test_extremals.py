import numpy as np
import pytest

from grushin_lab.extremals import (
    Atom,
    AtomSum,
    BumpConfig,
    ExtremalSpec,
    SplineProfile,
    hardy_extremal,
    log_knots,
    random_atom_sum,
    random_bump,
    random_spline,
    rellich_extremal,
    smoothstep_cutoff,
    spline_profile,
)
from grushin_lab.functionals import InequalityCase, evaluate_case, rayleigh_quotient
from grushin_lab.geometry import GrushinParams, Point, gauge
from grushin_lab.operators import compose_radial, grushin_laplacian

P111 = GrushinParams(1, 1, 1.0)
P6 = GrushinParams(2, 2, 1.0)


def rellich(eps=0.1, delta=0.05):
    return rellich_extremal(ExtremalSpec(eps, delta, 3.0, P6))


def test_rellich_examples():
    b = (6 + 3 - 4) / 2 + 0.1
    f = rellich()
    assert f.f(0.0) == pytest.approx(1 - b, abs=1e-15)
    assert f.f(2.0) == pytest.approx(2.0 ** (-b), rel=1e-14)
    assert f.df(0.5) == pytest.approx(b)
    assert f.d2f(3.0) == pytest.approx(b * (b + 1) * 3.0 ** (-b - 2), rel=1e-13)


def test_hardy_examples():
    assert hardy_extremal(ExtremalSpec(0.1, 0.05, 0.0, P111)).f(0.0) == 1.0
    assert hardy_extremal(ExtremalSpec(0.1, 0.05, 0.0, P111)).f(4.0) == pytest.approx(0.435275, abs=5e-7)
    assert 4.0 ** -0.6 == pytest.approx(np.exp(-0.6 * np.log(4.0)), rel=1e-15)


@pytest.mark.parametrize("make", [rellich, lambda: hardy_extremal(ExtremalSpec(0.1, 0.05, 0.0, P111))])
def test_derivative_continuity_at_blend_ends(make):
    f = make()
    h = 1e-9
    for x in (0.95, 1.05):
        jump = abs(float(f.df(x + h)) - float(f.df(x - h)))
        assert jump < 1e-6
        assert abs(float(f.f(x + h)) - float(f.f(x - h))) < 1e-8


def test_extremal_argument_errors():
    with pytest.raises(ValueError):
        ExtremalSpec(0.0, 0.05, 3.0, P6)
    with pytest.raises(ValueError):
        ExtremalSpec(0.1, 0.5, 3.0, P6)
    with pytest.raises(ValueError, match="Q \\+ alpha - 4"):
        rellich_extremal(ExtremalSpec(0.1, 0.05, -2.0, P6))
    with pytest.raises(ValueError, match="Q \\+ alpha - 2"):
        hardy_extremal(ExtremalSpec(0.1, 0.05, -1.0, P111))


def hardy_quotient(eps):
    return rayleigh_quotient(InequalityCase("H_LP_33", P111), hardy_extremal(ExtremalSpec(eps, 0.05, 0.0, P111)))


def test_hardy_quotient_approaches_constant_from_above():
    qs = [hardy_quotient(e) for e in (0.2, 0.1, 0.05)]
    assert all(q > 0.25 for q in qs)
    assert qs[0] > qs[1] > qs[2]
    assert qs[2] / 0.25 - 1 < 0.1


@pytest.mark.xfail(strict=True, reason="at eps=0.05 the quotient is about 9.8% above the constant")
def test_hardy_quotient_within_five_percent():
    assert hardy_quotient(0.05) <= 0.25 * 1.05


def rellich_quotients():
    case = InequalityCase("R1_41", P6, alpha=3.0)
    return [rayleigh_quotient(case, rellich(0.1, d)) for d in (0.1, 0.05, 0.025)]


def test_rellich_delta_trend_is_monotone():
    q = rellich_quotients()
    assert np.all(np.diff(q) > 0)


@pytest.mark.xfail(strict=True, reason="the blend term grows like 1/delta, so the quotient is not delta-stable")
def test_rellich_delta_change_below_two_percent():
    q = rellich_quotients()
    assert abs(q[2] / q[0] - 1) < 0.02


def test_smoothstep_cutoff():
    c = smoothstep_cutoff(1.0, 2.0)
    t = np.array([0.0, 0.5, 1.0, 1.5, 2.0, 3.0])
    np.testing.assert_allclose(c.f(t), [1, 1, 1, 0.5, 0, 0], atol=1e-15)
    np.testing.assert_allclose(c.df(np.array([1.0, 2.0])), 0.0, atol=1e-15)
    np.testing.assert_allclose(c.d2f(np.array([1.0, 2.0])), 0.0, atol=1e-15)
    with pytest.raises(ValueError):
        smoothstep_cutoff(2.0, 1.0)


def test_random_bump_determinism():
    a = random_atom_sum(np.random.default_rng(5))
    b = random_atom_sum(np.random.default_rng(5))
    assert a == b
    assert a != random_atom_sum(np.random.default_rng(6))
    P = GrushinParams(2, 1, 0.5)
    rng = np.random.default_rng(0)
    p = Point(rng.normal(size=(50, 2)), rng.normal(size=(50, 1)))
    np.testing.assert_array_equal(random_bump(5, params=P)(p), random_bump(5, params=P)(p))


def test_cutoff_vanishes_outside_support():
    P = GrushinParams(2, 1, 1.0)
    fld = AtomSum((Atom(1, 0, 0.5, 0.5, 1.0), Atom(0, 1, 1.0, 2.0, -0.5)), (1.0, 2.0)).field(P)
    rng = np.random.default_rng(1)
    p = Point(rng.normal(size=(4000, 2)) * 2, rng.normal(size=(4000, 1)) * 3)
    out = np.asarray(gauge(p, P)) >= 2.0
    assert out.sum() > 100
    assert np.all(fld(p)[out] == 0.0)
    lap = grushin_laplacian(fld, p, P)
    assert np.all(lap[out] == 0.0)


def test_bump_config_validation():
    with pytest.raises(ValueError):
        BumpConfig(n_atoms=(0, 3))
    with pytest.raises(ValueError):
        BumpConfig(rate_range=(-1.0, 1.0))
    with pytest.raises(ValueError):
        BumpConfig(r_in_fraction=(0.5, 1.0))
    with pytest.raises(ValueError):
        random_bump(0)
    for s in range(30):
        n = len(random_atom_sum(np.random.default_rng(s)).atoms)
        assert 1 <= n <= 5


def hat_spline(power=0.0):
    kn = log_knots(0.2, 3.0, 7)
    return spline_profile(kn, [0.0, 0.3, 1.0, 0.3, 0.0], power=power)


@pytest.mark.parametrize("power", [0.0, 1.25])
def test_spline_derivatives_match_fd(power):
    f = hat_spline(power)
    t = np.linspace(0.25, 2.9, 41)
    h = 1e-5 * t
    fd1 = (f.f(t + h) - f.f(t - h)) / (2 * h)
    fd2 = (f.df(t + h) - f.df(t - h)) / (2 * h)
    scale1 = np.max(np.abs(f.df(t)))
    scale2 = np.max(np.abs(f.d2f(t)))
    assert np.max(np.abs(fd1 - f.df(t))) / scale1 < 1e-7
    assert np.max(np.abs(fd2 - f.d2f(t))) / scale2 < 1e-7


def test_spline_clamped_ends():
    f = hat_spline(0.7)
    for t in (0.2, 3.0):
        assert abs(f.f(t)) < 1e-12 and abs(f.df(t)) < 1e-12
    assert f.f(0.1) == 0.0 and f.f(4.0) == 0.0


def test_spline_relative_support():
    f = spline_profile([0.0, 0.3, 0.7, 1.0], [1.0, -0.5], support=(0.5, 2.0))
    assert f.support == pytest.approx((0.5, 2.0))
    with pytest.raises(ValueError):
        spline_profile([0.0, 0.5, 0.4, 1.0], [1.0, 1.0])
    with pytest.raises(ValueError):
        spline_profile([0.0, 0.3, 0.7, 1.5], [1.0, 1.0], support=(0.5, 2.0))
    with pytest.raises(ValueError):
        SplineProfile((1.0, 2.0, 3.0), (1.0,))
    with pytest.raises(ValueError):
        SplineProfile((1.0, 2.0, 3.0, 4.0), (1.0,))


def test_zero_spline_gives_zero_functionals():
    f = spline_profile(log_knots(0.2, 0.9, 6), np.zeros(4))
    ev = evaluate_case(InequalityCase("R1_LOG_43", P6, alpha=3.0), f)
    assert all(v.value == 0.0 for v in ev.terms.values())


def test_random_spline_is_reproducible():
    a = random_spline(np.random.default_rng(3), (0.1, 2.0))
    b = random_spline(np.random.default_rng(3), (0.1, 2.0))
    t = np.linspace(0.1, 2.0, 17)
    np.testing.assert_array_equal(a.f(t), b.f(t))


def test_families_are_biradial():
    P = GrushinParams(3, 2, 1.5)
    rng = np.random.default_rng(2)
    x = rng.normal(size=(20, 3))
    y = rng.normal(size=(20, 2))
    q1 = np.linalg.qr(rng.normal(size=(3, 3)))[0]
    q2 = np.linalg.qr(rng.normal(size=(2, 2)))[0]
    p, pr = Point(x, y), Point(x @ q1.T, y @ q2.T)
    fields = [
        random_bump(4, params=P),
        compose_radial(rellich_extremal(ExtremalSpec(0.1, 0.05, 3.0, P)), P),
        compose_radial(hat_spline(), P),
    ]
    for fld in fields:
        np.testing.assert_allclose(fld(pr), fld(p), rtol=1e-13, atol=1e-15)
