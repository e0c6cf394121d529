"""Acceptance criteria, each at its stated tolerance and runtime budget."""

import contextlib
import csv
import math
import os
import time

import numpy as np
import pytest

from grushin_lab import cli
from grushin_lab._parallel import ENV_VAR
from grushin_lab.functionals import InequalityCase, sharp_constant
from grushin_lab.geometry import GrushinParams
from grushin_lab.lab import (
    SimplexConfig,
    SplineFamily,
    estimate_remainder_constant,
    kappa_consistency,
    minimize_quotient,
    run_identity_suite,
    sharpness_sweep,
)
from grushin_lab.quadrature import QuadratureDomain, ball_volume, integrate_reduced

acc = pytest.mark.acceptance
pytestmark = pytest.mark.slow

EPS = "0.2,0.1,0.05,0.025"
SWEEPS_R1 = {
    "q6": (["--m", "2", "--k", "2", "--gamma", "1", "--alpha", "3"], 14.0625),
    "q5": (["--m", "2", "--k", "1", "--gamma", "2", "--alpha", "2.5"], 3.5**2 * 2.5**2 / 16),
}
FUZZ_PARAMS = ["--m", "2", "--k", "1", "--gamma", "0.5", "--seed", "42", "--samples", "100"]
FUZZ_CASES = {
    "H_LP_33": ["--p", "2", "--alpha", "0", "--t", "0"],
    "H_LOG_32": ["--alpha", "0"],
    "R1_41": ["--alpha", "2.5"],
    "R1_LOG_43": ["--alpha", "2"],
    "R2_45": ["--alpha", "2.5"],
    "R2_LOG_47": ["--alpha", "2.5"],
}


@contextlib.contextmanager
def threads_env(n):
    old = os.environ.get(ENV_VAR)
    os.environ[ENV_VAR] = str(n)
    try:
        yield
    finally:
        if old is None:
            del os.environ[ENV_VAR]
        else:
            os.environ[ENV_VAR] = old


def read_rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def run_sweeps(directory, threads):
    out, codes, seconds = {}, {}, {}
    with threads_env(threads):
        for name, (flags, _) in SWEEPS_R1.items():
            path = directory / f"sweep_{name}_t{threads}.csv"
            t0 = time.perf_counter()
            codes[name] = cli.main(["sharpness", "--case", "R1", *flags, "--eps", EPS, "--delta", "0.05",
                                    "--out", str(path)])
            seconds[name] = time.perf_counter() - t0
            out[name] = path
    return out, codes, seconds


def run_fuzz(directory, threads):
    out, codes = {}, {}
    t0 = time.perf_counter()
    with threads_env(threads):
        for cid, flags in FUZZ_CASES.items():
            path = directory / f"fuzz_{cid}_t{threads}.csv"
            codes[cid] = cli.main(["fuzz", "--case", cid, *FUZZ_PARAMS, *flags, "--out", str(path)])
            out[cid] = path
    return out, codes, time.perf_counter() - t0


@pytest.fixture(scope="module")
def sweep_runs(tmp_path_factory):
    return run_sweeps(tmp_path_factory.mktemp("sweeps"), 4)


@pytest.fixture(scope="module")
def fuzz_runs(tmp_path_factory):
    return run_fuzz(tmp_path_factory.mktemp("fuzz"), 4)


# 1 -------------------------------------------------------------------------


@acc(1, "identity suite on four parameter sets")
def test_identity_suite():
    t0 = time.perf_counter()
    for g, m, k in [(1, 1, 1), (1, 2, 2), (2, 3, 2), (0.5, 2, 1)]:
        rep = run_identity_suite(GrushinParams(m, k, g), n_points=1000, seed=0)
        bound = {"gauge_gradient": 1e-7, "radial_laplacian": 1e-5, "rellich_identity": 1e-8,
                 "orthogonality": 1e-5, "divergence": 1e-5}
        for c in rep.checks:
            key = next(b for b in bound if c.name.startswith(b))
            assert c.n_points == 1000
            assert c.max_residual < bound[key], (g, m, k, c)
            print(f"  ({g},{m},{k}) {c.name}: {c.max_residual:.2e} < {bound[key]:.0e}")
    assert time.perf_counter() - t0 < 30


# 2 -------------------------------------------------------------------------


@acc(2, "measure scaling R^Q of gauge balls")
@pytest.mark.parametrize("params", [GrushinParams(1, 1, 1.0), GrushinParams(2, 1, 0.5), GrushinParams(3, 2, 2.0)])
def test_measure_scaling(params):
    t0 = time.perf_counter()
    one = lambda r, s: np.ones(np.broadcast(r, s).shape)
    base = integrate_reduced(one, QuadratureDomain.rho_ball(params, 1.0), tol=1e-12).value
    assert base == pytest.approx(ball_volume(params, 1.0), rel=1e-10)
    for R in (0.5, 1.0, 2.0, 4.0):
        v = integrate_reduced(one, QuadratureDomain.rho_ball(params, R), tol=1e-12).value
        assert abs(v / base - R**params.Q) / R**params.Q < 1e-6
    assert time.perf_counter() - t0 < 10


@acc(2, "measure scaling R^Q of gauge balls")
def test_measure_scaling_against_rectangle():
    # independent route: integrate the indicator in (r, s) after the box change of variables
    P = GrushinParams(2, 1, 1.0)
    from grushin_lab.geometry import gauge_rs

    vals = []
    for R in (0.5, 1.0, 2.0, 4.0):
        ind = lambda r, s, R=R: (gauge_rs(r, s, P.gamma) < R).astype(float)
        dom = QuadratureDomain.reduced_rectangle(P, (0, R), (0, R ** (1 + P.gamma) / (1 + P.gamma)))
        vals.append(integrate_reduced(ind, dom, tol=1e-4).value)
    assert vals[1] == pytest.approx(ball_volume(P, 1.0), rel=1e-2)


# 3 -------------------------------------------------------------------------


@acc(3, "polar constant: windows, Monte Carlo, Euclidean limit")
def test_kappa():
    t0 = time.perf_counter()
    for P in [GrushinParams(1, 1, 1.0), GrushinParams(2, 2, 1.0), GrushinParams(3, 2, 2.0), GrushinParams(2, 1, 0.5)]:
        rep = kappa_consistency(P, mc_samples=400_000, seed=7)
        assert len(rep.windows) >= 3
        assert rep.window_spread < 1e-4
        assert rep.mc_sigmas <= 3.0
        print(f"  {P}: kappa={rep.kappa:.10g} spread={rep.window_spread:.1e} mc={rep.mc_sigmas:.2f} sigma")
    eu = kappa_consistency(GrushinParams(2, 1, 1e-6))
    assert abs(eu.kappa / (4 * math.pi) - 1) < 1e-3
    assert time.perf_counter() - t0 < 60


# 4 -------------------------------------------------------------------------


@acc(4, "Rellich I sharpness")
@pytest.mark.parametrize("name", list(SWEEPS_R1))
def test_rellich_one(sweep_runs, name):
    paths, codes, seconds = sweep_runs
    target = SWEEPS_R1[name][1]
    rows = read_rows(paths[name])
    L = float(rows[0]["extrapolated"])
    print(f"  {name}: limit {L:.8g} vs {target:.8g}, rel gap {abs(L / target - 1):.2e}")
    assert float(rows[0]["target"]) == pytest.approx(target, rel=1e-14)
    assert abs(L / target - 1) < 0.01
    assert all(float(r["quotient"]) > target for r in rows)
    assert codes[name] == 0
    assert seconds[name] < 300


# 5 -------------------------------------------------------------------------


@acc(5, "Rellich II sharpness")
@pytest.mark.parametrize("params,alpha,target", [(GrushinParams(2, 1, 2.0), 3.0, 1.0),
                                                 (GrushinParams(2, 2, 1.0), 3.0, 2.25)])
def test_rellich_two(params, alpha, target):
    t0 = time.perf_counter()
    case = InequalityCase("R2_45", params, alpha=alpha)
    assert sharp_constant(case) == pytest.approx(target, rel=1e-14)
    rep = sharpness_sweep(case, [0.2, 0.1, 0.05, 0.025], (0.05,))
    print(f"  Q={params.Q:g}: limit {rep.extrapolated_limit:.8g}, rel gap {rep.relative_gap:.2e}")
    assert abs(rep.extrapolated_limit / target - 1) < 0.01
    assert rep.above_target
    assert time.perf_counter() - t0 < 300


# 6 -------------------------------------------------------------------------


@acc(6, "Hardy sharpness: sweep and spline minimisation")
def test_hardy_sharpness():
    t0 = time.perf_counter()
    P = GrushinParams(1, 1, 1.0)
    case = InequalityCase("H_LP_33", P, p=2.0, alpha=0.0, t=0.0)
    sweep = sharpness_sweep(case, [0.2, 0.1, 0.05, 0.025], (0.05,))
    assert abs(sweep.extrapolated_limit / 0.25 - 1) < 0.01
    assert sweep.above_target
    rep = minimize_quotient(case, SplineFamily(), SimplexConfig(), seed=0)
    print(f"  sweep limit {sweep.extrapolated_limit:.8g}; minimisation {rep.best_constant_estimate:.8g}")
    assert 0.25 - 1e-6 <= rep.best_constant_estimate <= 0.25 * 1.02
    assert min(rep.sampled) >= 0.25 - 1e-6
    assert time.perf_counter() - t0 < 300


# 7 -------------------------------------------------------------------------


@acc(7, "fuzz suites, zero violations")
@pytest.mark.parametrize("cid", list(FUZZ_CASES))
def test_fuzz(fuzz_runs, cid):
    paths, codes, seconds = fuzz_runs
    rows = read_rows(paths[cid])
    assert len(rows) == 100
    gaps = [float(r["normalized_gap"]) for r in rows if r["status"] in ("ok", "violation")]
    print(f"  {cid}: min normalized gap {min(gaps):.3e} over {len(gaps)} samples")
    assert sum(r["status"] == "violation" for r in rows) == 0
    assert min(gaps) >= -1e-6
    assert codes[cid] == 0
    assert seconds < 600


# 8 -------------------------------------------------------------------------

REMAINDER_PARAMS = GrushinParams(3, 1, 2.0)


@acc(8, "remainder constants: positivity and 1/r^2 scaling")
@pytest.mark.parametrize("cid", ["H_IMPROVED_31", "H_CKN_34", "R1_BALL_42", "R1_CKN_44", "R2_BALL_46"])
def test_remainder_positive(cid):
    t0 = time.perf_counter()
    case = InequalityCase(cid, REMAINDER_PARAMS, alpha=3.0 if cid.startswith("R") else 0.0)
    rep = estimate_remainder_constant(case)
    print(f"  {cid}: estimate {rep.best_constant_estimate:.6g} ({rep.evaluations} evaluations)")
    assert math.isfinite(rep.best_constant_estimate) and rep.best_constant_estimate > 0
    assert time.perf_counter() - t0 < 120


@acc(8, "remainder constants: positivity and 1/r^2 scaling")
def test_remainder_scaling():
    t0 = time.perf_counter()
    est = {}
    for r in (1.0, 2.0):
        case = InequalityCase("H_IMPROVED_31", REMAINDER_PARAMS, radius=r)
        est[r] = estimate_remainder_constant(case).best_constant_estimate
    ratio = est[1.0] / est[2.0]
    print(f"  r=1: {est[1.0]:.6g}, r=2: {est[2.0]:.6g}, ratio {ratio:.6g}")
    assert abs(ratio / 4 - 1) < 0.1
    assert time.perf_counter() - t0 < 180


# 9 -------------------------------------------------------------------------


@acc(9, "Euclidean regression of the Hardy constant")
def test_euclidean_hardy():
    t0 = time.perf_counter()
    case = InequalityCase("H_LP_33", GrushinParams(2, 1, 1e-6), p=2.0)
    rep = minimize_quotient(case, SplineFamily(), SimplexConfig(), seed=0)
    print(f"  best {rep.best_constant_estimate:.8g} vs 0.25")
    assert abs(rep.best_constant_estimate / 0.25 - 1) < 0.02
    assert time.perf_counter() - t0 < 180


# 10 ------------------------------------------------------------------------


@acc(10, "byte-identical CSVs for 1 and 4 threads")
def test_determinism(sweep_runs, fuzz_runs, tmp_path):
    sweeps1, _, _ = run_sweeps(tmp_path, 1)
    fuzz1, _, _ = run_fuzz(tmp_path, 1)
    for name, path in sweep_runs[0].items():
        assert path.read_bytes() == sweeps1[name].read_bytes(), name
    for cid, path in fuzz_runs[0].items():
        assert path.read_bytes() == fuzz1[cid].read_bytes(), cid
