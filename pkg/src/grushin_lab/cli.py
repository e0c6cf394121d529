"""Command-line front end.

Every subcommand reads an optional JSON config (``--config``); flags given on the
command line override config values, which override the defaults table
(``report --defaults``).

Exit codes: 0 all checks passed, 1 violation or target miss, 2 numerical
failure, 3 invalid configuration.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from typing import Optional, Sequence

from . import lab
from .defaults import defaults
from .functionals import (
    CASE_IDS,
    EstimateRequired,
    HypothesisError,
    InequalityCase,
    sharp_constant,
)
from .geometry import GrushinParams
from .quadrature import ConsistencyError, QuadratureError
from .svgplot import LinePlot

EXIT_OK, EXIT_MISS, EXIT_NUMERIC, EXIT_CONFIG = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# settings


def _float_list(text) -> list[float]:
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"not a comma-separated list of numbers: {text!r}") from exc


def _load_config(path: Optional[str]) -> dict:
    if not path:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    return {k.replace("-", "_"): v for k, v in data.items()}


def _settings(ns: argparse.Namespace, base: dict) -> dict:
    cfg = _load_config(getattr(ns, "config", None))
    flags = {k: v for k, v in vars(ns).items() if k not in ("config", "command", "func")}
    return {**base, **cfg, **flags}


def _params(s: dict) -> GrushinParams:
    try:
        return GrushinParams(int(s["m"]), int(s["k"]), float(s["gamma"]))
    except KeyError as exc:
        raise ConfigError(f"missing parameter {exc.args[0]!r} (use --m, --k, --gamma)") from exc
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid (m, k, gamma): {exc}") from exc


def _case(s: dict, params: GrushinParams) -> InequalityCase:
    if "case" not in s or s["case"] is None:
        raise ConfigError(f"missing --case; choose one of {', '.join(CASE_IDS)}")
    kw = {}
    for key in ("alpha", "t", "p", "q", "radius"):
        if s.get(key) is not None:
            kw[key] = float(s[key])
    return InequalityCase(str(s["case"]), params, **kw)


# ---------------------------------------------------------------------------
# output


def _cell(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return v


def _write_csv(path: Optional[str], header: Sequence[str], rows) -> None:
    rows = [[_cell(v) for v in r] for r in rows]
    if path is None:
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
        return
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _json_safe(v):
    if isinstance(v, float) and not math.isfinite(v):
        return repr(v)
    if isinstance(v, dict):
        return {k: _json_safe(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_json_safe(x) for x in v]
    return v


def _write_json(path: Optional[str], header: Sequence[str], rows, summary: dict) -> None:
    if not path:
        return
    doc = {"summary": summary, "rows": [dict(zip(header, r)) for r in rows]}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_json_safe(doc), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _emit(s: dict, header, rows, summary: dict) -> None:
    _write_csv(s.get("out"), header, rows)
    _write_json(s.get("json"), header, rows, summary)
    print(json.dumps(_json_safe(summary), sort_keys=True), file=sys.stderr if s.get("out") is None else sys.stdout)


def _case_cols(case: InequalityCase):
    P = case.params
    return [case.id, P.m, P.k, P.gamma, case.alpha]


# ---------------------------------------------------------------------------
# subcommands


def cmd_identities(s: dict) -> int:
    P = _params(s)
    n = int(s["points"])
    if n < 0:
        raise ConfigError("--points must be nonnegative")
    tol = s.get("tol")
    rep = lab.run_identity_suite(P, n, int(s["seed"]), float(tol) if tol is not None else s["tolerances"])
    if rep.vacuous:
        print("warning: empty identity suite (0 points); passing by vacuity", file=sys.stderr)
    header = ["m", "k", "gamma", "identity", "n_points", "max_residual", "tol", "passed"]
    rows = [[P.m, P.k, P.gamma, c.name, c.n_points, c.max_residual, c.tol, c.passed] for c in rep.checks]
    summary = {"m": P.m, "k": P.k, "gamma": P.gamma, "points": n, "passed": rep.passed, "vacuous": rep.vacuous}
    _emit(s, header, rows, summary)
    return EXIT_OK if rep.passed else EXIT_MISS


def cmd_fuzz(s: dict) -> int:
    case = _case(s, _params(s))
    rep = lab.fuzz_inequality(
        case, int(s["samples"]), int(s["seed"]), float(s["quadrature_tol"]),
        include_zero=bool(s.get("include_zero")), threads=s.get("threads"),
    )
    header = ["case", "m", "k", "gamma", "alpha", "t", "p", "index", "kind", "lhs", "gap",
              "normalized_gap", "status"]
    rows = [
        _case_cols(case) + [case.t, case.p, r.index, r.kind, r.lhs, r.gap, r.normalized_gap, r.status]
        for r in rep.results
    ]
    summary = {
        "case": case.id, "samples": rep.samples, "seed": rep.seed, "violations": rep.violations,
        "min_normalized_gap": rep.min_normalized_gap, "divergent_lhs": rep.divergent_lhs,
        "inconclusive": rep.inconclusive, "notes": list(case.notes),
    }
    _emit(s, header, rows, summary)
    if rep.violations:
        return EXIT_MISS
    return EXIT_NUMERIC if rep.inconclusive else EXIT_OK


def cmd_sharpness(s: dict) -> int:
    case = _case(s, _params(s))
    eps, deltas = _float_list(s["eps"]), _float_list(s["delta"])
    try:
        rep = lab.sharpness_sweep(case, eps, deltas, float(s["quadrature_tol"]), threads=s.get("threads"))
    except ValueError as exc:
        if isinstance(exc, HypothesisError):
            raise
        raise ConfigError(str(exc)) from exc
    header = ["case", "m", "k", "gamma", "alpha", "epsilon", "delta", "quotient", "target",
              "extrapolated", "rel_gap"]
    lim = dict(rep.limits)
    rows = []
    for r in rep.rows:
        L = lim[r.delta]
        rows.append(_case_cols(case) + [r.epsilon, r.delta, r.quotient, rep.target, L,
                                        abs(L - rep.target) / abs(rep.target)])
    tol = float(s["target_rel_tol"])
    ok = rep.relative_gap <= tol and rep.above_target
    summary = {
        "case": case.id, "target": rep.target, "extrapolated": rep.extrapolated_limit,
        "rel_gap": rep.relative_gap, "target_rel_tol": tol, "above_target": rep.above_target,
        "passed": ok,
    }
    _emit(s, header, rows, summary)
    if s.get("plot"):
        plot = LinePlot(f"{case.id} sharpness sweep", "epsilon", "quotient")
        for d in deltas:
            rs = [r for r in rep.rows if r.delta == d]
            plot.add(f"delta={d:g}", [r.epsilon for r in rs], [r.quotient for r in rs])
        plot.hline(f"target {rep.target:.6g}", rep.target)
        plot.save(s["plot"])
    return EXIT_OK if ok else EXIT_MISS


def _simplex_cfg(s: dict) -> lab.SimplexConfig:
    return lab.SimplexConfig(restarts=int(s["restarts"]), maxfev=int(s["maxfev"]))


def _estimate_rows(case, rep):
    return [
        _case_cols(case) + [case.radius, rep.term, t.start, t.value, t.evaluations, t.success]
        for t in rep.restarts
    ]


def cmd_minimize(s: dict) -> int:
    case = _case(s, _params(s))
    fam = lab.SplineFamily(
        n_knots=int(s["knots"]), log_span=float(s["log_span"]),
        upper=lab.fn.BALL_MARGIN * case.radius if case.on_ball else None,
    )
    rep = lab.minimize_quotient(case, fam, _simplex_cfg(s), int(s["seed"]), float(s["optimizer_quadrature_tol"]))
    header = ["case", "m", "k", "gamma", "alpha", "radius", "term", "restart", "value", "evaluations", "success"]
    tol = float(s["target_rel_tol"])
    within = rep.relative_excess is not None and rep.relative_excess <= tol
    summary = {
        "case": case.id, "best": rep.best_constant_estimate, "target": rep.target,
        "relative_excess": rep.relative_excess, "above_target": rep.above_target,
        "converged": rep.converged, "evaluations": rep.evaluations, "passed": within and rep.above_target,
    }
    _emit(s, header, _estimate_rows(case, rep), summary)
    if not (rep.above_target and within):
        return EXIT_MISS
    return EXIT_OK if rep.converged else EXIT_NUMERIC


def cmd_remainder(s: dict) -> int:
    params = _params(s)
    case = _case(s, params)
    if case.id not in lab.REMAINDER_CASES:
        raise ConfigError(f"{case.id} has no estimated remainder; choose one of {', '.join(lab.REMAINDER_CASES)}")
    fam = lab.remainder_family(case, int(s["knots"]), float(s["log_span"]))
    rep = lab.estimate_remainder_constant(case, fam, _simplex_cfg(s), int(s["seed"]), float(s["optimizer_quadrature_tol"]))
    header = ["case", "m", "k", "gamma", "alpha", "radius", "term", "restart", "value", "evaluations", "success"]
    positive = math.isfinite(rep.best_constant_estimate) and rep.best_constant_estimate > 0
    summary = {
        "case": case.id, "term": rep.term, "radius": case.radius, "estimate": rep.best_constant_estimate,
        "converged": rep.converged, "evaluations": rep.evaluations, "skipped": rep.skipped,
        "positive": positive, "notes": list(case.notes),
    }
    _emit(s, header, _estimate_rows(case, rep), summary)
    if not positive:
        return EXIT_MISS
    return EXIT_OK if rep.converged else EXIT_NUMERIC


def cmd_kappa(s: dict) -> int:
    P = _params(s)
    windows = [tuple(float(v) for v in w) for w in s["windows"]]
    rep = lab.kappa_consistency(P, windows, int(s["mc_samples"]), int(s["seed"]), float(s["tol"]), s.get("threads"))
    header = ["m", "k", "gamma", "window_lo", "window_hi", "kappa", "closed_form", "rel_diff"]
    rows = [[P.m, P.k, P.gamma, a, b, v, rep.closed_form, abs(v - rep.closed_form) / rep.closed_form]
            for a, b, v in rep.windows]
    summary = {
        "m": P.m, "k": P.k, "gamma": P.gamma, "kappa": rep.kappa, "closed_form": rep.closed_form,
        "window_spread": rep.window_spread, "mc_value": rep.mc_value, "mc_stderr": rep.mc_stderr,
        "mc_sigmas": rep.mc_sigmas, "passed": rep.passed,
    }
    _emit(s, header, rows, summary)
    return EXIT_OK if rep.passed else EXIT_MISS


def cmd_report(s: dict) -> int:
    if s.get("defaults"):
        print(json.dumps(defaults(), indent=2, sort_keys=True))
        return EXIT_OK
    case = _case(s, _params(s))
    terms = []
    for tm in (case.lhs, *case.rhs):
        terms.append({
            "label": tm.label, "operand": tm.operand, "power": tm.power, "rho_power": tm.rho_power,
            "grad_power": tm.grad_power, "log_weight": tm.log_weight, "outer_power": tm.outer_power,
            "coefficient": tm.coefficient, "prefactor": tm.prefactor,
        })
    try:
        sharp = sharp_constant(case)
    except EstimateRequired:
        sharp = None
    doc = {"case": case.id, "Q": case.Q, "alpha": case.alpha, "t": case.t, "p": case.p, "q": case.q,
           "radius": case.radius, "sharp_constant": sharp, "terms": terms, "notes": list(case.notes)}
    print(json.dumps(doc, indent=2, sort_keys=True))
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def _common(p: argparse.ArgumentParser, case: bool = True) -> None:
    S = argparse.SUPPRESS
    p.add_argument("--config", help="JSON file with default values for any flag")
    p.add_argument("--m", type=int, default=S)
    p.add_argument("--k", type=int, default=S)
    p.add_argument("--gamma", type=float, default=S)
    p.add_argument("--seed", type=int, default=S)
    p.add_argument("--out", default=S, help="CSV output path (stdout if absent)")
    p.add_argument("--json", default=S, help="JSON report path")
    p.add_argument("--threads", type=int, default=S, help="worker threads (overrides GRUSHIN_LAB_THREADS)")
    if case:
        p.add_argument("--case", default=S, help=f"one of {', '.join(CASE_IDS)} or an alias such as R1, H-LP")
        for name in ("alpha", "t", "p", "q", "radius"):
            p.add_argument(f"--{name}", type=float, default=S)


class _Parser(argparse.ArgumentParser):
    """Usage errors map to the invalid-configuration exit code."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    S = argparse.SUPPRESS
    ap = _Parser(prog="grushin-lab", description=__doc__.split("\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("identities", help="closed forms against finite differences")
    _common(p, case=False)
    p.add_argument("--points", type=int, default=S)
    p.add_argument("--tol", type=float, default=S, help="one tolerance for every identity")
    p.set_defaults(func=cmd_identities)

    p = sub.add_parser("fuzz", help="gap on random test functions")
    _common(p)
    p.add_argument("--samples", type=int, default=S)
    p.add_argument("--include-zero", dest="include_zero", action="store_true", default=S)
    p.set_defaults(func=cmd_fuzz)

    p = sub.add_parser("sharpness", help="near-extremal sweep with extrapolation in epsilon")
    _common(p)
    p.add_argument("--eps", default=S, help="decreasing comma-separated list")
    p.add_argument("--delta", default=S, help="comma-separated list")
    p.add_argument("--target-rel-tol", dest="target_rel_tol", type=float, default=S)
    p.add_argument("--plot", default=S, help="SVG output path")
    p.set_defaults(func=cmd_sharpness)

    for name, func, helptext in (
        ("minimize", cmd_minimize, "smallest Rayleigh quotient over spline profiles"),
        ("remainder", cmd_remainder, "best remainder constant over spline profiles"),
    ):
        p = sub.add_parser(name, help=helptext)
        _common(p)
        p.add_argument("--knots", type=int, default=S)
        p.add_argument("--log-span", dest="log_span", type=float, default=S)
        p.add_argument("--restarts", type=int, default=S)
        p.add_argument("--maxfev", type=int, default=S)
        if name == "minimize":
            p.add_argument("--target-rel-tol", dest="target_rel_tol", type=float, default=S)
        p.set_defaults(func=func)

    p = sub.add_parser("kappa", help="polar constant on several windows")
    _common(p, case=False)
    p.add_argument("--mc-samples", dest="mc_samples", type=int, default=S)
    p.add_argument("--tol", type=float, default=S)
    p.set_defaults(func=cmd_kappa)

    p = sub.add_parser("report", help="describe a case, or print the defaults table")
    _common(p)
    p.add_argument("--defaults", action="store_true", default=S)
    p.set_defaults(func=cmd_report)
    return ap


def _base(command: str) -> dict:
    d = defaults()
    base = {"quadrature_tol": d["quadrature_tol"], "optimizer_quadrature_tol": d["optimizer_quadrature_tol"]}
    if command == "identities":
        base.update(d["identities"])
    elif command in ("fuzz", "sharpness", "minimize", "remainder", "kappa"):
        base.update({k: v for k, v in d[command].items()})
    return base


def main(argv: Optional[Sequence[str]] = None) -> int:
    ap = build_parser()
    try:
        ns = ap.parse_args(argv)
        s = _settings(ns, _base(ns.command))
        return ns.func(s)
    except HypothesisError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (QuadratureError, ConsistencyError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
