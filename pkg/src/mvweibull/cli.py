"""Command-line interface: ``mvweibull {fit,report,km,simulate}``.

Exit codes: 0 success, 1 usage error, 2 data/parameter error, 3 fit did not
converge.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import DataError, DomainError, IdentifiabilityError, SingularHessianError
from .estimation import FitConfig, FitResult, fit
from .inference import correlation_with_ci, hazard_curve, hazard_ratio
from .ingest import CohortSchema, load_cohort, load_regression_spec, read_header, write_cohort
from .likelihood import DEFAULT_CENSOR_TIME, RegressionParams, RegressionSpec
from .model import ModelParams
from .nonparam import km_cumhaz, km_survival, write_curve_csv
from .presets import PRESETS
from .simulate import CovariateDist, SimConfig, generate_dataset

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NOCONV = 0, 1, 2, 3

log = logging.getLogger("mvweibull")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _fmt(x, small_sig=3) -> str:
    if x is None or not np.isfinite(x):
        return "nan"
    if x != 0 and abs(x) < 0.01:
        return f"{x:.{small_sig}g}"
    return f"{x:.3f}"


def _write_csv(path: Path, header, rows) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _write_json(path: Path, data) -> None:
    path.write_text(json.dumps(data, indent=2, allow_nan=False) + "\n")


def _num(x) -> str:
    return repr(float(x))


def _jsonable(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return x


# -- fit ----------------------------------------------------------------------


def _label(name: str) -> str:
    if name == "alpha":
        return "alpha"
    if name.startswith("shape_"):
        return "gamma_" + name.split("_", 1)[1]
    if name.startswith("scale_"):
        return "lambda_" + name.split("_", 1)[1]
    return "  " + name.split(":", 1)[1]


def fit_table(result: FitResult) -> str:
    pct = round(100 * result.ci_level)
    lines = [f"{'Parameter':<28}{'Estimate':>12}   {pct}% Confidence Interval"]
    for k, name in enumerate(result.names):
        if name.endswith(":intercept"):
            dim = name.split(":", 1)[0].split("_")[1]
            lines.append(f"lambda_{dim}")
        est, lo, hi = result.estimates[k], result.ci_lower[k], result.ci_upper[k]
        lines.append(f"{_label(name):<28}{_fmt(est):>12}   ({_fmt(lo)}, {_fmt(hi)})")
    return "\n".join(lines)


def cmd_fit(args) -> int:
    cohort_path = Path(args.cohort)
    header = read_header(cohort_path)
    schema = CohortSchema.infer(header, covariates=())
    spec = None
    if args.spec:
        spec = load_regression_spec(args.spec, d=schema.d, columns=header)
        schema = CohortSchema.default(schema.d, spec.all_covariates())
    cohort, report = load_cohort(cohort_path, schema, args.tc)
    config = FitConfig(gtol=args.gtol, max_iter=args.max_iter, ci_level=args.ci_level, t_c=args.tc)
    result = fit(cohort, spec, config)

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "fit.json", _sanitize(result.to_dict()))
    _write_json(out / "ingest.json", report.to_dict())
    _write_csv(
        out / "estimates.csv",
        ["parameter", "estimate", "std_error", "ci_lower", "ci_upper"],
        [
            [n, _num(e), _num(s), _num(lo), _num(hi)]
            for n, e, s, lo, hi in zip(result.names, result.estimates, result.std_errors, result.ci_lower, result.ci_upper)
        ],
    )
    print(f"rows kept {report.rows_kept} of {report.rows_read}; patterns {report.pattern_histogram}")
    print(fit_table(result))
    print(f"log-likelihood {result.loglik:.3f}; iterations {result.iterations}; "
          f"gradient {result.grad_norm:.2e}; converged {result.converged}")
    for msg in result.messages:
        print(f"note: {msg}")
    return EXIT_OK if result.converged else EXIT_NOCONV


def _sanitize(obj):
    if isinstance(obj, dict):
        return {k: _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_sanitize(v) for v in obj]
    return _jsonable(obj)


# -- report -------------------------------------------------------------------


def build_report(result: FitResult, n: int | None = None, level: float | None = None) -> dict:
    """Hazard curves, hazard ratios and correlations derived from a fit."""
    level = level or result.ci_level
    n = n or result.n_obs
    spec, params = result.spec, result.params
    d = spec.d
    hazards = []
    for k in range(d):
        g = params.shapes[k]
        if spec.is_intercept_only:
            lam = math.exp(params.coefs[k][0])
            cov = result.cov_block([f"shape_{k + 1}", f"scale_{k + 1}"])
            basis = "constant"
        elif spec.intercept:
            lam = math.exp(params.coefs[k][0])
            cb = result.cov_block([f"shape_{k + 1}", f"beta_{k + 1}:intercept"])
            jac = np.diag([1.0, lam])
            cov = jac @ cb @ jac
            basis = "baseline (all covariates 0)"
        else:
            continue
        if not np.all(np.isfinite(cov)):
            cov = np.zeros((2, 2))
        curve = hazard_curve(g, lam, cov)
        hazards.append({"dimension": k + 1, "basis": basis, **curve.to_dict()})

    ratios, notes = [], []
    if spec.is_intercept_only:
        notes.append("no covariates in the fit; hazard ratios omitted")
    else:
        for k in range(d):
            for name in spec.covariates[k]:
                j = spec.coef_names(k).index(name)
                cov = result.cov_block([f"shape_{k + 1}", f"beta_{k + 1}:{name}"])
                hr = hazard_ratio(
                    params.shapes[k], float(params.coefs[k][j]), 1.0,
                    cov if np.all(np.isfinite(cov)) else None, level,
                )
                ratios.append({"dimension": k + 1, "covariate": name, "delta": 1.0, **hr.to_dict()})

    # correlations depend only on alpha and the shapes
    unit = ModelParams.from_arrays(params.alpha, params.shapes, [1.0] * d)
    corr = []
    for i in range(d):
        for j in range(i + 1, d):
            r, lo, hi = correlation_with_ci(unit, i, j, n, level)
            corr.append({"i": i + 1, "j": j + 1, "r": r, "lower": lo, "upper": hi})
    matrix = np.eye(d)
    for c in corr:
        matrix[c["i"] - 1, c["j"] - 1] = matrix[c["j"] - 1, c["i"] - 1] = c["r"]
    return {
        "level": level,
        "n": n,
        "hazard_curves": hazards,
        "hazard_ratios": ratios,
        "correlations": corr,
        "correlation_matrix": matrix.tolist(),
        "notes": notes,
    }


def report_tables(rep: dict) -> str:
    out = ["Hazard rates h(t) = c / t^e, Var[h(t)] = (a - b log t + q log^2 t) / t^(2e)"]
    out.append(f"{'X':<4}{'c':>12}{'e':>8}{'a':>12}{'b':>12}{'q':>12}")
    for h in rep["hazard_curves"]:
        out.append(
            f"X_{h['dimension']:<2}{_fmt(h['coefficient']):>12}{h['exponent']:>8.3f}"
            f"{h['a']:>12.4g}{h['b']:>12.4g}{h['q']:>12.4g}"
        )
    if rep["hazard_ratios"]:
        pct = round(100 * rep["level"])
        out.append("")
        out.append(f"{'X':<4}{'covariate':<24}{'HR':>8}   {pct}% interval")
        for r in rep["hazard_ratios"]:
            out.append(f"X_{r['dimension']:<2}{r['covariate']:<24}{r['ratio']:>8.3f}   ({r['lower']:.3f}, {r['upper']:.3f})")
    out.append("")
    out.append(f"Correlations (Fisher z, n = {rep['n']})")
    for c in rep["correlations"]:
        out.append(f"X_{c['i']}, X_{c['j']}: {c['r']:.3f} ({c['lower']:.3f}, {c['upper']:.3f})")
    for note in rep["notes"]:
        out.append(f"note: {note}")
    return "\n".join(out)


def cmd_report(args) -> int:
    try:
        data = json.loads(Path(args.fit_json).read_text())
        result = FitResult.from_dict(data)
    except OSError as exc:
        raise DataError(f"cannot read fit file {args.fit_json}: {exc.strerror}") from exc
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{args.fit_json} is not a valid fit file: {exc}") from exc
    rep = build_report(result, args.n, args.ci_level)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "report.json", rep)
    _write_csv(
        out / "hazard_curves.csv",
        ["dimension", "coefficient", "exponent", "a", "b", "q"],
        [[h["dimension"], _num(h["coefficient"]), _num(h["exponent"]), _num(h["a"]), _num(h["b"]), _num(h["q"])]
         for h in rep["hazard_curves"]],
    )
    _write_csv(
        out / "hazard_ratios.csv",
        ["dimension", "covariate", "delta", "ratio", "lower", "upper"],
        [[r["dimension"], r["covariate"], r["delta"], _num(r["ratio"]), _num(r["lower"]), _num(r["upper"])]
         for r in rep["hazard_ratios"]],
    )
    _write_csv(
        out / "correlations.csv",
        ["i", "j", "r", "lower", "upper"],
        [[c["i"], c["j"], _num(c["r"]), _num(c["lower"]), _num(c["upper"])] for c in rep["correlations"]],
    )
    print(report_tables(rep))
    return EXIT_OK


# -- km -----------------------------------------------------------------------


def cmd_km(args) -> int:
    cohort, report = load_cohort(args.cohort, CohortSchema.infer(read_header(args.cohort), covariates=()), args.tc)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for k in range(cohort.d):
        curve = km_cumhaz(km_survival(cohort.times[:, k], cohort.occurred[:, k]))
        path = write_curve_csv(curve, out / f"km_cumhaz_{k + 1}.csv", value_name="cumhaz")
        last = curve.values[-1] if len(curve) else 0.0
        print(f"X_{k + 1}: {len(curve)} steps, H(end) = {last:.4f} -> {path}")
    return EXIT_OK


# -- simulate -----------------------------------------------------------------


def _load_sim_source(args):
    if args.preset:
        return PRESETS[args.preset], None, {}
    if not args.params:
        raise DataError("give a params/fit JSON file or --preset")
    try:
        data = json.loads(Path(args.params).read_text())
    except OSError as exc:
        raise DataError(f"cannot read {args.params}: {exc.strerror}") from exc
    except ValueError as exc:
        raise DataError(f"{args.params}: invalid JSON: {exc}") from exc
    covs = {}
    if args.covariates:
        covs = json.loads(Path(args.covariates).read_text())
    covs = {**data.get("covariates", {}), **covs}
    dists = {name: CovariateDist.from_dict(v) for name, v in covs.items()}
    try:
        if data.get("kind") == "mvweibull-fit" or "coefs" in data or "params" in data:
            params = RegressionParams.from_dict(data["params"] if "params" in data else data)
            spec = RegressionSpec.from_dict(data["spec"]) if "spec" in data else RegressionSpec.intercept_only(params.d)
            if spec.is_intercept_only:
                return params.to_model_params(), None, {}
            return params, spec, dists
        return ModelParams.from_dict(data), None, {}
    except (KeyError, TypeError) as exc:
        raise DataError(f"{args.params}: missing or malformed parameter field {exc}") from exc


def cmd_simulate(args) -> int:
    params, spec, dists = _load_sim_source(args)
    config = SimConfig(params, args.n, args.tc, args.seed, spec, dists, args.min_time)
    cohort, hist = generate_dataset(config)
    out = Path(args.out) if args.out else Path(args.out_dir) / "cohort.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    write_cohort(cohort, out)
    hist_path = out.with_name(out.stem + "_patterns.json")
    _write_json(hist_path, {"n": args.n, "t_c": args.tc, "seed": args.seed, "pattern_histogram": hist})
    print(f"wrote {cohort.n} rows to {out}")
    for label, count in hist.items():
        print(f"  {label:<10}{count:>8}")
    return EXIT_OK


# -- entry point --------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tc", type=float, default=DEFAULT_CENSOR_TIME, help="censoring time in days (default 1096)")
    common.add_argument("--out-dir", default=".", help="directory for output files")
    common.add_argument("--ci-level", type=float, default=0.95)
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="mvweibull", description="Competing-risks multivariate Weibull analysis")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("fit", parents=[common], help="maximum-likelihood fit of a cohort CSV")
    p.add_argument("cohort")
    p.add_argument("--spec", help="covariate spec config (omit for constant scales)")
    p.add_argument("--gtol", type=float, default=1e-5)
    p.add_argument("--max-iter", type=int, default=1000)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("report", parents=[common], help="hazard curves, hazard ratios, correlations from fit.json")
    p.add_argument("fit_json")
    p.add_argument("--n", type=int, default=None, help="sample size for correlation intervals (default: fit n)")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("km", parents=[common], help="Kaplan-Meier cumulative hazard curves per event type")
    p.add_argument("cohort")
    p.set_defaults(func=cmd_km)

    p = sub.add_parser("simulate", parents=[common], help="simulate a censored cohort")
    p.add_argument("params", nargs="?", help="params JSON or fit.json")
    p.add_argument("--preset", choices=sorted(PRESETS))
    p.add_argument("--covariates", help="JSON mapping covariate name -> distribution")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", help="cohort CSV path (default OUT_DIR/cohort.csv)")
    p.add_argument("--min-time", type=float, default=1.0,
                   help="record event times below this as this many days (default 1; 0 = continuous)")
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if not 0 < args.ci_level < 1:
        parser.error("--ci-level must lie in (0, 1)")
    if args.tc <= 0:
        parser.error("--tc must be positive")
    try:
        return args.func(args)
    except (DataError, DomainError, IdentifiabilityError, SingularHessianError) as exc:
        print(f"mvweibull: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
