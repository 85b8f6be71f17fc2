"""Command line front end.

Subcommands: fit, select, bench, simulate. Exit codes: 0 success, 2 IO
failure, 3 invalid input or settings, 4 numerical failure. All randomness
is controlled by --seed; repeated invocations with the same arguments
produce identical output files.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import __version__
from .em import WmmConfig, fit as fit_wmm
from .errors import ConfigError, NumericalError, NumericalFailure, ValidationError
from .features import panel_features
from .panel_io import panel_to_csv, read_panel, write_panel
from .selection import group_ic, select_G
from .simulate import (
    DEFAULT_METHODS,
    ArmaSpec,
    run_benchmark,
    scenario,
    simulate_panel,
)
from .yule_walker import assemble_armm


def _fail(msg: str) -> None:
    print(f"armm: {msg}", file=sys.stderr)


def _write_text(path, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def _dump_json(path, payload) -> None:
    _write_text(path, json.dumps(payload, indent=2) + "\n")


def _add_common_fit_flags(p) -> None:
    p.add_argument("panel", help="panel CSV file (header id,t,value)")
    p.add_argument("--lags", type=int, default=2, help="AR order; window is lags+1")
    p.add_argument("--variant", default="em2", choices=["em1", "em2"],
                   help="em1: lengths as degrees of freedom; em2: per-group factor")
    p.add_argument("--restarts", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-iter", type=int, default=500)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--lambda-upper", type=float, default=1.0)
    p.add_argument("--normalized", action="store_true",
                   help="fit on autocorrelation features instead of autocovariances")
    p.add_argument("--no-center", action="store_true",
                   help="skip mean removal (data already centered)")


def _features_from_args(args):
    panel = read_panel(args.panel)
    if args.lags < 1:
        raise ConfigError(f"--lags must be at least 1, got {args.lags}")
    window = args.lags + 1
    feats = panel_features(
        panel, window, do_center=not args.no_center, normalized=args.normalized
    )
    return panel, feats, window


def _config_from_args(args, window, n_groups) -> WmmConfig:
    return WmmConfig(
        n_groups=n_groups,
        window=window,
        variant=args.variant,
        max_iter=args.max_iter,
        tol=args.tol,
        lambda_upper=args.lambda_upper,
        n_restarts=args.restarts,
        seed=args.seed,
    )


def cmd_fit(args) -> int:
    _, feats, window = _features_from_args(args)
    if args.groups < 1:
        raise ConfigError(f"--groups must be positive, got {args.groups}")
    config = _config_from_args(args, window, args.groups)
    result = fit_wmm(feats, config)
    model = assemble_armm(result, feats)
    aic, bic, n_params = group_ic(result, feats, literal_r=args.literal_params)
    sigma2 = {}
    for grp in model.groups:
        sigma2.update(grp.sigma2)
    payload = {
        "version": __version__,
        "command": "fit",
        "config": {
            "panel": args.panel,
            "n_groups": args.groups,
            "lags": args.lags,
            "variant": args.variant,
            "max_iter": args.max_iter,
            "tol": args.tol,
            "lambda_upper": args.lambda_upper,
            "n_restarts": args.restarts,
            "seed": args.seed,
            "normalized": args.normalized,
            "centered": not args.no_center,
        },
        "converged": result.converged,
        "n_iter": result.n_iter,
        "n_failed_restarts": result.n_failed_restarts,
        "loglik": result.loglik,
        "loglik_trace": [float(v) for v in result.loglik_trace],
        "pi": [float(v) for v in result.pi],
        "lambda": [float(v) for v in result.lam],
        "groups": [
            {
                "group": grp.g,
                "weight": grp.weight,
                "phi": [float(v) for v in grp.phi],
                "phi_se": [float(v) for v in grp.phi_se],
                "coef_cov": [[float(v) for v in row] for row in grp.coef_cov],
                "innovation_scale": grp.innovation_scale,
            }
            for grp in model.groups
        ],
        "labels": model.labels,
        "sigma2": {sid: float(v) for sid, v in sorted(sigma2.items())},
        "ic": {"aic": aic, "bic": bic, "n_params": n_params},
    }
    _dump_json(args.out, payload)
    return 0


def cmd_select(args) -> int:
    _, feats, window = _features_from_args(args)
    if args.gmin < 1:
        raise ConfigError(f"--gmin must be positive, got {args.gmin}")
    if args.gmin > args.gmax:
        raise ConfigError(f"--gmin {args.gmin} exceeds --gmax {args.gmax}")
    config = _config_from_args(args, window, args.gmin)
    report = select_G(
        feats,
        range(args.gmin, args.gmax + 1),
        config,
        literal_r=args.literal_params,
    )
    if not report.entries:
        raise NumericalFailure(
            "no candidate group count could be fitted: "
            + "; ".join(f"G={g}: {m}" for g, m in report.failed.items())
        )
    lines = ["G,BIC,AIC"]
    for e in report.entries:
        lines.append(f"{e.n_groups},{e.bic!r},{e.aic!r}")
    sys.stdout.write("\n".join(lines) + "\n")
    selected = report.best_bic if args.criterion == "bic" else report.best_aic
    _fail(f"selected G={selected} by {args.criterion}")
    if args.out:
        payload = {
            "version": __version__,
            "command": "select",
            "criterion": args.criterion,
            "selected_G": selected,
            "selected": {"aic": report.best_aic, "bic": report.best_bic},
            "entries": [
                {
                    "n_groups": e.n_groups,
                    "aic": e.aic,
                    "bic": e.bic,
                    "n_params": e.n_params,
                    "converged": e.fit.converged,
                    "loglik": e.fit.loglik,
                }
                for e in report.entries
            ],
            "failed": {str(g): msg for g, msg in report.failed.items()},
            "config": {
                "panel": args.panel,
                "gmin": args.gmin,
                "gmax": args.gmax,
                "lags": args.lags,
                "variant": args.variant,
                "n_restarts": args.restarts,
                "seed": args.seed,
                "normalized": args.normalized,
                "centered": not args.no_center,
            },
        }
        _dump_json(args.out, payload)
    return 0


def _parse_int_list(raw: str, what: str) -> list[int]:
    out = []
    for part in raw.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            out.append(int(part))
        except ValueError:
            raise ConfigError(f"{what} must be a comma list of integers, got {part!r}") from None
    if not out:
        raise ConfigError(f"{what} is empty")
    return out


def cmd_bench(args) -> int:
    cases = _parse_int_list(args.cases, "--cases")
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    report = run_benchmark(
        cases,
        methods,
        reps=args.reps,
        seed=args.seed,
        window=args.lags + 1,
        n_groups=args.groups,
        n_restarts=args.restarts,
        workers=args.workers,
    )
    if args.out:
        with open(f"{args.out}.csv", "w", encoding="utf-8") as fh:
            fh.write(report.to_tidy_csv())
        with open(f"{args.out}_table.csv", "w", encoding="utf-8") as fh:
            fh.write(report.to_table_csv())
        _dump_json(f"{args.out}_meta.json", report.metadata())
        _fail(
            f"wrote {args.out}.csv, {args.out}_table.csv, {args.out}_meta.json"
        )
    else:
        sys.stdout.write(report.to_tidy_csv())
    return 0


def _specs_from_file(path) -> list[ArmaSpec]:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as err:
            raise ConfigError(f"spec file {path}: invalid JSON ({err})") from None
    if not isinstance(raw, list) or not raw:
        raise ConfigError(f"spec file {path}: expected a non-empty JSON list")
    specs = []
    for i, entry in enumerate(raw):
        if not isinstance(entry, dict):
            raise ConfigError(f"spec file {path}: entry {i} is not an object")
        unknown = set(entry) - {"phi", "theta", "sigma2", "n", "count", "group"}
        if unknown:
            raise ConfigError(
                f"spec file {path}: entry {i} has unknown keys {sorted(unknown)}"
            )
        try:
            specs.append(
                ArmaSpec(
                    phi=tuple(entry.get("phi", ())),
                    theta=tuple(entry.get("theta", ())),
                    sigma2=float(entry["sigma2"]),
                    n=int(entry["n"]),
                    count=int(entry.get("count", 1)),
                    group=int(entry.get("group", 1)),
                )
            )
        except KeyError as err:
            raise ConfigError(f"spec file {path}: entry {i} missing key {err}") from None
    return specs


def cmd_simulate(args) -> int:
    if (args.case is None) == (args.spec is None):
        raise ConfigError("give exactly one of --case or --spec")
    if args.case is not None:
        specs = scenario(args.case).specs
    else:
        specs = _specs_from_file(args.spec)
    rng = np.random.default_rng(args.seed)
    panel, labels = simulate_panel(specs, rng)
    text = panel_to_csv(panel)
    _write_text(args.out, text)
    if args.labels_out:
        lines = ["id,group"] + [f"{s.id},{g}" for s, g in zip(panel, labels)]
        with open(args.labels_out, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="armm",
        description="Cluster stationary series by their autocovariance structure.",
    )
    parser.add_argument("--version", action="version", version=f"armm {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p_fit = sub.add_parser("fit", help="fit a mixture with a fixed group count")
    _add_common_fit_flags(p_fit)
    p_fit.add_argument("--groups", type=int, required=True)
    p_fit.add_argument("--literal-params", action="store_true",
                       help="use G*K-1 as the criterion parameter count")
    p_fit.add_argument("--out", help="write the JSON report here (default stdout)")
    p_fit.set_defaults(func=cmd_fit)

    p_sel = sub.add_parser("select", help="rank group counts by AIC/BIC")
    _add_common_fit_flags(p_sel)
    p_sel.add_argument("--gmin", type=int, default=1)
    p_sel.add_argument("--gmax", type=int, default=6)
    p_sel.add_argument("--criterion", default="bic", choices=["aic", "bic"])
    p_sel.add_argument("--literal-params", action="store_true",
                       help="use G*K-1 as the criterion parameter count")
    p_sel.add_argument("--out", help="write a JSON report here as well")
    p_sel.set_defaults(func=cmd_select)

    p_bench = sub.add_parser("bench", help="replay simulation scenarios")
    p_bench.add_argument("--cases", default="1,2,3,4,5,6",
                         help="comma list of scenario ids")
    p_bench.add_argument("--methods", default=",".join(DEFAULT_METHODS))
    p_bench.add_argument("--reps", type=int, default=200)
    p_bench.add_argument("--seed", type=int, default=0)
    p_bench.add_argument("--lags", type=int, default=2)
    p_bench.add_argument("--groups", type=int, default=2)
    p_bench.add_argument("--restarts", type=int, default=10)
    p_bench.add_argument("--workers", type=int, default=None,
                         help="worker processes; default: ARMM_THREADS or one per CPU")
    p_bench.add_argument("--out", help="output prefix for CSV tables and metadata")
    p_bench.set_defaults(func=cmd_bench)

    p_sim = sub.add_parser("simulate", help="write a synthetic panel")
    p_sim.add_argument("--case", type=int, help="stock scenario id (1..6)")
    p_sim.add_argument("--spec", help="JSON file with a list of block specs")
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--out", help="panel CSV path (default stdout)")
    p_sim.add_argument("--labels-out", help="also write the true id,group table")
    p_sim.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except OSError as err:
        _fail(f"io error: {err}")
        return 2
    except ValidationError as err:
        _fail(f"invalid input: {err}")
        return 3
    except NumericalError as err:
        _fail(f"numerical failure: {err}")
        return 4


if __name__ == "__main__":
    sys.exit(main())
