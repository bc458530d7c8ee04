"""Command-line front end.

Subcommands: evaluate, experiment, slope-plot, significance, simulate.
Exit codes: 0 success, 2 invalid input (with a file/line diagnostic),
3 degenerate statistics (e.g. the constrained set is empty).

Every JSON report embeds a run manifest (tool version, resolved config,
input digests, seed, timestamp); runs accompanied only by CSV output get
a manifest.json next to it. Set SOURCE_DATE_EPOCH to pin the manifest
timestamp for byte-reproducible reports.
"""

from __future__ import annotations

import argparse
import csv
import datetime
import hashlib
import io
import json
import os
import sys
from pathlib import Path

from . import __version__
from .cci import build_constrained_set, cci, slope_decomposition, write_slope_csv
from .correlations import ktau, pcc, srcc
from .data import (
    Scale,
    join,
    load_joined,
    load_predictions,
    load_ratings,
    save_joined,
    save_ratings,
)
from .errors import DataValidationError, DegenerateStatisticError
from .experiments import (
    METRIC_NAMES,
    ExperimentConfig,
    run_rater_sampling_experiment,
    run_restricted_range_experiment,
    run_sample_size_experiment,
    run_synthetic_experiment,
    simulate_correlated_pairs,
    simulate_rater_dataset,
    simulate_restricted_range_regions,
)
from .mos import CiPolicy, mos_per_condition, mos_per_file
from .significance import neighborhood_analysis

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_DEGENERATE = 3


def _sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return "sha256:" + h.hexdigest()


def _timestamp() -> str:
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch is not None:
        dt = datetime.datetime.fromtimestamp(int(epoch), tz=datetime.timezone.utc)
    else:
        dt = datetime.datetime.now(tz=datetime.timezone.utc)
    return dt.strftime("%Y-%m-%dT%H:%M:%SZ")


# Keys that change how a run executes but not what it computes; kept out of
# the manifest so reports from equivalent runs are byte-identical.
_EXECUTION_KEYS = ("func", "threads", "out_dir", "plot", "format")


def build_manifest(subcommand: str, args: argparse.Namespace, input_paths: list[str]) -> dict:
    config = {
        k: v
        for k, v in sorted(vars(args).items())
        if k not in _EXECUTION_KEYS and not k.startswith("_")
    }
    return {
        "tool": "ccieval",
        "version": __version__,
        "subcommand": subcommand,
        "config": config,
        "inputs": {p: _sha256(p) for p in input_paths},
        "seed": getattr(args, "seed", None),
        "timestamp": _timestamp(),
    }


def _scale_from_args(args) -> Scale | None:
    if args.scale_min is None and args.scale_max is None:
        return None
    if args.scale_min is None or args.scale_max is None:
        raise DataValidationError("--scale-min and --scale-max must be given together")
    return Scale(args.scale_min, args.scale_max, args.scale_kind)


def _policy_from_args(args) -> CiPolicy:
    df = "votes" if args.ci_df == "n" else "votes-1"
    return CiPolicy(divisor=args.ci_divisor, df_convention=df)


def _write_json(path: Path, doc: dict) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _parse_model_arg(spec: str) -> tuple[str, str]:
    if "=" in spec:
        name, path = spec.split("=", 1)
        return name, path
    return Path(spec).stem, spec


def _mos_table(dataset, granularity: str, policy: CiPolicy):
    return mos_per_file(dataset, policy) if granularity == "file" else mos_per_condition(dataset, policy)


def cmd_evaluate(args) -> int:
    scale = _scale_from_args(args)
    policy = _policy_from_args(args)
    dataset = load_ratings(args.ratings, scale=scale)
    table = _mos_table(dataset, args.granularity, policy)
    rows = []
    inputs = [args.ratings]
    for spec in args.predictions:
        name, path = _parse_model_arg(spec)
        inputs.append(path)
        preds = load_predictions(path, model_name=name, granularity=args.granularity)
        ev = join(table, preds)
        for metric in (pcc, srcc, ktau):
            mv = metric(ev.mos, ev.predictions)
            rows.append((name, mv.name, mv.value, mv.n_items, mv.n_pairs_used, ev.n_dropped))
        mv = cci(build_constrained_set(ev))
        rows.append((name, mv.name, mv.value, mv.n_items, mv.n_pairs_used, ev.n_dropped))
    manifest = build_manifest("evaluate", args, inputs)
    doc = {
        "manifest": manifest,
        "rows": [
            {
                "model": m,
                "metric": name,
                "value": value,
                "n_items": n_items,
                "n_pairs_used": n_pairs,
                "n_dropped": dropped,
            }
            for m, name, value, n_items, n_pairs, dropped in rows
        ],
    }
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        _write_json(out / "metrics.json", doc)
        with open(out / "metrics.csv", "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["model", "metric", "value", "n_items", "n_pairs_used"])
            for m, name, value, n_items, n_pairs, _ in rows:
                writer.writerow([m, name, repr(value), n_items, n_pairs])
    if args.format == "json":
        print(json.dumps(doc, indent=2, sort_keys=True))
    else:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["model", "metric", "value", "n_items", "n_pairs_used"])
        for m, name, value, n_items, n_pairs, _ in rows:
            writer.writerow([m, name, f"{value:.6f}", n_items, n_pairs])
        sys.stdout.write(buf.getvalue())
    return EXIT_OK


def _experiment_config(args) -> ExperimentConfig:
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            base = json.load(fh)
    else:
        base = {}
    kind_map = {
        "sample-size": "sample_size",
        "rater-sampling": "rater_sampling",
        "restricted-range": "restricted_range",
        "synthetic": "synthetic_correlation",
    }
    kind = kind_map[args.experiment]
    replicates = args.replicates
    if replicates is None:
        replicates = base.get("replicates", 100 if kind == "synthetic_correlation" else 1000)
    grid = None
    if args.grid:
        grid = tuple(int(v) for v in args.grid.split(","))
    elif base.get("grid"):
        grid = tuple(int(v) for v in base["grid"])
    metrics = tuple(m.strip().upper() for m in args.metrics.split(",")) if args.metrics else tuple(
        base.get("metrics", METRIC_NAMES)
    )
    regions = tuple(r.strip() for r in args.regions.split(",")) if args.regions else tuple(
        base.get("regions", ("Bad", "Excellent"))
    )
    return ExperimentConfig(
        kind=kind,
        seed=args.seed if args.seed is not None else base.get("seed", 0),
        replicates=replicates,
        grid=grid,
        split=args.split if args.split is not None else base.get("split", 2),
        regions=regions,
        metrics=metrics,
        threads=args.threads,
        population_n=args.n if args.n is not None else base.get("population_n", 1000),
        target_pcc=args.target_pcc
        if args.target_pcc is not None
        else base.get("target_pcc", 0.8),
    )


def _load_joined_for_experiment(args, policy: CiPolicy) -> tuple:
    if args.joined:
        return load_joined(args.joined), [args.joined]
    if not args.ratings or not args.predictions:
        raise DataValidationError("experiment needs --joined, or --ratings with --predictions")
    scale = _scale_from_args(args)
    dataset = load_ratings(args.ratings, scale=scale)
    name, path = _parse_model_arg(args.predictions)
    preds = load_predictions(path, model_name=name, granularity=args.granularity)
    table = _mos_table(dataset, args.granularity, policy)
    return join(table, preds), [args.ratings, path]


def cmd_experiment(args) -> int:
    policy = _policy_from_args(args)
    cfg = _experiment_config(args)
    inputs: list[str] = []
    if cfg.kind == "synthetic_correlation":
        report = run_synthetic_experiment(cfg)
    elif cfg.kind == "rater_sampling":
        if not args.ratings or not args.predictions:
            raise DataValidationError("rater sampling needs --ratings and --predictions")
        scale = _scale_from_args(args)
        dataset = load_ratings(args.ratings, scale=scale)
        name, path = _parse_model_arg(args.predictions)
        preds = load_predictions(path, model_name=name, granularity=args.granularity)
        inputs = [args.ratings, path]
        report = run_rater_sampling_experiment(dataset, preds, cfg, policy)
    else:
        ev, inputs = _load_joined_for_experiment(args, policy)
        if cfg.kind == "sample_size":
            report = run_sample_size_experiment(ev, cfg)
        else:
            report = run_restricted_range_experiment(ev, cfg)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    doc = report.to_json_dict()
    doc["manifest"] = build_manifest("experiment", args, inputs)
    _write_json(out / "report.json", doc)
    report.write_replicates_csv(str(out / "replicates.csv"))
    if args.plot:
        from . import plots

        if cfg.kind == "rater_sampling":
            plotted = plots.spread_curves(report, str(out / "report_std.svg"))
        elif cfg.kind == "restricted_range":
            plotted = plots.region_bars(report, str(out / "report_regions.svg"))
        else:
            plotted = plots.deviation_curves(report, str(out / "report_deviation.svg"))
        if not plotted:
            print("warning: no plottable data (all replicates missing)", file=sys.stderr)
    print(f"report written to {out / 'report.json'}")
    return EXIT_OK


def cmd_slope_plot(args) -> int:
    policy = _policy_from_args(args)
    scale = _scale_from_args(args)
    dataset = load_ratings(args.ratings, scale=scale)
    name, path = _parse_model_arg(args.predictions)
    preds = load_predictions(path, model_name=name, granularity=args.granularity)
    table = _mos_table(dataset, args.granularity, policy)
    ev = join(table, preds)
    pair_set = build_constrained_set(ev)
    value = cci(pair_set)  # raises EmptyConstrainedSetError -> exit 3
    points = slope_decomposition(pair_set)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_slope_csv(points, str(out / "slope.csv"))
    from . import plots

    plots.slope_scatter(points, str(out / "slope.svg"), title=f"{name}: CCI={value.value:.3f}")
    doc = {
        "manifest": build_manifest("slope-plot", args, [args.ratings, path]),
        "model": name,
        "cci": value.value,
        "n_pairs_used": value.n_pairs_used,
        "total_candidate_pairs": pair_set.total_candidate_pairs,
    }
    _write_json(out / "slope.json", doc)
    print(f"slope decomposition written to {out / 'slope.csv'}")
    return EXIT_OK


def cmd_significance(args) -> int:
    scale = _scale_from_args(args)
    dataset = load_ratings(args.ratings, scale=scale)
    anchors = None
    if args.anchors and args.anchors != "percentiles":
        anchors = [a.strip() for a in args.anchors.split(",")]
    matrix = neighborhood_analysis(
        dataset, anchors=anchors, alpha=args.alpha, correction=args.correction
    )
    doc = {
        "manifest": build_manifest("significance", args, [args.ratings]),
        "alpha": matrix.alpha,
        "anchors": list(matrix.anchors),
        "neighborhoods": {a: list(v) for a, v in matrix.neighborhoods().items()},
        "unpairable": [list(p) for p in matrix.unpairable],
    }
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        matrix.to_csv(str(out / "significance_matrix.csv"))
        _write_json(out / "neighborhoods.json", doc)
    print(json.dumps(doc, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_simulate(args) -> int:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if args.what == "correlated-pairs":
        ev = simulate_correlated_pairs(args.n, args.target_pcc, args.seed or 0)
        save_joined(ev, str(out / "joined.csv"))
        _write_json(out / "manifest.json", build_manifest("simulate", args, []))
        print(f"joined evaluation written to {out / 'joined.csv'}")
    elif args.what == "rater-dataset":
        scale = _scale_from_args(args) or Scale(1, 5, "discrete")
        dataset, latent = simulate_rater_dataset(
            args.stimuli, args.raters, args.bias_sd, args.noise_sd, scale, args.seed or 0
        )
        save_ratings(dataset, str(out / "ratings.csv"))
        with open(out / "latent.csv", "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["stimulus_id", "latent"])
            for sid, q in zip(dataset.stimuli, latent):
                writer.writerow([sid, repr(float(q))])
        _write_json(out / "manifest.json", build_manifest("simulate", args, []))
        print(f"ratings written to {out / 'ratings.csv'}")
    else:  # regions
        table = simulate_restricted_range_regions(
            n=args.n, target_pcc=args.target_pcc, regions=args.regions_count, seed=args.seed or 0
        )
        doc = table.to_json_dict()
        doc["manifest"] = build_manifest("simulate", args, [])
        _write_json(out / "regions.json", doc)
        from . import plots

        plots.region_table_bars(table, str(out / "regions.svg"))
        print(f"region table written to {out / 'regions.json'}")
    return EXIT_OK


def _add_common(parser: argparse.ArgumentParser, out_default=None) -> None:
    parser.add_argument("--out-dir", default=out_default, help="directory for report files")
    parser.add_argument("--format", choices=("json", "csv"), default="json")
    parser.add_argument("--seed", type=int, default=None, help="RNG seed (64-bit)")
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument("--ci-divisor", choices=("standard", "paper"), default="standard",
                        help="CI half-width denominator: std/sqrt(M) or std/M")
    parser.add_argument("--ci-df", choices=("n", "n-1"), default="n-1",
                        help="degrees of freedom for the t quantile")
    parser.add_argument("--scale-min", type=float, default=None)
    parser.add_argument("--scale-max", type=float, default=None)
    parser.add_argument("--scale-kind", choices=("discrete", "continuous"), default="discrete")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ccieval",
        description="Evaluate objective quality models against subjective MOS data "
        "with the Constrained Concordance Index and classical correlation metrics.",
    )
    parser.add_argument("--version", action="version", version=f"ccieval {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("evaluate", help="PCC/SRCC/KTAU/CCI for one or more models")
    p.add_argument("ratings", help="long-format ratings CSV")
    p.add_argument("predictions", nargs="+", help="prediction CSV(s), NAME=PATH or PATH")
    p.add_argument("--granularity", choices=("file", "condition"), default="file")
    _add_common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("experiment", help="bootstrap robustness experiments")
    p.add_argument("--experiment", required=True,
                   choices=("sample-size", "rater-sampling", "restricted-range", "synthetic"))
    p.add_argument("--ratings", default=None)
    p.add_argument("--predictions", default=None, help="prediction CSV, NAME=PATH or PATH")
    p.add_argument("--joined", default=None, help="pre-joined (id,mos,ci95,prediction) CSV")
    p.add_argument("--granularity", choices=("file", "condition"), default="file")
    p.add_argument("--grid", default=None, help="comma-separated sizes (default: protocol grid)")
    p.add_argument("--replicates", type=int, default=None)
    p.add_argument("--metrics", default=None, help="comma-separated subset of PCC,SRCC,KTAU,CCI")
    p.add_argument("--split", type=int, choices=(2, 4), default=None)
    p.add_argument("--regions", default=None, help="comma-separated subset of Bad,Excellent")
    p.add_argument("--n", type=int, default=None, help="synthetic population size")
    p.add_argument("--target-pcc", type=float, default=None)
    p.add_argument("--config", default=None, help="JSON file with config defaults")
    p.add_argument("--plot", action="store_true")
    _add_common(p, out_default=".")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("slope-plot", help="CCI slope decomposition scatter")
    p.add_argument("--ratings", required=True)
    p.add_argument("--predictions", required=True)
    p.add_argument("--granularity", choices=("file", "condition"), default="file")
    _add_common(p, out_default=".")
    p.set_defaults(func=cmd_slope_plot)

    p = sub.add_parser("significance", help="anchor-condition Wilcoxon neighborhoods")
    p.add_argument("--ratings", required=True)
    p.add_argument("--anchors", default="percentiles",
                   help='"percentiles" (5/50/95) or comma-separated condition ids')
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--correction", choices=("holm", "bonferroni", "none"), default="holm")
    _add_common(p)
    p.set_defaults(func=cmd_significance)

    p = sub.add_parser("simulate", help="generate synthetic datasets")
    p.add_argument("--what", required=True,
                   choices=("correlated-pairs", "rater-dataset", "regions"))
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--target-pcc", type=float, default=0.8)
    p.add_argument("--stimuli", type=int, default=100)
    p.add_argument("--raters", type=int, default=24)
    p.add_argument("--bias-sd", type=float, default=0.3)
    p.add_argument("--noise-sd", type=float, default=0.7)
    p.add_argument("--regions-count", type=int, default=3)
    _add_common(p, out_default=".")
    p.set_defaults(func=cmd_simulate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as err:
        print(f"error: file not found: {err.filename}", file=sys.stderr)
        return EXIT_INPUT
    except DegenerateStatisticError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_DEGENERATE
    except DataValidationError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
