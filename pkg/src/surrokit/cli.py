"""Command-line pipeline: simulate corpora, analyze panels, evaluate decisions.

Subcommands::

    surrokit simulate --config cfg.json --out-dir corpus/
    surrokit analyze --panel exp.csv --regime pretest --T 14 --out exp.estimates.json
    surrokit analyze --panel-dir corpus/ --regime running-mean --out estimates/
    surrokit evaluate --estimates estimates/ --out report.json

Numeric outputs are pure functions of the input files and flags: floats are
serialized with full round-trip precision, directory scans are sorted, and
worker pools merge results in deterministic order. Every run ends by
atomically writing a manifest recording the command, inputs, outputs, and
tool version. Exit codes: 0 success, 2 usage, 3 data validation failure,
4 numerical failure.

Set SURROKIT_LOG (e.g. DEBUG, INFO) to control log verbosity.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import __version__
from .errors import DataValidationError, NumericalError, SurrokitError
from .estimators import (
    DEFAULT_ALPHA,
    direct_effect,
    estimate_to_record,
    record_to_estimate,
    surrogate_effect,
)
from .evaluation import (
    CLASS_ORDER,
    capacity_gain,
    classify_pairs,
    confusion,
    extra_experiments_needed,
    launch_metrics,
    scaled_distribution,
)
from .panel import DEFAULT_HORIZON, load_panel, write_panel
from .simulator import load_config, simulate_experiment
from .surrogate import (
    fit_pretest,
    fit_similar,
    model_from_dict,
    model_to_dict,
    running_mean_model,
)

logger = logging.getLogger("surrokit")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

REGIMES = ("pretest", "similar", "running-mean")


def _dump_json(payload) -> str:
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def _write_atomic(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _write_manifest(path: Path, command: str, started: float, fields: dict) -> None:
    manifest = {
        "command": command,
        "tool_version": __version__,
        "duration_seconds": time.perf_counter() - started,
        **fields,
    }
    _write_atomic(path, _dump_json(manifest))


# --- simulate ---

def _simulate_one(task: tuple) -> tuple[str, dict[str, float]]:
    config, index, out_dir = task
    experiment = simulate_experiment(config, index)
    write_panel(experiment.panel, Path(out_dir) / f"{experiment.panel.experiment_id}.csv")
    return experiment.panel.experiment_id, experiment.true_effects


def _run_pool(worker, tasks: list, jobs: int) -> list:
    if jobs <= 1 or len(tasks) <= 1:
        return [worker(task) for task in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(worker, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))


def cmd_simulate(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    config = load_config(args.config)
    if args.seed is not None:
        config = dataclasses.replace(config, seed=args.seed)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    tasks = [(config, index, str(out_dir)) for index in range(config.n_experiments)]
    results = _run_pool(_simulate_one, tasks, args.jobs)

    ground_truth = {experiment_id: effects for experiment_id, effects in results}
    truth_path = out_dir / "ground_truth.json"
    _write_atomic(truth_path, _dump_json(ground_truth))
    logger.info("simulated %d experiments into %s", len(results), out_dir)

    _write_manifest(
        out_dir / "manifest.json",
        "simulate",
        started,
        {
            "config_path": str(args.config),
            "out_dir": str(out_dir),
            "seed": config.seed,
            "alpha": None,
            "T": None,
            "horizon": config.horizon,
            "outputs": sorted(f"{eid}.csv" for eid, _ in results) + ["ground_truth.json"],
        },
    )
    return EXIT_OK


# --- analyze ---

def _panel_records(
    panel_path: str,
    regime: str,
    t_values: list[int],
    horizon: int,
    donor_models: dict[int, dict] | None,
    sweep: bool,
) -> list[dict]:
    panel = load_panel(panel_path, horizon=horizon)
    arms = sorted(arm.name for arm in panel.treatment_arms)
    records = []
    direct_horizons = list(range(1, horizon + 1)) if sweep else [horizon]
    for days in direct_horizons:
        for arm in arms:
            records.append(estimate_to_record(direct_effect(panel, arm, days)))
    for order in t_values:
        if regime == "pretest":
            model = fit_pretest(panel, order)
        elif regime == "similar":
            model = model_from_dict(donor_models[order])
        else:
            model = running_mean_model(order)
        for arm in arms:
            records.append(estimate_to_record(surrogate_effect(model, panel, arm)))
    records.sort(key=lambda r: (r["kind"], r["T"], r["arm"]))
    return records


def _analyze_one(task: tuple) -> str:
    panel_path, out_path, regime, t_values, horizon, donor_models, sweep = task
    records = _panel_records(panel_path, regime, t_values, horizon, donor_models, sweep)
    _write_atomic(Path(out_path), _dump_json(records))
    return str(out_path)


def cmd_analyze(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    horizon = args.horizon
    t_values = list(range(1, horizon + 1)) if args.sweep_T else [args.T]

    donor_models: dict[int, dict] | None = None
    if args.regime == "similar":
        donor = load_panel(args.donor, horizon=horizon)
        donor_models = {
            order: model_to_dict(fit_similar(donor, order)) for order in t_values
        }

    if args.panel is not None:
        out_path = Path(args.out)
        tasks = [
            (args.panel, str(out_path), args.regime, t_values, horizon, donor_models, args.sweep_T)
        ]
        manifest_path = out_path.with_name(out_path.name + ".manifest.json")
        inputs = {"panel_path": args.panel}
    else:
        panel_files = sorted(Path(args.panel_dir).glob("*.csv"))
        if not panel_files:
            raise DataValidationError(f"no panel CSVs found in {args.panel_dir}")
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        tasks = [
            (
                str(path),
                str(out_dir / f"{path.stem}.estimates.json"),
                args.regime,
                t_values,
                horizon,
                donor_models,
                args.sweep_T,
            )
            for path in panel_files
        ]
        manifest_path = out_dir / "manifest.json"
        inputs = {"panel_dir": args.panel_dir}

    outputs = _run_pool(_analyze_one, tasks, args.jobs)
    logger.info("analyzed %d panel(s) under regime %s", len(outputs), args.regime)

    _write_manifest(
        manifest_path,
        "analyze",
        started,
        {
            **inputs,
            "donor_path": args.donor,
            "regime": args.regime,
            "sweep_T": args.sweep_T,
            "out": str(args.out),
            "seed": args.seed,
            "alpha": args.alpha,
            "T": args.T,
            "horizon": horizon,
            "outputs": sorted(Path(p).name for p in outputs),
        },
    )
    return EXIT_OK


# --- evaluate ---

def _load_estimates(estimates_dir: str) -> tuple[list, list]:
    files = sorted(Path(estimates_dir).glob("*.estimates.json"))
    if not files:
        raise DataValidationError(
            f"no *.estimates.json files found in {estimates_dir}"
        )
    direct, surrogate = [], []
    for path in files:
        try:
            records = json.loads(path.read_text(encoding="utf-8"))
            for record in records:
                estimate = record_to_estimate(record)
                (direct if estimate.kind.method == "direct" else surrogate).append(estimate)
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise DataValidationError(f"bad estimates file {path.name}: {exc}") from None
    return direct, surrogate


def cmd_evaluate(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    direct, surrogate = _load_estimates(args.estimates)
    pairs = classify_pairs(direct, surrogate, args.alpha)
    matrix = confusion(pairs)
    metrics = launch_metrics(matrix)

    by_key_direct = {(e.experiment_id, e.arm.name): e.point for e in direct}
    by_key_surrogate = {(e.experiment_id, e.arm.name): e.point for e in surrogate}
    keys = sorted(by_key_direct)
    direct_points = [by_key_direct[k] for k in keys]
    surrogate_points = [by_key_surrogate[k] for k in keys]
    differences = [s - d for s, d in zip(surrogate_points, direct_points)]

    direct_summary = scaled_distribution(direct_points)
    surrogate_summary = scaled_distribution(surrogate_points, scale_by=direct_points)
    diff_summary = scaled_distribution(differences)

    out_path = Path(args.out)
    scaled_path = out_path.with_name(out_path.stem + "_scaled_values.csv")
    _write_atomic(
        scaled_path,
        "scaled_difference\n"
        + "".join(repr(v) + "\n" for v in diff_summary.scaled_values.tolist()),
    )

    gain = capacity_gain(args.long_cycle_days, args.short_cycle_days)
    extra = (
        extra_experiments_needed(metrics.recall)
        if metrics.recall is not None and metrics.recall > 0
        else None
    )

    def summarize(summary) -> dict:
        return {
            "n": summary.n,
            "mean": summary.mean,
            "std_dev": summary.std_dev,
            "excess_kurtosis": summary.excess_kurtosis,
        }

    report = {
        "alpha": args.alpha,
        "n_pairs": len(pairs),
        "class_order": [cls.value for cls in CLASS_ORDER],
        "confusion": [list(row) for row in matrix.counts],
        "precision": metrics.precision,
        "recall": metrics.recall,
        "agreement": metrics.agreement,
        "ns_rates": {
            "direct": metrics.direct_ns_rate,
            "surrogate": metrics.surrogate_ns_rate,
        },
        "false_launch_negatives": metrics.false_launch_negatives,
        "kurtosis": {
            "direct": direct_summary.excess_kurtosis,
            "surrogate": surrogate_summary.excess_kurtosis,
            "differences": diff_summary.excess_kurtosis,
        },
        "distributions": {
            "direct": summarize(direct_summary),
            "surrogate": summarize(surrogate_summary),
            "differences": summarize(diff_summary),
        },
        "capacity": {
            "long_cycle_days": args.long_cycle_days,
            "short_cycle_days": args.short_cycle_days,
            "capacity_gain": gain,
            "extra_experiments_needed": extra,
        },
        "scaled_values_path": scaled_path.name,
    }
    _write_atomic(out_path, _dump_json(report))
    logger.info("evaluated %d decision pairs", len(pairs))

    _write_manifest(
        out_path.with_name(out_path.name + ".manifest.json"),
        "evaluate",
        started,
        {
            "estimates_dir": args.estimates,
            "out": str(out_path),
            "seed": args.seed,
            "alpha": args.alpha,
            "T": None,
            "horizon": args.horizon,
            "outputs": [out_path.name, scaled_path.name],
        },
    )
    return EXIT_OK


# --- argument parsing ---

def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="override the RNG seed")
    common.add_argument("--jobs", type=int, default=1, help="worker processes")
    common.add_argument("--alpha", type=float, default=DEFAULT_ALPHA,
                        help="two-sided significance level")
    common.add_argument("--horizon", type=int, default=DEFAULT_HORIZON,
                        help="long-term horizon in days")

    parser = argparse.ArgumentParser(
        prog="surrokit",
        description="Surrogate-index A/B-test pipeline: simulate, analyze, evaluate.",
    )
    parser.add_argument("--version", action="version", version=f"surrokit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", parents=[common],
                           help="generate a synthetic experiment corpus")
    p_sim.add_argument("--config", required=True, help="SimConfig JSON file")
    p_sim.add_argument("--out-dir", required=True, help="corpus output directory")
    p_sim.set_defaults(func=cmd_simulate)

    p_an = sub.add_parser("analyze", parents=[common],
                          help="estimate direct and surrogate effects")
    panel_group = p_an.add_mutually_exclusive_group(required=True)
    panel_group.add_argument("--panel", help="one panel CSV")
    panel_group.add_argument("--panel-dir", help="directory of panel CSVs")
    p_an.add_argument("--regime", required=True, choices=REGIMES,
                      help="surrogate training regime")
    p_an.add_argument("--donor", default=None,
                      help="donor panel CSV (required for --regime similar)")
    p_an.add_argument("--T", type=int, default=14, help="surrogate model order")
    p_an.add_argument("--sweep-T", action="store_true",
                      help="emit records for every T in 1..horizon")
    p_an.add_argument("--out", required=True,
                      help="output estimates file (--panel) or directory (--panel-dir)")
    p_an.set_defaults(func=cmd_analyze)

    p_ev = sub.add_parser("evaluate", parents=[common],
                          help="decision-agreement report from estimate files")
    p_ev.add_argument("--estimates", required=True,
                      help="directory of *.estimates.json files")
    p_ev.add_argument("--out", required=True, help="report JSON path")
    p_ev.add_argument("--long-cycle-days", type=float, default=56.0,
                      help="long testing cycle length for capacity figures")
    p_ev.add_argument("--short-cycle-days", type=float, default=14.0,
                      help="short testing cycle length for capacity figures")
    p_ev.set_defaults(func=cmd_evaluate)
    return parser


def _validate_usage(parser: argparse.ArgumentParser, args: argparse.Namespace) -> None:
    if not 0.0 < args.alpha < 1.0:
        parser.error(f"--alpha must be in (0, 1), got {args.alpha}")
    if args.horizon < 1:
        parser.error(f"--horizon must be positive, got {args.horizon}")
    if args.jobs < 1:
        parser.error(f"--jobs must be positive, got {args.jobs}")
    if args.command == "analyze":
        if args.T < 1:
            parser.error(f"--T must be positive, got {args.T}")
        if not args.sweep_T and args.T > args.horizon:
            parser.error(f"--T {args.T} exceeds --horizon {args.horizon}")
        if args.regime == "similar" and args.donor is None:
            parser.error("--regime similar requires --donor")
        if args.regime != "similar" and args.donor is not None:
            parser.error("--donor is only valid with --regime similar")


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(
        level=os.environ.get("SURROKIT_LOG", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    parser = _build_parser()
    args = parser.parse_args(argv)
    _validate_usage(parser, args)
    try:
        return args.func(args)
    except DataValidationError as exc:
        print(f"surrokit: data validation error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"surrokit: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except SurrokitError as exc:
        print(f"surrokit: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"surrokit: io error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
