"""Command-line entry points.

Subcommands: check, dynamics, heatmap, noise-compare, q-sweep, concentration,
decompose. Exit codes: 0 success, 1 usage/config error, 2 run aborted on
non-finite values, 3 assertion failure under --assert.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import __version__
from .config import ConfigError, FullConfig, parse_config
from .data import SignalSpec
from .experiments import (
    SweepGrid,
    axis_aligned_spec,
    run_dynamics,
    run_heatmap,
    run_noise_comparison,
    run_q_sweep,
)
from .io import EmitError, RunArtifactFiles, emit_outputs, now_utc, write_json
from .theory import check_assumptions, concentration_suite

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_ABORTED = 2
EXIT_ASSERT = 3

_COMMANDS = ("check", "dynamics", "heatmap", "noise-compare", "q-sweep",
             "concentration", "decompose")


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse default exits 2; we map usage errors to 1
        raise _UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="lngd", description=__doc__)
    parser.add_argument("--version", action="version", version=f"lngd {__version__}")
    sub = parser.add_subparsers(dest="command")
    for name in _COMMANDS:
        p = sub.add_parser(name, prog=f"lngd {name}")
        if name == "decompose":
            p.add_argument("--run", required=True, help="directory of a saved run")
        else:
            p.add_argument("--config", required=True, help="JSON config file")
        p.add_argument("--seed", type=int, default=None, help="override config seed")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--assert", dest="assert_", action="store_true",
                       help="exit 3 if the command's verdicts fail")
        p.add_argument("--force", action="store_true", help="overwrite existing outputs")
        if name == "heatmap":
            p.add_argument("--workers", type=int, default=None)
        if name == "concentration":
            p.add_argument("--trials", type=int, default=None)
    return parser


def _spec_of(config: FullConfig) -> SignalSpec:
    return axis_aligned_spec(config.mu_scale, config.sigma_p, config.d)


def _out_dir(args, config: FullConfig) -> Path:
    if args.out:
        return Path(args.out)
    root = Path(os.environ.get("LNGD_OUT_ROOT", "runs"))
    return root / f"{args.command.replace('-', '_')}_seed{config.seed}"


def _make_snapshot_observers(config: FullConfig):
    sinks = {"standard": [], "label_noise": []}

    def make(label):
        sink = sinks[label]

        def observer(step, net, state, dataset, row):
            if step % config.coeff_stride == 0 or step == config.steps:
                sink.append((step, state.gamma.copy(), state.rho_bar.copy(),
                             state.rho_under.copy()))

        return observer

    return sinks, {label: make(label) for label in sinks}


def _cmd_check(args) -> int:
    config = parse_config(args.config, overrides={"seed": args.seed})
    report = check_assumptions(_spec_of(config), config.n, config.m, config.eta,
                               config.sigma_0, config.p)
    print(f"assumption report for {args.config} (all_passed={report.all_passed})")
    for item in report.items:
        flag = "ok  " if item.passed else "FAIL"
        print(f"  [{flag}] {item.item}: lhs={item.lhs:.6g} rhs={item.rhs:.6g} "
              f"ratio={item.ratio:.6g}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        write_json(report.to_dict(), out / "assumption_report.json")
    return EXIT_OK  # report-only by contract, even when items fail


def _emit_dynamics(result, config: FullConfig, sinks, args, command: str,
                   started: str) -> dict:
    artifacts = RunArtifactFiles(config=config, command=command, started_at=started)
    for label, arm in (("standard", result.standard), ("label_noise", result.label_noise)):
        if arm.trace is not None:
            artifacts.traces[f"trace_{label}.csv"] = arm.trace
        if sinks.get(label):
            artifacts.coefficient_snapshots[f"coefficients_{label}.csv"] = sinks[label]
    artifacts.reports = {"dynamics": result.reports}
    return emit_outputs(artifacts, _out_dir(args, config), force=args.force)


def _cmd_dynamics(args) -> int:
    config = parse_config(args.config, overrides={"seed": args.seed})
    started = now_utc()
    sinks, observers = _make_snapshot_observers(config)
    result = run_dynamics(
        _spec_of(config), n=config.n, m=config.m, q=config.q, sigma_0=config.sigma_0,
        eta=config.eta, steps=config.steps, noise=config.noise, seed=config.seed,
        log_stride=config.log_stride, n_test=config.n_test, epsilon=config.epsilon,
        c_test=config.c_test, observers=observers,
    )
    _emit_dynamics(result, config, sinks, args, "dynamics", started)
    aborted = result.standard.aborted or result.label_noise.aborted
    for label, arm in (("standard", result.standard), ("label_noise", result.label_noise)):
        if arm.aborted:
            print(f"{label}: ABORTED at step {arm.trace.aborted_at}: {arm.abort_reason}")
        else:
            print(f"{label}: final clean loss {arm.final_clean_loss:.4f}, "
                  f"test accuracy {arm.final_test_accuracy:.4f}")
    if aborted:
        return EXIT_ABORTED
    if args.assert_:
        verdicts = [result.reports[label]["verdicts"]["passed"]
                    for label in ("standard", "label_noise")]
        if not all(verdicts):
            print("assert: empirical verdicts failed", file=sys.stderr)
            return EXIT_ASSERT
    return EXIT_OK


def _cmd_heatmap(args) -> int:
    config = parse_config(args.config, overrides={"seed": args.seed})
    if config.grid is None:
        raise ConfigError("heatmap requires a 'grid' section in the config")
    started = now_utc()
    grid = SweepGrid(
        snr_values=tuple(config.grid["snr_values"]),
        n_values=tuple(config.grid["n_values"]),
        steps=config.grid["steps"],
        eta=config.grid["eta"],
        seeds_per_cell=config.grid["seeds_per_cell"],
        d=config.d, m=config.m, q=config.q, sigma_0=config.sigma_0,
        sigma_p=config.sigma_p, p=config.p, n_test=config.n_test,
        master_seed=config.seed,
    )
    workers = args.workers if args.workers else config.workers
    result = run_heatmap(grid, workers=workers)
    cells = sorted(result.cells.items())
    worst_gap = min(
        (c.label_noise_mean - c.standard_mean for _, c in cells if c.standard_accuracies),
        default=float("nan"),
    )
    report = {
        "grid": {"snr_values": list(grid.snr_values), "n_values": list(grid.n_values),
                 "steps": grid.steps, "eta": grid.eta,
                 "seeds_per_cell": grid.seeds_per_cell},
        "worst_label_noise_deficit": worst_gap,
        "cells": [
            {"snr": c.snr, "n": c.n, "standard_mean": c.standard_mean,
             "label_noise_mean": c.label_noise_mean, "errors": c.errors}
            for _, c in cells
        ],
    }
    artifacts = RunArtifactFiles(config=config, command="heatmap", started_at=started,
                                 reports={"heatmap": report}, heatmap=result)
    emit_outputs(artifacts, _out_dir(args, config), force=args.force)
    for _, c in cells:
        print(f"snr={c.snr:g} n={c.n}: standard {c.standard_mean:.4f} "
              f"label_noise {c.label_noise_mean:.4f}")
    if any(c.errors for _, c in cells):
        return EXIT_ABORTED
    if args.assert_ and not (worst_gap >= -0.02):
        print(f"assert: label-noise GD worse than standard GD by {-worst_gap:.4f} "
              "in some cell", file=sys.stderr)
        return EXIT_ASSERT
    return EXIT_OK


def _cmd_noise_compare(args) -> int:
    config = parse_config(args.config, overrides={"seed": args.seed})
    if not config.noise_list:
        raise ConfigError("noise-compare requires a 'noise_list' section in the config")
    started = now_utc()
    result = run_noise_comparison(
        _spec_of(config), n=config.n, m=config.m, q=config.q, sigma_0=config.sigma_0,
        eta=config.eta, steps=config.steps, noise_list=list(config.noise_list),
        seed=config.seed, log_stride=config.log_stride, n_test=config.n_test,
    )
    baseline = result["baseline"]
    artifacts = RunArtifactFiles(config=config, command="noise-compare", started_at=started)
    artifacts.traces["trace_standard.csv"] = baseline.trace
    rows = []
    aborted = baseline.aborted
    for arm in result["arms"]:
        aborted = aborted or arm.aborted
        if arm.trace is not None:
            artifacts.traces[f"trace_{_slug(arm.label)}.csv"] = arm.trace
        rows.append({
            "noise": arm.label,
            "aborted": arm.aborted,
            "final_test_accuracy": None if arm.aborted else arm.final_test_accuracy,
            "final_clean_loss": None if arm.aborted else arm.final_clean_loss,
        })
    report = {
        "baseline_accuracy": None if baseline.aborted else baseline.final_test_accuracy,
        "arms": rows,
    }
    artifacts.reports = {"noise_compare": report}
    emit_outputs(artifacts, _out_dir(args, config), force=args.force)
    print(f"standard baseline: accuracy "
          f"{report['baseline_accuracy'] if report['baseline_accuracy'] is not None else 'aborted'}")
    for row in rows:
        print(f"  {row['noise']}: accuracy {row['final_test_accuracy']}")
    if aborted:
        return EXIT_ABORTED
    if args.assert_:
        base = report["baseline_accuracy"]
        if any(row["final_test_accuracy"] < base - 0.02 for row in rows):
            print("assert: a label-noise arm trails the baseline by more than 0.02",
                  file=sys.stderr)
            return EXIT_ASSERT
    return EXIT_OK


def _cmd_q_sweep(args) -> int:
    config = parse_config(args.config, overrides={"seed": args.seed})
    qs = config.q_list or (2, 3, 4)
    started = now_utc()
    results = run_q_sweep(qs, d=config.d, sigma_0=config.sigma_0, steps=config.steps,
                          p=config.p, seed=config.seed, log_stride=config.log_stride,
                          n_test=config.n_test)
    artifacts = RunArtifactFiles(config=config, command="q-sweep", started_at=started)
    report = {}
    aborted = False
    ordering_ok = True
    for q, res in results.items():
        for label, arm in (("standard", res.standard), ("label_noise", res.label_noise)):
            aborted = aborted or arm.aborted
            if arm.trace is not None:
                artifacts.traces[f"trace_q{q}_{label}.csv"] = arm.trace
        entry = {
            "standard_accuracy": None if res.standard.aborted else res.standard.final_test_accuracy,
            "label_noise_accuracy": (None if res.label_noise.aborted
                                     else res.label_noise.final_test_accuracy),
        }
        if None not in entry.values():
            ordering_ok = ordering_ok and (entry["label_noise_accuracy"]
                                           >= entry["standard_accuracy"])
        report[f"q={q}"] = entry
        print(f"q={q}: standard {entry['standard_accuracy']} "
              f"label_noise {entry['label_noise_accuracy']}")
    artifacts.reports = {"q_sweep": report}
    emit_outputs(artifacts, _out_dir(args, config), force=args.force)
    if aborted:
        return EXIT_ABORTED
    if args.assert_ and not ordering_ok:
        print("assert: label-noise GD lost the ordering in some q", file=sys.stderr)
        return EXIT_ASSERT
    return EXIT_OK


def _cmd_concentration(args) -> int:
    config = parse_config(args.config, overrides={"seed": args.seed})
    trials = args.trials if args.trials else config.trials
    report = concentration_suite(
        _spec_of(config), n=config.n, m=config.m, sigma_0=config.sigma_0, p=config.p,
        trials=trials, delta=config.delta, seed=config.seed,
    )
    for name in ("noise_geometry", "init_inner_products", "flip_count_per_step",
                 "flip_count_per_sample"):
        print(f"{name}: pass rate {report[name]['pass_rate']:.4f}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        write_json(report, out / "concentration_report.json")
    return EXIT_OK


def _cmd_decompose(args) -> int:
    run_dir = Path(args.run)
    manifest_path = run_dir / "manifest.json"
    if not manifest_path.exists():
        raise ConfigError(f"no manifest.json under {run_dir}")
    manifest = json.loads(manifest_path.read_text())
    config = parse_config(data=manifest["config"])
    sinks, observers = _make_snapshot_observers(config)
    recon_errors = {"standard": [], "label_noise": []}

    from .decomposition import reconstruct_weights  # local import to avoid cycle
    import numpy as np

    def recon_observer(label):
        base = observers[label]

        def observer(step, net, state, dataset, row):
            base(step, net, state, dataset, row)
            w_plus, w_minus = reconstruct_weights(state, dataset)
            err = (np.linalg.norm(np.hstack([w_plus, w_minus]) - net.weights)
                   / max(np.linalg.norm(net.weights), 1e-300))
            recon_errors[label].append((step, float(err)))

        return observer

    result = run_dynamics(
        _spec_of(config), n=config.n, m=config.m, q=config.q, sigma_0=config.sigma_0,
        eta=config.eta, steps=config.steps, noise=config.noise, seed=config.seed,
        log_stride=config.log_stride, n_test=config.n_test, epsilon=config.epsilon,
        c_test=config.c_test, observers={k: recon_observer(k) for k in observers},
    )
    # Re-emit into a scratch area to compare digests against the manifest.
    import tempfile

    with tempfile.TemporaryDirectory() as tmp:
        inventory = _emit_dynamics(result, config, sinks,
                                   argparse.Namespace(out=tmp, force=True,
                                                      command="decompose"),
                                   manifest.get("command", "dynamics"), now_utc())
    recorded = manifest.get("files", {})
    matches = {
        name: recorded.get(name) == digest
        for name, digest in inventory.items()
        if name.startswith("trace_") and name in recorded
    }
    report = {
        "digests_match": matches,
        "all_digests_match": all(matches.values()) and bool(matches),
        "reconstruction_errors": recon_errors,
        "max_reconstruction_error": max(
            (e for errs in recon_errors.values() for _, e in errs), default=0.0
        ),
        "reports": result.reports,
    }
    write_json(report, run_dir / "decompose_reports.json")
    print(f"digests match: {report['all_digests_match']}; "
          f"max reconstruction error: {report['max_reconstruction_error']:.3e}")
    if args.assert_ and not (report["all_digests_match"]
                             and report["max_reconstruction_error"] <= 1e-8):
        return EXIT_ASSERT
    return EXIT_OK


def _slug(label: str) -> str:
    return "".join(ch if ch.isalnum() else "_" for ch in label).strip("_")


_HANDLERS = {
    "check": _cmd_check,
    "dynamics": _cmd_dynamics,
    "heatmap": _cmd_heatmap,
    "noise-compare": _cmd_noise_compare,
    "q-sweep": _cmd_q_sweep,
    "concentration": _cmd_concentration,
    "decompose": _cmd_decompose,
}


def main_cli(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    if not args.command:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        return _HANDLERS[args.command](args)
    except (ConfigError, EmitError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main() -> None:
    sys.exit(main_cli())


if __name__ == "__main__":
    main()
