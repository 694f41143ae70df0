"""Result emission: trace/coefficient CSVs, report JSON, digested manifest.

CSV numbers are written with 17 significant digits (lossless for 64-bit
floats) and newline-only line endings, so re-running with the same seed
yields byte-identical files. The manifest is written last and records a
sha256 digest of every other emitted file.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .config import FullConfig, config_to_dict
from .streams import STREAM_IDS, derive_seed
from .training import TRACE_COLUMNS, TrainTrace

__all__ = ["EmitError", "fmt_float", "sha256_file", "write_trace_csv",
           "write_coefficients_csv", "write_heatmap_csv", "emit_outputs"]


class EmitError(RuntimeError):
    """Refusal to overwrite existing outputs or other emission failures."""


def fmt_float(x) -> str:
    return format(float(x), ".17g")


def _fmt_value(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return fmt_float(x)


def sha256_file(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt_value(v) for v in row) + "\n")


def write_trace_csv(trace: TrainTrace, path: Path) -> None:
    rows = [[getattr(r, col) for col in TRACE_COLUMNS] for r in trace.rows]
    _write_csv(path, TRACE_COLUMNS, rows)


def write_coefficients_csv(snapshots, path: Path) -> None:
    """Long-form coefficient dump: one row per (step, j, r, i).

    ``snapshots`` is a list of (step, gamma(2, m), rho_bar(2, m, n),
    rho_under(2, m, n)) tuples, typically strided more coarsely than the
    trace to bound file size.
    """
    header = ["step", "j", "r", "i", "gamma", "rho_bar", "rho_under"]

    def rows():
        for step, gamma, rho_bar, rho_under in snapshots:
            m, n = gamma.shape[1], rho_bar.shape[2]
            for j_idx, j in ((0, 1), (1, -1)):
                for r in range(m):
                    g = gamma[j_idx, r]
                    for i in range(n):
                        yield (step, j, r, i, g, rho_bar[j_idx, r, i], rho_under[j_idx, r, i])

    _write_csv(path, header, rows())


def write_coefficient_summary_csv(snapshots, path: Path) -> None:
    """Compact per-step companion to the long-form coefficient dump."""
    header = ["step", "max_gamma", "mean_gamma", "max_rho_bar", "min_rho_under"]
    rows = [
        (step, gamma.max(), gamma.mean(), rho_bar.max(), rho_under.min())
        for step, gamma, rho_bar, rho_under in snapshots
    ]
    _write_csv(path, header, rows)


def write_heatmap_csv(long_rows, path: Path) -> None:
    header = ["snr", "n", "seed", "algorithm", "test_accuracy"]
    _write_csv(path, header, long_rows)


def write_heatmap_aggregate_csv(cells, path: Path) -> None:
    header = ["snr", "n", "standard_mean", "standard_std", "label_noise_mean",
              "label_noise_std", "seeds"]
    rows = [
        (c.snr, c.n, c.standard_mean, c.standard_std, c.label_noise_mean,
         c.label_noise_std, len(c.standard_accuracies))
        for _, c in sorted(cells.items())
    ]
    _write_csv(path, header, rows)


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.bool_):
        return bool(obj)
    raise TypeError(f"not JSON serializable: {type(obj)}")


def write_json(payload: dict, path: Path) -> None:
    with open(path, "w", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


@dataclass
class RunArtifactFiles:
    """What a run wants written: named CSV/JSON payloads plus manifest extras."""

    config: FullConfig
    command: str
    traces: dict = field(default_factory=dict)  # filename -> TrainTrace
    coefficient_snapshots: dict = field(default_factory=dict)  # filename -> snapshots
    reports: dict = field(default_factory=dict)  # merged into reports.json
    heatmap: object = None  # HeatmapResult
    started_at: str = ""
    finished_at: str = ""


def now_utc() -> str:
    return datetime.now(timezone.utc).isoformat()


def emit_outputs(artifacts: RunArtifactFiles, out_dir: str | Path, force: bool = False) -> dict:
    """Write all run files plus a digested manifest.json; returns the inventory.

    Refuses to overwrite an existing manifest unless ``force`` is set.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest_path = out / "manifest.json"
    if manifest_path.exists() and not force:
        raise EmitError(f"{manifest_path} already exists; pass force to overwrite")

    inventory: dict[str, str] = {}

    def record(name: str):
        inventory[name] = sha256_file(out / name)

    for name, trace in artifacts.traces.items():
        write_trace_csv(trace, out / name)
        record(name)
    for name, snaps in artifacts.coefficient_snapshots.items():
        write_coefficients_csv(snaps, out / name)
        record(name)
        summary_name = name.replace(".csv", "_summary.csv")
        write_coefficient_summary_csv(snaps, out / summary_name)
        record(summary_name)
    if artifacts.reports:
        write_json(artifacts.reports, out / "reports.json")
        record("reports.json")
    if artifacts.heatmap is not None:
        write_heatmap_csv(artifacts.heatmap.long_rows, out / "heatmap.csv")
        record("heatmap.csv")
        write_heatmap_aggregate_csv(artifacts.heatmap.cells, out / "heatmap_aggregate.csv")
        record("heatmap_aggregate.csv")

    seed = artifacts.config.seed
    manifest = {
        "tool": "lngd",
        "tool_version": __version__,
        "command": artifacts.command,
        "config": config_to_dict(artifacts.config),
        "defaults_applied": artifacts.config.defaults_applied,
        "spec": {
            "mu_form": "axis0_scaled",
            "mu_scale": artifacts.config.mu_scale,
            "sigma_p": artifacts.config.sigma_p,
            "d": artifacts.config.d,
        },
        "master_seed": seed,
        "stream_derivation": "splitmix64",
        "streams": {name: derive_seed(seed, sid) for name, sid in STREAM_IDS.items()},
        "started_at": artifacts.started_at,
        "finished_at": artifacts.finished_at or now_utc(),
        "files": inventory,
    }
    write_json(manifest, manifest_path)
    return inventory
