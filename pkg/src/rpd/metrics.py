"""Metrics CSV schema, sweep aggregation.

Column set and order are fixed per engine version. Values are written
with shortest round-trip float formatting so a rerun with the same seed
produces a byte-identical file.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

from .errors import ConfigError
from .trainer import RunMetrics

CSV_COLUMNS = [
    "update", "global_step", "eval_success", "eval_reward", "train_reward",
    "loss_total", "loss_ppo", "loss_value", "loss_entropy", "loss_distill",
    "teacher_queries",
]

INT_COLUMNS = {"update", "global_step", "teacher_queries"}

AGGREGATED_COLUMNS = ["eval_success", "eval_reward", "train_reward", "loss_total"]


def _fmt(value) -> str:
    if isinstance(value, bool):
        raise ConfigError("boolean metric values are not supported")
    if isinstance(value, int):
        return str(value)
    return repr(float(value))


def write_metrics_csv(metrics: list[RunMetrics], path: str) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for m in metrics:
            writer.writerow([_fmt(getattr(m, col)) for col in CSV_COLUMNS])


def read_metrics_csv(path: str) -> list[dict[str, float]]:
    rows = []
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames != CSV_COLUMNS:
            raise ConfigError(f"{path}: unexpected metrics columns {reader.fieldnames}")
        for raw in reader:
            rows.append({k: (int(v) if k in INT_COLUMNS else float(v))
                         for k, v in raw.items()})
    return rows


@dataclass
class AggregateRow:
    config: str
    update: int
    global_step: int
    n_seeds: int
    stats: dict[str, tuple[float, float]]   # column -> (mean, std)
    teacher_baseline: float | None


def aggregate_runs(per_config: dict[str, list[list[dict[str, float]]]],
                   baselines: dict[str, float] | None = None) -> list[AggregateRow]:
    """Mean and population std per update across a config's seed runs.

    `per_config` maps config name to one metrics-row list per seed. Runs
    under one config must share their update grid.
    """
    baselines = baselines or {}
    out: list[AggregateRow] = []
    for name, runs in per_config.items():
        if not runs:
            continue
        n_rows = min(len(r) for r in runs)
        for i in range(n_rows):
            stats = {}
            for col in AGGREGATED_COLUMNS:
                vals = [run[i][col] for run in runs]
                mean = sum(vals) / len(vals)
                var = sum((v - mean) ** 2 for v in vals) / len(vals)
                stats[col] = (mean, var ** 0.5)
            out.append(AggregateRow(
                config=name, update=int(runs[0][i]["update"]),
                global_step=int(runs[0][i]["global_step"]), n_seeds=len(runs),
                stats=stats, teacher_baseline=baselines.get(name)))
    return out


def write_aggregate_csv(rows: list[AggregateRow], path: str) -> None:
    header = ["config", "update", "global_step", "n_seeds"]
    for col in AGGREGATED_COLUMNS:
        header += [f"{col}_mean", f"{col}_std"]
    header.append("teacher_baseline")
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            cells = [row.config, str(row.update), str(row.global_step),
                     str(row.n_seeds)]
            for col in AGGREGATED_COLUMNS:
                mean, std = row.stats[col]
                cells += [repr(mean), repr(std)]
            cells.append("" if row.teacher_baseline is None
                         else repr(float(row.teacher_baseline)))
            writer.writerow(cells)


def read_aggregate_csv(path: str) -> list[AggregateRow]:
    rows = []
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        for raw in reader:
            stats = {col: (float(raw[f"{col}_mean"]), float(raw[f"{col}_std"]))
                     for col in AGGREGATED_COLUMNS}
            baseline = raw.get("teacher_baseline", "")
            rows.append(AggregateRow(
                config=raw["config"], update=int(raw["update"]),
                global_step=int(raw["global_step"]), n_seeds=int(raw["n_seeds"]),
                stats=stats,
                teacher_baseline=float(baseline) if baseline else None))
    return rows
