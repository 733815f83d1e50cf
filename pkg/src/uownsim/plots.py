"""Static SVG line charts rendered from aggregate campaign CSVs.

This module never touches the simulation: its only input is the aggregate
CSV schema emitted by the campaign runner, so a chart can always be
rebuilt from archived results.  Rows are grouped into one line per
distinct identity (objective/scheme/case/water/deployment) left over after
choosing the x axis.
"""

from __future__ import annotations

import csv

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .errors import ConfigError
from .harness import AGGREGATE_CSV_HEADER

AGGREGATE_COLUMNS = tuple(AGGREGATE_CSV_HEADER.split(","))
IDENTITY_COLUMNS = ("objective", "scheme", "case", "water", "n_nodes",
                    "n_sinks")
NUMERIC_X = ("n_nodes", "n_sinks", "trials")
METRIC_COLUMNS = ("fail_frac", "mean_hops", "mean_rate_bps", "mean_power_w",
                  "mean_bsr", "stderr_rate", "stderr_power")


def read_aggregate_csv(path: str) -> list:
    """Aggregate rows as dictionaries, numbers parsed, schema enforced."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ConfigError(f"{path}: empty aggregate CSV") from None
        if tuple(header) != AGGREGATE_COLUMNS:
            raise ConfigError(
                f"{path}: unexpected header {','.join(header)!r}")
        rows = []
        for lineno, cells in enumerate(reader, start=2):
            if len(cells) != len(AGGREGATE_COLUMNS):
                raise ConfigError(f"{path}:{lineno}: wrong column count")
            row = dict(zip(AGGREGATE_COLUMNS, cells))
            for key in ("n_nodes", "n_sinks", "trials"):
                row[key] = int(row[key])
            for key in METRIC_COLUMNS:
                row[key] = float(row[key]) if row[key] != "" else float("nan")
            rows.append(row)
    if not rows:
        raise ConfigError(f"{path}: no data rows")
    return rows


def _series_label(key_columns, key) -> str:
    return ", ".join(f"{c}={v}" for c, v in zip(key_columns, key))


def line_chart(rows, x_key: str, metric: str, out_path: str,
               title: str | None = None) -> str:
    """One SVG line chart of ``metric`` against ``x_key``.

    Rows sharing every identity column except ``x_key`` form one line;
    categorical x values keep their order of first appearance.
    """
    if x_key not in IDENTITY_COLUMNS and x_key not in NUMERIC_X:
        raise ConfigError(f"cannot plot against {x_key!r}")
    if metric not in METRIC_COLUMNS:
        raise ConfigError(f"unknown metric {metric!r}")

    key_columns = [c for c in IDENTITY_COLUMNS if c != x_key]
    # only columns that actually vary earn a place in the legend
    varying = [c for c in key_columns
               if len({row[c] for row in rows}) > 1]
    series: dict = {}
    for row in rows:
        series.setdefault(tuple(row[c] for c in varying), []).append(row)

    categorical = x_key not in NUMERIC_X
    if categorical:
        ticks = list(dict.fromkeys(row[x_key] for row in rows))
        position = {v: i for i, v in enumerate(ticks)}

    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    for key in sorted(series):
        points = series[key]
        if categorical:
            points = sorted(points, key=lambda r: position[r[x_key]])
            xs = [position[r[x_key]] for r in points]
        else:
            points = sorted(points, key=lambda r: r[x_key])
            xs = [r[x_key] for r in points]
        ys = [r[metric] for r in points]
        label = _series_label(varying, key) if varying else metric
        ax.plot(xs, ys, marker="o", label=label)
    if categorical:
        ax.set_xticks(range(len(ticks)))
        ax.set_xticklabels(ticks)
    ax.set_xlabel(x_key)
    ax.set_ylabel(metric)
    if title:
        ax.set_title(title)
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(out_path, format="svg")
    plt.close(fig)
    return out_path
