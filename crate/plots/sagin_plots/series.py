"""Reading run outputs and turning them into plotted series."""

import csv
import json
from collections import defaultdict
from pathlib import Path

METRICS_COLUMNS = [
    "episode",
    "slot",
    "reward",
    "cumulative_profit",
    "completion_rate",
    "jain_index",
    "cluster_count",
    "critic_loss",
    "actor_objective",
]

KINDS = ("reward", "convergence", "profit_time", "profit_rate", "scenario_bar", "clusters")


class SchemaError(ValueError):
    pass


def moving_average(values, window):
    """Trailing mean over up to `window` values."""
    if window < 1:
        raise ValueError("window must be at least 1")
    out, total = [], 0.0
    for i, v in enumerate(values):
        total += v
        if i >= window:
            total -= values[i - window]
        out.append(total / min(i + 1, window))
    return out


def read_metrics(path):
    path = Path(path)
    if path.is_dir():
        path = path / "metrics.csv"
    with open(path, newline="", encoding="utf-8") as f:
        rows = [r for r in csv.reader(f) if r and not r[0].startswith("#")]
    if not rows:
        raise SchemaError(f"{path}: empty file")
    header = rows[0]
    for i, name in enumerate(METRICS_COLUMNS):
        if i >= len(header) or header[i] != name:
            raise SchemaError(f"{path}: expected column `{name}` at position {i}")
    if len(header) != len(METRICS_COLUMNS):
        raise SchemaError(f"{path}: unexpected column `{header[len(METRICS_COLUMNS)]}`")
    out = []
    for r in rows[1:]:
        row = {}
        for name, text in zip(METRICS_COLUMNS, r):
            row[name] = None if text == "" else (int(text) if name in ("episode", "slot", "cluster_count") else float(text))
        out.append(row)
    return out


def read_run(path):
    path = Path(path)
    if path.is_dir():
        path = path / "run.json"
    with open(path, encoding="utf-8") as f:
        run = json.load(f)
    for key in ("algorithm", "scenario", "seed", "config", "totals"):
        if key not in run:
            raise SchemaError(f"{path}: missing field `{key}`")
    return run


def episode_ends(rows):
    ends = {}
    for r in rows:
        ends[r["episode"]] = r
    return [ends[e] for e in sorted(ends)]


def _grouped_mean(points):
    """{(label, x): [y...]} to {label: (xs, means)} with sorted x."""
    by_label = defaultdict(dict)
    for (label, x), ys in points.items():
        by_label[label][x] = sum(ys) / len(ys)
    return {label: (sorted(d), [d[x] for x in sorted(d)]) for label, d in sorted(by_label.items())}


def build_series(kind, inputs, window=1):
    """Series to plot: a dict with axis labels and named (x, y) lists."""
    if kind not in KINDS:
        raise ValueError(f"unknown kind `{kind}`")
    series = {}
    if kind in ("reward", "profit_time", "clusters"):
        for p in inputs:
            rows = read_metrics(p)
            if kind == "reward":
                ys = [r["reward"] for r in rows]
                xs = list(range(len(rows)))
            elif kind == "profit_time":
                ends = episode_ends(rows)
                ys = [r["cumulative_profit"] for r in ends]
                xs = [r["episode"] for r in ends]
            else:
                ys = [float(r["cluster_count"]) for r in rows]
                xs = list(range(len(rows)))
            series[str(p)] = {"x": xs, "y": moving_average(ys, window)}
        labels = {
            "reward": ("slot", "reward per slot"),
            "profit_time": ("episode", "system profit per episode"),
            "clusters": ("slot", "cluster count"),
        }[kind]
        return {"kind": kind, "xlabel": labels[0], "ylabel": labels[1], "series": series}

    runs = [read_run(p) for p in inputs]
    points = defaultdict(list)
    if kind == "convergence":
        for r in runs:
            conv = r["totals"].get("convergence_episode")
            if conv is not None:
                points[(r["algorithm"], r["config"]["env"]["n_uavs"])].append(float(conv))
        xlabel, ylabel = "number of UAVs", "convergence episode"
    elif kind == "profit_rate":
        for r in runs:
            points[(r["algorithm"], r["config"]["env"]["arrival_rate"])].append(r["totals"]["mean_final_profit"])
        xlabel, ylabel = "task arrival rate (tasks/s)", "mean final profit"
    else:
        for r in runs:
            points[(r["algorithm"], r["scenario"])].append(r["totals"]["mean_final_profit"])
        xlabel, ylabel = "scenario", "normalized system profit"
    grouped = _grouped_mean(points)
    if kind == "scenario_bar":
        best = defaultdict(float)
        for xs, ys in grouped.values():
            for x, y in zip(xs, ys):
                best[x] = max(best[x], y)
        grouped = {
            label: (xs, [y / best[x] if best[x] > 0 else 0.0 for x, y in zip(xs, ys)])
            for label, (xs, ys) in grouped.items()
        }
    series = {label: {"x": list(xs), "y": list(ys)} for label, (xs, ys) in grouped.items()}
    return {"kind": kind, "xlabel": xlabel, "ylabel": ylabel, "series": series}
