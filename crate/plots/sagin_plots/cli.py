import argparse
import json
import sys
from pathlib import Path

from .series import KINDS, SchemaError, build_series


def render(data, out):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    if data["kind"] == "scenario_bar":
        labels = list(data["series"])
        ticks = sorted({x for s in data["series"].values() for x in s["x"]})
        width = 0.8 / max(len(labels), 1)
        for i, label in enumerate(labels):
            s = data["series"][label]
            xs = [ticks.index(x) + i * width for x in s["x"]]
            ax.bar(xs, s["y"], width=width, label=label)
        ax.set_xticks([t + 0.4 - width / 2 for t in range(len(ticks))], ticks)
    else:
        marker = "o" if data["kind"] in ("convergence", "profit_rate") else None
        for label, s in data["series"].items():
            ax.plot(s["x"], s["y"], label=label, marker=marker)
    ax.set_xlabel(data["xlabel"])
    ax.set_ylabel(data["ylabel"])
    ax.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(out, metadata={"Software": None} if Path(out).suffix == ".png" else None)
    plt.close(fig)


def main(argv=None):
    p = argparse.ArgumentParser(prog="plot", description="Render a figure from run outputs.")
    p.add_argument("--kind", required=True, choices=KINDS)
    p.add_argument("--in", dest="inputs", nargs="+", required=True, help="metrics.csv, run.json or run directories")
    p.add_argument("--out", required=True, help="image path; the suffix picks the format")
    p.add_argument("--window", type=int, default=1, help="moving-average window")
    args = p.parse_args(argv)
    if args.window < 1:
        p.error("--window must be at least 1")
    for path in args.inputs:
        if not Path(path).exists():
            print(f"error: input {path} does not exist", file=sys.stderr)
            return 4
    try:
        data = build_series(args.kind, args.inputs, args.window)
    except SchemaError as e:
        print(f"error: {e}", file=sys.stderr)
        return 4
    render(data, args.out)
    sidecar = Path(args.out).with_suffix(".json")
    sidecar.write_text(json.dumps(data, indent=2) + "\n", encoding="utf-8")
    return 0
