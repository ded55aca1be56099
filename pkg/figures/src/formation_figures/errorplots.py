"""Formation-errors-vs-time figures from logged error columns."""

from __future__ import annotations

import argparse
import sys

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .runlog import RunLog, RunLogError, load_run, parse_segment

FIGSIZE = (7.0, 4.5)
DPI = 110


def plot_errors(run: RunLog, out_path, log_scale=False, segment=None):
    """Render every logged error column against time."""
    if segment is not None:
        run = run.slice_time(*segment)
    fig, ax = plt.subplots(figsize=FIGSIZE, dpi=DPI)
    for name in run.error_names:
        values = run.columns[name]
        if log_scale:
            ax.semilogy(run.t, np.abs(values) + 1e-16, lw=1.0, label=name)
        else:
            ax.plot(run.t, values, lw=1.0, label=name)
    ax.set_xlabel("t [s]")
    ax.set_ylabel("|error|" if log_scale else "error")
    ax.set_title("formation errors vs time")
    ax.grid(alpha=0.3)
    ax.legend(loc="upper right", fontsize=7, ncols=2)
    fig.tight_layout()
    fig.savefig(out_path)
    plt.close(fig)
    return out_path


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        description="Plot formation errors over time from a simulation CSV log."
    )
    parser.add_argument("--csv", required=True)
    parser.add_argument("--summary", default=None)
    parser.add_argument("--out", required=True)
    parser.add_argument("--segment", default=None, help="time window a:b")
    parser.add_argument("--log-scale", action="store_true")
    args = parser.parse_args(argv)
    try:
        run = load_run(args.csv, args.summary)
        segment = parse_segment(args.segment) if args.segment else None
        plot_errors(run, args.out, log_scale=args.log_scale, segment=segment)
    except RunLogError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
