"""3D agent-trajectory figures: paths, start markers, and a wireframe of the
final shape (pairs within 1.25x the smallest final inter-agent distance are
linked, which traces the shape's short edges without needing the graph)."""

from __future__ import annotations

import argparse
import sys

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .runlog import RunLog, RunLogError, load_run, parse_segment

FIGSIZE = (7.0, 6.0)
DPI = 110


def _wireframe_pairs(final: np.ndarray) -> list[tuple[int, int]]:
    n = final.shape[0]
    d = np.linalg.norm(final[:, None, :] - final[None, :, :], axis=-1)
    d_min = np.min(d[np.triu_indices(n, 1)])
    return [
        (a, b)
        for a in range(n)
        for b in range(a + 1, n)
        if d[a, b] <= 1.25 * d_min
    ]


def plot_trajectories(run: RunLog, out_path, segment=None):
    """Render the 3D trajectories of all agents to ``out_path``."""
    if segment is not None:
        run = run.slice_time(*segment)
    fig = plt.figure(figsize=FIGSIZE, dpi=DPI)
    ax = fig.add_subplot(111, projection="3d")
    cmap = plt.get_cmap("tab10")
    for a in range(run.n):
        xyz = run.positions[:, a, :]
        color = cmap(a % 10)
        ax.plot(xyz[:, 0], xyz[:, 1], xyz[:, 2], color=color, lw=1.2,
                label=f"agent {a + 1}")
        ax.scatter(*xyz[0], color=color, marker="o", s=35)
        ax.scatter(*xyz[-1], color=color, marker="^", s=45)
    final = run.positions[-1]
    for a, b in _wireframe_pairs(final):
        seg = np.stack([final[a], final[b]])
        ax.plot(seg[:, 0], seg[:, 1], seg[:, 2], color="0.3", lw=0.8, alpha=0.7)
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_zlabel("z [m]")
    ax.set_title(f"agent trajectories, t = {run.t[0]:g} .. {run.t[-1]:g} s")
    ax.legend(loc="upper left", fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path)
    plt.close(fig)
    return out_path


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        description="Plot 3D agent trajectories from a simulation CSV log."
    )
    parser.add_argument("--csv", required=True)
    parser.add_argument("--summary", default=None)
    parser.add_argument("--out", required=True)
    parser.add_argument("--segment", default=None, help="time window a:b")
    args = parser.parse_args(argv)
    try:
        run = load_run(args.csv, args.summary)
        segment = parse_segment(args.segment) if args.segment else None
        plot_trajectories(run, args.out, segment=segment)
    except RunLogError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
