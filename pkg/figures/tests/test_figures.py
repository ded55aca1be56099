import shutil
import subprocess
import sys
from pathlib import Path

import matplotlib.image as mpimg
import numpy as np
import pytest

from formation_figures import RunLogError, load_run, plot_errors, plot_trajectories
from formation_figures.runlog import parse_segment

FIXTURES = Path(__file__).parent / "fixtures"
GOLDEN = Path(__file__).parent / "golden"
CSV = FIXTURES / "benchmark_run.csv"


def perceptual_diff(path_a, path_b, block=8) -> float:
    """Normalized RMS between block-averaged grayscale renderings; tolerant
    to minor renderer drift, sensitive to structural changes."""
    imgs = []
    for p in (path_a, path_b):
        img = mpimg.imread(p)
        gray = img[..., :3].mean(axis=-1)
        h, w = (gray.shape[0] // block) * block, (gray.shape[1] // block) * block
        gray = gray[:h, :w].reshape(h // block, block, w // block, block).mean(axis=(1, 3))
        imgs.append(gray)
    a, b = imgs
    if a.shape != b.shape:
        return 1.0
    return float(np.sqrt(np.mean((a - b) ** 2)))


class TestRunLog:
    def test_loads_contract(self, benchmark_run):
        run = benchmark_run
        assert run.n == 6
        assert run.positions.shape == (len(run.t), 6, 3)
        assert "e_phi_6" in run.columns
        assert run.summary["n"] == 6

    def test_missing_column_named(self, tmp_path):
        lines = CSV.read_text().splitlines()
        header = lines[0].split(",")
        drop = header.index("e_eta_5")
        broken = "\n".join(
            ",".join(v for k, v in enumerate(line.split(",")) if k != drop)
            for line in lines
        )
        p = tmp_path / "broken.csv"
        p.write_text(broken + "\n")
        with pytest.raises(RunLogError, match="e_eta_5"):
            load_run(p)

    def test_empty_log_rejected(self, tmp_path):
        p = tmp_path / "empty.csv"
        p.write_text(CSV.read_text().splitlines()[0] + "\n")
        with pytest.raises(RunLogError, match="no data rows"):
            load_run(p)

    def test_segment_parsing(self):
        assert parse_segment("10:20") == (10.0, 20.0)
        assert parse_segment(":5") == (None, 5.0)
        with pytest.raises(RunLogError):
            parse_segment("banana")

    def test_slice(self, benchmark_run):
        part = benchmark_run.slice_time(10.0, 20.0)
        assert part.t[0] >= 10.0 and part.t[-1] <= 20.0
        with pytest.raises(RunLogError, match="segment"):
            benchmark_run.slice_time(100.0, 200.0)


class TestQualitativeShape:
    def test_decay_spike_redecay(self, benchmark_run):
        """The benchmark error curves decay toward zero by t = 10, jump when
        the scale retarget hits, and decay again by the end of the run."""
        run = benchmark_run
        err = np.max(
            np.abs(np.stack([run.columns[c] for c in run.error_names])), axis=0
        )
        t = run.t
        before = err[np.argmin(np.abs(t - 9.9))]
        at_event = np.max(err[(t >= 10.0) & (t <= 10.5)])
        final = err[-1]
        initial = np.max(err[t <= 1.0])
        assert before < 1e-3 < initial          # decayed by t = 10
        assert at_event > 100 * before          # visible spike at the event
        assert final < 1e-3 < at_event          # re-decayed by the end
        # decay trends monotone on coarse grids in both phases
        for lo, hi in ((0.5, 9.9), (10.5, 20.0)):
            window = err[(t >= lo) & (t <= hi)]
            coarse = window[:: max(len(window) // 8, 1)]
            assert np.all(np.diff(coarse) < 0.0)


class TestRendering:
    def test_error_plot_matches_golden(self, benchmark_run, tmp_path):
        out = tmp_path / "errors.png"
        plot_errors(benchmark_run, out)
        diff = perceptual_diff(out, GOLDEN / "errors.png")
        assert diff < 0.05, f"perceptual diff {diff:.4f} exceeds threshold"

    def test_trajectory_plot_matches_golden(self, benchmark_run, tmp_path):
        out = tmp_path / "trajectories.png"
        plot_trajectories(benchmark_run, out)
        diff = perceptual_diff(out, GOLDEN / "trajectories.png")
        assert diff < 0.05, f"perceptual diff {diff:.4f} exceeds threshold"

    def test_golden_diff_detects_changes(self, benchmark_run, tmp_path):
        # a structurally different rendering of the same data must trip the
        # threshold that renderer drift stays under
        out = tmp_path / "errors_log.png"
        plot_errors(benchmark_run, out, log_scale=True)
        assert perceptual_diff(out, GOLDEN / "errors.png") > 0.05

    def test_log_scale_variant(self, benchmark_run, tmp_path):
        out = tmp_path / "errors_log.png"
        plot_errors(benchmark_run, out, log_scale=True)
        assert out.exists()


class TestScripts:
    def run_script(self, name, *args):
        return subprocess.run(
            [sys.executable, "-m", f"formation_figures.{name}", *args],
            capture_output=True,
            text=True,
        )

    def test_errors_script(self, tmp_path):
        out = tmp_path / "e.png"
        r = self.run_script("errorplots", "--csv", str(CSV), "--out", str(out))
        assert r.returncode == 0, r.stderr
        assert out.exists()

    def test_trajectories_script_segment(self, tmp_path):
        out = tmp_path / "t.png"
        r = self.run_script(
            "trajectories", "--csv", str(CSV), "--out", str(out), "--segment", "10:20"
        )
        assert r.returncode == 0, r.stderr
        assert out.exists()

    def test_empty_log_errors_out(self, tmp_path):
        p = tmp_path / "empty.csv"
        p.write_text(CSV.read_text().splitlines()[0] + "\n")
        r = self.run_script("errorplots", "--csv", str(p), "--out", str(tmp_path / "x.png"))
        assert r.returncode == 1
        assert "no data rows" in r.stderr

    def test_missing_file_errors_out(self, tmp_path):
        r = self.run_script(
            "trajectories", "--csv", str(tmp_path / "nope.csv"), "--out", str(tmp_path / "x.png")
        )
        assert r.returncode == 1
