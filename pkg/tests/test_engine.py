import csv
import json

import numpy as np
import pytest

from bispheric import engine
from bispheric.controller import ControlGains, control
from bispheric.engine import ScaleEvent, SimConfig, WorldState, monte_carlo, run, step
from bispheric.errors import SimulationError
from bispheric.geometry import stacked_volumes
from bispheric.sensing import identity_frames, sense
from bispheric.shape import canonical_embedding, targets_from_spec


@pytest.fixture(scope="module")
def short_cfg():
    return SimConfig(dt=0.01, t_end=1.0, seed=5, init_half_width=1.5)


class TestStep:
    def test_state_fixed_at_desired_shape(self, six_scenario):
        p_star = canonical_embedding(six_scenario.spec)
        state = WorldState(t=0.0, positions=p_star, frames=identity_frames(6))
        targets = targets_from_spec(six_scenario.spec)
        cfg = SimConfig(dt=0.01, t_end=1.0, init_positions=p_star, init_half_width=None)
        new = step(state, cfg, six_scenario.graph, targets, six_scenario.gains)
        assert new.t == pytest.approx(0.01)
        assert np.allclose(new.positions, p_star, atol=1e-12)

    def test_euler_is_one_explicit_step(self, six_scenario, rng):
        p0 = canonical_embedding(six_scenario.spec) + rng.normal(scale=0.2, size=(6, 3))
        targets = targets_from_spec(six_scenario.spec)
        state = WorldState(t=0.0, positions=p0.copy(), frames=identity_frames(6))
        cfg = SimConfig(
            dt=0.02, t_end=1.0, integrator="euler",
            init_positions=p0, init_half_width=None,
        )
        new = step(state, cfg, six_scenario.graph, targets, six_scenario.gains)
        world = WorldState(t=0.0, positions=p0, frames=identity_frames(6))
        u = np.zeros((6, 3))
        for agent in range(2, 7):
            u[agent - 1] = control(
                sense(world, six_scenario.graph, agent), targets, six_scenario.gains, agent
            )
        assert np.allclose(new.positions, p0 + 0.02 * u, atol=1e-13)

    def test_rk4_close_to_fine_euler(self, six_scenario):
        p0 = canonical_embedding(six_scenario.spec)
        p0 = p0 + 0.3 * np.sin(np.arange(18)).reshape(6, 3)
        p0[0] = 0.0
        base = dict(init_positions=p0, init_half_width=None, seed=1)
        rk = run(SimConfig(dt=0.02, t_end=1.0, **base), six_scenario.graph,
                 six_scenario.spec, six_scenario.gains)
        eu = run(SimConfig(dt=0.0002, t_end=1.0, integrator="euler", **base),
                 six_scenario.graph, six_scenario.spec, six_scenario.gains)
        diff = np.max(np.abs(rk.positions[-1] - eu.positions[-1]))
        assert diff < 5e-4  # O(dt) of the coarse grid


class TestRun:
    def test_leader_immobile_exactly(self, six_scenario, short_cfg):
        log = run(short_cfg, six_scenario.graph, six_scenario.spec, six_scenario.gains)
        assert np.all(log.positions[:, 0, :] == log.positions[0, 0, :])
        assert np.all(log.positions[0, 0, :] == 0.0)

    def test_determinism(self, six_scenario, short_cfg):
        log1 = run(short_cfg, six_scenario.graph, six_scenario.spec, six_scenario.gains)
        log2 = run(short_cfg, six_scenario.graph, six_scenario.spec, six_scenario.gains)
        assert np.array_equal(log1.positions, log2.positions)
        assert np.array_equal(log1.errors, log2.errors)

    def test_zero_duration_run(self, six_scenario):
        cfg = SimConfig(dt=0.01, t_end=0.0, seed=2, init_half_width=1.0)
        log = run(cfg, six_scenario.graph, six_scenario.spec, six_scenario.gains)
        assert log.t.shape == (1,)
        assert log.t[0] == 0.0

    def test_log_every_keeps_final_row(self, six_scenario):
        cfg = SimConfig(dt=0.01, t_end=0.55, seed=2, init_half_width=1.0, log_every=10)
        log = run(cfg, six_scenario.graph, six_scenario.spec, six_scenario.gains)
        assert log.t[-1] == pytest.approx(0.55)
        assert np.all(np.diff(log.t) > 0)

    def test_dt_halving_orders(self, six_scenario):
        p0 = canonical_embedding(six_scenario.spec)
        p0 = p0 + 0.25 * np.cos(np.arange(18)).reshape(6, 3)
        p0[0] = 0.0
        base = dict(init_positions=p0, init_half_width=None, seed=1)

        def final(dt, integrator):
            cfg = SimConfig(dt=dt, t_end=0.64, integrator=integrator, **base)
            return run(cfg, six_scenario.graph, six_scenario.spec,
                       six_scenario.gains).positions[-1]

        ref_eu = final(0.0005, "rk4")
        d1 = np.max(np.abs(final(0.04, "euler") - ref_eu))
        d2 = np.max(np.abs(final(0.02, "euler") - ref_eu))
        assert 1.5 < d1 / d2 < 2.7  # first order

        ref_rk = final(0.0025, "rk4")
        r1 = np.max(np.abs(final(0.04, "rk4") - ref_rk))
        r2 = np.max(np.abs(final(0.02, "rk4") - ref_rk))
        assert r1 / r2 > 10.0  # fourth order (16x nominal)

    def test_scale_event_retargets_d21_only(self, six_scenario):
        cfg = SimConfig(
            dt=0.01, t_end=0.2, seed=3, init_half_width=1.0,
            events=(ScaleEvent(t=0.1, d21_star=2.0),),
        )
        log = run(cfg, six_scenario.graph, six_scenario.spec, six_scenario.gains)
        assert log.applied_events == [{"t": pytest.approx(0.1), "d21_star": 2.0}]
        # e_d jumps at the event row by the target change 2^2 - 1^2 = 3
        i_ev = int(np.argmin(np.abs(log.t - 0.1)))
        assert log.errors[i_ev, 0] == pytest.approx(log.errors[i_ev - 1, 0] - 3.0, abs=0.05)

    def test_nonfinite_state_aborts(self, six_scenario):
        gains = ControlGains.uniform(6, kappa2=1e12)
        cfg = SimConfig(dt=0.5, t_end=50.0, seed=3, init_half_width=1.0)
        with np.errstate(over="ignore", invalid="ignore"):
            with pytest.raises(SimulationError, match="non-finite"):
                run(cfg, six_scenario.graph, six_scenario.spec, gains)

    def test_min_distance_positive(self, six_scenario, short_cfg):
        log = run(short_cfg, six_scenario.graph, six_scenario.spec, six_scenario.gains)
        assert log.min_dist_run > 1e-3
        assert np.all(log.min_dist > 0.0)


class TestLogFormats:
    def test_csv_contract(self, six_scenario, tmp_path):
        cfg = SimConfig(dt=0.01, t_end=0.1, seed=5, init_half_width=1.0)
        log = run(cfg, six_scenario.graph, six_scenario.spec, six_scenario.gains)
        path = tmp_path / "run.csv"
        log.write_csv(path)
        with open(path) as fh:
            reader = csv.reader(fh)
            header = next(reader)
            rows = list(reader)
        assert header[:4] == ["t", "x1", "y1", "z1"]
        assert header[19] == "e_d"
        assert header[-2:] == ["min_dist", "degeneracies"]
        assert "e_xi_3" in header and "e_phi_6" in header and "W_2" in header
        assert len(rows) == log.t.shape[0]
        # numeric round trip of the final row
        values = np.array([float(x) for x in rows[-1]])
        assert values[0] == pytest.approx(0.1)
        assert np.allclose(values[1:19], log.positions[-1].ravel())

    def test_jsonl(self, six_scenario, tmp_path):
        cfg = SimConfig(dt=0.01, t_end=0.05, seed=5, init_half_width=1.0)
        log = run(cfg, six_scenario.graph, six_scenario.spec, six_scenario.gains)
        path = tmp_path / "run.jsonl"
        log.write_jsonl(path)
        lines = path.read_text().strip().splitlines()
        assert len(lines) == log.t.shape[0]
        row = json.loads(lines[0])
        assert row["t"] == 0.0
        assert set(log.header()) == set(row)

    def test_summary_fields(self, six_scenario, short_cfg):
        log = run(short_cfg, six_scenario.graph, six_scenario.spec, six_scenario.gains)
        s = log.summary()
        for key in (
            "final_errors", "max_abs_final_error", "converged",
            "min_neighbor_distance", "degeneracy_events", "columns",
        ):
            assert key in s


class TestMonteCarlo:
    def test_determinism_bitwise(self, six_scenario):
        cfg = SimConfig(dt=0.01, t_end=2.0, init_half_width=1.5)
        a = monte_carlo(cfg, six_scenario.graph, six_scenario.spec,
                        six_scenario.gains, trials=4, seed=11)
        b = monte_carlo(cfg, six_scenario.graph, six_scenario.spec,
                        six_scenario.gains, trials=4, seed=11)
        assert a.to_json() == b.to_json()

    def test_summary_shape(self, six_scenario):
        cfg = SimConfig(dt=0.01, t_end=1.0, init_half_width=1.5)
        s = monte_carlo(cfg, six_scenario.graph, six_scenario.spec,
                        six_scenario.gains, trials=3, seed=11)
        assert s.converged.shape == (3,)
        d = s.to_dict()
        assert len(d["per_trial"]) == 3

    def test_trials_validation(self, six_scenario):
        cfg = SimConfig(dt=0.01, t_end=1.0, init_half_width=1.5)
        with pytest.raises(SimulationError, match="trials"):
            monte_carlo(cfg, six_scenario.graph, six_scenario.spec,
                        six_scenario.gains, trials=0, seed=1)

    def test_longer_runs_converge(self, six_scenario):
        cfg = SimConfig(dt=0.005, t_end=20.0, init_half_width=2.0)
        s = monte_carlo(cfg, six_scenario.graph, six_scenario.spec,
                        six_scenario.gains, trials=3, seed=11)
        assert s.converged_count == 3
        assert np.all(s.min_neighbor_distance > 1e-3)


class TestRandomInit:
    def test_leader_at_origin_and_separation(self, rng):
        p = engine.random_initial_positions(rng, 6, 2.0, min_separation=0.5)
        assert np.all(p[0] == 0.0)
        d = np.linalg.norm(p[:, None, :] - p[None, :, :], axis=-1)
        d += np.eye(6) * 10
        assert d.min() >= 0.5

    def test_batch_shape(self, rng):
        p = engine.random_initial_positions(rng, 5, 1.0, batch=7)
        assert p.shape == (7, 5, 3)
        assert np.all(p[:, 0, :] == 0.0)


def test_w2_monotone_nonincreasing_between_events(six_scenario):
    """Agent 2's Lyapunov value never rises while its target is constant."""
    cfg = SimConfig(dt=0.005, t_end=4.0, seed=12, init_half_width=2.0)
    log = run(cfg, six_scenario.graph, six_scenario.spec, six_scenario.gains)
    w2 = log.lyapunov[:, 0]
    assert np.all(np.diff(w2) <= 1e-12 * np.maximum(w2[:-1], 1e-20))


def test_bearing_noise_hook(six_scenario):
    """Nonzero bearing noise perturbs the trajectory deterministically."""
    base = dict(dt=0.01, t_end=0.5, seed=6, init_half_width=1.0)
    clean = run(SimConfig(**base), six_scenario.graph, six_scenario.spec, six_scenario.gains)
    noisy1 = run(SimConfig(noise=0.01, **base), six_scenario.graph,
                 six_scenario.spec, six_scenario.gains)
    noisy2 = run(SimConfig(noise=0.01, **base), six_scenario.graph,
                 six_scenario.spec, six_scenario.gains)
    assert not np.allclose(clean.positions[-1], noisy1.positions[-1], atol=1e-9)
    assert np.array_equal(noisy1.positions, noisy2.positions)
    assert np.all(np.isfinite(noisy1.positions))


def test_three_agent_planar_subcase():
    """The minimal graph (leader, first and second follower) runs and
    converges; there are no tetrahedra and no phi errors."""
    from bispheric.graph import seed_graph
    from bispheric.shape import ShapeSpec

    g = seed_graph()
    spec = ShapeSpec(
        graph=g, distances={(2, 1): 1.0, (3, 1): 1.0, (3, 2): 1.0}, volumes=np.empty(0)
    )
    cfg = SimConfig(dt=0.005, t_end=15.0, seed=4, init_half_width=2.0)
    log = run(cfg, g, spec, ControlGains.uniform(3))
    s = log.summary()
    assert s["max_abs_final_error"] < 1e-6
    assert len(s["final_errors"]) == 3  # e_d, e_xi_3, e_eta_3
    assert s["min_neighbor_distance"] > 1e-3


def test_config_validation():
    with pytest.raises(SimulationError, match="dt"):
        SimConfig(dt=0.0, t_end=1.0)
    with pytest.raises(SimulationError, match="integrator"):
        SimConfig(integrator="rk2")
    with pytest.raises(SimulationError, match="time-sorted"):
        SimConfig(events=(ScaleEvent(2.0, 1.0), ScaleEvent(1.0, 2.0)))
    with pytest.raises(SimulationError, match="half-width"):
        SimConfig(init_half_width=None)


def test_scale_event_full_effect(six_scenario):
    """After retargeting d21*, the converged shape doubles every edge and
    multiplies every volume by 8 (shortened horizon, loose tolerance)."""
    cfg = SimConfig(
        dt=0.005, t_end=30.0, seed=9, init_half_width=1.0,
        events=(ScaleEvent(t=10.0, d21_star=2.0),), log_every=100,
    )
    log = run(cfg, six_scenario.graph, six_scenario.spec, six_scenario.gains)
    i10 = int(np.argmin(np.abs(log.t - 10.0)))
    p10, p_end = log.positions[i10], log.positions[-1]
    for (j, i) in six_scenario.graph.edges:
        d0 = np.linalg.norm(p10[i - 1] - p10[j - 1])
        d1 = np.linalg.norm(p_end[i - 1] - p_end[j - 1])
        assert d1 / (2.0 * d0) == pytest.approx(1.0, abs=1e-4)
    v10 = stacked_volumes(p10, six_scenario.graph)
    v_end = stacked_volumes(p_end, six_scenario.graph)
    assert np.allclose(v_end / (8.0 * v10), 1.0, atol=1e-3)
