import math

import numpy as np
import pytest

from bispheric import geometry
from bispheric.controller import (
    ControlGains,
    FormationErrors,
    bearing_agent_step,
    control,
    errors_of,
    formation_errors_from_step,
    lyapunov_of,
    stacked_gains,
    stacked_targets,
)
from bispheric.engine import WorldState
from bispheric.sensing import (
    RelativePositionView,
    identity_frames,
    neighbor_index_arrays,
    random_frames,
    sense,
    sense_stacked,
)
from bispheric.shape import canonical_embedding, targets_from_spec


def make_world(p, frames=None):
    p = np.asarray(p, dtype=float)
    return WorldState(t=0.0, positions=p, frames=frames if frames is not None else identity_frames(p.shape[0]))


@pytest.fixture(scope="module")
def six(six_scenario):
    return six_scenario


@pytest.fixture(scope="module")
def setup(six_scenario):
    targets = targets_from_spec(six_scenario.spec)
    p_star = canonical_embedding(six_scenario.spec)
    return six_scenario, targets, p_star


class TestGains:
    def test_uniform(self):
        g = ControlGains.uniform(6)
        assert g.kappa2 == 2.0
        assert g.kappa.shape == (4,)
        assert g.gamma.shape == (3,)

    def test_positivity(self):
        with pytest.raises(ValueError, match="positive"):
            ControlGains.uniform(6, gamma=-1.0)
        with pytest.raises(ValueError, match="kappa2"):
            ControlGains.uniform(6, kappa2=0.0)


class TestErrors:
    def test_zero_at_desired(self, setup):
        scn, targets, p_star = setup
        world = make_world(p_star)
        for agent in range(2, 7):
            view = sense(world, scn.graph, agent)
            e = errors_of(view, targets, agent)
            for value in (e.e_d, e.e_xi, e.e_eta, e.e_phi):
                if value is not None:
                    assert abs(value) < 1e-12

    def test_agent2_squared_distance(self, setup):
        scn, targets, _ = setup
        view = RelativePositionView(p21=np.array([2.0, 0.0, 0.0]))
        e = errors_of(view, targets, 2)
        assert e.e_d == pytest.approx(3.0)  # 4 - 1

    def test_reflected_follower_phi_error(self, setup):
        scn, targets, p_star = setup
        n = np.cross(p_star[1] - p_star[0], p_star[2] - p_star[0])
        n /= np.linalg.norm(n)
        p = p_star.copy()
        p[3] = p[3] - 2.0 * float((p[3] - p_star[0]) @ n) * n
        view = sense(make_world(p), scn.graph, 4)
        e = errors_of(view, targets, 4)
        phi_star = targets.phi_star[0]
        assert e.e_phi == pytest.approx(2 * math.pi - 2 * phi_star, abs=1e-9)
        assert abs(e.e_xi) < 1e-9
        assert abs(e.e_eta) < 1e-9


class TestControl:
    def test_leader_holds(self, setup):
        _, targets, _ = setup
        assert np.array_equal(control(None, targets, ControlGains.uniform(6), 1), np.zeros(3))

    def test_zero_at_equilibrium(self, setup):
        scn, targets, p_star = setup
        world = make_world(p_star)
        for agent in range(1, 7):
            view = sense(world, scn.graph, agent) if agent > 1 else None
            u = control(view, targets, scn.gains, agent)
            assert np.linalg.norm(u) < 1e-12

    def test_agent2_law_literal(self, setup):
        _, targets, _ = setup
        gains = ControlGains.uniform(6, kappa2=2.0)
        p21 = np.array([1.3, -0.2, 0.4])
        view = RelativePositionView(p21=p21)
        e_d = float(p21 @ p21) - targets.d21_star**2
        u = control(view, targets, gains, 2)
        assert np.allclose(u, 2.0 * e_d * p21, atol=1e-15)
        # contracting: positive error drives agent 2 toward agent 1
        assert e_d > 0 and float(u @ p21) > 0

    def test_rotation_equivariance(self, setup, rng):
        """Remark-4 check: computing in a rotated local frame and mapping the
        command back equals the identity-frame computation."""
        scn, targets, p_star = setup
        p = p_star + rng.normal(scale=0.4, size=p_star.shape)
        frames = random_frames(6, rng)
        for agent in range(2, 7):
            view_id = sense(make_world(p), scn.graph, agent)
            view_rot = sense(make_world(p, frames), scn.graph, agent)
            u_world = control(view_id, targets, scn.gains, agent)
            u_local = control(view_rot, targets, scn.gains, agent)
            assert np.allclose(frames[agent - 1] @ u_local, u_world, atol=1e-12)

    def test_nonzero_away_from_equilibrium(self, setup, rng):
        scn, targets, p_star = setup
        p = p_star + rng.normal(scale=0.3, size=p_star.shape)
        world = make_world(p)
        norms = [
            np.linalg.norm(control(sense(world, scn.graph, a), targets, scn.gains, a))
            for a in range(2, 7)
        ]
        assert max(norms) > 1e-3

    def test_orthogonal_decoupling(self, setup, rng):
        """Moving only along the phi direction changes phi toward its target
        and perturbs xi/eta at second order in the step size."""
        scn, targets, p_star = setup
        i, j, k = scn.graph.neighbor_triple(4)
        p = p_star + rng.normal(scale=0.3, size=p_star.shape)
        p_i, p_j, p_k = p[i - 1], p[j - 1], p[k - 1]
        f = geometry.frame_of(p_i, p_j, p_k)
        b = geometry.from_cartesian(p[3], f, p_i, p_j, p_k)
        basis = geometry.basis_at(b, f)
        e_phi = b.phi - targets.phi_star[0]
        u = -2.0 * e_phi * basis.phi_hat
        for dt in (1e-3, 1e-4):
            q = p[3] + dt * u
            b2 = geometry.from_cartesian(q, f, p_i, p_j, p_k)
            assert abs(b2.phi - targets.phi_star[0]) < abs(e_phi)
            assert abs(b2.xi - b.xi) < 10.0 * dt**2 * np.linalg.norm(u) ** 2
            assert abs(b2.eta - b.eta) < 10.0 * dt**2 * np.linalg.norm(u) ** 2

    def test_degenerate_view_holds_and_logs(self, setup):
        scn, targets, _ = setup
        # agent 4 exactly on the segment between its first two neighbors:
        # sin(xi) = 0 is the focal-axis degeneracy
        p = canonical_embedding(scn.spec)
        p[3] = 0.5 * (p[0] + p[1])
        view = sense(make_world(p), scn.graph, 4)
        events = []
        u = control(view, targets, scn.gains, 4, events=events)
        assert np.array_equal(u, np.zeros(3))
        assert any(e["kind"] == "degenerate_hold" for e in events)

    def test_sin_xi_guard_scales_gamma_term(self, setup):
        scn, targets, _ = setup
        p = canonical_embedding(scn.spec)
        mid = 0.5 * (p[0] + p[1])
        p[3] = mid + np.array([0.0, 1e-7, 0.0])  # just off the focal axis
        view = sense(make_world(p), scn.graph, 4)
        events = []
        control(view, targets, scn.gains, 4, events=events)
        assert any(e["kind"] == "sin_xi_guard" for e in events)


class TestStackedPath:
    def test_batch_matches_per_agent(self, setup, rng):
        scn, targets, p_star = setup
        idx = neighbor_index_arrays(scn.graph)
        for _ in range(20):
            p = p_star + rng.normal(scale=0.4, size=p_star.shape)
            views = sense_stacked(p, identity_frames(6), idx)
            res = bearing_agent_step(views, targets, scn.gains)
            world = make_world(p)
            for agent in range(3, 7):
                u_ref = control(sense(world, scn.graph, agent), targets, scn.gains, agent)
                assert np.allclose(res.commands[agent - 3], u_ref, atol=1e-13)

    def test_formation_errors_row_layout(self, setup, rng):
        scn, targets, p_star = setup
        idx = neighbor_index_arrays(scn.graph)
        p = p_star + rng.normal(scale=0.2, size=p_star.shape)
        views = sense_stacked(p, identity_frames(6), idx)
        res = bearing_agent_step(views, targets, scn.gains)
        errs = formation_errors_from_step(p, res, targets)
        row = errs.as_row()
        names = FormationErrors.row_names(6)
        assert len(row) == len(names) == 12
        assert names[0] == "e_d" and names[3] == "e_xi_4" and names[-1] == "e_phi_6"
        world = make_world(p)
        e4 = errors_of(sense(world, scn.graph, 4), targets, 4)
        assert row[names.index("e_phi_4")] == pytest.approx(e4.e_phi, abs=1e-12)


class TestLyapunov:
    def test_zero(self):
        errs = FormationErrors(e_d=0.0, e_xi=np.zeros(4), e_eta=np.zeros(4), e_phi=np.zeros(3))
        assert np.allclose(lyapunov_of(errs).W, 0.0)

    def test_unit_errors(self):
        errs = FormationErrors(
            e_d=1.0, e_xi=np.ones(4), e_eta=np.ones(4), e_phi=np.ones(3)
        )
        rec = lyapunov_of(errs)
        assert rec.W[0] == pytest.approx(0.5)   # agent 2
        assert rec.W[1] == pytest.approx(1.0)   # agent 3
        assert np.allclose(rec.W[2:], 1.5)      # ordinary followers

    def test_stacked_target_layout(self, setup):
        _, targets, _ = setup
        xi_t, eta_t, phi_t = stacked_targets(targets)
        assert xi_t[0] == targets.xi3_star and phi_t[0] == 0.0
        kappa, lam, gamma = stacked_gains(ControlGains.uniform(6, gamma=3.0))
        assert gamma[0] == 0.0 and np.all(gamma[1:] == 3.0)
