"""Seeded property-check suites shared by the test suite and the CLI
`check` subcommand.

Every suite returns a list of CheckResult; a suite passes iff all of its
items do. Sample counts default to what the verification contract demands.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import engine, geometry, rates, sensing, shape
from .config import scenario_from_dict, six_agent_scenario
from .controller import bearing_agent_step, stacked_gains, stacked_targets
from .engine import SimConfig
from .errors import DegenerateGeometryError, InvalidSpecError, UnsupportedTargetError
from .graph import henneberg_grow, seed_graph, tetrahedra
from .sensing import neighbor_index_arrays, sense_stacked


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ""

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.detail}"


def all_passed(results: list[CheckResult]) -> bool:
    return all(r.passed for r in results)


# ---------------------------------------------------------------------------
# sampling helpers


class _TetrahedronPool:
    """Vectorized rejection sampler of non-degenerate 4-point configurations:
    separated vertices, observer angles and the frame normal bounded away
    from zero. Only the sampling is vectorized; the functions under test are
    still exercised one sample at a time."""

    def __init__(self, rng, spread=2.0, min_sep=0.3, min_sin=0.15):
        self.rng = rng
        self.spread = spread
        self.min_sep = min_sep
        self.min_sin = min_sin
        self._pool: list[np.ndarray] = []

    def _refill(self, want: int):
        raw = self.rng.uniform(-self.spread, self.spread, size=(max(2 * want, 256), 4, 3))
        d = np.linalg.norm(raw[:, :, None, :] - raw[:, None, :, :], axis=-1)
        d = d + np.eye(4) * (10.0 * self.spread)
        ok = d.min(axis=(1, 2)) >= self.min_sep

        def unit(v):
            return v / np.linalg.norm(v, axis=-1, keepdims=True)

        p_i, p_j, p_k, p_l = raw[:, 0], raw[:, 1], raw[:, 2], raw[:, 3]
        v_li, v_lj = unit(p_i - p_l), unit(p_j - p_l)
        v_ki, v_kj = unit(p_i - p_k), unit(p_j - p_k)
        sin_l = np.linalg.norm(np.cross(v_li, v_lj), axis=-1)
        sin_k = np.linalg.norm(np.cross(v_ki, v_kj), axis=-1)
        normal = np.linalg.norm(np.cross(unit(p_i - p_j), v_ki), axis=-1)
        ok &= (sin_l >= self.min_sin) & (sin_k >= self.min_sin) & (normal >= self.min_sin)
        self._pool.extend(raw[ok])

    def draw(self) -> np.ndarray:
        if not self._pool:
            self._refill(512)
        return self._pool.pop()




def _random_valid_spec(rng):
    """A random valid ShapeSpec on 4..6 agents, grown by vertex insertion and
    embedded with margins that keep every target well conditioned."""
    n = int(rng.integers(4, 7))
    while True:
        g = seed_graph()
        for v in range(4, n + 1):
            candidates = [
                (i, j, k)
                for i in range(1, v - 2)
                for j in range(i + 1, v - 1)
                for k in range(j + 1, v)
                if g.has_edge(j, i) and g.has_edge(k, i) and g.has_edge(k, j)
            ]
            g = henneberg_grow(g, candidates[int(rng.integers(len(candidates)))])
        p = rng.uniform(-1.5, 1.5, size=(n, 3))
        try:
            d_min = min(np.linalg.norm(p[i - 1] - p[j - 1]) for (j, i) in g.edges)
            if d_min < 0.4:
                continue
            vols = geometry.stacked_volumes(p, g)
            if np.any(np.abs(vols) < 0.05):
                continue
            s = shape.spec_from_embedding(p, g)
            t = shape.targets_from_spec(s)
            if np.any(np.abs(np.sin(t.phi_star)) < 0.1):
                continue
            if math.sin(t.xi3_star) < 0.1 or np.any(np.sin(t.xi_star) < 0.1):
                continue
            return s, p
        except (DegenerateGeometryError, InvalidSpecError, UnsupportedTargetError):
            continue


def _random_rigid_transform(rng, p):
    r = sensing.random_rotation(rng)
    t = rng.uniform(-2.0, 2.0, size=3)
    return p @ r.T + t


def _reflect_through_plane(p, a, b, c):
    n = np.cross(b - a, c - a)
    n = n / np.linalg.norm(n)
    return p - 2.0 * float((p - a) @ n) * n


# ---------------------------------------------------------------------------
# geometry suite


def geometry_suite(seed: int = 0, samples: int = 10_000, basis_fn=None) -> list[CheckResult]:
    basis_fn = basis_fn or geometry.basis_at
    rng = np.random.default_rng(seed)
    pool = _TetrahedronPool(rng)
    results = []

    worst = 0.0
    for _ in range(samples):
        p_i, p_j, p_k, _ = pool.draw()
        f = geometry.frame_of(p_i, p_j, p_k)
        while True:
            p = rng.uniform(-3.0, 3.0, size=3)
            if min(np.linalg.norm(p - p_i), np.linalg.norm(p - p_j)) > 1e-3:
                break
        b = geometry.from_cartesian(p, f, p_i, p_j, p_k)
        back = geometry.to_cartesian(b, f)
        worst = max(worst, float(np.linalg.norm(back - p)) / max(1.0, float(np.linalg.norm(p))))
    results.append(
        CheckResult("round_trip", worst < 1e-9, f"worst relative error {worst:.3e} (tol 1e-9)")
    )

    worst = 0.0
    for _ in range(samples):
        p_i, p_j, p_k, p_l = pool.draw()
        f = geometry.frame_of(p_i, p_j, p_k)
        b = geometry.from_cartesian(p_l, f, p_i, p_j, p_k)
        bb = basis_fn(b, f)
        vs = (bb.xi_hat, bb.eta_hat, bb.phi_hat)
        for v in vs:
            worst = max(worst, abs(float(np.linalg.norm(v)) - 1.0))
        for a in range(3):
            for c in range(a + 1, 3):
                worst = max(worst, abs(float(vs[a] @ vs[c])))
    results.append(
        CheckResult("basis_orthonormality", worst < 1e-9, f"worst deviation {worst:.3e} (tol 1e-9)")
    )

    h = 1e-6
    worst_cross, min_diag = 0.0, math.inf
    for _ in range(max(samples // 5, 500)):
        p_i, p_j, p_k, p_l = pool.draw()
        f = geometry.frame_of(p_i, p_j, p_k)
        b = geometry.from_cartesian(p_l, f, p_i, p_j, p_k)
        bb = basis_fn(b, f)

        def coords(q):
            c = geometry.from_cartesian(q, f, p_i, p_j, p_k)
            return np.array([c.xi, c.eta, c.phi])

        for which, v in enumerate((bb.xi_hat, bb.eta_hat, bb.phi_hat)):
            d = (coords(p_l + h * v) - coords(p_l - h * v)) / (2.0 * h)
            d[2] = (d[2] + math.pi / h) % (2.0 * math.pi / h) - math.pi / h  # phi wrap
            min_diag = min(min_diag, d[which])
            for other in range(3):
                if other != which:
                    worst_cross = max(worst_cross, abs(d[other]))
    results.append(
        CheckResult(
            "directional_derivatives",
            min_diag > 0.0 and worst_cross < 1e-6,
            f"min matching derivative {min_diag:.3e}, worst cross term {worst_cross:.3e}",
        )
    )

    worst = 0.0
    for _ in range(samples):
        p_i, p_j, p_k, p_l = pool.draw()
        phi = geometry.phi_of(p_i, p_j, p_k, p_l)
        v = geometry.signed_volume(p_i, p_j, p_k, p_l)
        d_ji = np.linalg.norm(p_i - p_j)
        denom = np.linalg.norm(np.cross(p_i - p_j, p_i - p_k)) * np.linalg.norm(
            np.cross(p_i - p_l, p_j - p_l)
        )
        worst = max(worst, abs(math.sin(phi) - 6.0 * v * d_ji / denom))
    results.append(
        CheckResult("sin_phi_volume_identity", worst < 1e-9, f"worst residual {worst:.3e} (tol 1e-9)")
    )

    worst = 0.0
    for _ in range(samples):
        p_i, p_j, p_k, p_l = pool.draw()
        v_ij = geometry.bearing(p_i, p_j)
        v_ik = geometry.bearing(p_i, p_k)
        v_il = geometry.bearing(p_i, p_l)
        cross_form = geometry.dihedral_cos(v_ij, v_ik, v_il)
        t_jik = geometry.xi_of(v_ij, v_ik)
        t_jil = geometry.xi_of(v_ij, v_il)
        t_kil = geometry.xi_of(v_ik, v_il)
        face_form = (math.cos(t_kil) - math.cos(t_jik) * math.cos(t_jil)) / (
            math.sin(t_jik) * math.sin(t_jil)
        )
        worst = max(worst, abs(cross_form - face_form))
    results.append(
        CheckResult("dihedral_dual_form", worst < 1e-9, f"worst disagreement {worst:.3e} (tol 1e-9)")
    )

    ok = True
    for _ in range(1000):
        p_i, p_j, p_k, p_l = pool.draw()
        v = geometry.signed_volume(p_i, p_j, p_k, p_l)
        for swapped in (
            (p_j, p_i, p_k, p_l),
            (p_k, p_j, p_i, p_l),
            (p_i, p_k, p_j, p_l),
        ):
            w = geometry.signed_volume(*swapped)
            if np.sign(w) != -np.sign(v) or abs(w + v) > 1e-12 * max(1.0, abs(v)):
                ok = False
    results.append(CheckResult("volume_antisymmetry", ok, "sign flips exactly under vertex swaps"))

    worst = 0.0
    for _ in range(1000):
        p_i, p_j, p_k, p_l = pool.draw()
        v_li = geometry.bearing(p_l, p_i)
        v_lj = geometry.bearing(p_l, p_j)
        v_lk = geometry.bearing(p_l, p_k)
        r_lij = np.linalg.norm(p_i - p_l) / np.linalg.norm(p_j - p_l)
        r_lik = np.linalg.norm(p_i - p_l) / np.linalg.norm(p_k - p_l)
        v_ji, v_ki = geometry.recover_bearings(v_li, v_lj, v_lk, r_lij, r_lik)
        worst = max(
            worst,
            float(np.linalg.norm(v_ji - geometry.bearing(p_j, p_i))),
            float(np.linalg.norm(v_ki - geometry.bearing(p_k, p_i))),
        )
    results.append(
        CheckResult("recover_bearings", worst < 1e-12, f"worst error {worst:.3e} (tol 1e-12)")
    )
    return results


# ---------------------------------------------------------------------------
# error-dynamics suite


def _coords_of(pts):
    p_i, p_j, p_k, p_l = pts
    xi = geometry.xi_of(geometry.bearing(p_l, p_i), geometry.bearing(p_l, p_j))
    eta = geometry.eta_of(np.linalg.norm(p_i - p_l), np.linalg.norm(p_j - p_l))
    phi = geometry.phi_of(p_i, p_j, p_k, p_l)
    return np.array([xi, eta, phi])


def dynamics_suite(seed: int = 0, samples: int = 10_000) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    pool = _TetrahedronPool(rng)
    results = []
    h = 1e-6

    worst_fd, worst_id = 0.0, 0.0
    for _ in range(samples):
        pts = pool.draw()
        p_i, p_j, p_k, p_l = pts
        vels = rng.normal(size=(4, 3))
        analytic = rates.coordinate_rates(pts, vels)
        cp = _coords_of(pts + h * vels)
        cm = _coords_of(pts - h * vels)
        fd = (cp - cm) / (2.0 * h)
        fd[2] = ((cp[2] - cm[2] + math.pi) % (2.0 * math.pi) - math.pi) / (2.0 * h)
        worst_fd = max(worst_fd, float(np.max(np.abs(np.array(analytic) - fd))))
        d1, d2 = rates.distance_error_rows(p_i, p_j)
        sq = lambda q1, q2: float((q1 - q2) @ (q1 - q2))  # noqa: E731
        fd_d = (
            sq(p_i + h * vels[0], p_j + h * vels[1])
            - sq(p_i - h * vels[0], p_j - h * vels[1])
        ) / (2.0 * h)
        worst_fd = max(worst_fd, abs(float(d1 @ vels[0] + d2 @ vels[1]) - fd_d))

        f = geometry.frame_of(p_i, p_j, p_k)
        b = geometry.from_cartesian(p_l, f, p_i, p_j, p_k)
        bb = geometry.basis_at(b, f)
        scale = (math.cosh(b.eta) - math.cos(b.xi)) / f.a
        _, _, comb = rates.xi_rate_rows(p_i, p_j, p_l)
        _, _, m_l = rates.eta_rate_rows(p_i, p_j, p_l)
        _, _, _, l_l = rates.phi_rate_rows(p_i, p_j, p_k, p_l)
        worst_id = max(
            worst_id,
            float(np.max(np.abs(comb - scale * bb.xi_hat))) / scale,
            float(np.max(np.abs(m_l - scale * bb.eta_hat))) / scale,
            float(np.max(np.abs(l_l - scale / math.sin(b.xi) * bb.phi_hat)))
            / (scale / math.sin(b.xi)),
        )
    results.append(
        CheckResult(
            "rate_rows_vs_finite_differences",
            worst_fd < 1e-6,
            f"worst |analytic - central difference| {worst_fd:.3e} (tol 1e-6)",
        )
    )
    results.append(
        CheckResult(
            "row_basis_identities",
            worst_id < 1e-9,
            f"worst relative residual {worst_id:.3e} (tol 1e-9)",
        )
    )

    worst = 0.0
    for _ in range(2000):
        p_i, p_j, p_k, p_l = pool.draw()
        f = geometry.frame_of(p_i, p_j, p_k)
        b = geometry.from_cartesian(p_l, f, p_i, p_j, p_k)
        bb = geometry.basis_at(b, f)
        _, _, comb = rates.xi_rate_rows(p_i, p_j, p_l)
        _, _, m_l = rates.eta_rate_rows(p_i, p_j, p_l)
        worst = max(worst, abs(float(comb @ bb.phi_hat)), abs(float(m_l @ bb.phi_hat)))
    results.append(
        CheckResult(
            "phi_term_orthogonal_to_xi_eta",
            worst < 1e-12,
            f"worst leak of the phi direction into xi/eta rates {worst:.3e} (tol 1e-12)",
        )
    )

    results.extend(unforced_lyapunov_checks(seed=seed, samples=samples))
    return results


# ---------------------------------------------------------------------------
# unforced (pinned-neighbor) Lyapunov machinery


class _UnforcedBatch:
    """All bearing followers at once, each in its own world where everyone
    else is pinned at the desired embedding and only that follower moves."""

    def __init__(self, scn, rng, offset_scale=1.0, max_w0=None):
        self.g = scn.graph
        n = self.g.n
        self.m = n - 2
        self.targets = shape.targets_from_spec(scn.spec)
        self.gains = scn.gains
        self.p_star = shape.canonical_embedding(scn.spec)
        self.idx = neighbor_index_arrays(self.g)
        self.frames = sensing.identity_frames(n)
        self.xi_t, self.eta_t, self.phi_t = stacked_targets(self.targets)
        self.kappa, self.lam, self.gamma = stacked_gains(self.gains)
        i_idx, j_idx, _ = self.idx
        self.d_ji = np.linalg.norm(self.p_star[i_idx] - self.p_star[j_idx], axis=-1)
        # world b frees agent b+3 (row b of the stacked arrays)
        self.mask = np.zeros((self.m, n, 1))
        worlds = np.tile(self.p_star, (self.m, 1, 1))
        for b in range(self.m):
            agent_row = b + 2
            self.mask[b, agent_row, 0] = 1.0
            while True:
                q = self.p_star[agent_row] + rng.uniform(-offset_scale, offset_scale, 3)
                worlds[b, agent_row] = q
                st = self._step_result(worlds[b : b + 1])
                if st.hold[0, b] or math.sin(st.xi[0, b]) <= 0.05:
                    continue
                if max_w0 is not None:
                    e_phi = st.phi[0, b] - self.phi_t[b] if self.gamma[b] > 0.0 else 0.0
                    w0 = 0.5 * (
                        (st.xi[0, b] - self.xi_t[b]) ** 2
                        + (st.eta[0, b] - self.eta_t[b]) ** 2
                        + e_phi**2
                    )
                    if w0 > max_w0:
                        continue
                break
        self.worlds = worlds

    def _step_result(self, worlds):
        views = sense_stacked(worlds, self.frames, self.idx)
        return bearing_agent_step(views, self.targets, self.gains)

    def _velocity(self, worlds):
        res = self._step_result(worlds)
        u = np.zeros_like(worlds)
        u[..., 2:, :] = res.commands  # identity frames: local == world
        return u * self.mask, res

    def measure(self, res):
        """Per-world W and analytic Lyapunov rate of the free agent."""
        rows = np.arange(self.m)
        xi = res.xi[rows, rows]
        eta = res.eta[rows, rows]
        phi = res.phi[rows, rows]
        e_xi = xi - self.xi_t
        e_eta = eta - self.eta_t
        e_phi = np.where(self.gamma > 0.0, phi - self.phi_t, 0.0)
        w = 0.5 * (e_xi**2 + e_eta**2 + e_phi**2)
        quad = (
            self.kappa * e_xi**2
            + self.lam * e_eta**2
            + self.gamma * e_phi**2 / np.sin(xi)
        )
        wdot = -2.0 * (np.cosh(eta) - np.cos(xi)) / self.d_ji * quad
        return w, wdot

    def integrate(self, dt, t_end):
        nsteps = int(round(t_end / dt))
        ts = np.arange(nsteps + 1) * dt
        ws = np.empty((nsteps + 1, self.m))
        wdots = np.empty((nsteps + 1, self.m))
        worlds = self.worlds.copy()
        for k in range(nsteps + 1):
            k1, res = self._velocity(worlds)
            ws[k], wdots[k] = self.measure(res)
            if k == nsteps:
                break
            k2, _ = self._velocity(worlds + 0.5 * dt * k1)
            k3, _ = self._velocity(worlds + 0.5 * dt * k2)
            k4, _ = self._velocity(worlds + dt * k3)
            worlds = worlds + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        return ts, ws, wdots


def unforced_lyapunov_checks(seed: int = 0, samples: int = 10_000) -> list[CheckResult]:
    rng = np.random.default_rng(seed + 1)
    scn = scenario_from_dict(six_agent_scenario())
    batch = _UnforcedBatch(scn, rng)
    results = []

    ts, ws, _ = batch.integrate(dt=0.005, t_end=16.0)
    mono_ok, floor_ok = True, True
    for b in range(batch.m):
        w = ws[:, b]
        above = w > 1e-12
        if np.all(above):
            floor_ok = False
            cut = len(w)
        else:
            cut = int(np.argmax(~above))
        if cut < 2 or np.any(np.diff(w[:cut]) >= 0.0):
            mono_ok = False
    results.append(
        CheckResult(
            "unforced_W_strictly_decreasing",
            mono_ok and floor_ok,
            "W decreases at every step until below 1e-12 for agent 3 and every follower",
        )
    )

    # moderate starting errors keep the central-difference truncation term
    # (dt^2/6 W''') well under the tolerance, so the residual isolates the
    # analytic formula
    fd_batch = _UnforcedBatch(scn, rng, offset_scale=0.35, max_w0=2.0)
    t2, w2, wd2 = fd_batch.integrate(dt=1e-4, t_end=0.2)
    worst = max(
        rates.wdot_check(t2, w2[:, b], wd2[:, b]) for b in range(fd_batch.m)
    )
    results.append(
        CheckResult(
            "wdot_analytic_vs_finite_difference",
            worst < 1e-5,
            f"worst residual {worst:.3e} at dt = 1e-4 (tol 1e-5)",
        )
    )

    per_world = max(samples // batch.m, 100)
    worst = -math.inf
    checked = 0
    draws = np.tile(batch.p_star, (per_world, batch.m, 1, 1))
    rows = np.arange(batch.m)
    for b in range(batch.m):
        draws[:, b, b + 2, :] = batch.p_star[b + 2] + rng.uniform(
            -1.5, 1.5, size=(per_world, 3)
        )
    res = batch._step_result(draws)
    xi = res.xi[:, rows, rows]
    eta = res.eta[:, rows, rows]
    phi = res.phi[:, rows, rows]
    usable = ~res.hold[:, rows, rows] & (np.sin(xi) > 1e-3)
    e_xi = xi - batch.xi_t
    e_eta = eta - batch.eta_t
    e_phi = np.where(batch.gamma > 0.0, phi - batch.phi_t, 0.0)
    quad = batch.kappa * e_xi**2 + batch.lam * e_eta**2 + batch.gamma * e_phi**2 / np.sin(xi)
    wdot = -2.0 * (np.cosh(eta) - np.cos(xi)) / batch.d_ji * quad
    worst = float(np.max(wdot[usable]))
    checked = int(np.count_nonzero(usable))
    results.append(
        CheckResult(
            "wdot_nonpositive",
            worst <= 0.0,
            f"max analytic Lyapunov rate over {checked} random unforced states: {worst:.3e}",
        )
    )
    return results


# ---------------------------------------------------------------------------
# equivalence (distance+volume vs signature) suite


def lemma1_suite(seed: int = 0, pairs: int = 1000) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    results = []
    tol = 1e-6
    disagreements = 0
    trues, falses = 0, 0
    for _ in range(pairs):
        s, p_star = _random_valid_spec(rng)
        kind = int(rng.integers(4))
        if kind == 0:
            p = _random_rigid_transform(rng, p_star)
        elif kind == 1:
            p = rng.uniform(-2.0, 2.0, size=p_star.shape)
        elif kind == 2:
            refs = tetrahedra(s.graph)
            ref = refs[int(rng.integers(len(refs)))]
            p = _random_rigid_transform(rng, p_star)
            p[ref.l - 1] = _reflect_through_plane(
                p[ref.l - 1], p[ref.i - 1], p[ref.j - 1], p[ref.k - 1]
            )
        else:
            p = _random_rigid_transform(rng, p_star)
            a = int(rng.integers(1, s.graph.n))
            p[a] = p[a] + 0.1 * geometry._unit(rng.normal(size=3))
        try:
            direct = shape.lemma1_oracle(p, s, tol)
            via_signature = shape.signature_matches(p, s, tol)
        except DegenerateGeometryError:
            continue
        if direct:
            trues += 1
        else:
            falses += 1
        if direct != via_signature:
            disagreements += 1
    results.append(
        CheckResult(
            "oracle_agreement",
            disagreements == 0 and trues > 0 and falses > 0,
            f"{disagreements} disagreements over {pairs} pairs "
            f"({trues} matching, {falses} non-matching)",
        )
    )

    worst = 0.0
    for _ in range(2000):
        while True:
            tri = rng.uniform(-2.0, 2.0, size=(3, 3))
            d21 = np.linalg.norm(tri[0] - tri[1])
            d31 = np.linalg.norm(tri[0] - tri[2])
            d32 = np.linalg.norm(tri[1] - tri[2])
            if min(d21, d31, d32) > 0.2:
                break
        xi3 = geometry.xi_of(geometry.bearing(tri[2], tri[0]), geometry.bearing(tri[2], tri[1]))
        eta3 = math.log(d31 / d32)
        lhs = (1.0 + math.exp(2.0 * eta3) - (d21 / d32) ** 2) / (2.0 * math.exp(eta3))
        worst = max(worst, abs(lhs - math.cos(xi3)))
    results.append(
        CheckResult("cosine_law_identity", worst < 1e-9, f"worst residual {worst:.3e} (tol 1e-9)")
    )

    worst = 0.0
    for _ in range(500):
        s, p_star = _random_valid_spec(rng)
        t = shape.targets_from_spec(s)
        sig = shape.signature_of(p_star, s.graph)
        worst = max(
            worst,
            abs(sig.d21 - t.d21_star),
            abs(sig.xi[0] - t.xi3_star),
            abs(sig.eta[0] - t.eta3_star),
            float(np.max(np.abs(sig.xi[1:] - t.xi_star), initial=0.0)),
            float(np.max(np.abs(sig.eta[1:] - t.eta_star), initial=0.0)),
            float(np.max(np.abs(sig.phi - t.phi_star), initial=0.0)),
        )
    results.append(
        CheckResult(
            "targets_match_embedding_signature",
            worst < 1e-9,
            f"worst deviation {worst:.3e} (tol 1e-9)",
        )
    )

    worst = 0.0
    for _ in range(500):
        s, p_star = _random_valid_spec(rng)
        sigma = float(rng.uniform(0.5, 3.0))
        s2 = shape.spec_from_embedding(sigma * p_star, s.graph)
        t1, t2 = shape.targets_from_spec(s), shape.targets_from_spec(s2)
        worst = max(
            worst,
            abs(t2.d21_star - sigma * t1.d21_star),
            abs(t2.xi3_star - t1.xi3_star),
            abs(t2.eta3_star - t1.eta3_star),
            float(np.max(np.abs(t2.xi_star - t1.xi_star), initial=0.0)),
            float(np.max(np.abs(t2.eta_star - t1.eta_star), initial=0.0)),
            float(np.max(np.abs(t2.phi_star - t1.phi_star), initial=0.0)),
        )
    results.append(
        CheckResult(
            "scaling_only_moves_d21", worst < 1e-9, f"worst deviation {worst:.3e} (tol 1e-9)"
        )
    )
    return results


# ---------------------------------------------------------------------------
# Monte Carlo suite


def montecarlo_suite(seed: int = 7, trials: int = 100) -> list[CheckResult]:
    scn = scenario_from_dict(six_agent_scenario())
    cfg = SimConfig(
        dt=scn.cfg.dt,
        t_end=20.0,
        integrator="rk4",
        events=(),
        seed=scn.cfg.seed,
        init_half_width=2.0,
    )
    summary = engine.monte_carlo(cfg, scn.graph, scn.spec, scn.gains, trials=trials, seed=seed)
    results = [
        CheckResult(
            "monte_carlo_convergence",
            summary.converged_count >= math.ceil(0.99 * trials),
            f"{summary.converged_count}/{trials} trials below {engine.CONVERGENCE_TOL:g} "
            f"at t = {cfg.t_end:g}",
        ),
        CheckResult(
            "no_neighbor_collision",
            bool(np.all(summary.min_neighbor_distance > 1e-3)),
            f"min neighbor distance over all runs "
            f"{float(np.min(summary.min_neighbor_distance)):.3e} (floor 1e-3)",
        ),
    ]
    s1 = engine.monte_carlo(cfg, scn.graph, scn.spec, scn.gains, trials=5, seed=seed).to_json()
    s2 = engine.monte_carlo(cfg, scn.graph, scn.spec, scn.gains, trials=5, seed=seed).to_json()
    results.append(
        CheckResult("seeded_determinism", s1 == s2, "identical seeds give identical summaries")
    )
    results.extend(reflection_checks(seed=seed, trials=trials))
    return results


def reflection_checks(seed: int = 7, trials: int = 100) -> list[CheckResult]:
    """Start agent 4 at its mirror image through its neighbors' plane: the
    signed volume must come back with the correct sign every time."""
    rng = np.random.default_rng(seed + 13)
    scn = scenario_from_dict(six_agent_scenario())
    p_star = shape.canonical_embedding(scn.spec)
    inits = np.empty((trials, scn.graph.n, 3))
    for trial in range(trials):
        p = p_star.copy()
        p[3] = _reflect_through_plane(p[3], p[0], p[1], p[2])
        p[1:] += rng.uniform(-0.05, 0.05, size=(scn.graph.n - 1, 3))
        inits[trial] = p
    cfg = SimConfig(dt=0.005, t_end=20.0, init_half_width=2.0, seed=0)
    final, max_err, _, _ = engine.run_batch(inits, cfg, scn.graph, scn.spec, scn.gains)
    v_final = np.array(
        [geometry.stacked_volumes(final[t], scn.graph)[0] for t in range(trials)]
    )
    good = (np.sign(v_final) == np.sign(scn.spec.volumes[0])) & (
        max_err < engine.CONVERGENCE_TOL
    )
    return [
        CheckResult(
            "reflection_disambiguation",
            bool(np.all(good)),
            f"{int(np.sum(good))}/{trials} reflected starts converged to the "
            "correct orientation",
        )
    ]


SUITES = {
    "geometry": geometry_suite,
    "dynamics": dynamics_suite,
    "lemma1": lemma1_suite,
    "montecarlo": montecarlo_suite,
}
