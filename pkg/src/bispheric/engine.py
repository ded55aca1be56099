"""Fixed-step time integration of the closed loop, scale-change events,
trajectory logging, and Monte Carlo batches.

The integrator advances world positions; every velocity evaluation goes
through the sensing interface (per-agent local frames) and the stacked
controller, so the loop is closed exactly the way a deployed system would
close it. Monte Carlo batches integrate all trials simultaneously as one
leading batch axis.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import controller, sensing
from .controller import ControlGains, bearing_agent_step, formation_errors_from_step
from .errors import SimulationError
from .geometry import _dot, _norm
from .graph import SensingGraph
from .sensing import neighbor_index_arrays, sense_stacked
from .shape import BisphericalTargets, ShapeSpec, targets_from_spec

CONVERGENCE_TOL = 1e-6  # max |error| defining a converged trial


@dataclass(frozen=True)
class ScaleEvent:
    """Retarget the leader distance d21* at time t (formation scaling)."""

    t: float
    d21_star: float


@dataclass(frozen=True, eq=False)
class SimConfig:
    dt: float = 0.005
    t_end: float = 20.0
    integrator: str = "rk4"
    events: tuple[ScaleEvent, ...] = ()
    seed: int = 0
    init_half_width: float | None = 2.0
    init_positions: np.ndarray | None = None
    min_start_separation: float = 1e-3
    log_every: int = 1
    random_frames: bool = False
    noise: float = 0.0

    def __post_init__(self):
        if self.dt <= 0.0:
            raise SimulationError("dt must be positive")
        if self.t_end < 0.0:
            raise SimulationError("t_end must be nonnegative")
        if self.integrator not in ("euler", "rk4"):
            raise SimulationError(f"unknown integrator {self.integrator!r}")
        ts = [e.t for e in self.events]
        if ts != sorted(ts):
            raise SimulationError("events must be time-sorted")
        if self.init_positions is None and self.init_half_width is None:
            raise SimulationError("either explicit positions or a cube half-width is required")
        if self.log_every < 1:
            raise SimulationError("log_every must be >= 1")
        if self.init_positions is not None:
            object.__setattr__(
                self, "init_positions", np.asarray(self.init_positions, dtype=float)
            )


@dataclass(eq=False)
class WorldState:
    t: float
    positions: np.ndarray
    frames: np.ndarray


@dataclass(eq=False)
class TrajectoryLog:
    """Sampled trajectory: times, positions, stacked errors, Lyapunov values,
    min inter-neighbor distance, and degeneracy-event counts per sample."""

    n: int
    t: np.ndarray
    positions: np.ndarray
    errors: np.ndarray
    lyapunov: np.ndarray
    min_dist: np.ndarray
    degeneracies: np.ndarray
    events: list = field(default_factory=list)
    applied_events: list = field(default_factory=list)
    min_dist_run: float = math.inf

    def header(self) -> list[str]:
        cols = ["t"]
        for a in range(1, self.n + 1):
            cols += [f"x{a}", f"y{a}", f"z{a}"]
        cols += controller.FormationErrors.row_names(self.n)
        cols += controller.LyapunovRecord.row_names(self.n)
        cols += ["min_dist", "degeneracies"]
        return cols

    def rows(self):
        for r in range(self.t.shape[0]):
            yield np.concatenate(
                [
                    [self.t[r]],
                    self.positions[r].ravel(),
                    self.errors[r],
                    self.lyapunov[r],
                    [self.min_dist[r], self.degeneracies[r]],
                ]
            )

    def write_csv(self, path):
        with open(path, "w") as fh:
            fh.write(",".join(self.header()) + "\n")
            for row in self.rows():
                fh.write(",".join(f"{v:.17g}" for v in row) + "\n")

    def write_jsonl(self, path):
        names = self.header()
        with open(path, "w") as fh:
            for row in self.rows():
                fh.write(json.dumps(dict(zip(names, row.tolist()))) + "\n")

    def final_errors(self) -> dict[str, float]:
        names = controller.FormationErrors.row_names(self.n)
        return dict(zip(names, self.errors[-1].tolist()))

    def summary(self) -> dict:
        final = self.final_errors()
        max_err = max(abs(v) for v in final.values())
        return {
            "n": self.n,
            "rows": int(self.t.shape[0]),
            "t_end": float(self.t[-1]),
            "final_errors": final,
            "max_abs_final_error": max_err,
            "converged": bool(max_err < CONVERGENCE_TOL),
            "min_neighbor_distance": float(self.min_dist_run),
            "degeneracy_events": int(self.degeneracies.sum()),
            "seam_crossings": sum(1 for e in self.events if e["kind"] == "phi_seam"),
            "events_applied": self.applied_events,
            "columns": self.header(),
        }


@dataclass(eq=False)
class _Context:
    """Immutable-per-run pieces of the velocity field."""

    g: SensingGraph
    idx: tuple[np.ndarray, np.ndarray, np.ndarray]
    edges_j: np.ndarray
    edges_i: np.ndarray
    frames: np.ndarray
    gains: ControlGains
    targets: BisphericalTargets
    noise: float = 0.0
    rng: np.random.Generator | None = None


def _make_context(g, targets, gains, frames, noise=0.0, rng=None) -> _Context:
    edges = np.array(g.edges)
    return _Context(
        g=g,
        idx=neighbor_index_arrays(g),
        edges_j=edges[:, 0] - 1,
        edges_i=edges[:, 1] - 1,
        frames=np.asarray(frames, dtype=float),
        gains=gains,
        targets=targets,
        noise=noise,
        rng=rng,
    )


def _velocity(positions: np.ndarray, ctx: _Context):
    """World-frame commands for every agent, plus the controller evaluation
    (reused for logging). Leading batch axes broadcast."""
    views = sense_stacked(positions, ctx.frames, ctx.idx, ctx.noise, ctx.rng)
    res = bearing_agent_step(views, ctx.targets, ctx.gains)
    u = np.zeros_like(positions)
    e_d = _dot(views.p21, views.p21) - ctx.targets.d21_star**2
    u2_local = ctx.gains.kappa2 * e_d[..., None] * views.p21
    u[..., 1, :] = u2_local @ ctx.frames[1].T
    rot = ctx.frames[2:]
    u[..., 2:, :] = np.einsum("mij,...mj->...mi", rot, res.commands)
    return u, res


def _advance(positions: np.ndarray, dt: float, integrator: str, ctx: _Context, first=None):
    """One integrator step; re-senses at every stage. ``first`` may carry an
    already evaluated (velocity, controller result) pair for the start state."""
    k1, res = first if first is not None else _velocity(positions, ctx)
    if integrator == "euler":
        return positions + dt * k1, res
    k2, _ = _velocity(positions + 0.5 * dt * k1, ctx)
    k3, _ = _velocity(positions + 0.5 * dt * k2, ctx)
    k4, _ = _velocity(positions + dt * k3, ctx)
    return positions + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4), res


def step(
    state: WorldState,
    cfg: SimConfig,
    g: SensingGraph,
    targets: BisphericalTargets,
    gains: ControlGains,
    events: list | None = None,
) -> WorldState:
    """Advance one step of cfg.dt from ``state``. Degenerate agents hold for
    the step; if ``events`` is given, one dict per held agent is appended."""
    ctx = _make_context(g, targets, gains, state.frames, cfg.noise,
                        np.random.default_rng(cfg.seed) if cfg.noise > 0.0 else None)
    new_pos, res = _advance(state.positions, cfg.dt, cfg.integrator, ctx)
    if events is not None:
        for m in np.argwhere(res.hold):
            events.append({"t": state.t, "agent": int(m[-1]) + 3, "kind": "degenerate_hold"})
    return WorldState(t=state.t + cfg.dt, positions=new_pos, frames=state.frames)


def random_initial_positions(
    rng: np.random.Generator,
    n: int,
    half_width: float,
    min_separation: float = 1e-3,
    batch: int | None = None,
) -> np.ndarray:
    """Leader at the origin, followers uniform in a centered cube; any draw
    with a pairwise distance under ``min_separation`` is redrawn."""
    shape = (n, 3) if batch is None else (batch, n, 3)
    pos = rng.uniform(-half_width, half_width, size=shape)
    pos[..., 0, :] = 0.0
    for _ in range(100):
        diff = pos[..., :, None, :] - pos[..., None, :, :]
        d = _norm(diff) + np.eye(n) * (2.0 * half_width + 1.0)
        bad = np.min(d, axis=(-2, -1)) < min_separation
        if not np.any(bad):
            return pos
        redraw = rng.uniform(-half_width, half_width, size=shape)
        redraw[..., 0, :] = 0.0
        if batch is None:
            pos = redraw if bad else pos
        else:
            pos = np.where(bad[:, None, None], redraw, pos)
    raise SimulationError("could not draw a non-collocated initial configuration")


def _initial_positions(cfg: SimConfig, g: SensingGraph, rng) -> np.ndarray:
    if cfg.init_positions is not None:
        p = np.asarray(cfg.init_positions, dtype=float)
        if p.shape != (g.n, 3):
            raise SimulationError(f"init positions shape {p.shape}, expected {(g.n, 3)}")
        return p.copy()
    return random_initial_positions(rng, g.n, cfg.init_half_width, cfg.min_start_separation)


def _min_edge_distance(positions, ctx: _Context):
    d = _norm(positions[..., ctx.edges_i, :] - positions[..., ctx.edges_j, :])
    return np.min(d, axis=-1)


def run(
    cfg: SimConfig,
    g: SensingGraph,
    spec: ShapeSpec,
    gains: ControlGains | None = None,
    frames: np.ndarray | None = None,
) -> TrajectoryLog:
    """Integrate the closed loop and return the sampled trajectory.

    Scale events retarget d21* at step boundaries (the first boundary at or
    after the event time); follower targets are scale-invariant and stay
    untouched. Raises SimulationError if the state leaves the finite range.
    """
    gains = gains or ControlGains.uniform(g.n)
    rng = np.random.default_rng(cfg.seed)
    positions = _initial_positions(cfg, g, rng)
    if frames is None:
        frames = (
            sensing.random_frames(g.n, rng) if cfg.random_frames else sensing.identity_frames(g.n)
        )
    targets = targets_from_spec(spec)
    ctx = _make_context(g, targets, gains, frames, cfg.noise, rng if cfg.noise > 0.0 else None)

    nsteps = int(round(cfg.t_end / cfg.dt))
    if abs(nsteps * cfg.dt - cfg.t_end) > 1e-9:
        nsteps = int(math.floor(cfg.t_end / cfg.dt + 1e-12))
    log_idx = list(range(0, nsteps + 1, cfg.log_every))
    if log_idx[-1] != nsteps:
        log_idx.append(nsteps)
    nlog = len(log_idx)

    n_err = 3 * g.n - 6  # e_d + (e_xi, e_eta) per agent >= 3 + e_phi per agent >= 4
    log = TrajectoryLog(
        n=g.n,
        t=np.empty(nlog),
        positions=np.empty((nlog, g.n, 3)),
        errors=np.empty((nlog, n_err)),
        lyapunov=np.empty((nlog, g.n - 1)),
        min_dist=np.empty(nlog),
        degeneracies=np.zeros(nlog, dtype=int),
        events=[],
        applied_events=[],
    )

    def record(slot: int, t: float, p: np.ndarray, res, degen: int):
        errs = formation_errors_from_step(p, res, ctx.targets)
        log.t[slot] = t
        log.positions[slot] = p
        log.errors[slot] = errs.as_row()
        log.lyapunov[slot] = controller.lyapunov_of(errs).W
        log.min_dist[slot] = _min_edge_distance(p, ctx)
        log.degeneracies[slot] = degen
        if slot > 0:
            jump = np.abs(res.phi[1:] - _prev_phi[0][1:])
            for m in np.argwhere(jump > math.pi):
                log.events.append({"t": t, "agent": int(m[0]) + 4, "kind": "phi_seam"})
        _prev_phi[0] = res.phi

    _prev_phi = [None]
    event_queue = list(cfg.events)
    degen_since_log = 0
    slot = 0
    log.min_dist_run = math.inf

    for k in range(nsteps + 1):
        t = k * cfg.dt
        while event_queue and event_queue[0].t <= t + 1e-12:
            ev = event_queue.pop(0)
            ctx.targets = ctx.targets.with_d21(ev.d21_star)
            log.applied_events.append({"t": t, "d21_star": ev.d21_star})
        u, res = _velocity(positions, ctx)
        log.min_dist_run = min(log.min_dist_run, float(_min_edge_distance(positions, ctx)))
        if slot < nlog and k == log_idx[slot]:
            record(slot, t, positions, res, degen_since_log)
            degen_since_log = 0
            slot += 1
        if k == nsteps:
            break
        held = int(np.count_nonzero(res.hold))
        if held:
            degen_since_log += held
            for m in np.argwhere(res.hold):
                log.events.append({"t": t, "agent": int(m[-1]) + 3, "kind": "degenerate_hold"})
        positions, _ = _advance(positions, cfg.dt, cfg.integrator, ctx, first=(u, res))
        if not np.all(np.isfinite(positions)):
            raise SimulationError(f"non-finite state at t = {t + cfg.dt:.6f}")
    return log


@dataclass(eq=False)
class MonteCarloSummary:
    """Per-trial convergence flags, final error magnitudes, and minimum
    neighbor distances over each run. Deterministic for a given seed."""

    trials: int
    seed: int
    converged: np.ndarray
    max_abs_final_error: np.ndarray
    min_neighbor_distance: np.ndarray
    degeneracy_counts: np.ndarray

    @property
    def converged_count(self) -> int:
        return int(np.count_nonzero(self.converged))

    def to_dict(self) -> dict:
        return {
            "trials": self.trials,
            "seed": self.seed,
            "converged": self.converged_count,
            "convergence_fraction": self.converged_count / self.trials,
            "min_neighbor_distance_overall": float(np.min(self.min_neighbor_distance)),
            "per_trial": [
                {
                    "trial": i,
                    "converged": bool(self.converged[i]),
                    "max_abs_final_error": float(self.max_abs_final_error[i]),
                    "min_neighbor_distance": float(self.min_neighbor_distance[i]),
                    "degeneracy_events": int(self.degeneracy_counts[i]),
                }
                for i in range(self.trials)
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def run_batch(
    positions0: np.ndarray,
    cfg: SimConfig,
    g: SensingGraph,
    spec: ShapeSpec,
    gains: ControlGains | None = None,
    frames: np.ndarray | None = None,
):
    """Integrate a (trials, n, 3) batch of initial configurations in lockstep
    (no logging). Returns (final_positions, max_abs_final_error, min_dist,
    degeneracy_counts), each with the leading trials axis."""
    gains = gains or ControlGains.uniform(g.n)
    if frames is None:
        frames = sensing.identity_frames(g.n)
    targets = targets_from_spec(spec)
    ctx = _make_context(g, targets, gains, frames, 0.0, None)
    positions = np.array(positions0, dtype=float)
    trials = positions.shape[0]

    nsteps = int(round(cfg.t_end / cfg.dt))
    event_queue = list(cfg.events)
    min_dist = _min_edge_distance(positions, ctx)
    degen = np.zeros(trials, dtype=int)
    for k in range(nsteps):
        t = k * cfg.dt
        while event_queue and event_queue[0].t <= t + 1e-12:
            ctx.targets = ctx.targets.with_d21(event_queue.pop(0).d21_star)
        positions, res = _advance(positions, cfg.dt, cfg.integrator, ctx)
        if not np.all(np.isfinite(positions)):
            raise SimulationError(f"non-finite state at t = {t + cfg.dt:.6f}")
        degen += np.count_nonzero(res.hold, axis=-1)
        min_dist = np.minimum(min_dist, _min_edge_distance(positions, ctx))

    views = sense_stacked(positions, ctx.frames, ctx.idx)
    res = bearing_agent_step(views, ctx.targets, ctx.gains)
    errs = formation_errors_from_step(positions, res, ctx.targets)
    max_err = np.max(
        np.concatenate(
            [
                np.abs(np.asarray(errs.e_d))[..., None],
                np.abs(errs.e_xi),
                np.abs(errs.e_eta),
                np.abs(errs.e_phi),
            ],
            axis=-1,
        ),
        axis=-1,
    )
    return positions, max_err, min_dist, degen


def monte_carlo(
    cfg: SimConfig,
    g: SensingGraph,
    spec: ShapeSpec,
    gains: ControlGains | None = None,
    trials: int = 100,
    seed: int = 0,
) -> MonteCarloSummary:
    """Batch of independent runs from random initializations, integrated as
    one vectorized system. Identical (cfg, trials, seed) give bitwise
    identical summaries."""
    if trials < 1:
        raise SimulationError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    if cfg.init_half_width is None:
        raise SimulationError("monte_carlo requires a random-cube initialization")
    positions0 = random_initial_positions(
        rng, g.n, cfg.init_half_width, cfg.min_start_separation, batch=trials
    )
    frames = (
        sensing.random_frames(g.n, rng) if cfg.random_frames else sensing.identity_frames(g.n)
    )
    _, max_err, min_dist, degen = run_batch(positions0, cfg, g, spec, gains, frames)
    return MonteCarloSummary(
        trials=trials,
        seed=seed,
        converged=max_err < CONVERGENCE_TOL,
        max_abs_final_error=max_err,
        min_neighbor_distance=min_dist,
        degeneracy_counts=degen,
    )
