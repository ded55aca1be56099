"""The measurement model: what each agent is allowed to sense, expressed in
its own (arbitrarily rotated) local frame.

Agent 1 senses nothing. Agent 2 measures its relative position to agent 1.
Agent 3 measures the bearings toward agents 1 and 2 plus their distance
ratio. Every agent l >= 4 measures the bearings toward its neighbor triple
(i, j, k) plus the two distance ratios d_li/d_lj and d_li/d_lk. Nothing else
about the world leaks through this interface.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import DegenerateGeometryError
from .geometry import EPS_DIST, _norm
from .graph import SensingGraph


@dataclass(frozen=True)
class AgentFrame:
    """Local-to-world rotation of one agent."""

    rotation: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=float)
        if r.shape != (3, 3):
            raise ValueError(f"rotation must be 3x3, got {r.shape}")
        if not np.allclose(r.T @ r, np.eye(3), atol=1e-12):
            raise ValueError("rotation is not orthonormal to 1e-12")
        if np.linalg.det(r) < 0.0:
            raise ValueError("rotation must be proper (det +1)")
        object.__setattr__(self, "rotation", r)


@dataclass(frozen=True)
class RelativePositionView:
    """Agent 2's view: relative position of agent 1 in agent 2's frame."""

    p21: np.ndarray


@dataclass(frozen=True)
class PairBearingView:
    """Agent 3's view: local bearings toward agents 1 and 2 and the ratio
    r312 = d31 / d32."""

    v31: np.ndarray
    v32: np.ndarray
    r312: float


@dataclass(frozen=True)
class TripleBearingView:
    """An ordinary follower's view: local bearings toward the ordered
    neighbor triple and the ratios r_lij = d_li/d_lj, r_lik = d_li/d_lk."""

    v_li: np.ndarray
    v_lj: np.ndarray
    v_lk: np.ndarray
    r_lij: float
    r_lik: float


SensedView = Union[RelativePositionView, PairBearingView, TripleBearingView]


def identity_frames(n: int) -> np.ndarray:
    """(n, 3, 3) stack of identity rotations."""
    return np.broadcast_to(np.eye(3), (n, 3, 3)).copy()


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Uniform random proper rotation (QR of a Gaussian matrix, sign-fixed)."""
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q *= np.sign(np.diag(r))
    if np.linalg.det(q) < 0.0:
        q[:, 0] = -q[:, 0]
    return q


def random_frames(n: int, rng: np.random.Generator) -> np.ndarray:
    """Random local frames for every agent (the leader's is irrelevant but
    randomized too)."""
    return np.stack([random_rotation(rng) for _ in range(n)])


def _to_local(rotation: np.ndarray, v_world: np.ndarray) -> np.ndarray:
    return rotation.T @ v_world


def _perturb_bearing(v: np.ndarray, noise: float, rng: np.random.Generator) -> np.ndarray:
    """Additive bearing perturbation followed by renormalization."""
    if noise <= 0.0:
        return v
    w = v + noise * rng.normal(size=v.shape)
    return w / _norm(w)[..., None]


def sense(
    world,
    g: SensingGraph,
    agent: int,
    noise: float = 0.0,
    rng: np.random.Generator | None = None,
) -> SensedView:
    """Measurements available to ``agent`` at the given world state, rotated
    into that agent's own frame.

    ``world`` needs ``positions`` (n, 3) and ``frames`` (n, 3, 3) attributes.
    Raises DegenerateGeometryError when the agent is collocated with a
    neighbor.
    """
    if agent < 2 or agent > g.n:
        raise ValueError(f"agent {agent} has no sensed view (n={g.n})")
    p = np.asarray(world.positions, dtype=float)
    rot = np.asarray(world.frames, dtype=float)[agent - 1]
    if noise > 0.0 and rng is None:
        raise ValueError("bearing noise requested without an rng")

    if agent == 2:
        rel = p[0] - p[1]
        if _norm(rel) <= EPS_DIST:
            raise DegenerateGeometryError("agents 1 and 2 collocated")
        return RelativePositionView(p21=_to_local(rot, rel))

    me = p[agent - 1]
    nbrs = g.neighbors_of(agent)
    offsets = p[[a - 1 for a in nbrs]] - me
    dists = _norm(offsets)
    if np.any(dists <= EPS_DIST):
        raise DegenerateGeometryError(f"agent {agent} collocated with a neighbor")
    bearings = offsets / dists[:, None]
    local = np.stack([_to_local(rot, b) for b in bearings])
    if noise > 0.0:
        local = _perturb_bearing(local, noise, rng)

    if agent == 3:
        return PairBearingView(v31=local[0], v32=local[1], r312=float(dists[0] / dists[1]))
    return TripleBearingView(
        v_li=local[0],
        v_lj=local[1],
        v_lk=local[2],
        r_lij=float(dists[0] / dists[1]),
        r_lik=float(dists[0] / dists[2]),
    )


@dataclass
class StackedViews:
    """All measurements of one time instant, stacked for the batched control
    path. Bearing rows are ordered by agent (3, 4, ..., n); row 0 belongs to
    agent 3, whose third-bearing slot repeats v31 (it has no third neighbor).

    Leading batch axes are allowed on every array.
    """

    p21: np.ndarray      # (..., 3) in agent 2's frame
    v_li: np.ndarray     # (..., n-2, 3) in each agent's own frame
    v_lj: np.ndarray     # (..., n-2, 3)
    v_lk: np.ndarray     # (..., n-2, 3)
    r_lij: np.ndarray    # (..., n-2)
    r_lik: np.ndarray    # (..., n-2)
    collocated: np.ndarray  # (..., n-2) bool: a neighbor distance under guard


def neighbor_index_arrays(g: SensingGraph) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """0-based neighbor indices (I, J, K) for the bearing agents 3..n; agent
    3's K slot repeats its first neighbor."""
    rows_i, rows_j, rows_k = [1 - 1], [2 - 1], [1 - 1]
    for l in range(4, g.n + 1):
        i, j, k = g.neighbor_triple(l)
        rows_i.append(i - 1)
        rows_j.append(j - 1)
        rows_k.append(k - 1)
    return np.array(rows_i), np.array(rows_j), np.array(rows_k)


def sense_stacked(
    positions: np.ndarray,
    frames: np.ndarray,
    index_arrays: tuple[np.ndarray, np.ndarray, np.ndarray],
    noise: float = 0.0,
    rng: np.random.Generator | None = None,
) -> StackedViews:
    """Batched equivalent of :func:`sense` for agents 2..n.

    ``positions`` is (..., n, 3); ``frames`` is (n, 3, 3). Collocated pairs
    are flagged instead of raising so a batch member cannot poison the rest;
    flagged rows carry unit placeholders.
    """
    p = np.asarray(positions, dtype=float)
    idx_i, idx_j, idx_k = index_arrays
    agents = np.arange(2, p.shape[-2])  # 0-based indices of agents 3..n

    rel21 = p[..., 0, :] - p[..., 1, :]
    p21 = rel21 @ frames[1]  # w @ R == R^T w

    me = p[..., agents, :]
    off_i = p[..., idx_i, :] - me
    off_j = p[..., idx_j, :] - me
    off_k = p[..., idx_k, :] - me
    d_i, d_j, d_k = _norm(off_i), _norm(off_j), _norm(off_k)
    collocated = (d_i <= EPS_DIST) | (d_j <= EPS_DIST) | (d_k <= EPS_DIST)
    d_i = np.where(d_i <= EPS_DIST, 1.0, d_i)
    d_j = np.where(d_j <= EPS_DIST, 1.0, d_j)
    d_k = np.where(d_k <= EPS_DIST, 1.0, d_k)

    rot = frames[agents]  # (n-2, 3, 3)
    v_li = np.einsum("...mi,mij->...mj", off_i / d_i[..., None], rot)
    v_lj = np.einsum("...mi,mij->...mj", off_j / d_j[..., None], rot)
    v_lk = np.einsum("...mi,mij->...mj", off_k / d_k[..., None], rot)
    if noise > 0.0:
        if rng is None:
            raise ValueError("bearing noise requested without an rng")
        v_li = _perturb_bearing(v_li, noise, rng)
        v_lj = _perturb_bearing(v_lj, noise, rng)
        v_lk = _perturb_bearing(v_lk, noise, rng)

    return StackedViews(
        p21=p21,
        v_li=v_li,
        v_lj=v_lj,
        v_lk=v_lk,
        r_lij=d_i / d_j,
        r_lik=d_i / d_k,
        collocated=collocated,
    )
