"""Desired-formation specifications and their bispherical targets.

A shape is pinned by one desired distance per directed edge plus one signed
volume per tetrahedral subgraph. The controller never consumes those
directly: it tracks the derived per-agent targets (d21*, xi*, eta*, phi*),
which characterize the same shape up to rotation and translation while being
measurable by each agent alone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import geometry
from .errors import DegenerateGeometryError, InvalidSpecError, UnsupportedTargetError
from .graph import SensingGraph, tetrahedra, validate_graph

EPS_VOL = 1e-12  # degenerate-embedding guard for spec_from_embedding
_CM_SLACK = 1e-9  # relative slack on the Cayley-Menger volume bound


def cm_volume(d_ij, d_ik, d_il, d_jk, d_jl, d_kl) -> float:
    """Tetrahedron volume from its six edge lengths (Cayley-Menger).

    Raises InvalidSpecError if the lengths are not realizable in 3D.
    """
    q = [x * x for x in (d_ij, d_ik, d_il, d_jk, d_jl, d_kl)]
    m = np.array(
        [
            [0.0, 1.0, 1.0, 1.0, 1.0],
            [1.0, 0.0, q[0], q[1], q[2]],
            [1.0, q[0], 0.0, q[3], q[4]],
            [1.0, q[1], q[3], 0.0, q[5]],
            [1.0, q[2], q[4], q[5], 0.0],
        ]
    )
    det = float(np.linalg.det(m))
    if det < -1e-9 * max(1.0, max(q)) ** 3:
        raise InvalidSpecError(f"edge lengths are not realizable (CM determinant {det})")
    return math.sqrt(max(det, 0.0) / 288.0)


@dataclass(frozen=True)
class ShapeSpec:
    """Desired distances (one per edge, meters) and signed volumes (one per
    tetrahedron, meters^3). Validated on construction."""

    graph: SensingGraph
    distances: dict[tuple[int, int], float]
    volumes: np.ndarray

    def __post_init__(self):
        object.__setattr__(
            self, "distances", {tuple(k): float(v) for k, v in self.distances.items()}
        )
        object.__setattr__(self, "volumes", np.asarray(self.volumes, dtype=float))
        self._validate()

    def distance(self, a: int, b: int) -> float:
        """Desired distance of the (unordered) pair a, b; both must share an edge."""
        key = (max(a, b), min(a, b))
        if key not in self.distances:
            raise InvalidSpecError(f"no desired distance for pair {key}")
        return self.distances[key]

    def _validate(self):
        report = validate_graph(self.graph)
        if not report.ok:
            raise InvalidSpecError(f"invalid sensing graph: {report.all_messages()}")
        for edge in self.graph.edges:
            if edge not in self.distances:
                raise InvalidSpecError(f"edge {edge} has no desired distance")
            if not self.distances[edge] > 0.0:
                raise InvalidSpecError(f"desired distance for {edge} must be positive")
        extra = set(self.distances) - set(self.graph.edges)
        if extra:
            raise InvalidSpecError(f"distances given for non-edges: {sorted(extra)}")
        refs = tetrahedra(self.graph)
        if self.volumes.shape != (len(refs),):
            raise InvalidSpecError(
                f"expected {len(refs)} desired volumes, got shape {self.volumes.shape}"
            )
        self._check_triangle(1, 2, 3)
        for ref in refs:
            i, j, k, l = ref.vertices
            for tri in ((i, j, k), (i, j, l), (i, k, l), (j, k, l)):
                self._check_triangle(*tri)
            bound = cm_volume(
                self.distance(i, j),
                self.distance(i, k),
                self.distance(i, l),
                self.distance(j, k),
                self.distance(j, l),
                self.distance(k, l),
            )
            v = abs(float(self.volumes[ref.index]))
            if v > bound * (1.0 + _CM_SLACK) + 1e-15:
                raise InvalidSpecError(
                    f"|V*| = {v} for tetrahedron {ref.vertices} exceeds the "
                    f"volume {bound} attainable from its face distances"
                )

    def _check_triangle(self, a: int, b: int, c: int):
        dab, dac, dbc = self.distance(a, b), self.distance(a, c), self.distance(b, c)
        if dab + dac <= dbc or dab + dbc <= dac or dac + dbc <= dab:
            raise InvalidSpecError(
                f"face ({a},{b},{c}) violates the strict triangle inequality"
            )

    @property
    def min_distance(self) -> float:
        return min(self.distances.values())


@dataclass(frozen=True)
class BisphericalTargets:
    """Per-agent targets: scale anchor d21*, the pair (xi3*, eta3*), and one
    (xi*, eta*, phi*) triple per ordinary follower (arrays ordered by agent)."""

    d21_star: float
    xi3_star: float
    eta3_star: float
    xi_star: np.ndarray
    eta_star: np.ndarray
    phi_star: np.ndarray

    def with_d21(self, d21_star: float) -> "BisphericalTargets":
        """Copy with a retargeted scale anchor (formation scaling events)."""
        return BisphericalTargets(
            d21_star=float(d21_star),
            xi3_star=self.xi3_star,
            eta3_star=self.eta3_star,
            xi_star=self.xi_star,
            eta_star=self.eta_star,
            phi_star=self.phi_star,
        )

    @property
    def n(self) -> int:
        return int(self.xi_star.shape[0]) + 3


def _face_angle(d_ab: float, d_ac: float, d_bc: float) -> float:
    """Angle at vertex a of a triangle with the given side lengths."""
    c = (d_ab * d_ab + d_ac * d_ac - d_bc * d_bc) / (2.0 * d_ab * d_ac)
    return math.acos(min(1.0, max(-1.0, c)))


def targets_from_spec(s: ShapeSpec) -> BisphericalTargets:
    """Derive the bispherical targets of every follower from the desired
    distances; the sign of each desired volume picks the dihedral branch."""
    d = s.distance
    xi3 = _face_angle(d(3, 1), d(3, 2), d(2, 1))
    eta3 = math.log(d(3, 1) / d(3, 2))
    refs = tetrahedra(s.graph)
    xi = np.empty(len(refs))
    eta = np.empty(len(refs))
    phi = np.empty(len(refs))
    for ref in refs:
        i, j, k, l = ref.vertices
        v_star = float(s.volumes[ref.index])
        if v_star == 0.0:
            raise UnsupportedTargetError(
                f"V* = 0 for tetrahedron {ref.vertices}: phi* is undefined for "
                "planar target tetrahedra"
            )
        xi[ref.index] = _face_angle(d(l, i), d(l, j), d(j, i))
        eta[ref.index] = math.log(d(l, i) / d(l, j))
        t_jik = _face_angle(d(i, j), d(i, k), d(j, k))
        t_jil = _face_angle(d(i, j), d(i, l), d(j, l))
        t_kil = _face_angle(d(i, k), d(i, l), d(k, l))
        s_prod = math.sin(t_jik) * math.sin(t_jil)
        if s_prod <= geometry.EPS_DENOM:
            raise UnsupportedTargetError(
                f"degenerate face angles at vertex {i} of tetrahedron {ref.vertices}"
            )
        beta = (math.cos(t_kil) - math.cos(t_jik) * math.cos(t_jil)) / s_prod
        alpha = math.acos(min(1.0, max(-1.0, beta)))
        phi[ref.index] = alpha if v_star > 0.0 else 2.0 * math.pi - alpha
    return BisphericalTargets(
        d21_star=d(2, 1),
        xi3_star=xi3,
        eta3_star=eta3,
        xi_star=xi,
        eta_star=eta,
        phi_star=phi,
    )


def spec_from_embedding(p_star: np.ndarray, g: SensingGraph) -> ShapeSpec:
    """Read a ShapeSpec off an explicit embedding (row a-1 = agent a)."""
    p = np.asarray(p_star, dtype=float)
    if p.shape != (g.n, 3):
        raise InvalidSpecError(f"embedding shape {p.shape} does not match n={g.n}")
    distances = {
        (j, i): float(np.linalg.norm(p[i - 1] - p[j - 1])) for (j, i) in g.edges
    }
    volumes = geometry.stacked_volumes(p, g)
    if np.any(np.abs(volumes) <= EPS_VOL):
        raise UnsupportedTargetError("embedding has a degenerate (flat) tetrahedron")
    return ShapeSpec(graph=g, distances=distances, volumes=volumes)


@dataclass(frozen=True)
class FormationSignature:
    """The stacked formation variables of a configuration: d21, then
    (xi, eta) for agents 3..n and phi for agents 4..n."""

    d21: float
    xi: np.ndarray
    eta: np.ndarray
    phi: np.ndarray

    def as_vector(self) -> np.ndarray:
        return np.concatenate([[self.d21], self.xi, self.eta, self.phi])


def signature_of(positions: np.ndarray, g: SensingGraph) -> FormationSignature:
    """Formation variables of a configuration (row a-1 = agent a)."""
    p = np.asarray(positions, dtype=float)
    d21 = float(np.linalg.norm(p[0] - p[1]))
    xi = np.empty(g.n - 2)
    eta = np.empty(g.n - 2)
    phi = np.empty(max(g.n - 3, 0))
    xi[0] = geometry.xi_of(geometry.bearing(p[2], p[0]), geometry.bearing(p[2], p[1]))
    eta[0] = geometry.eta_of(np.linalg.norm(p[0] - p[2]), np.linalg.norm(p[1] - p[2]))
    for ref in tetrahedra(g):
        i, j, k, l = (x - 1 for x in ref.vertices)
        xi[ref.index + 1] = geometry.xi_of(
            geometry.bearing(p[l], p[i]), geometry.bearing(p[l], p[j])
        )
        eta[ref.index + 1] = geometry.eta_of(
            np.linalg.norm(p[i] - p[l]), np.linalg.norm(p[j] - p[l])
        )
        phi[ref.index] = geometry.phi_of(p[i], p[j], p[k], p[l])
    return FormationSignature(d21=d21, xi=xi, eta=eta, phi=phi)


def _trilaterate(
    p_a: np.ndarray,
    p_b: np.ndarray,
    p_c: np.ndarray,
    d_a: float,
    d_b: float,
    d_c: float,
    side: float,
) -> np.ndarray:
    """Point at the given distances from three base points; ``side`` (+1/-1)
    picks which side of the base plane."""
    ex = p_b - p_a
    d_ab = float(np.linalg.norm(ex))
    ex = ex / d_ab
    i = float(ex @ (p_c - p_a))
    ey = p_c - p_a - i * ex
    ey = ey / np.linalg.norm(ey)
    ez = np.cross(ex, ey)
    j = float(ey @ (p_c - p_a))
    x = (d_a * d_a - d_b * d_b + d_ab * d_ab) / (2.0 * d_ab)
    y = (d_a * d_a - d_c * d_c + i * i + j * j - 2.0 * i * x) / (2.0 * j)
    h2 = d_a * d_a - x * x - y * y
    if h2 < -1e-9:
        raise InvalidSpecError("distances admit no 3D placement")
    return p_a + x * ex + y * ey + side * math.sqrt(max(h2, 0.0)) * ez


def canonical_embedding(s: ShapeSpec) -> np.ndarray:
    """A concrete embedding of the desired shape: agent 1 at the origin,
    agent 2 on +x, agent 3 in the z = 0 plane with y > 0, then each follower
    placed by its three desired distances on the side matching the sign of
    its desired volume.

    Realizes every desired distance and volume sign exactly; the volume
    magnitudes too whenever the shape is realizable (|V*| equals the
    Cayley-Menger volume of its face distances).
    """
    p = np.zeros((s.graph.n, 3))
    p[1] = [s.distance(2, 1), 0.0, 0.0]
    d31, d32 = s.distance(3, 1), s.distance(3, 2)
    x3 = (d31**2 + s.distance(2, 1) ** 2 - d32**2) / (2.0 * s.distance(2, 1))
    p[2] = [x3, math.sqrt(max(d31**2 - x3**2, 0.0)), 0.0]
    for ref in tetrahedra(s.graph):
        i, j, k, l = ref.vertices
        want = float(np.sign(s.volumes[ref.index]))
        for side in (1.0, -1.0):
            cand = _trilaterate(
                p[i - 1],
                p[j - 1],
                p[k - 1],
                s.distance(l, i),
                s.distance(l, j),
                s.distance(l, k),
                side,
            )
            v = geometry.signed_volume(p[i - 1], p[j - 1], p[k - 1], cand)
            if np.sign(v) == want:
                p[l - 1] = cand
                break
        else:
            raise InvalidSpecError(
                f"no placement of agent {l} matches the sign of its desired volume"
            )
    return p


def angle_tolerance(tol: float, s: ShapeSpec) -> float:
    """Angle/log-ratio tolerance matched to a distance/volume tolerance:
    tol divided by the smallest desired distance."""
    return tol / s.min_distance


def signature_matches(
    positions: np.ndarray, s: ShapeSpec, tol: float
) -> bool:
    """Componentwise comparison of the configuration's formation variables
    against the targets of ``s`` at the matched tolerances."""
    t = targets_from_spec(s)
    try:
        sig = signature_of(positions, s.graph)
    except DegenerateGeometryError:
        return False
    atol = angle_tolerance(tol, s)
    if abs(sig.d21 - t.d21_star) > tol:
        return False
    xi_t = np.concatenate([[t.xi3_star], t.xi_star])
    eta_t = np.concatenate([[t.eta3_star], t.eta_star])
    if np.any(np.abs(sig.xi - xi_t) > atol) or np.any(np.abs(sig.eta - eta_t) > atol):
        return False
    return not np.any(np.abs(sig.phi - t.phi_star) > atol)


def lemma1_oracle(positions: np.ndarray, s: ShapeSpec, tol: float) -> bool:
    """Direct distance-and-volume check of the control objective: true iff
    every edge length is within ``tol`` of its desired value and every signed
    volume within ``tol`` of its desired value."""
    p = np.asarray(positions, dtype=float)
    for (j, i) in s.graph.edges:
        if abs(float(np.linalg.norm(p[i - 1] - p[j - 1])) - s.distance(j, i)) > tol:
            return False
    vols = geometry.stacked_volumes(p, s.graph)
    return not np.any(np.abs(vols - s.volumes) > tol)
