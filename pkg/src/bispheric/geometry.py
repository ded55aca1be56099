"""Coordinate geometry: bearings, signed volumes, bispherical coordinates,
the virtual Cartesian frame, and the orthogonal bispherical basis field.

Conventions (fixed here, relied on everywhere else):

* Bearings are observer-first: ``bearing(a, b)`` points from a toward b, and
  v_ab denotes the unit vector from agent a toward agent b.
* The virtual frame for a follower with ordered neighbors (i, j, k) puts the
  midpoint of segment i-j at the origin, agent i at local x = -a and agent j
  at +a with a = |p_j - p_i| / 2. Agent k lies in the local half-plane
  y > 0, z = 0, which is the phi = 0 half-plane.
* phi is the azimuth of the agent about the focal x-axis, measured from +Y
  toward +Z. It equals the dihedral angle on edge (j, i) when the signed
  volume V_ijkl is positive and 2*pi minus it when negative; the coplanar
  cases yield exactly 0 (same half-plane as k) or pi (opposite half-plane).

Most functions broadcast over leading axes: inputs shaped (..., 3) give
outputs shaped (...) or (..., 3).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateGeometryError

EPS_DIST = 1e-9    # collocation guard on distances (m)
EPS_CROSS = 1e-9   # collinearity guard on unit-vector cross products
EPS_DENOM = 1e-12  # guard on cosh(eta) - cos(xi) and on sin(xi) for the basis


def _norm(v: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum(v * v, axis=-1))


def _unit(v: np.ndarray) -> np.ndarray:
    return v / _norm(v)[..., None]


def _dot(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.sum(a * b, axis=-1)


def bearing(p_from: np.ndarray, p_to: np.ndarray) -> np.ndarray:
    """Unit vector from ``p_from`` toward ``p_to``.

    Raises DegenerateGeometryError if any pair is closer than EPS_DIST.
    """
    d = np.asarray(p_to, dtype=float) - np.asarray(p_from, dtype=float)
    n = _norm(d)
    if np.any(n <= EPS_DIST):
        raise DegenerateGeometryError("bearing between collocated points")
    return d / n[..., None]


def signed_volume(p_i, p_j, p_k, p_l) -> float | np.ndarray:
    """Signed tetrahedron volume, positive iff an observer at l sees i, j, k
    counterclockwise. Zero is a valid output for degenerate placements."""
    p_i, p_j, p_k, p_l = (np.asarray(p, dtype=float) for p in (p_i, p_j, p_k, p_l))
    v = -_dot(p_i - p_l, np.cross(p_j - p_l, p_k - p_l)) / 6.0
    return float(v) if np.ndim(v) == 0 else v


def stacked_volumes(positions: np.ndarray, g) -> np.ndarray:
    """Signed volumes of every tetrahedral subgraph of ``g``, ordered by the
    follower index. ``positions`` is (n, 3), row a-1 holding agent a."""
    from .graph import tetrahedra  # local import: graph layer sits above geometry

    p = np.asarray(positions, dtype=float)
    out = np.empty(max(g.n - 3, 0))
    for ref in tetrahedra(g):
        out[ref.index] = signed_volume(
            p[ref.i - 1], p[ref.j - 1], p[ref.k - 1], p[ref.l - 1]
        )
    return out


def xi_of(v_li: np.ndarray, v_lj: np.ndarray) -> float | np.ndarray:
    """Angle in [0, pi] subtended at the observer between two unit bearings.

    Evaluated as atan2(|v_li x v_lj|, v_li . v_lj), which equals the arccos of
    the clamped dot product but stays fully conditioned near 0 and pi.
    """
    v_li = np.asarray(v_li, dtype=float)
    v_lj = np.asarray(v_lj, dtype=float)
    x = np.arctan2(_norm(np.cross(v_li, v_lj)), _dot(v_li, v_lj))
    return float(x) if np.ndim(x) == 0 else x


def eta_of(d_li, d_lj) -> float | np.ndarray:
    """Log ratio ln(d_li / d_lj) of the distances to the two foci."""
    d_li = np.asarray(d_li, dtype=float)
    d_lj = np.asarray(d_lj, dtype=float)
    if np.any(d_li <= EPS_DIST) or np.any(d_lj <= EPS_DIST):
        raise DegenerateGeometryError("nonpositive or vanishing distance in eta")
    e = np.log(d_li) - np.log(d_lj)
    return float(e) if np.ndim(e) == 0 else e


def dihedral_cos(v_ij: np.ndarray, v_ik: np.ndarray, v_il: np.ndarray) -> float:
    """Cosine of the dihedral angle on edge (j, i), from the bearings at i.

    This is the angle between the normals of faces (i,j,k) and (i,j,l). The
    equivalent face-angle form is exercised against it in tests.
    """
    n1 = np.cross(v_ij, v_ik)
    n2 = np.cross(v_ij, v_il)
    m1, m2 = _norm(n1), _norm(n2)
    if np.any(m1 <= EPS_CROSS) or np.any(m2 <= EPS_CROSS):
        raise DegenerateGeometryError("collinear triple in dihedral_cos")
    c = _dot(n1, n2) / (m1 * m2)
    c = np.clip(c, -1.0, 1.0)
    return float(c) if np.ndim(c) == 0 else c


@dataclass(frozen=True)
class VirtualFrame:
    """Right-handed orthonormal frame with origin at the i-j midpoint.

    ``a`` is half the focal separation; the foci sit at local (-a, 0, 0)
    (agent i) and (+a, 0, 0) (agent j).
    """

    origin: np.ndarray
    x_hat: np.ndarray
    y_hat: np.ndarray
    z_hat: np.ndarray
    a: float

    def to_local(self, p_world: np.ndarray) -> np.ndarray:
        w = np.asarray(p_world, dtype=float) - self.origin
        return np.stack([_dot(w, self.x_hat), _dot(w, self.y_hat), _dot(w, self.z_hat)], axis=-1)

    def to_world(self, p_local: np.ndarray) -> np.ndarray:
        p = np.asarray(p_local, dtype=float)
        return (
            self.origin
            + p[..., 0, None] * self.x_hat
            + p[..., 1, None] * self.y_hat
            + p[..., 2, None] * self.z_hat
        )


def perpendicular_fallback(v: np.ndarray) -> np.ndarray:
    """Deterministic unit vector perpendicular to ``v``: cross ``v`` with the
    standard axis of its smallest absolute component."""
    v = np.asarray(v, dtype=float)
    axis = np.zeros(3)
    axis[int(np.argmin(np.abs(v)))] = 1.0
    return _unit(np.cross(v, axis))


def frame_basis(v_ji: np.ndarray, v_ki: np.ndarray):
    """Orthonormal basis (x_hat, y_hat, z_hat) from the two recovered bearings.

    x_hat = -v_ji; z_hat normalizes v_ji x v_ki, falling back to a
    deterministic perpendicular when i, j, k are collinear or k collocated.
    Broadcasts over leading axes.
    """
    v_ji = np.asarray(v_ji, dtype=float)
    v_ki = np.asarray(v_ki, dtype=float)
    x_hat = -v_ji
    zr = np.cross(v_ji, v_ki)
    zn = _norm(zr)
    degenerate = zn <= EPS_CROSS
    if np.ndim(zn) == 0:
        z_hat = perpendicular_fallback(v_ji) if degenerate else zr / zn
    else:
        safe = np.where(degenerate[..., None], 1.0, zn[..., None])
        z_hat = zr / safe
        if np.any(degenerate):
            idx = np.argwhere(degenerate)
            for ix in idx:
                z_hat[tuple(ix)] = perpendicular_fallback(v_ji[tuple(ix)])
    y_hat = np.cross(z_hat, x_hat)
    return x_hat, y_hat, z_hat


def frame_of(p_i: np.ndarray, p_j: np.ndarray, p_k: np.ndarray) -> VirtualFrame:
    """Virtual local Cartesian frame of the neighbor triangle (i, j, k)."""
    p_i = np.asarray(p_i, dtype=float)
    p_j = np.asarray(p_j, dtype=float)
    p_k = np.asarray(p_k, dtype=float)
    d_ji = _norm(p_i - p_j)
    if d_ji <= EPS_DIST:
        raise DegenerateGeometryError("foci i and j are collocated")
    v_ji = (p_i - p_j) / d_ji
    if _norm(p_i - p_k) <= EPS_DIST:
        # k collocated with i: fall back exactly like the collinear case
        x_hat, y_hat, z_hat = frame_basis(v_ji, v_ji)
    else:
        v_ki = bearing(p_k, p_i)
        x_hat, y_hat, z_hat = frame_basis(v_ji, v_ki)
    return VirtualFrame(
        origin=(p_i + p_j) / 2.0,
        x_hat=x_hat,
        y_hat=y_hat,
        z_hat=z_hat,
        a=float(d_ji) / 2.0,
    )


@dataclass(frozen=True)
class BisphericalCoords:
    """xi in [0, pi], eta real, phi in [0, 2*pi)."""

    xi: float
    eta: float
    phi: float


def _azimuth(y, z):
    """Azimuth in [0, 2*pi) measured from +Y toward +Z, with the coplanar and
    on-axis cases snapped exactly (z within 1e-12 relative of zero -> 0 or pi)."""
    y = np.asarray(y, dtype=float)
    z = np.asarray(z, dtype=float)
    rho = np.hypot(y, z)
    phi = np.arctan2(z, y)
    phi = np.where(phi < 0.0, phi + 2.0 * math.pi, phi)
    coplanar = np.abs(z) <= 1e-12 * rho
    phi = np.where(coplanar & (y > 0.0), 0.0, phi)
    phi = np.where(coplanar & (y < 0.0), math.pi, phi)
    phi = np.where(rho == 0.0, 0.0, phi)
    return float(phi) if np.ndim(phi) == 0 else phi


def phi_of(p_i: np.ndarray, p_j: np.ndarray, p_k: np.ndarray, p_l: np.ndarray) -> float:
    """Third bispherical coordinate of agent l w.r.t. neighbor triple (i,j,k).

    Case behavior: the dihedral angle on edge (j,i) when V_ijkl > 0, its
    2*pi complement when V_ijkl < 0, pi when l is coplanar on the opposite
    half-plane from k, and 0 otherwise (same half-plane, or any collinear
    degeneracy of l or k with the i-j axis).
    """
    p_i, p_j, p_k, p_l = (np.asarray(p, dtype=float) for p in (p_i, p_j, p_k, p_l))
    v_ji = bearing(p_j, p_i)
    # k on the i-j axis leaves the reference half-plane undefined
    if _norm(p_i - p_k) <= EPS_DIST or _norm(np.cross(v_ji, bearing(p_k, p_i))) <= EPS_CROSS:
        return 0.0
    f = frame_of(p_i, p_j, p_k)
    w = p_l - f.origin
    return _azimuth(_dot(w, f.y_hat), _dot(w, f.z_hat))


def phi_from_bearings(
    v_li: np.ndarray,
    v_lj: np.ndarray,
    v_lk: np.ndarray,
    r_lij: float,
    r_lik: float,
) -> float | np.ndarray:
    """phi computed purely from one agent's measurements (bearings plus the
    two distance ratios), without positions. Equals :func:`phi_of`."""
    v_ji, v_ki = recover_bearings(v_li, v_lj, v_lk, r_lij, r_lik)
    x_hat, y_hat, z_hat = frame_basis(v_ji, v_ki)
    zn = _norm(np.cross(v_ji, v_ki))
    # w is a positive multiple of (p_l - midpoint of i-j)
    w = -(np.asarray(r_lij, dtype=float)[..., None] * v_li + v_lj)
    phi = _azimuth(_dot(w, y_hat), _dot(w, z_hat))
    phi = np.where(zn <= EPS_CROSS, 0.0, phi)
    return float(phi) if np.ndim(phi) == 0 else phi


def to_cartesian(b: BisphericalCoords, f: VirtualFrame) -> np.ndarray:
    """World-frame position of the point with bispherical coordinates ``b``
    in frame ``f``."""
    denom = math.cosh(b.eta) - math.cos(b.xi)
    if denom <= EPS_DENOM:
        raise DegenerateGeometryError(
            f"cosh(eta) - cos(xi) = {denom} is below the degeneracy guard"
        )
    x = f.a * math.sinh(b.eta) / denom
    y = f.a * math.sin(b.xi) * math.cos(b.phi) / denom
    z = f.a * math.sin(b.xi) * math.sin(b.phi) / denom
    return f.to_world(np.array([x, y, z]))


def from_cartesian(
    p_l: np.ndarray,
    f: VirtualFrame,
    p_i: np.ndarray,
    p_j: np.ndarray,
    p_k: np.ndarray,
) -> BisphericalCoords:
    """Bispherical coordinates of ``p_l`` in frame ``f`` (foci at i and j).

    Inverse of :func:`to_cartesian` away from the foci and the x-axis
    degeneracy, where phi is conventionally 0.
    """
    p_l = np.asarray(p_l, dtype=float)
    d_li = _norm(p_i - p_l)
    d_lj = _norm(p_j - p_l)
    if d_li <= EPS_DIST or d_lj <= EPS_DIST:
        raise DegenerateGeometryError("point collocated with a focus")
    xi = xi_of(bearing(p_l, p_i), bearing(p_l, p_j))
    eta = eta_of(d_li, d_lj)
    w = p_l - f.origin
    phi = _azimuth(_dot(w, f.y_hat), _dot(w, f.z_hat))
    return BisphericalCoords(xi=float(xi), eta=float(eta), phi=float(phi))


def scale_factors(xi, eta, phi):
    """The four basis coefficients (f1, f2, f3, f4); f1^2 + f2^2 = 1 and
    f3^2 + f4^2 = 1 identically. Broadcasts."""
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    denom = np.cosh(eta) - np.cos(xi)
    f1 = -np.sinh(eta) * np.sin(xi) / denom
    f2 = (np.cosh(eta) * np.cos(xi) - 1.0) / denom
    return f1, f2, np.cos(phi), np.sin(phi)


@dataclass(frozen=True)
class BisphericalBasis:
    """Orthonormal direction field (directions of increase of xi, eta, phi)
    expressed in the world frame, plus the scale coefficients."""

    xi_hat: np.ndarray
    eta_hat: np.ndarray
    phi_hat: np.ndarray
    f1: float
    f2: float
    f3: float
    f4: float


def basis_vectors(f1, f2, f3, f4, x_hat, y_hat, z_hat):
    """Assemble the three unit basis vectors from coefficients and a frame.
    Broadcasts over leading axes."""
    f1 = np.asarray(f1)[..., None]
    f2 = np.asarray(f2)[..., None]
    f3 = np.asarray(f3)[..., None]
    f4 = np.asarray(f4)[..., None]
    xi_hat = f1 * x_hat + f2 * f3 * y_hat + f2 * f4 * z_hat
    eta_hat = -f2 * x_hat + f1 * f3 * y_hat + f1 * f4 * z_hat
    phi_hat = -f4 * y_hat + f3 * z_hat
    return xi_hat, eta_hat, phi_hat


def basis_at(b: BisphericalCoords, f: VirtualFrame) -> BisphericalBasis:
    """Bispherical basis at coordinates ``b`` of frame ``f``.

    Signals degeneracy on the focal axis (sin xi ~ 0), where phi and hence
    phi_hat are undefined, and at a vanishing cosh(eta) - cos(xi).
    """
    if math.cosh(b.eta) - math.cos(b.xi) <= EPS_DENOM:
        raise DegenerateGeometryError("cosh(eta) - cos(xi) below the degeneracy guard")
    if abs(math.sin(b.xi)) <= EPS_DENOM:
        raise DegenerateGeometryError("basis undefined on the focal axis (sin xi ~ 0)")
    f1, f2, f3, f4 = scale_factors(b.xi, b.eta, b.phi)
    xi_hat, eta_hat, phi_hat = basis_vectors(f1, f2, f3, f4, f.x_hat, f.y_hat, f.z_hat)
    return BisphericalBasis(
        xi_hat=xi_hat,
        eta_hat=eta_hat,
        phi_hat=phi_hat,
        f1=float(f1),
        f2=float(f2),
        f3=float(f3),
        f4=float(f4),
    )


def recover_bearings(
    v_li: np.ndarray,
    v_lj: np.ndarray,
    v_lk: np.ndarray,
    r_lij,
    r_lik,
):
    """Reconstruct the inter-neighbor bearings (v_ji, v_ki) from one agent's
    own measurements. Broadcasts over leading axes."""
    v_li = np.asarray(v_li, dtype=float)
    r_lij = np.asarray(r_lij, dtype=float)[..., None]
    r_lik = np.asarray(r_lik, dtype=float)[..., None]
    wj = r_lij * v_li - v_lj
    wk = r_lik * v_li - v_lk
    nj, nk = _norm(wj), _norm(wk)
    if np.any(nj <= EPS_DENOM) or np.any(nk <= EPS_DENOM):
        raise DegenerateGeometryError("bearing recovery denominator vanished")
    return wj / nj[..., None], wk / nk[..., None]
