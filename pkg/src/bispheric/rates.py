"""Closed-form error dynamics: the covector rows that map agent velocities
to coordinate rates, and the closed-loop Lyapunov rates.

These rows are verification artifacts only -- the simulator integrates
positions directly -- so they can be checked against finite differences of
the geometry module without circularity. All rows are world-frame covectors
returned as (3,) arrays acting on world velocities.
"""

from __future__ import annotations

import math

import numpy as np

from . import geometry
from .errors import DegenerateGeometryError
from .geometry import _norm

SIN_GUARD = 1e-9  # rows blow up as 1/sin(xi); reject closer approaches


def edot_distance(e_d: float, kappa2: float, d21_star: float) -> float:
    """Closed-loop rate of the squared-distance error under the agent-2 law:
    -2 kappa2 e_d (e_d + d21*^2)."""
    return -2.0 * kappa2 * e_d * (e_d + d21_star**2)


def distance_error_rows(p_1: np.ndarray, p_2: np.ndarray):
    """Rows (D_1, D_2) with ė_d = D_1 ṗ_1 + D_2 ṗ_2 (open loop)."""
    p21 = np.asarray(p_1, dtype=float) - np.asarray(p_2, dtype=float)
    return 2.0 * p21, -2.0 * p21


def _projector(v: np.ndarray) -> np.ndarray:
    return np.eye(3) - np.outer(v, v)


def xi_rate_rows(p_i: np.ndarray, p_j: np.ndarray, p_l: np.ndarray):
    """Rows (N_jli, N_ilj, combined) with
    xi_dot = N_jli ṗ_i + N_ilj ṗ_j + combined ṗ_l, combined = -(N_jli+N_ilj).
    """
    v_li = geometry.bearing(p_l, p_i)
    v_lj = geometry.bearing(p_l, p_j)
    sin_xi = math.sin(geometry.xi_of(v_li, v_lj))
    if sin_xi <= SIN_GUARD:
        raise DegenerateGeometryError("xi rate rows undefined at sin(xi) ~ 0")
    d_li = float(_norm(np.asarray(p_i, float) - np.asarray(p_l, float)))
    d_lj = float(_norm(np.asarray(p_j, float) - np.asarray(p_l, float)))
    n_jli = -(v_lj @ _projector(v_li)) / (d_li * sin_xi)
    n_ilj = -(v_li @ _projector(v_lj)) / (d_lj * sin_xi)
    return n_jli, n_ilj, -(n_jli + n_ilj)


def eta_rate_rows(p_i: np.ndarray, p_j: np.ndarray, p_l: np.ndarray):
    """Rows (M_i, M_j, M_l) with eta_dot = M_i ṗ_i + M_j ṗ_j + M_l ṗ_l."""
    v_li = geometry.bearing(p_l, p_i)
    v_lj = geometry.bearing(p_l, p_j)
    d_li = float(_norm(np.asarray(p_i, float) - np.asarray(p_l, float)))
    d_lj = float(_norm(np.asarray(p_j, float) - np.asarray(p_l, float)))
    m_i = v_li / d_li
    m_j = -v_lj / d_lj
    return m_i, m_j, -(m_i + m_j)


def _frame_coords(p_i, p_j, p_k, p_l):
    """Frame of (i,j,k), coordinates of l and of k (k has phi = 0)."""
    f = geometry.frame_of(p_i, p_j, p_k)
    b_l = geometry.from_cartesian(p_l, f, p_i, p_j, p_k)
    b_k = geometry.from_cartesian(p_k, f, p_i, p_j, p_k)
    return f, b_l, b_k


def phi_rate_rows(p_i: np.ndarray, p_j: np.ndarray, p_k: np.ndarray, p_l: np.ndarray):
    """Rows (L_i, L_j, L_k, L_l) with
    phi_dot = L_i ṗ_i + L_j ṗ_j + L_k ṗ_k + L_l ṗ_l.

    The moving foci rotate both the agent's half-plane (phi_hat terms) and
    the reference half-plane through k (z_hat terms, scaled by k's own
    coordinates in the same frame).
    """
    f, b_l, b_k = _frame_coords(p_i, p_j, p_k, p_l)
    s_l, s_k = math.sin(b_l.xi), math.sin(b_k.xi)
    if s_l <= SIN_GUARD or s_k <= SIN_GUARD:
        raise DegenerateGeometryError("phi rate rows undefined at sin(xi) ~ 0")
    basis = geometry.basis_at(b_l, f)
    phi_hat, z_hat, a = basis.phi_hat, f.z_hat, f.a
    c_l, c_k = math.cos(b_l.xi), math.cos(b_k.xi)
    l_i = (
        -phi_hat * (math.exp(-b_l.eta) - c_l) / (2.0 * a * s_l)
        + z_hat * (math.exp(-b_k.eta) - c_k) / (2.0 * a * s_k)
    )
    l_j = (
        -phi_hat * (math.exp(b_l.eta) - c_l) / (2.0 * a * s_l)
        + z_hat * (math.exp(b_k.eta) - c_k) / (2.0 * a * s_k)
    )
    l_k = -z_hat * (math.cosh(b_k.eta) - c_k) / (a * s_k)
    l_l = phi_hat * (math.cosh(b_l.eta) - c_l) / (a * s_l)
    return l_i, l_j, l_k, l_l


def coordinate_rates(points: np.ndarray, velocities: np.ndarray):
    """(xi_dot, eta_dot, phi_dot) of agent l for a tetrahedron (i, j, k, l)
    given all four world velocities; rows assembled from the closed forms."""
    p_i, p_j, p_k, p_l = (np.asarray(x, dtype=float) for x in points)
    v_i, v_j, v_k, v_l = (np.asarray(x, dtype=float) for x in velocities)
    n_jli, n_ilj, n_l = xi_rate_rows(p_i, p_j, p_l)
    m_i, m_j, m_l = eta_rate_rows(p_i, p_j, p_l)
    l_i, l_j, l_k, l_l = phi_rate_rows(p_i, p_j, p_k, p_l)
    return (
        float(n_jli @ v_i + n_ilj @ v_j + n_l @ v_l),
        float(m_i @ v_i + m_j @ v_j + m_l @ v_l),
        float(l_i @ v_i + l_j @ v_j + l_k @ v_k + l_l @ v_l),
    )


def wdot_second_follower(
    p_1: np.ndarray,
    p_2: np.ndarray,
    p_3: np.ndarray,
    xi_star: float,
    eta_star: float,
    kappa: float,
    lam: float,
) -> float:
    """Analytic Lyapunov rate of agent 3 with agents 1, 2 at rest:
    -2 (cosh eta - cos xi) / |p21| * (kappa e_xi^2 + lam e_eta^2)."""
    f = geometry.frame_of(p_1, p_2, p_3)
    b = geometry.from_cartesian(p_3, f, p_1, p_2, p_3)
    e_xi, e_eta = b.xi - xi_star, b.eta - eta_star
    d21 = 2.0 * f.a
    return (
        -2.0
        * (math.cosh(b.eta) - math.cos(b.xi))
        / d21
        * (kappa * e_xi**2 + lam * e_eta**2)
    )


def wdot_follower(
    p_i: np.ndarray,
    p_j: np.ndarray,
    p_k: np.ndarray,
    p_l: np.ndarray,
    xi_star: float,
    eta_star: float,
    phi_star: float,
    kappa: float,
    lam: float,
    gamma: float,
) -> float:
    """Analytic Lyapunov rate of an ordinary follower with its neighbors at
    rest: -2 (cosh eta - cos xi)/|p_ji| (kappa e_xi^2 + lam e_eta^2
    + gamma e_phi^2 / sin xi)."""
    f, b_l, _ = _frame_coords(p_i, p_j, p_k, p_l)
    s = math.sin(b_l.xi)
    if s <= SIN_GUARD:
        raise DegenerateGeometryError("Lyapunov rate undefined at sin(xi) ~ 0")
    e_xi = b_l.xi - xi_star
    e_eta = b_l.eta - eta_star
    e_phi = b_l.phi - phi_star
    d_ji = 2.0 * f.a
    return (
        -2.0
        * (math.cosh(b_l.eta) - math.cos(b_l.xi))
        / d_ji
        * (kappa * e_xi**2 + lam * e_eta**2 + gamma * e_phi**2 / s)
    )


def wdot_check(t: np.ndarray, w: np.ndarray, analytic: np.ndarray) -> float:
    """Max |central-difference rate of w minus the analytic rate| over the
    interior samples of a trajectory slice."""
    t = np.asarray(t, dtype=float)
    w = np.asarray(w, dtype=float)
    fd = (w[2:] - w[:-2]) / (t[2:] - t[:-2])
    return float(np.max(np.abs(fd - np.asarray(analytic, dtype=float)[1:-1])))
