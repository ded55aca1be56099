"""Formation errors and the decentralized velocity controllers.

Each agent's command is computable from its own SensedView alone:

* agent 1 holds position;
* agent 2 steers along its measured relative position, u2 = kappa2 e_d p21;
* agent 3 descends its (xi, eta) errors along the bispherical basis built
  from its two bearings;
* every ordinary follower descends (xi, eta, phi) along the full basis,
  reconstructing the inter-neighbor bearings from ratios (no communication).

The math is implemented once in a stacked, broadcastable form
(:func:`bearing_agent_step`), used both by the per-agent API here and by the
simulation engine's batched integrator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import geometry
from .geometry import EPS_CROSS, EPS_DENOM, _dot, _norm
from .sensing import (
    PairBearingView,
    RelativePositionView,
    SensedView,
    StackedViews,
    TripleBearingView,
)
from .shape import BisphericalTargets

SIN_XI_GUARD = 1e-6  # below this, the phi-term is smoothly scaled down


@dataclass(frozen=True)
class ControlGains:
    """Positive gains: kappa2 for agent 2; per-agent kappa/lambda for agents
    3..n and gamma for agents 4..n (arrays ordered by agent)."""

    kappa2: float
    kappa: np.ndarray
    lam: np.ndarray
    gamma: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "kappa", np.asarray(self.kappa, dtype=float))
        object.__setattr__(self, "lam", np.asarray(self.lam, dtype=float))
        object.__setattr__(self, "gamma", np.asarray(self.gamma, dtype=float))
        if self.kappa2 <= 0.0:
            raise ValueError("kappa2 must be positive")
        for name, arr, want in (
            ("kappa", self.kappa, self.lam.shape[0]),
            ("lam", self.lam, self.kappa.shape[0]),
            ("gamma", self.gamma, self.kappa.shape[0] - 1),
        ):
            if arr.ndim != 1 or arr.shape[0] != want:
                raise ValueError(f"{name} has shape {arr.shape}, expected ({want},)")
            if np.any(arr <= 0.0):
                raise ValueError(f"{name} must be strictly positive")

    @classmethod
    def uniform(
        cls,
        n: int,
        kappa2: float = 2.0,
        kappa: float = 2.0,
        lam: float = 2.0,
        gamma: float = 2.0,
    ) -> "ControlGains":
        return cls(
            kappa2=kappa2,
            kappa=np.full(n - 2, float(kappa)),
            lam=np.full(n - 2, float(lam)),
            gamma=np.full(n - 3, float(gamma)),
        )

    @property
    def n(self) -> int:
        return int(self.kappa.shape[0]) + 2


@dataclass(frozen=True)
class AgentErrors:
    """One agent's error slice; fields that do not apply are None."""

    e_d: float | None = None
    e_xi: float | None = None
    e_eta: float | None = None
    e_phi: float | None = None


@dataclass(frozen=True)
class FormationErrors:
    """Stacked error state of the whole formation: e_d for agent 2, then
    (e_xi, e_eta) for agents 3..n and e_phi for agents 4..n."""

    e_d: float
    e_xi: np.ndarray
    e_eta: np.ndarray
    e_phi: np.ndarray

    def as_row(self) -> np.ndarray:
        """Flat row in log order: e_d, e_xi_3, e_eta_3, then
        (e_xi_l, e_eta_l, e_phi_l) per ordinary follower."""
        parts = [self.e_d, self.e_xi[0], self.e_eta[0]]
        for m in range(self.e_phi.shape[0]):
            parts += [self.e_xi[m + 1], self.e_eta[m + 1], self.e_phi[m]]
        return np.array(parts)

    @property
    def max_abs(self) -> float:
        return float(np.max(np.abs(self.as_row())))

    @staticmethod
    def row_names(n: int) -> list[str]:
        names = ["e_d", "e_xi_3", "e_eta_3"]
        for l in range(4, n + 1):
            names += [f"e_xi_{l}", f"e_eta_{l}", f"e_phi_{l}"]
        return names


@dataclass(frozen=True)
class LyapunovRecord:
    """Per-agent Lyapunov values W_2..W_n (quadratic forms of the errors)."""

    W: np.ndarray

    @staticmethod
    def row_names(n: int) -> list[str]:
        return [f"W_{a}" for a in range(2, n + 1)]


def lyapunov_of(errors: FormationErrors) -> LyapunovRecord:
    w = [0.5 * errors.e_d**2, 0.5 * (errors.e_xi[0] ** 2 + errors.e_eta[0] ** 2)]
    for m in range(errors.e_phi.shape[0]):
        w.append(
            0.5
            * (
                errors.e_xi[m + 1] ** 2
                + errors.e_eta[m + 1] ** 2
                + errors.e_phi[m] ** 2
            )
        )
    return LyapunovRecord(W=np.array(w))


def stacked_targets(targets: BisphericalTargets):
    """Target rows aligned with the stacked bearing agents 3..n; agent 3's
    phi target slot is 0 (it has no phi objective)."""
    xi_t = np.concatenate([[targets.xi3_star], targets.xi_star])
    eta_t = np.concatenate([[targets.eta3_star], targets.eta_star])
    phi_t = np.concatenate([[0.0], targets.phi_star])
    return xi_t, eta_t, phi_t


def stacked_gains(gains: ControlGains):
    """Gain rows aligned with the stacked bearing agents; agent 3's gamma is
    0, which removes the phi term from its command identically."""
    return gains.kappa, gains.lam, np.concatenate([[0.0], gains.gamma])


@dataclass
class BearingAgentStep:
    """Outcome of one stacked controller evaluation for agents 3..n."""

    commands: np.ndarray      # (..., n-2, 3) in each agent's own frame
    xi: np.ndarray            # (..., n-2)
    eta: np.ndarray           # (..., n-2)
    phi: np.ndarray           # (..., n-2); row 0 is agent 3's (always ~0)
    hold: np.ndarray          # (..., n-2) bool: command zeroed, logged event
    gamma_guarded: np.ndarray  # (..., n-2) bool: sin-xi clamp engaged
    collinear: np.ndarray     # (..., n-2) bool: neighbor triple collinear


def bearing_agent_step(
    views: StackedViews,
    targets: BisphericalTargets,
    gains: ControlGains,
) -> BearingAgentStep:
    """Stacked commands for agents 3..n from their own measurements.

    Degeneracies downgrade gracefully instead of raising: an agent on its
    focal axis (sin xi ~ 0) or with collocated neighbors holds (zero
    command); a collinear neighbor triple only suppresses the phi term, the
    radial xi/eta descent staying well defined through the fallback frame.
    """
    v_li, v_lj, v_lk = views.v_li, views.v_lj, views.v_lk
    r_lij, r_lik = views.r_lij, views.r_lik

    # Inter-neighbor bearings; agent 3 measures its v_ki = v31 directly.
    wj = r_lij[..., None] * v_li - v_lj
    nj = _norm(wj)
    bad_ji = nj <= EPS_DENOM
    v_ji = wj / np.where(bad_ji, 1.0, nj)[..., None]
    wk = r_lik[..., 1:, None] * v_li[..., 1:, :] - v_lk[..., 1:, :]
    nk = _norm(wk)
    bad_ki = np.zeros(bad_ji.shape, dtype=bool)
    bad_ki[..., 1:] = nk <= EPS_DENOM
    v_ki = np.concatenate(
        [v_li[..., :1, :], wk / np.where(nk <= EPS_DENOM, 1.0, nk)[..., None]], axis=-2
    )

    x_hat, y_hat, z_hat = geometry.frame_basis(v_ji, v_ki)
    collinear = _norm(np.cross(v_ji, v_ki)) <= EPS_CROSS

    xi = geometry.xi_of(v_li, v_lj)
    eta = np.log(r_lij)
    w = -(r_lij[..., None] * v_li + v_lj)  # positive multiple of p_l - midpoint(i,j)
    phi = geometry._azimuth(_dot(w, y_hat), _dot(w, z_hat))

    xi_t, eta_t, phi_t = stacked_targets(targets)
    kappa, lam, gamma = stacked_gains(gains)
    e_xi = xi - xi_t
    e_eta = eta - eta_t
    e_phi = phi - phi_t

    sin_xi = np.sin(xi)
    denom = np.cosh(eta) - np.cos(xi)
    gamma_scale = np.clip(sin_xi / SIN_XI_GUARD, 0.0, 1.0)
    gamma_eff = gamma * gamma_scale * np.where(collinear, 0.0, 1.0)

    f1, f2, f3, f4 = geometry.scale_factors(xi, eta, phi)
    xi_hat, eta_hat, phi_hat = geometry.basis_vectors(f1, f2, f3, f4, x_hat, y_hat, z_hat)
    u = (
        -(kappa * e_xi)[..., None] * xi_hat
        - (lam * e_eta)[..., None] * eta_hat
        - (gamma_eff * e_phi)[..., None] * phi_hat
    )

    hold = views.collocated | bad_ji | bad_ki | (sin_xi <= EPS_DENOM) | (denom <= EPS_DENOM)
    u = np.where(hold[..., None], 0.0, u)
    guarded = (gamma_scale < 1.0) & (gamma > 0.0) & ~hold
    return BearingAgentStep(
        commands=u,
        xi=xi,
        eta=eta,
        phi=phi,
        hold=hold,
        gamma_guarded=guarded,
        collinear=collinear,
    )


def _single(view: SensedView, targets: BisphericalTargets, gains: ControlGains, agent: int):
    """Run one bearing agent through the stacked path (m = 1)."""
    if agent == 3:
        assert isinstance(view, PairBearingView)
        sv = StackedViews(
            p21=np.zeros(3),
            v_li=view.v31[None, :],
            v_lj=view.v32[None, :],
            v_lk=view.v31[None, :],
            r_lij=np.array([view.r312]),
            r_lik=np.array([1.0]),
            collocated=np.array([False]),
        )
        t = BisphericalTargets(
            d21_star=targets.d21_star,
            xi3_star=targets.xi3_star,
            eta3_star=targets.eta3_star,
            xi_star=np.empty(0),
            eta_star=np.empty(0),
            phi_star=np.empty(0),
        )
        g1 = ControlGains(
            kappa2=gains.kappa2,
            kappa=gains.kappa[:1],
            lam=gains.lam[:1],
            gamma=np.empty(0),
        )
        return bearing_agent_step(sv, t, g1)
    assert isinstance(view, TripleBearingView)
    m = agent - 3  # row of this follower in the stacked arrays
    # Row 0 is a throwaway agent-3 slot (the stacked layout always leads with
    # one), row 1 carries this follower's measurements and targets.
    sv2 = StackedViews(
        p21=np.zeros(3),
        v_li=np.stack([view.v_li, view.v_li]),
        v_lj=np.stack([view.v_lj, view.v_lj]),
        v_lk=np.stack([view.v_li, view.v_lk]),
        r_lij=np.array([view.r_lij, view.r_lij]),
        r_lik=np.array([1.0, view.r_lik]),
        collocated=np.array([False, False]),
    )
    t2 = BisphericalTargets(
        d21_star=targets.d21_star,
        xi3_star=0.1,  # placeholder row, result discarded
        eta3_star=0.0,
        xi_star=targets.xi_star[m - 1 : m],
        eta_star=targets.eta_star[m - 1 : m],
        phi_star=targets.phi_star[m - 1 : m],
    )
    g2 = ControlGains(
        kappa2=gains.kappa2,
        kappa=np.array([1.0, gains.kappa[m]]),
        lam=np.array([1.0, gains.lam[m]]),
        gamma=gains.gamma[m - 1 : m],
    )
    return bearing_agent_step(sv2, t2, g2)


def control(
    view: SensedView | None,
    targets: BisphericalTargets,
    gains: ControlGains,
    agent: int,
    events: list | None = None,
) -> np.ndarray:
    """Velocity command of one agent, in that agent's own frame (m/s).

    Degenerate geometry yields a zero (hold) command; if ``events`` is given,
    a dict describing the degeneracy is appended to it.
    """
    if agent == 1:
        return np.zeros(3)
    if agent == 2:
        assert isinstance(view, RelativePositionView)
        p21 = np.asarray(view.p21, dtype=float)
        e_d = float(p21 @ p21) - targets.d21_star**2
        return gains.kappa2 * e_d * p21
    res = _single(view, targets, gains, agent)
    row = 0 if agent == 3 else 1
    if events is not None:
        if res.hold[row]:
            events.append({"agent": agent, "kind": "degenerate_hold"})
        if res.gamma_guarded[row]:
            events.append({"agent": agent, "kind": "sin_xi_guard"})
        if agent > 3 and res.collinear[row]:
            events.append({"agent": agent, "kind": "collinear_neighbors"})
    return res.commands[row]


def errors_of(
    view: SensedView, targets: BisphericalTargets, agent: int
) -> AgentErrors:
    """One agent's formation-error slice from its own measurements."""
    if agent == 2:
        assert isinstance(view, RelativePositionView)
        p21 = np.asarray(view.p21, dtype=float)
        return AgentErrors(e_d=float(p21 @ p21) - targets.d21_star**2)
    if agent == 3:
        assert isinstance(view, PairBearingView)
        xi = geometry.xi_of(view.v31, view.v32)
        return AgentErrors(
            e_xi=float(xi - targets.xi3_star),
            e_eta=math.log(view.r312) - targets.eta3_star,
        )
    assert isinstance(view, TripleBearingView)
    m = agent - 4
    xi = geometry.xi_of(view.v_li, view.v_lj)
    phi = geometry.phi_from_bearings(
        view.v_li, view.v_lj, view.v_lk, view.r_lij, view.r_lik
    )
    return AgentErrors(
        e_xi=float(xi - targets.xi_star[m]),
        e_eta=math.log(view.r_lij) - targets.eta_star[m],
        e_phi=float(phi - targets.phi_star[m]),
    )


def formation_errors_from_step(
    positions: np.ndarray,
    step: BearingAgentStep,
    targets: BisphericalTargets,
) -> FormationErrors:
    """Stacked errors of a full configuration, reusing an already computed
    controller evaluation (for trajectory logging)."""
    p21 = positions[..., 0, :] - positions[..., 1, :]
    e_d = _dot(p21, p21) - targets.d21_star**2
    xi_t, eta_t, phi_t = stacked_targets(targets)
    return FormationErrors(
        e_d=float(e_d) if np.ndim(e_d) == 0 else e_d,
        e_xi=step.xi - xi_t,
        e_eta=step.eta - eta_t,
        e_phi=step.phi[..., 1:] - phi_t[1:],
    )
