"""Planar engagement kinematics.

Ground truth lives in an inertial frame: each pursuer is a point with
speed V and flight-path angle gamma, steered by a lateral acceleration
command resolved about the line of sight; the target flies a constant
velocity. The same relative-geometry projections are also evaluated on
each pursuer's *estimated* target state, which is what the guidance law
actually consumes.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from .errors import DegenerateGeometryError

logger = logging.getLogger(__name__)

Vec4 = Tuple[float, float, float, float]

# constant-velocity target model: position integrates velocity, velocity is constant
A_TARGET = np.array(
    [
        [0.0, 0.0, 1.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
        [0.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 0.0],
    ]
)


@dataclass(frozen=True)
class TargetState:
    """Target truth state psi = (x, y, vx, vy)."""

    psi: Vec4


@dataclass(frozen=True)
class PursuerTruth:
    """Pursuer truth: position, flight-path angle (rad), speed, alive flag."""

    x: float
    y: float
    gamma: float
    V: float
    alive: bool = True


@dataclass(frozen=True)
class Engagement:
    """Relative geometry: range, LOS angle, range rate, transverse speed."""

    r: float
    theta: float
    V_r: float
    V_theta: float


@dataclass(frozen=True)
class EstimatedEngagement:
    """Engagement variables derived from an estimated target state."""

    r_hat: float
    theta_hat: float
    Vr_hat: float
    Vtheta_hat: float
    gammaT_hat: float
    VT_hat: float


def _wrap(angle: float) -> float:
    # atan2 returns [-pi, pi]; fold the single closed endpoint to keep (-pi, pi]
    if angle <= -math.pi:
        return angle + 2.0 * math.pi
    return angle


def _engagement_scalars(
    px: float, py: float, pgamma: float, pV: float,
    tx: float, ty: float, tvx: float, tvy: float,
) -> Tuple[float, float, float, float]:
    """Shared scalar core of relative_kinematics (also used by the simulator)."""
    dx = tx - px
    dy = ty - py
    r = math.hypot(dx, dy)
    if r <= 0.0:
        raise DegenerateGeometryError("pursuer and target positions coincide")
    theta = _wrap(math.atan2(dy, dx))
    V_T = math.hypot(tvx, tvy)
    gamma_T = math.atan2(tvy, tvx) if V_T > 0.0 else 0.0
    V_r = V_T * math.cos(gamma_T - theta) - pV * math.cos(pgamma - theta)
    V_theta = V_T * math.sin(gamma_T - theta) - pV * math.sin(pgamma - theta)
    return r, theta, V_r, V_theta


def relative_kinematics(p: PursuerTruth, psi: TargetState) -> Engagement:
    """True engagement variables between one pursuer and the target.

    r and theta come from the relative position (four-quadrant angle);
    V_r and V_theta are the radial and transverse projections of the
    relative velocity, with the target's speed and heading extracted
    from its velocity components.
    """
    tx, ty, tvx, tvy = psi.psi
    r, theta, V_r, V_theta = _engagement_scalars(p.x, p.y, p.gamma, p.V, tx, ty, tvx, tvy)
    return Engagement(r=r, theta=theta, V_r=V_r, V_theta=V_theta)


def pursuer_derivatives(
    p: PursuerTruth, theta: float, a_P: float
) -> Tuple[float, float, float, float]:
    """Truth derivatives (gamma_dot, V_dot, x_dot, y_dot) under command a_P.

    The lateral command is resolved about the LOS: the component normal
    to the velocity turns the flight path, the tangential component
    changes speed. Uses the TRUE LOS angle; beliefs never enter truth
    propagation.
    """
    if p.V <= 0.0:
        raise DegenerateGeometryError(f"pursuer speed must be positive, got {p.V}")
    lead = p.gamma - theta
    gamma_dot = a_P * math.cos(lead) / p.V
    V_dot = a_P * math.sin(lead)
    x_dot = p.V * math.cos(p.gamma)
    y_dot = p.V * math.sin(p.gamma)
    return gamma_dot, V_dot, x_dot, y_dot


def target_derivative(psi: TargetState) -> Vec4:
    """Constant-velocity target: d/dt (x, y, vx, vy) = (vx, vy, 0, 0)."""
    _, _, tvx, tvy = psi.psi
    return (tvx, tvy, 0.0, 0.0)


def _estimated_scalars(
    psi_hat: Sequence[float], px: float, py: float, pgamma: float, pV: float
) -> Tuple[float, float, float, float, float, float]:
    """Shared scalar core of estimated_engagement (also used by the simulator)."""
    xh, yh, vxh, vyh = psi_hat
    dx = xh - px
    dy = yh - py
    r_hat = math.hypot(dx, dy)
    if r_hat <= 0.0:
        raise DegenerateGeometryError("estimated target position coincides with pursuer")
    theta_hat = _wrap(math.atan2(dy, dx))
    VT_hat = math.hypot(vxh, vyh)
    if VT_hat > 0.0:
        gammaT_hat = _wrap(math.atan2(vyh, vxh))
    else:
        gammaT_hat = 0.0
        logger.warning("estimated target velocity is zero; heading defaulted to 0 rad")
    Vr_hat = VT_hat * math.cos(gammaT_hat - theta_hat) - pV * math.cos(pgamma - theta_hat)
    Vtheta_hat = VT_hat * math.sin(gammaT_hat - theta_hat) - pV * math.sin(pgamma - theta_hat)
    return r_hat, theta_hat, Vr_hat, Vtheta_hat, gammaT_hat, VT_hat


def estimated_engagement(psi_hat: Sequence[float], p: PursuerTruth) -> EstimatedEngagement:
    """Engagement variables as seen through a pursuer's target estimate.

    Identical projections to relative_kinematics, but fed the estimated
    target position/velocity; the pursuer's own speed and flight-path
    angle are true (it knows its own state). Feeding the true psi back
    reproduces the truth Engagement exactly.
    """
    r_hat, theta_hat, Vr_hat, Vtheta_hat, gammaT_hat, VT_hat = _estimated_scalars(
        psi_hat, p.x, p.y, p.gamma, p.V
    )
    return EstimatedEngagement(
        r_hat=r_hat,
        theta_hat=theta_hat,
        Vr_hat=Vr_hat,
        Vtheta_hat=Vtheta_hat,
        gammaT_hat=gammaT_hat,
        VT_hat=VT_hat,
    )
