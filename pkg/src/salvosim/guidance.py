"""Time-to-go and the consensus-augmented proportional-navigation command.

The closed-form time-to-go of true proportional navigation admits an
exact error-rate decomposition e_dot = F + B*a (e = t_go offset from a
linear countdown). The consensus input u_c, exchanged over the
actuation graph with a prescribed-time gain, is tracked by inverting
that relation: a = (u_c - F)/B, evaluated on each pursuer's *estimated*
engagement. With u_c = 0 the command collapses to the nominal
proportional-navigation term c * V_theta / r.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .dynamics import EstimatedEngagement
from .errors import SingularTgoError
from .observer import ScalingParams, gain_ratio

STANDARD_GRAVITY = 9.80665  # m/s^2

# |V_theta| below this makes B effectively zero (collision course); the
# closed loop then holds the saturation limit with the last valid sign
# instead of dividing by B.
V_THETA_GUARD = 1e-4


@dataclass(frozen=True)
class GuidanceParams:
    """Consensus gains, horizon, closing-speed factor, saturation limit.

    c_factor is the multiplier k in c_i = k * (V_P_i + V_T_i); it must
    keep c_i well above (V_P + V_T)/2 or the time-to-go denominator can
    change sign on near-collision courses.
    """

    M1: float
    M2: float
    T_a: float
    c_factor: float
    a_max: float


@dataclass(frozen=True)
class TgoTerms:
    """Time-to-go plus the drift (F) and control effectiveness (B) of its error rate."""

    t_go: float
    F: float
    B: float


def _check_den(r: float, V_r: float, V_theta: float, c: float) -> float:
    if c <= 0.0:
        raise ValueError(f"closing-speed constant c must be positive, got {c}")
    den = V_theta * V_theta + V_r * V_r + 2.0 * c * V_r
    if abs(den) < 1e-9 * (V_theta * V_theta + V_r * V_r + 1.0):
        raise SingularTgoError(
            f"time-to-go denominator vanished (V_r={V_r}, V_theta={V_theta}, c={c})"
        )
    return den


def time_to_go(r: float, V_r: float, V_theta: float, c: float) -> float:
    """Closed-form time-to-go: -r (V_r + 2c) / (V_theta^2 + V_r^2 + 2 c V_r).

    Negative for opening geometries; callers interpret. On an exact
    collision course (V_theta = 0) the (V_r + 2c) factor cancels and the
    value reduces to -r/V_r, which is returned exactly.
    """
    den = _check_den(r, V_r, V_theta, c)
    if V_theta == 0.0:
        return -r / V_r
    return -r * (V_r + 2.0 * c) / den


def _fb_scalars(r, V_r, V_theta, c):
    """Shared scalar core of tgo_rate_terms (also used by the simulator)."""
    den = _check_den(r, V_r, V_theta, c)
    if V_theta == 0.0:
        return -r / V_r, 0.0, 0.0
    t_go = -r * (V_r + 2.0 * c) / den
    den2 = den * den
    F = 2.0 * c * (V_r + 2.0 * c) * V_theta * V_theta / den2
    B = -2.0 * (V_r + 2.0 * c) * V_theta * r / den2
    return t_go, F, B


def tgo_rate_terms(r: float, V_r: float, V_theta: float, c: float) -> TgoTerms:
    """F/B decomposition of the time-to-go error rate.

    With e = t_go - (countdown), e_dot = F + B*a where
    F = 2c (V_r + 2c) V_theta^2 / den^2 and
    B = -2 (V_r + 2c) V_theta r / den^2. Both carry V_theta, so F = B = 0
    exactly on a collision course: the command has no first-order effect
    on time-to-go there.
    """
    t_go, F, B = _fb_scalars(r, V_r, V_theta, c)
    return TgoTerms(t_go=t_go, F=F, B=B)


def _consensus_from_ratio(
    rho: float, tgo_hat: Sequence[float], L_P_row: Sequence[float], M1: float, M2: float
) -> float:
    acc = 0.0
    for lij, tj in zip(L_P_row, tgo_hat):
        if lij != 0.0:
            acc += lij * tj
    return -(M1 - M2 * rho) * acc


def consensus_input(
    i: int,
    tgo_hat: Sequence[float],
    L_P_row: Sequence[float],
    t: float,
    params: GuidanceParams,
    scaling: ScalingParams,
) -> float:
    """Prescribed-time consensus input for pursuer i.

    u_c_i = -(M1 - M2 * gain_ratio(t, T_a)) * sum_j [L_P]_ij * tgo_hat_j.
    The Laplacian row annihilates any common offset, so the exchanged
    values need no agreed-upon reference: the common interception time
    emerges from the network rather than being broadcast.
    """
    rho = gain_ratio(t, scaling)
    return _consensus_from_ratio(rho, tgo_hat, L_P_row, params.M1, params.M2)


def guidance_command(est: EstimatedEngagement, u_c: float, c: float) -> float:
    """Unsaturated acceleration command a = (u_c - F_hat)/B_hat.

    F_hat and B_hat come from tgo_rate_terms on the ESTIMATED
    engagement. With u_c = 0 this reduces exactly to c * Vtheta_hat /
    r_hat, the nominal proportional-navigation term.

    Raises SingularTgoError when |Vtheta_hat| < V_THETA_GUARD: B is then
    effectively zero and the division meaningless. The closed loop
    replaces the command with the saturation limit carrying the sign of
    the last valid command (see simulator).
    """
    if abs(est.Vtheta_hat) < V_THETA_GUARD:
        raise SingularTgoError(
            f"|Vtheta_hat|={abs(est.Vtheta_hat):.3e} below guard {V_THETA_GUARD}; "
            "control effectiveness B is effectively zero"
        )
    _, F, B = _fb_scalars(est.r_hat, est.Vr_hat, est.Vtheta_hat, c)
    # B = 0 with Vtheta_hat above the guard can only mean r_hat = 0
    if B == 0.0:
        raise SingularTgoError("control effectiveness B vanished (zero estimated range)")
    return (u_c - F) / B


def saturate(a: float, a_max: float) -> float:
    """Clamp a command to [-a_max, +a_max]."""
    if a_max <= 0.0:
        raise ValueError(f"a_max must be positive, got {a_max}")
    if a > a_max:
        return a_max
    if a < -a_max:
        return -a_max
    return a
