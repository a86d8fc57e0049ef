"""Prescribed-time scaling and the distributed target-state observer.

A trigonometric scaling function generates a time-varying gain ratio
that diverges as the prescribed horizon approaches, forcing the
networked estimation error to zero by that horizon regardless of the
initial error. Each pursuer integrates a copy of the target model and
corrects it with the weighted disagreement against its in-neighbors
(and against the true target state, if it carries a sensor).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dynamics import TargetState, Vec4


@dataclass(frozen=True)
class ScalingParams:
    """Prescribed horizon T_c and the terminal guard width.

    The exact gain ratio diverges like -3/(T_c - t); the guard enters
    the terminal (zero-ratio) branch early, at T_c - epsilon_guard, so
    a fixed-step integrator sees a bounded gain.
    """

    T_c: float
    epsilon_guard: float


@dataclass(frozen=True)
class ObserverParams:
    """Observer gains and prescribed convergence time."""

    K1: float
    K2: float
    T_o: float


# per-pursuer estimate of the target state (x, y, vx, vy)
ObserverEstimate = Vec4


def scaling(t: float, T_c: float) -> float:
    """Scaling function: (T_c/pi) sin(pi t/T_c) + t - T_c before T_c, 1 after.

    Negative and increasing toward zero on [0, T_c); the constant 1
    afterwards makes the gain ratio vanish identically.
    """
    if t < T_c:
        return (T_c / math.pi) * math.sin(math.pi * t / T_c) + t - T_c
    return 1.0


def scaling_rate(t: float, T_c: float) -> float:
    """Time derivative of the scaling function: cos(pi t/T_c) + 1 before T_c, 0 after."""
    if t < T_c:
        return math.cos(math.pi * t / T_c) + 1.0
    return 0.0


def gain_ratio(t: float, params: ScalingParams) -> float:
    """Guarded ratio scaling_rate/scaling; <= 0 everywhere.

    Returns the exact ratio for t < T_c - epsilon_guard and 0 from
    there on (terminal branch entered early; see ScalingParams).
    """
    if t >= params.T_c - params.epsilon_guard:
        return 0.0
    return scaling_rate(t, params.T_c) / scaling(t, params.T_c)


def relative_estimation_error(
    i: int,
    estimates: Sequence[Sequence[float]],
    psi: TargetState,
    W: np.ndarray,
) -> np.ndarray:
    """Weighted disagreement of pursuer i's estimate with its in-neighbors.

    delta_i = w_i0 (psi_hat_i - psi) + sum_j w_ij (psi_hat_i - psi_hat_j),
    with weights from row i+1 of the full sensing adjacency W (node 0 is
    the target, so w_i0 = W[i+1, 0]). Only sensor-equipped pursuers have
    w_i0 = 1 and touch the true target state. ``i`` is a 0-based pursuer
    index; dead neighbors must already be excised from W.
    """
    W = np.asarray(W, dtype=float)
    own = np.asarray(estimates[i], dtype=float)
    delta = W[i + 1, 0] * (own - np.asarray(psi.psi, dtype=float))
    for j, w in enumerate(W[i + 1, 1:]):
        if w != 0.0:
            delta = delta + w * (own - np.asarray(estimates[j], dtype=float))
    return delta


def observer_derivative(
    psi_hat_i: Sequence[float],
    delta_i: Sequence[float],
    t: float,
    params: ObserverParams,
    scaling: ScalingParams,
) -> np.ndarray:
    """Estimate derivative: target-model drift minus the scaled innovation.

    d/dt psi_hat_i = A_T psi_hat_i - (K1 - K2 * gain_ratio(t)) delta_i.
    The ratio is <= 0, so the effective gain is >= K1 and grows toward
    the observer horizon. A_T is the constant-velocity target model, so
    the drift is simply (vx, vy, 0, 0) of the estimate itself.
    """
    g = params.K1 - params.K2 * gain_ratio(t, scaling)
    e0, e1, e2, e3 = (float(v) for v in psi_hat_i)
    d0, d1, d2, d3 = (float(v) for v in delta_i)
    return np.array([e2 - g * d0, e3 - g * d1, -g * d2, -g * d3])
