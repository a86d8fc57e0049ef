"""Closed-loop engagement integration.

Fixed-step RK4 over the joint system: target truth, pursuer truth under
the saturated guidance command, and every pursuer's distributed target
observer. Guidance and observer gains are evaluated at each RK4 stage
time (the prescribed-time gains vary too fast near their horizons for a
zero-order hold), and all couplings within a stage read one consistent
snapshot, so results are independent of pursuer iteration order.

Interception is a range crossing below the capture radius, with the
crossing instant refined by linear interpolation inside the step;
intercepted and failed pursuers are excised from both graphs through
the same path and their state is frozen.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

from . import graph as _graph
from .dynamics import (
    A_TARGET,
    PursuerTruth,
    TargetState,
    Vec4,
    _engagement_scalars,
    _estimated_scalars,
)
from .errors import SimulationDiverged, SingularTgoError
from .guidance import (
    STANDARD_GRAVITY,
    V_THETA_GUARD,
    _consensus_from_ratio,
    _fb_scalars,
    time_to_go,
)
from .observer import ScalingParams, gain_ratio

logger = logging.getLogger(__name__)

DEFAULT_DT = 1e-3
DEFAULT_STRIDE = 1e-2
DEFAULT_CAPTURE_RADIUS = 1.0
# epsilon_guard tracks the step size: the terminal gain branch engages
# this many steps before each prescribed horizon
GUARD_STEPS = 10.0
# t_max defaults to this multiple of the largest initial true time-to-go
TMAX_FACTOR = 4.0


@dataclass(frozen=True)
class InterceptionRecord:
    """One pursuer's capture: 0-based index, interpolated crossing time,
    and the first sub-threshold range sample (reported as miss distance)."""

    pursuer: int
    t: float
    miss_distance: float


@dataclass(frozen=True)
class SimState:
    """Full simulation state at one instant.

    ``guard_sign`` carries, per pursuer, the sign of the last valid
    (non-guarded) command; the collision-course fallback saturates with
    this sign. Pursuer count is constant; alive flags only ever flip to
    False.
    """

    t: float
    target: TargetState
    pursuers: Tuple[PursuerTruth, ...]
    estimates: Tuple[Vec4, ...]
    intercepted: Tuple[Optional[InterceptionRecord], ...]
    guard_sign: Tuple[float, ...]


@dataclass
class SimulationTrace:
    """Column-major sampled history at a fixed stride.

    Per-pursuer columns are indexed [pursuer][sample]. Angles are stored
    in radians (degrees only at the file boundary). Dead or intercepted
    pursuers hold their last sampled values, with a_cmd forced to zero;
    ``active`` records who was still flying at each sample.
    """

    n_pursuers: int
    stride: float
    t: List[float] = field(default_factory=list)
    target_x: List[float] = field(default_factory=list)
    target_y: List[float] = field(default_factory=list)
    x: List[List[float]] = field(default_factory=list)
    y: List[List[float]] = field(default_factory=list)
    gamma: List[List[float]] = field(default_factory=list)
    V: List[List[float]] = field(default_factory=list)
    a_cmd: List[List[float]] = field(default_factory=list)
    tgo_true: List[List[float]] = field(default_factory=list)
    tgo_est: List[List[float]] = field(default_factory=list)
    obs_err: List[List[float]] = field(default_factory=list)
    r: List[List[float]] = field(default_factory=list)
    active: List[List[bool]] = field(default_factory=list)

    def __post_init__(self):
        for name in ("x", "y", "gamma", "V", "a_cmd", "tgo_true", "tgo_est", "obs_err", "r", "active"):
            if not getattr(self, name):
                setattr(self, name, [[] for _ in range(self.n_pursuers)])


@dataclass(frozen=True)
class Tolerances:
    """Metric tolerances: absolute pairwise time-to-go agreement, and the
    observer error threshold relative to the initial error."""

    consensus_spread: float = 0.05
    observer_rel: float = 1e-2


@dataclass(frozen=True)
class EngagementMetrics:
    """Run summary. Per-pursuer entries are absent for pursuers that never
    intercepted; ``missed`` lists pursuers still flying at t_max."""

    intercept_times: Dict[int, float]
    spread: Optional[float]
    miss_distances: Dict[int, float]
    consensus_time: Optional[float]
    observer_convergence_time: Optional[float]
    missed: Tuple[int, ...] = ()
    timed_out: bool = False
    structural_warnings: Tuple[str, ...] = ()


class _Active:
    """Graph data restricted to the currently active pursuer set."""

    __slots__ = ("idx", "lead_w", "sense_nbrs", "lp_rows")

    def __init__(self, idx, lead_w, sense_nbrs, lp_rows):
        self.idx = idx
        self.lead_w = lead_w
        self.sense_nbrs = sense_nbrs
        self.lp_rows = lp_rows


class _Engine:
    """Precomputed per-config data: gains, edge lists (0-based), caches."""

    def __init__(self, config):
        n = len(config.pursuers)
        self.n = n
        self.K1 = config.K1
        self.K2 = config.K2
        self.M1 = config.M1
        self.M2 = config.M2
        self.T_o = config.T_o
        self.T_a = config.T_a
        self.c_factor = config.c_factor
        self.a_max = config.a_max_g * STANDARD_GRAVITY
        self.VT_true = math.hypot(config.target_velocity[0], config.target_velocity[1])
        # file ids: 0 = target, 1..n = pursuers; store 0-based in-neighbor lists
        self.sensor = [False] * n
        self.sense_in: List[List[int]] = [[] for _ in range(n)]
        for src, dst in config.sensing_edges:
            if src == 0:
                self.sensor[dst - 1] = True
            else:
                self.sense_in[dst - 1].append(src - 1)
        self.act_in: List[List[int]] = [[] for _ in range(n)]
        for src, dst in config.actuation_edges:
            self.act_in[dst - 1].append(src - 1)
        self._active_cache: Dict[Tuple[bool, ...], _Active] = {}

    def active(self, mask: Tuple[bool, ...]) -> _Active:
        act = self._active_cache.get(mask)
        if act is None:
            idx = [i for i in range(self.n) if mask[i]]
            lead_w = [1.0 if self.sensor[i] else 0.0 for i in idx]
            sense_nbrs = [[j for j in self.sense_in[i] if mask[j]] for i in idx]
            lp_rows = []
            for i in idx:
                row = [0.0] * self.n
                nbrs = [j for j in self.act_in[i] if mask[j]]
                row[i] = float(len(nbrs))
                for j in nbrs:
                    row[j] = -1.0
                lp_rows.append(tuple(row))
            act = _Active(idx, lead_w, sense_nbrs, lp_rows)
            self._active_cache[mask] = act
        return act


_ENGINE_CACHE: Dict[int, Tuple[object, _Engine]] = {}


def _engine_for(config) -> _Engine:
    # tiny keep-last cache; configs are frozen dataclasses
    key = id(config)
    hit = _ENGINE_CACHE.get(key)
    if hit is not None and hit[0] is config:
        return hit[1]
    eng = _Engine(config)
    if len(_ENGINE_CACHE) > 8:
        _ENGINE_CACHE.clear()
    _ENGINE_CACHE[key] = (config, eng)
    return eng


def _stage(eng, act, tau, tpsi, px, py, pgamma, pV, est, guard_sign, scaling_o, scaling_a, collect):
    """Stage derivatives of the joint ODE from one consistent snapshot.

    Returns derivative arrays (zeros for inactive pursuers) and, when
    ``collect`` is set, the stage diagnostics (applied command, guard
    flag, true range, true/estimated time-to-go, observer error norm).
    """
    sin = math.sin
    cos = math.cos
    hypot = math.hypot
    tx, ty, tvx, tvy = tpsi
    n = eng.n
    rho_o = gain_ratio(tau, scaling_o)
    rho_a = gain_ratio(tau, scaling_a)
    g_obs = eng.K1 - eng.K2 * rho_o
    c_factor = eng.c_factor
    a_max = eng.a_max

    dpx = [0.0] * n
    dpy = [0.0] * n
    dgam = [0.0] * n
    dV = [0.0] * n
    dest: List[Vec4] = [(0.0, 0.0, 0.0, 0.0)] * n
    tgo_hat = [0.0] * n
    fb = {}

    # pass 1: estimated engagement and the exchanged time-to-go
    for i in act.idx:
        ei = est[i]
        c_i = c_factor * (pV[i] + hypot(ei[2], ei[3]))
        rh, thh, Vrh, Vthh, _gTh, _VTh = _estimated_scalars(ei, px[i], py[i], pgamma[i], pV[i])
        t_go, F, B = _fb_scalars(rh, Vrh, Vthh, c_i)
        tgo_hat[i] = t_go
        fb[i] = (Vthh, F, B)

    diag = None
    if collect:
        diag = {"a": [0.0] * n, "guarded": [False] * n, "r": [0.0] * n,
                "tgo_true": [0.0] * n, "tgo_est": [0.0] * n, "obs_err": [0.0] * n}

    # pass 2: consensus input, command, truth and observer derivatives
    for k, i in enumerate(act.idx):
        u_c = _consensus_from_ratio(rho_a, tgo_hat, act.lp_rows[k], eng.M1, eng.M2)
        Vthh, F, B = fb[i]
        if abs(Vthh) < V_THETA_GUARD:
            a = guard_sign[i] * a_max
            guarded = True
        else:
            a = (u_c - F) / B
            if a > a_max:
                a = a_max
            elif a < -a_max:
                a = -a_max
            guarded = False

        r, theta, V_r, V_theta = _engagement_scalars(px[i], py[i], pgamma[i], pV[i], tx, ty, tvx, tvy)
        lead = pgamma[i] - theta
        dgam[i] = a * cos(lead) / pV[i]
        dV[i] = a * sin(lead)
        dpx[i] = pV[i] * cos(pgamma[i])
        dpy[i] = pV[i] * sin(pgamma[i])

        ei = est[i]
        d0 = d1 = d2 = d3 = 0.0
        if act.lead_w[k] != 0.0:
            d0 = ei[0] - tx
            d1 = ei[1] - ty
            d2 = ei[2] - tvx
            d3 = ei[3] - tvy
        for j in act.sense_nbrs[k]:
            ej = est[j]
            d0 += ei[0] - ej[0]
            d1 += ei[1] - ej[1]
            d2 += ei[2] - ej[2]
            d3 += ei[3] - ej[3]
        dest[i] = (ei[2] - g_obs * d0, ei[3] - g_obs * d1, -g_obs * d2, -g_obs * d3)

        if collect:
            diag["a"][i] = a
            diag["guarded"][i] = guarded
            diag["r"][i] = r
            diag["tgo_est"][i] = tgo_hat[i]
            try:
                diag["tgo_true"][i] = time_to_go(r, V_r, V_theta, c_factor * (pV[i] + eng.VT_true))
            except SingularTgoError:
                diag["tgo_true"][i] = float("nan")
            diag["obs_err"][i] = math.sqrt(
                (ei[0] - tx) ** 2 + (ei[1] - ty) ** 2 + (ei[2] - tvx) ** 2 + (ei[3] - tvy) ** 2
            )

    dtpsi = (tvx, tvy, 0.0, 0.0)
    return dtpsi, dpx, dpy, dgam, dV, dest, diag


def _advance(eng, act, t, dt, tpsi, px, py, pgamma, pV, est, guard_sign, scaling_o, scaling_a):
    """One RK4 step. Returns the new flat state and the stage-1 diagnostics."""
    n = eng.n
    half = 0.5 * dt

    def blend(base, deriv, h):
        return [base[i] + h * deriv[i] for i in range(n)]

    def blend_est(base, deriv, h):
        return [
            (e[0] + h * d[0], e[1] + h * d[1], e[2] + h * d[2], e[3] + h * d[3])
            for e, d in zip(base, deriv)
        ]

    def blend_psi(base, deriv, h):
        return (base[0] + h * deriv[0], base[1] + h * deriv[1],
                base[2] + h * deriv[2], base[3] + h * deriv[3])

    dt1, dx1, dy1, dg1, dv1, de1, diag = _stage(
        eng, act, t, tpsi, px, py, pgamma, pV, est, guard_sign, scaling_o, scaling_a, True)
    dt2, dx2, dy2, dg2, dv2, de2, _ = _stage(
        eng, act, t + half, blend_psi(tpsi, dt1, half), blend(px, dx1, half),
        blend(py, dy1, half), blend(pgamma, dg1, half), blend(pV, dv1, half),
        blend_est(est, de1, half), guard_sign, scaling_o, scaling_a, False)
    dt3, dx3, dy3, dg3, dv3, de3, _ = _stage(
        eng, act, t + half, blend_psi(tpsi, dt2, half), blend(px, dx2, half),
        blend(py, dy2, half), blend(pgamma, dg2, half), blend(pV, dv2, half),
        blend_est(est, de2, half), guard_sign, scaling_o, scaling_a, False)
    dt4, dx4, dy4, dg4, dv4, de4, _ = _stage(
        eng, act, t + dt, blend_psi(tpsi, dt3, dt), blend(px, dx3, dt),
        blend(py, dy3, dt), blend(pgamma, dg3, dt), blend(pV, dv3, dt),
        blend_est(est, de3, dt), guard_sign, scaling_o, scaling_a, False)

    w = dt / 6.0
    tpsi2 = tuple(tpsi[j] + w * (dt1[j] + 2.0 * (dt2[j] + dt3[j]) + dt4[j]) for j in range(4))
    px2 = [px[i] + w * (dx1[i] + 2.0 * (dx2[i] + dx3[i]) + dx4[i]) for i in range(n)]
    py2 = [py[i] + w * (dy1[i] + 2.0 * (dy2[i] + dy3[i]) + dy4[i]) for i in range(n)]
    pg2 = [pgamma[i] + w * (dg1[i] + 2.0 * (dg2[i] + dg3[i]) + dg4[i]) for i in range(n)]
    pV2 = [pV[i] + w * (dv1[i] + 2.0 * (dv2[i] + dv3[i]) + dv4[i]) for i in range(n)]
    est2 = [
        tuple(e[j] + w * (d1[j] + 2.0 * (d2[j] + d3[j]) + d4[j]) for j in range(4))
        for e, d1, d2, d3, d4 in zip(est, de1, de2, de3, de4)
    ]

    _check_finite(t + dt, tpsi2, px2, py2, pg2, pV2, est2, act.idx)
    return (tpsi2, px2, py2, pg2, pV2, est2), diag


def _check_finite(t, tpsi, px, py, pgamma, pV, est, idx):
    total = sum(tpsi)
    for i in idx:
        total += px[i] + py[i] + pgamma[i] + pV[i] + sum(est[i])
    if math.isfinite(total):
        return
    # slow path: identify the offending term for the diagnostic
    for j, name in enumerate(("target[x]", "target[y]", "target[vx]", "target[vy]")):
        if not math.isfinite(tpsi[j]):
            raise SimulationDiverged(t, 0, name)
    for i in idx:
        for value, name in ((px[i], "x"), (py[i], "y"), (pgamma[i], "gamma"), (pV[i], "V")):
            if not math.isfinite(value):
                raise SimulationDiverged(t, i + 1, name)
        for j in range(4):
            if not math.isfinite(est[i][j]):
                raise SimulationDiverged(t, i + 1, f"estimate[{j}]")
    raise SimulationDiverged(t, 0, "state")


def _cross_time(t0: float, dt: float, r_prev: float, r_next: float, threshold: float) -> Optional[float]:
    if r_prev > threshold >= r_next:
        if r_prev == r_next:
            return t0 + dt
        return t0 + dt * (r_prev - threshold) / (r_prev - r_next)
    return None


def initial_state(config) -> SimState:
    """SimState at t = 0 from a validated scenario configuration."""
    pursuers = tuple(
        PursuerTruth(x=p.position[0], y=p.position[1],
                     gamma=math.radians(p.heading_deg), V=p.speed, alive=True)
        for p in config.pursuers
    )
    estimates = tuple(tuple(float(v) for v in p.initial_estimate) for p in config.pursuers)
    psi = (config.target_position[0], config.target_position[1],
           config.target_velocity[0], config.target_velocity[1])
    n = len(pursuers)
    return SimState(
        t=0.0,
        target=TargetState(psi=psi),
        pursuers=pursuers,
        estimates=estimates,
        intercepted=(None,) * n,
        guard_sign=(1.0,) * n,
    )


def step(state: SimState, dt: float, config) -> SimState:
    """Advance the joint ODE by one RK4 step.

    Dead and intercepted pursuers are frozen and excluded from both
    graphs. The step itself neither detects interceptions nor applies
    failures; compose with detect_interception and inject_failure (as
    run does). Identical state and config give a bit-identical result.
    """
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    eng = _engine_for(config)
    mask = tuple(
        p.alive and state.intercepted[i] is None for i, p in enumerate(state.pursuers)
    )
    act = eng.active(mask)
    scaling_o = ScalingParams(T_c=eng.T_o, epsilon_guard=GUARD_STEPS * dt)
    scaling_a = ScalingParams(T_c=eng.T_a, epsilon_guard=GUARD_STEPS * dt)
    px = [p.x for p in state.pursuers]
    py = [p.y for p in state.pursuers]
    pgamma = [p.gamma for p in state.pursuers]
    pV = [p.V for p in state.pursuers]
    est = list(state.estimates)
    (tpsi2, px2, py2, pg2, pV2, est2), diag = _advance(
        eng, act, state.t, dt, state.target.psi, px, py, pgamma, pV, est,
        state.guard_sign, scaling_o, scaling_a)
    guard_sign = list(state.guard_sign)
    for i in act.idx:
        if diag["guarded"][i]:
            logger.debug("pursuer %d on collision-course guard at t=%.6f", i + 1, state.t)
        elif diag["a"][i] != 0.0:
            guard_sign[i] = 1.0 if diag["a"][i] > 0.0 else -1.0
    pursuers = tuple(
        replace(state.pursuers[i], x=px2[i], y=py2[i], gamma=pg2[i], V=pV2[i])
        for i in range(eng.n)
    )
    return SimState(
        t=state.t + dt,
        target=TargetState(psi=tuple(tpsi2)),
        pursuers=pursuers,
        estimates=tuple(est2),
        intercepted=state.intercepted,
        guard_sign=tuple(guard_sign),
    )


def detect_interception(prev: SimState, next: SimState, threshold: float) -> Tuple[InterceptionRecord, ...]:
    """Range crossings below ``threshold`` between two consecutive states.

    A pursuer intercepts at the first time its true range crosses below
    the threshold; the crossing time is linearly interpolated over the
    step and the reported miss distance is the first sub-threshold range
    sample. Each eligible pursuer is checked independently.
    """
    if threshold <= 0.0:
        raise ValueError(f"threshold must be positive, got {threshold}")
    dt = next.t - prev.t
    tx0, ty0 = prev.target.psi[0], prev.target.psi[1]
    tx1, ty1 = next.target.psi[0], next.target.psi[1]
    records = []
    for i, p in enumerate(prev.pursuers):
        if not (p.alive and prev.intercepted[i] is None):
            continue
        q = next.pursuers[i]
        r_prev = math.hypot(tx0 - p.x, ty0 - p.y)
        r_next = math.hypot(tx1 - q.x, ty1 - q.y)
        t_cross = _cross_time(prev.t, dt, r_prev, r_next, threshold)
        if t_cross is not None:
            records.append(InterceptionRecord(pursuer=i, t=t_cross, miss_distance=r_next))
    return tuple(records)


def inject_failure(state: SimState, pursuer: int, t_fail: float) -> SimState:
    """Mark a pursuer dead; no-op if it already intercepted or failed.

    Excision from both graphs takes effect through the active mask: the
    survivor Laplacians, spectra, and gain floors are rebuilt for the
    remaining set (run records structural warnings when the survivor
    graphs lose their required connectivity). The dead pursuer's state
    is frozen from here on.
    """
    if not (0 <= pursuer < len(state.pursuers)):
        raise ValueError(f"pursuer index {pursuer} out of range")
    p = state.pursuers[pursuer]
    if not p.alive or state.intercepted[pursuer] is not None:
        return state
    if state.t + 1e-12 < t_fail:
        raise ValueError(f"failure time {t_fail} not reached at t={state.t}")
    pursuers = list(state.pursuers)
    pursuers[pursuer] = replace(p, alive=False)
    return replace(state, pursuers=tuple(pursuers))


def _survivor_checks(config, alive, context: str) -> List[str]:
    """Structural checks and floor recomputation for the survivor graphs."""
    warnings: List[str] = []
    active = [i for i, a in enumerate(alive) if a]
    if not active:
        return warnings
    # survivor sensing graph: target plus active pursuers, relabeled contiguously
    relabel = {0: 0}
    for m, i in enumerate(active):
        relabel[i + 1] = m + 1
    sense_edges = [
        (relabel[s], relabel[d])
        for s, d in config.sensing_edges
        if (s == 0 or s - 1 in active) and (d - 1 in active)
    ]
    sense_topo = _graph.build_topology(len(active) + 1, sense_edges, has_leader=True)
    tree_ok = _graph.has_spanning_tree(sense_topo, 0)
    if not tree_ok:
        warnings.append(f"structure: sensing graph lost its target-rooted spanning tree ({context})")
    act_edges = [
        (relabel[s] - 1, relabel[d] - 1)
        for s, d in config.actuation_edges
        if (s - 1 in active) and (d - 1 in active)
    ]
    act_topo = _graph.build_topology(len(active), act_edges, has_leader=False)
    strong_ok = _graph.is_strongly_connected(act_topo)
    if not strong_ok:
        warnings.append(f"structure: actuation graph not strongly connected ({context})")
    if tree_ok and len(active) >= 1:
        bundle = _graph.laplacian_bundle(sense_topo)
        if bundle.L_PP is not None:
            spectra = _graph.lemma3_spectra(bundle.L_PP)
            k1_min, k2_min = _graph.observer_gain_floors(spectra, A_TARGET)
            if config.K1 <= k1_min or config.K2 < k2_min:
                warnings.append(
                    f"gains: observer gains below recomputed survivor floors "
                    f"K1_min={k1_min:.6g}, K2_min={k2_min:.6g} ({context})"
                )
    if strong_ok and len(active) >= 2:
        lam = _graph.mirror_fiedler(_graph.laplacian_bundle(act_topo).L)
        if lam > 0 and config.M2 < _graph.controller_gain_floor(lam):
            warnings.append(
                f"gains: consensus gain below recomputed survivor floor "
                f"M2_min={1.0 / lam:.6g} ({context})"
            )
    return warnings


def default_t_max(config) -> float:
    """4x the largest initial true time-to-go (bounded fallback of 60 s)."""
    state = initial_state(config)
    vt = math.hypot(config.target_velocity[0], config.target_velocity[1])
    best = 0.0
    for p in config.pursuers:
        gamma = math.radians(p.heading_deg)
        r, _, V_r, V_theta = _engagement_scalars(
            p.position[0], p.position[1], gamma, p.speed,
            state.target.psi[0], state.target.psi[1], state.target.psi[2], state.target.psi[3])
        try:
            tgo = time_to_go(r, V_r, V_theta, config.c_factor * (p.speed + vt))
        except SingularTgoError:
            continue
        if tgo > best:
            best = tgo
    return TMAX_FACTOR * best if best > 0.0 else 60.0


def run(config) -> Tuple[SimulationTrace, EngagementMetrics]:
    """Integrate a validated scenario to interception or t_max.

    Returns the sampled trace and the engagement metrics. Pursuer
    failures fire at the first step boundary at or after their time;
    interceptions excise pursuers exactly like failures. Exceeding
    t_max is a reported outcome (timed_out flag, missed list), not an
    error.
    """
    eng = _engine_for(config)
    n = eng.n
    dt = config.dt
    cap = config.capture_radius
    t_max = config.t_max if config.t_max is not None else default_t_max(config)
    stride_steps = max(1, round(config.stride / dt))
    scaling_o = ScalingParams(T_c=eng.T_o, epsilon_guard=GUARD_STEPS * dt)
    scaling_a = ScalingParams(T_c=eng.T_a, epsilon_guard=GUARD_STEPS * dt)

    state0 = initial_state(config)
    tpsi = state0.target.psi
    px = [p.x for p in state0.pursuers]
    py = [p.y for p in state0.pursuers]
    pgamma = [p.gamma for p in state0.pursuers]
    pV = [p.V for p in state0.pursuers]
    est = [list(e) for e in state0.estimates]
    alive = [True] * n
    guard_sign = [1.0] * n
    records: Dict[int, InterceptionRecord] = {}
    warnings: List[str] = []
    guard_seen = [False] * n

    failures = sorted(
        ((t_fail, pid - 1) for pid, t_fail in config.failure_events), key=lambda e: (e[0], e[1])
    )
    fail_ptr = 0

    trace = SimulationTrace(n_pursuers=n, stride=stride_steps * dt)
    # frozen-column store; holds each pursuer's last sampled diagnostics
    col_a = [0.0] * n
    col_tgo_true = [float("nan")] * n
    col_tgo_est = [float("nan")] * n
    col_obs = [float("nan")] * n
    col_r = [float("nan")] * n

    # a pursuer starting inside the capture radius intercepts immediately
    for i in range(n):
        r0 = math.hypot(tpsi[0] - px[i], tpsi[1] - py[i])
        if r0 <= cap:
            records[i] = InterceptionRecord(pursuer=i, t=0.0, miss_distance=r0)
            logger.info("pursuer %d starts inside the capture radius", i + 1)

    timed_out = False
    missed: Tuple[int, ...] = ()
    k = 0
    while True:
        t = k * dt
        while fail_ptr < len(failures) and failures[fail_ptr][0] <= t + 1e-12:
            t_fail, pid = failures[fail_ptr]
            fail_ptr += 1
            if alive[pid] and pid not in records:
                alive[pid] = False
                col_a[pid] = 0.0
                logger.info("pursuer %d failed at t=%.3f s", pid + 1, t)
                warnings.extend(
                    _survivor_checks(config, [alive[i] and i not in records for i in range(n)],
                                     f"after P{pid + 1} failure at t={t_fail:g} s")
                )
        mask = tuple(alive[i] and i not in records for i in range(n))
        if not any(mask):
            break
        if t >= t_max - 1e-12:
            timed_out = True
            missed = tuple(i for i in range(n) if mask[i])
            logger.warning("t_max=%.3f s reached with %d pursuer(s) still flying", t_max, len(missed))
            break

        act = eng.active(mask)
        (tpsi2, px2, py2, pg2, pV2, est2), diag = _advance(
            eng, act, t, dt, tpsi, px, py, pgamma, pV, est, guard_sign, scaling_o, scaling_a)

        if k % stride_steps == 0:
            for i in act.idx:
                col_a[i] = diag["a"][i]
                col_tgo_true[i] = diag["tgo_true"][i]
                col_tgo_est[i] = diag["tgo_est"][i]
                col_obs[i] = diag["obs_err"][i]
                col_r[i] = diag["r"][i]
            trace.t.append(t)
            trace.target_x.append(tpsi[0])
            trace.target_y.append(tpsi[1])
            for i in range(n):
                trace.x[i].append(px[i])
                trace.y[i].append(py[i])
                trace.gamma[i].append(pgamma[i])
                trace.V[i].append(pV[i])
                trace.a_cmd[i].append(col_a[i])
                trace.tgo_true[i].append(col_tgo_true[i])
                trace.tgo_est[i].append(col_tgo_est[i])
                trace.obs_err[i].append(col_obs[i])
                trace.r[i].append(col_r[i])
                trace.active[i].append(mask[i])

        for i in act.idx:
            if diag["guarded"][i]:
                if not guard_seen[i]:
                    guard_seen[i] = True
                    logger.warning(
                        "pursuer %d hit the collision-course guard at t=%.4f s; "
                        "holding saturated command (sign %+d)", i + 1, t, int(guard_sign[i]))
                else:
                    logger.debug("pursuer %d on collision-course guard at t=%.6f", i + 1, t)
            elif diag["a"][i] != 0.0:
                guard_sign[i] = 1.0 if diag["a"][i] > 0.0 else -1.0

        for i in act.idx:
            r_next = math.hypot(tpsi2[0] - px2[i], tpsi2[1] - py2[i])
            t_cross = _cross_time(t, dt, diag["r"][i], r_next, cap)
            if t_cross is not None:
                records[i] = InterceptionRecord(pursuer=i, t=t_cross, miss_distance=r_next)
                col_a[i] = 0.0
                logger.info("pursuer %d intercepted at t=%.4f s (miss %.3f m)", i + 1, t_cross, r_next)

        tpsi, px, py, pgamma, pV, est = tpsi2, px2, py2, pg2, pV2, est2
        k += 1

    ordered = tuple(records[i] for i in sorted(records))
    met = metrics(trace, ordered, Tolerances(),
                  timed_out=timed_out, missed=missed, structural_warnings=tuple(warnings))
    return trace, met


def metrics(
    trace: SimulationTrace,
    records: Sequence[InterceptionRecord],
    tolerances: Tolerances,
    *,
    timed_out: bool = False,
    missed: Sequence[int] = (),
    structural_warnings: Sequence[str] = (),
) -> EngagementMetrics:
    """Engagement summary from a completed run's trace and records.

    consensus_time is the first sample at which the active pursuers'
    true time-to-go values agree pairwise within the consensus
    tolerance; observer_convergence_time is the first sample at which
    every active pursuer's estimate error norm drops below the relative
    threshold times the initial worst error.
    """
    intercept_times = {rec.pursuer: rec.t for rec in records}
    miss_distances = {rec.pursuer: rec.miss_distance for rec in records}
    if len(intercept_times) >= 2:
        times = list(intercept_times.values())
        spread = max(times) - min(times)
    elif len(intercept_times) == 1:
        spread = 0.0
    else:
        spread = None

    consensus_time = None
    n = trace.n_pursuers
    for s, t in enumerate(trace.t):
        vals = [trace.tgo_true[i][s] for i in range(n) if trace.active[i][s]]
        if len(vals) < 2:
            continue
        if any(math.isnan(v) for v in vals):
            continue
        if max(vals) - min(vals) < tolerances.consensus_spread:
            consensus_time = t
            break

    observer_convergence_time = None
    if trace.t:
        init = [trace.obs_err[i][0] for i in range(n) if trace.active[i][0]]
        init_err = max(init) if init else 0.0
        if init_err == 0.0:
            observer_convergence_time = trace.t[0]
        else:
            threshold = tolerances.observer_rel * init_err
            for s, t in enumerate(trace.t):
                errs = [trace.obs_err[i][s] for i in range(n) if trace.active[i][s]]
                if errs and max(errs) < threshold:
                    observer_convergence_time = t
                    break

    return EngagementMetrics(
        intercept_times=intercept_times,
        spread=spread,
        miss_distances=miss_distances,
        consensus_time=consensus_time,
        observer_convergence_time=observer_convergence_time,
        missed=tuple(missed),
        timed_out=timed_out,
        structural_warnings=tuple(structural_warnings),
    )
