"""Scenario files, canonical echo, and run artifacts.

Scenarios are YAML mappings. Angles and pursuer ids cross the file
boundary in degrees and 1-based form (the target is node 0 in sensing
edges); everything internal is radians and 0-based. Parsing validates
the whole document and reports every violation at once. Gains left
unset default to 1.5x their spectral floors.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import yaml

from . import graph as _graph
from .dynamics import A_TARGET, Vec4
from .errors import ConfigError, TopologyError
from .simulator import (
    DEFAULT_CAPTURE_RADIUS,
    DEFAULT_DT,
    DEFAULT_STRIDE,
    EngagementMetrics,
    SimulationTrace,
    default_t_max,
)

DEFAULT_C_FACTOR = 3.0
DEFAULT_A_MAX_G = 7.0
GAIN_MARGIN = 1.5
# default weight on the uniform consensus term; any positive value works
DEFAULT_M1 = 1.0


@dataclass(frozen=True)
class PursuerSpec:
    """One pursuer's launch state and its initial target estimate."""

    position: Tuple[float, float]
    speed: float
    heading_deg: float
    has_sensor: bool
    initial_estimate: Vec4


@dataclass(frozen=True)
class ScenarioConfig:
    """Validated, fully defaulted engagement description.

    Edges keep file-level ids (0 = target, 1..N = pursuers). The target
    velocity is canonical; a speed/heading pair in the file is converted
    at parse time.
    """

    name: str
    target_position: Tuple[float, float]
    target_velocity: Tuple[float, float]
    pursuers: Tuple[PursuerSpec, ...]
    sensing_edges: Tuple[Tuple[int, int], ...]
    actuation_edges: Tuple[Tuple[int, int], ...]
    K1: float
    K2: float
    M1: float
    M2: float
    T_o: float
    T_a: float
    c_factor: float
    a_max_g: float
    dt: float
    t_max: float
    stride: float
    capture_radius: float
    failure_events: Tuple[Tuple[int, float], ...] = ()


def _is_num(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _pair(v) -> Optional[Tuple[float, float]]:
    if isinstance(v, (list, tuple)) and len(v) == 2 and all(_is_num(c) for c in v):
        return (float(v[0]), float(v[1]))
    return None


def _get_num(block, key, issues, label, default=None, positive=False):
    if not isinstance(block, dict) or key not in block:
        return default
    v = block[key]
    if not _is_num(v):
        issues.append(f"{label} must be a finite number")
        return default
    if positive and v <= 0:
        issues.append(f"{label} must be positive")
        return default
    return float(v)


def _parse_target(doc, issues):
    block = doc.get("target")
    if not isinstance(block, dict):
        issues.append("target block is required")
        return None, None
    pos = _pair(block.get("position"))
    if pos is None:
        issues.append("target.position must be a pair of finite numbers")
    vel = None
    has_vel = "velocity" in block
    has_polar = "speed" in block or "heading_deg" in block
    if has_vel and has_polar:
        issues.append("target accepts either velocity or speed/heading_deg, not both")
    elif has_vel:
        vel = _pair(block.get("velocity"))
        if vel is None:
            issues.append("target.velocity must be a pair of finite numbers")
    elif has_polar:
        speed = _get_num(block, "speed", issues, "target.speed")
        heading = _get_num(block, "heading_deg", issues, "target.heading_deg")
        if speed is None or heading is None:
            issues.append("target speed/heading_deg form needs both keys")
        elif speed < 0:
            issues.append("target.speed must be non-negative")
        else:
            h = math.radians(heading)
            vel = (speed * math.cos(h), speed * math.sin(h))
    else:
        issues.append("target needs velocity or speed/heading_deg")
    return pos, vel


def _parse_pursuers(doc, issues, target_pos):
    raw = doc.get("pursuers")
    if not isinstance(raw, list) or not raw:
        issues.append("pursuers must be a non-empty list")
        return []
    specs = []
    for k, entry in enumerate(raw):
        tag = f"pursuer P{k + 1}"
        if not isinstance(entry, dict):
            issues.append(f"{tag} must be a mapping")
            continue
        pos = _pair(entry.get("position"))
        if pos is None:
            issues.append(f"{tag}: position must be a pair of finite numbers")
        speed = _get_num(entry, "speed", issues, f"{tag}: speed", positive=True)
        if speed is None and "speed" not in entry:
            issues.append(f"{tag}: speed is required")
        heading = _get_num(entry, "heading_deg", issues, f"{tag}: heading_deg")
        if heading is None and "heading_deg" not in entry:
            issues.append(f"{tag}: heading_deg is required")
        est_block = entry.get("initial_estimate")
        est = None
        if not isinstance(est_block, dict):
            issues.append(f"{tag}: initial_estimate block is required")
        else:
            epos = _pair(est_block.get("position"))
            evel = _pair(est_block.get("velocity"))
            if epos is None or evel is None:
                issues.append(f"{tag}: initial_estimate needs position and velocity pairs")
            else:
                est = (epos[0], epos[1], evel[0], evel[1])
        sensor = entry.get("sensor")
        if sensor is not None and not isinstance(sensor, bool):
            issues.append(f"{tag}: sensor must be a boolean")
            sensor = None
        if pos is not None and est is not None and pos == (est[0], est[1]):
            issues.append(f"{tag}: initial estimate coincides with the pursuer position")
        if pos is not None and target_pos is not None and pos == target_pos:
            issues.append(f"{tag}: starts at the target position")
        if pos is None or speed is None or heading is None or est is None:
            specs.append(None)
        else:
            specs.append((pos, speed, heading, sensor, est))
    return specs


def _parse_edges(doc, issues, n):
    block = doc.get("graphs")
    if not isinstance(block, dict):
        issues.append("graphs block with sensing and actuation edge lists is required")
        return [], []

    def edge_list(key, lo):
        raw = block.get(key)
        if not isinstance(raw, list):
            issues.append(f"graphs.{key} must be an edge list")
            return []
        out = []
        for e in raw:
            if (not isinstance(e, (list, tuple)) or len(e) != 2
                    or not all(isinstance(c, int) and not isinstance(c, bool) for c in e)):
                issues.append(f"graphs.{key}: edge {e!r} must be a pair of integer node ids")
                continue
            s, d = int(e[0]), int(e[1])
            if not (lo <= s <= n and lo <= d <= n):
                issues.append(f"graphs.{key}: edge ({s}, {d}) references an unknown node")
                continue
            out.append((s, d))
        return out

    sensing = edge_list("sensing", 0)
    actuation = edge_list("actuation", 1)
    for s, d in sensing:
        if d == 0:
            issues.append(f"graphs.sensing: edge ({s}, 0) points into the target")
    sensing = [(s, d) for s, d in sensing if d != 0]
    return sensing, actuation


def _parse_failures(doc, issues, n):
    raw = doc.get("failures")
    if raw is None:
        return []
    if not isinstance(raw, list):
        issues.append("failures must be a list of {pursuer, t} mappings")
        return []
    out = []
    seen = set()
    for entry in raw:
        if not isinstance(entry, dict) or "pursuer" not in entry or "t" not in entry:
            issues.append(f"failures: entry {entry!r} needs pursuer and t keys")
            continue
        pid = entry["pursuer"]
        t = entry["t"]
        if not (isinstance(pid, int) and not isinstance(pid, bool) and 1 <= pid <= n):
            issues.append(f"failures: pursuer id {pid!r} out of range 1..{n}")
            continue
        if not _is_num(t) or t < 0:
            issues.append(f"failures: time for P{pid} must be a non-negative number")
            continue
        if pid in seen:
            issues.append(f"failures: duplicate failure event for P{pid}")
            continue
        seen.add(pid)
        out.append((pid, float(t)))
    return out


def parse_scenario(text: str) -> ScenarioConfig:
    """Parse and validate a YAML scenario document.

    Raises ConfigError carrying every violation found; returns a frozen,
    fully defaulted ScenarioConfig otherwise.
    """
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise ConfigError([f"invalid YAML{where}: {getattr(exc, 'problem', exc)}"]) from exc
    if not isinstance(doc, dict):
        raise ConfigError(["scenario document must be a mapping"])

    issues: List[str] = []
    name = doc.get("name", "unnamed")
    if not isinstance(name, str) or not name:
        issues.append("name must be a non-empty string")
        name = "unnamed"

    target_pos, target_vel = _parse_target(doc, issues)
    raw_specs = _parse_pursuers(doc, issues, target_pos)
    n = len(doc.get("pursuers") or []) if isinstance(doc.get("pursuers"), list) else len(raw_specs)
    sensing, actuation = _parse_edges(doc, issues, n)
    failures = _parse_failures(doc, issues, n)

    times = doc.get("times") if isinstance(doc.get("times"), dict) else {}
    T_o = _get_num(times, "T_o", issues, "times.T_o")
    T_a = _get_num(times, "T_a", issues, "times.T_a")
    if T_o is None or T_a is None:
        issues.append("times block with T_o and T_a is required")
    elif not (T_a > T_o > 0):
        issues.append("prescribed times must satisfy T_a > T_o > 0")

    gblock = doc.get("guidance") if isinstance(doc.get("guidance"), dict) else {}
    c_factor = _get_num(gblock, "c_factor", issues, "guidance.c_factor", default=DEFAULT_C_FACTOR)
    a_max_g = _get_num(gblock, "a_max_g", issues, "guidance.a_max_g",
                       default=DEFAULT_A_MAX_G, positive=True)
    if c_factor is not None and c_factor <= 0.5:
        issues.append("guidance.c_factor must exceed 0.5 so the biased closing speed stays positive")

    sblock = doc.get("simulation") if isinstance(doc.get("simulation"), dict) else {}
    dt = _get_num(sblock, "dt", issues, "simulation.dt", default=DEFAULT_DT, positive=True)
    stride = _get_num(sblock, "stride", issues, "simulation.stride",
                      default=DEFAULT_STRIDE, positive=True)
    capture = _get_num(sblock, "capture_radius", issues, "simulation.capture_radius",
                       default=DEFAULT_CAPTURE_RADIUS, positive=True)
    t_max = _get_num(sblock, "t_max", issues, "simulation.t_max")
    if t_max is not None and t_max < 0:
        issues.append("simulation.t_max must be non-negative")

    # structural checks need a complete pursuer set
    spectra = None
    fiedler = None
    if not issues and raw_specs and all(s is not None for s in raw_specs):
        sense_topo = None
        act_topo = None
        try:
            sense_topo = _graph.build_topology(n + 1, sensing, has_leader=True)
        except TopologyError as exc:
            issues.append(f"graphs.sensing: {exc}")
        try:
            act_topo = _graph.build_topology(n, [(s - 1, d - 1) for s, d in actuation],
                                             has_leader=False)
        except TopologyError as exc:
            issues.append(f"graphs.actuation: {exc}")
        if sense_topo is not None:
            if not _graph.has_spanning_tree(sense_topo, 0):
                issues.append("sensing graph has no spanning tree rooted at the target")
            else:
                bundle = _graph.laplacian_bundle(sense_topo)
                try:
                    spectra = _graph.lemma3_spectra(bundle.L_PP)
                except TopologyError as exc:
                    issues.append(f"sensing graph spectra: {exc}")
        if act_topo is not None:
            if not _graph.is_strongly_connected(act_topo):
                issues.append("actuation graph not strongly connected")
            elif n >= 2:
                fiedler = _graph.mirror_fiedler(_graph.laplacian_bundle(act_topo).L)
                if fiedler <= 0:
                    issues.append("actuation graph mirror has no positive connectivity eigenvalue")
                    fiedler = None

    # sensor flags must agree with the sensing edges
    sensor_from_edges = [False] * n
    for s, d in sensing:
        if s == 0 and 1 <= d <= n:
            sensor_from_edges[d - 1] = True
    specs: List[PursuerSpec] = []
    for k, raw_spec in enumerate(raw_specs):
        if raw_spec is None:
            continue
        pos, speed, heading, sensor, est = raw_spec
        derived = sensor_from_edges[k] if k < n else False
        if sensor is not None and sensor != derived:
            issues.append(
                f"pursuer P{k + 1}: sensor flag {sensor} contradicts the sensing edges")
        specs.append(PursuerSpec(position=pos, speed=speed, heading_deg=heading,
                                 has_sensor=derived, initial_estimate=est))

    gains = doc.get("gains") if isinstance(doc.get("gains"), dict) else {}
    K1 = _get_num(gains, "K1", issues, "gains.K1", positive=True)
    K2 = _get_num(gains, "K2", issues, "gains.K2", positive=True)
    M1 = _get_num(gains, "M1", issues, "gains.M1", positive=True)
    M2 = _get_num(gains, "M2", issues, "gains.M2", positive=True)
    if M1 is None:
        M1 = DEFAULT_M1
    if spectra is not None:
        k1_min, k2_min = _graph.observer_gain_floors(spectra, A_TARGET)
        if K1 is None:
            K1 = GAIN_MARGIN * k1_min
        elif K1 <= k1_min:
            issues.append(f"gains.K1 = {K1:g} must exceed the observer floor {k1_min:.6g}")
        if K2 is None:
            K2 = GAIN_MARGIN * k2_min
        elif K2 < k2_min:
            issues.append(f"gains.K2 = {K2:g} is below the observer floor {k2_min:.6g}")
    if fiedler is not None:
        m2_min = _graph.controller_gain_floor(fiedler)
        if M2 is None:
            M2 = GAIN_MARGIN * m2_min
        elif M2 < m2_min:
            issues.append(f"gains.M2 = {M2:g} is below the consensus floor {m2_min:.6g}")
    elif n == 1 and not issues:
        # a lone pursuer exchanges nothing; any positive consensus gain is inert
        if M2 is None:
            M2 = 1.0

    if issues or K1 is None or K2 is None or M2 is None:
        if not issues:
            issues.append("gains could not be defaulted because the graphs are invalid")
        raise ConfigError(issues)

    cfg = ScenarioConfig(
        name=name,
        target_position=target_pos,
        target_velocity=target_vel,
        pursuers=tuple(specs),
        sensing_edges=tuple(sensing),
        actuation_edges=tuple(actuation),
        K1=K1, K2=K2, M1=M1, M2=M2,
        T_o=T_o, T_a=T_a,
        c_factor=c_factor, a_max_g=a_max_g,
        dt=dt, t_max=0.0, stride=stride, capture_radius=capture,
        failure_events=tuple(failures),
    )
    return replace(cfg, t_max=t_max if t_max is not None else default_t_max(cfg))


def emit_echo(config: ScenarioConfig) -> str:
    """Canonical YAML for a config; parse_scenario recovers it exactly."""
    doc = {
        "name": config.name,
        "target": {
            "position": list(config.target_position),
            "velocity": list(config.target_velocity),
        },
        "pursuers": [
            {
                "position": list(p.position),
                "speed": p.speed,
                "heading_deg": p.heading_deg,
                "sensor": p.has_sensor,
                "initial_estimate": {
                    "position": [p.initial_estimate[0], p.initial_estimate[1]],
                    "velocity": [p.initial_estimate[2], p.initial_estimate[3]],
                },
            }
            for p in config.pursuers
        ],
        "graphs": {
            "sensing": [list(e) for e in config.sensing_edges],
            "actuation": [list(e) for e in config.actuation_edges],
        },
        "gains": {"K1": config.K1, "K2": config.K2, "M1": config.M1, "M2": config.M2},
        "times": {"T_o": config.T_o, "T_a": config.T_a},
        "guidance": {"c_factor": config.c_factor, "a_max_g": config.a_max_g},
        "simulation": {
            "dt": config.dt,
            "t_max": config.t_max,
            "stride": config.stride,
            "capture_radius": config.capture_radius,
        },
    }
    if config.failure_events:
        doc["failures"] = [{"pursuer": pid, "t": t} for pid, t in config.failure_events]
    return yaml.safe_dump(doc, sort_keys=False, default_flow_style=None)


def emit_trace(trace: SimulationTrace, metrics: EngagementMetrics, out_dir) -> Tuple[Path, Path]:
    """Write <out_dir>/trace.csv and <out_dir>/metrics.json.

    The trace holds one target row and one row per pursuer at each
    sample; heading is emitted in degrees, everything else as stored.
    Float fields use repr so identical runs produce identical bytes.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    trace_path = out / "trace.csv"
    metrics_path = out / "metrics.json"

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["t", "agent", "x", "y", "gamma_deg", "V",
                     "a_cmd", "tgo_true", "tgo_est", "obs_err", "r"])
    n = trace.n_pursuers
    for s, t in enumerate(trace.t):
        writer.writerow([repr(t), "T", repr(trace.target_x[s]), repr(trace.target_y[s]),
                         "", "", "", "", "", "", ""])
        for i in range(n):
            writer.writerow([
                repr(t), f"P{i + 1}",
                repr(trace.x[i][s]), repr(trace.y[i][s]),
                repr(math.degrees(trace.gamma[i][s])), repr(trace.V[i][s]),
                repr(trace.a_cmd[i][s]), repr(trace.tgo_true[i][s]),
                repr(trace.tgo_est[i][s]), repr(trace.obs_err[i][s]),
                repr(trace.r[i][s]),
            ])
    trace_path.write_text(buf.getvalue(), encoding="utf-8")

    doc: Dict[str, object] = {}
    for i in sorted(metrics.intercept_times):
        doc[f"intercept_time_P{i + 1}"] = metrics.intercept_times[i]
    for i in sorted(metrics.miss_distances):
        doc[f"miss_distance_P{i + 1}"] = metrics.miss_distances[i]
    doc["spread"] = metrics.spread
    doc["consensus_time"] = metrics.consensus_time
    doc["observer_convergence_time"] = metrics.observer_convergence_time
    doc["timed_out"] = metrics.timed_out
    doc["missed"] = [f"P{i + 1}" for i in metrics.missed]
    doc["structural_warnings"] = list(metrics.structural_warnings)
    metrics_path.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    return trace_path, metrics_path
