"""Command-line front end.

Subcommands: validate (parse and echo the canonical form), gains
(spectral floors and effective gains), tgo (initial time-to-go table),
run (integrate one scenario), batch (run every scenario in a
directory). Scenario arguments accept a file path or the name of a
bundled scenario (scenario1, scenario2_failure, scenario3).

Exit codes: 0 success (a timed-out run is still a reported result),
1 invalid input or configuration, 2 runtime simulation failure.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from dataclasses import replace
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

from . import graph as _graph
from .dynamics import A_TARGET, estimated_engagement, relative_kinematics
from .errors import ConfigError, SalvoError, SingularTgoError
from .guidance import time_to_go
from .scenario_io import ScenarioConfig, emit_echo, emit_trace, parse_scenario
from .simulator import initial_state, run as run_sim

_BUNDLED = ("scenario1", "scenario2_failure", "scenario3")


def _load_scenario_text(token: str) -> str:
    p = Path(token)
    if p.is_file():
        return p.read_text(encoding="utf-8")
    name = token if token.endswith((".yaml", ".yml")) else token + ".yaml"
    res = resources.files("salvosim").joinpath("scenarios").joinpath(name)
    if res.is_file():
        return res.read_text(encoding="utf-8")
    raise FileNotFoundError(
        f"scenario '{token}' is neither a file nor a bundled scenario "
        f"({', '.join(_BUNDLED)})"
    )


def _load_config(token: str) -> ScenarioConfig:
    return parse_scenario(_load_scenario_text(token))


def _print_issues(exc: ConfigError, stream) -> None:
    print("invalid scenario:", file=stream)
    for issue in exc.issues:
        print(f"  - {issue}", file=stream)


def _cmd_validate(args) -> int:
    try:
        cfg = _load_config(args.scenario)
    except ConfigError as exc:
        _print_issues(exc, sys.stderr)
        return 1
    sys.stdout.write(emit_echo(cfg))
    return 0


def _cmd_gains(args) -> int:
    try:
        cfg = _load_config(args.scenario)
    except ConfigError as exc:
        _print_issues(exc, sys.stderr)
        return 1
    n = len(cfg.pursuers)
    sense_topo = _graph.build_topology(n + 1, cfg.sensing_edges, has_leader=True)
    spectra = _graph.lemma3_spectra(_graph.laplacian_bundle(sense_topo).L_PP)
    k1_min, k2_min = _graph.observer_gain_floors(spectra, A_TARGET)
    print(f"sensing graph: lambda1_Q = {spectra.lambda1_Q:.6f}, "
          f"lambda_max_R = {spectra.lambda_max_R:.6f}")
    print(f"observer floors: K1_min = {k1_min:.6f}, K2_min = {k2_min:.6f}")
    if n >= 2:
        act_topo = _graph.build_topology(
            n, [(s - 1, d - 1) for s, d in cfg.actuation_edges], has_leader=False)
        lam = _graph.mirror_fiedler(_graph.laplacian_bundle(act_topo).L)
        print(f"actuation mirror connectivity: {lam:.6f}")
        print(f"consensus floor: M2_min = {_graph.controller_gain_floor(lam):.6f}")
    else:
        print("actuation graph is a single node; consensus floor does not apply")
    print(f"effective gains: K1 = {cfg.K1:.6f}, K2 = {cfg.K2:.6f}, "
          f"M1 = {cfg.M1:.6f}, M2 = {cfg.M2:.6f}")
    return 0


def _cmd_tgo(args) -> int:
    try:
        cfg = _load_config(args.scenario)
    except ConfigError as exc:
        _print_issues(exc, sys.stderr)
        return 1
    state = initial_state(cfg)
    vt_true = math.hypot(cfg.target_velocity[0], cfg.target_velocity[1])
    for i, p in enumerate(state.pursuers):
        eng = relative_kinematics(p, state.target)
        try:
            true_tgo = f"{time_to_go(eng.r, eng.V_r, eng.V_theta, cfg.c_factor * (p.V + vt_true)):.6f}"
        except SingularTgoError:
            true_tgo = "singular"
        est = estimated_engagement(state.estimates[i], p)
        try:
            est_tgo = f"{time_to_go(est.r_hat, est.Vr_hat, est.Vtheta_hat, cfg.c_factor * (p.V + est.VT_hat)):.6f}"
        except SingularTgoError:
            est_tgo = "singular"
        print(f"P{i + 1}: tgo_true = {true_tgo}, tgo_est = {est_tgo}")
    return 0


def _apply_overrides(cfg: ScenarioConfig, args) -> ScenarioConfig:
    updates = {}
    if getattr(args, "dt", None) is not None:
        if args.dt <= 0:
            raise ConfigError(["--dt must be positive"])
        updates["dt"] = args.dt
    if getattr(args, "capture_radius", None) is not None:
        if args.capture_radius <= 0:
            raise ConfigError(["--capture-radius must be positive"])
        updates["capture_radius"] = args.capture_radius
    return replace(cfg, **updates) if updates else cfg


def _report_run(metrics) -> None:
    for i in sorted(metrics.intercept_times):
        print(f"P{i + 1} intercepted at {metrics.intercept_times[i]:.4f} s "
              f"(miss {metrics.miss_distances[i]:.3f} m)")
    if metrics.spread is not None and len(metrics.intercept_times) >= 2:
        print(f"salvo spread {metrics.spread:.4f} s")
    if metrics.consensus_time is not None:
        print(f"time-to-go consensus at {metrics.consensus_time:.3f} s")
    if metrics.observer_convergence_time is not None:
        print(f"observer converged at {metrics.observer_convergence_time:.3f} s")
    if metrics.timed_out:
        still = ", ".join(f"P{i + 1}" for i in metrics.missed)
        print(f"timed out with {still or 'nobody'} still flying")
    for w in metrics.structural_warnings:
        print(f"warning: {w}")


def _cmd_run(args) -> int:
    try:
        cfg = _apply_overrides(_load_config(args.scenario), args)
    except ConfigError as exc:
        _print_issues(exc, sys.stderr)
        return 1
    try:
        trace, metrics = run_sim(cfg)
    except SalvoError as exc:
        print(f"simulation failed: {exc}", file=sys.stderr)
        return 2
    trace_path, metrics_path = emit_trace(trace, metrics, args.out)
    print(f"wrote {trace_path} and {metrics_path}")
    _report_run(metrics)
    return 0


def _cmd_batch(args) -> int:
    root = Path(args.directory)
    if not root.is_dir():
        print(f"not a directory: {root}", file=sys.stderr)
        return 1
    files = sorted(set(root.glob("*.yaml")) | set(root.glob("*.yml")))
    if not files:
        print(f"no scenario files in {root}", file=sys.stderr)
        return 1
    out_root = Path(args.out)
    worst = 0
    for f in files:
        stem = f.stem
        try:
            cfg = _apply_overrides(parse_scenario(f.read_text(encoding="utf-8")), args)
        except ConfigError as exc:
            print(f"{stem}: invalid ({'; '.join(exc.issues)})")
            worst = max(worst, 1)
            continue
        try:
            trace, metrics = run_sim(cfg)
        except SalvoError as exc:
            print(f"{stem}: failed ({exc})")
            worst = max(worst, 2)
            continue
        emit_trace(trace, metrics, out_root / stem)
        hits = len(metrics.intercept_times)
        note = "timed out" if metrics.timed_out else f"{hits} interception(s)"
        if metrics.spread is not None and hits >= 2:
            note += f", spread {metrics.spread:.4f} s"
        print(f"{stem}: ok ({note})")
    return worst


def cli_main(argv: Sequence[str]) -> int:
    """Parse arguments and dispatch; returns the process exit code."""
    parser = argparse.ArgumentParser(
        prog="salvosim",
        description="Cooperative simultaneous-interception engagement simulator.",
    )
    parser.add_argument("-v", "--verbose", action="count", default=0,
                        help="-v for progress, -vv for integrator detail")
    sub = parser.add_subparsers(dest="command", required=True)

    p_val = sub.add_parser("validate", help="validate a scenario and print its canonical form")
    p_val.add_argument("scenario")
    p_val.set_defaults(func=_cmd_validate)

    p_gains = sub.add_parser("gains", help="print spectral floors and effective gains")
    p_gains.add_argument("scenario")
    p_gains.set_defaults(func=_cmd_gains)

    p_tgo = sub.add_parser("tgo", help="print each pursuer's initial time-to-go")
    p_tgo.add_argument("scenario")
    p_tgo.set_defaults(func=_cmd_tgo)

    p_run = sub.add_parser("run", help="integrate a scenario and write trace/metrics")
    p_run.add_argument("scenario")
    p_run.add_argument("--out", required=True, help="output directory")
    p_run.add_argument("--dt", type=float, help="integration step override [s]")
    p_run.add_argument("--capture-radius", type=float, help="capture radius override [m]")
    p_run.set_defaults(func=_cmd_run)

    p_batch = sub.add_parser("batch", help="run every scenario file in a directory")
    p_batch.add_argument("directory")
    p_batch.add_argument("--out", required=True, help="output root; one subdirectory per scenario")
    p_batch.add_argument("--dt", type=float, help="integration step override [s]")
    p_batch.add_argument("--capture-radius", type=float, help="capture radius override [m]")
    p_batch.set_defaults(func=_cmd_batch)

    args = parser.parse_args(list(argv))
    level = logging.WARNING
    if args.verbose == 1:
        level = logging.INFO
    elif args.verbose >= 2:
        level = logging.DEBUG
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")

    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except SalvoError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main(argv: Optional[Sequence[str]] = None) -> int:
    return cli_main(sys.argv[1:] if argv is None else argv)


if __name__ == "__main__":
    sys.exit(main())
