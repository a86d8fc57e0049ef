"""Cooperative simultaneous-interception engagement simulator.

Pursuers without target sensors estimate a constant-velocity target
through a prescribed-time distributed observer over a directed sensing
graph, and synchronize their biased proportional-navigation times-to-go
through a prescribed-time consensus law over a directed actuation
graph, so the whole salvo arrives together.
"""

from .errors import (
    ConfigError,
    DegenerateGeometryError,
    SalvoError,
    SimulationDiverged,
    SingularTgoError,
    TopologyError,
)
from .graph import (
    LaplacianBundle,
    SpectralData,
    Topology,
    build_topology,
    controller_gain_floor,
    has_spanning_tree,
    is_strongly_connected,
    laplacian_bundle,
    lemma3_spectra,
    mirror_fiedler,
    observer_gain_floors,
)
from .dynamics import (
    A_TARGET,
    Engagement,
    EstimatedEngagement,
    PursuerTruth,
    TargetState,
    estimated_engagement,
    pursuer_derivatives,
    relative_kinematics,
    target_derivative,
)
from .observer import (
    ObserverParams,
    ScalingParams,
    gain_ratio,
    observer_derivative,
    relative_estimation_error,
    scaling,
    scaling_rate,
)
from .guidance import (
    STANDARD_GRAVITY,
    GuidanceParams,
    TgoTerms,
    consensus_input,
    guidance_command,
    saturate,
    tgo_rate_terms,
    time_to_go,
)
from .simulator import (
    EngagementMetrics,
    InterceptionRecord,
    SimState,
    SimulationTrace,
    Tolerances,
    detect_interception,
    initial_state,
    inject_failure,
    metrics,
    run,
    step,
)
from .scenario_io import (
    PursuerSpec,
    ScenarioConfig,
    emit_echo,
    emit_trace,
    parse_scenario,
)
from .cli import cli_main

__version__ = "0.1.0"

__all__ = [
    "A_TARGET",
    "ConfigError",
    "DegenerateGeometryError",
    "Engagement",
    "EngagementMetrics",
    "EstimatedEngagement",
    "GuidanceParams",
    "InterceptionRecord",
    "LaplacianBundle",
    "ObserverParams",
    "PursuerSpec",
    "PursuerTruth",
    "SalvoError",
    "ScalingParams",
    "ScenarioConfig",
    "SimState",
    "SimulationDiverged",
    "SimulationTrace",
    "SingularTgoError",
    "SpectralData",
    "STANDARD_GRAVITY",
    "TargetState",
    "TgoTerms",
    "Tolerances",
    "Topology",
    "TopologyError",
    "build_topology",
    "cli_main",
    "consensus_input",
    "controller_gain_floor",
    "detect_interception",
    "emit_echo",
    "emit_trace",
    "estimated_engagement",
    "gain_ratio",
    "guidance_command",
    "has_spanning_tree",
    "initial_state",
    "inject_failure",
    "is_strongly_connected",
    "laplacian_bundle",
    "lemma3_spectra",
    "metrics",
    "mirror_fiedler",
    "observer_derivative",
    "observer_gain_floors",
    "parse_scenario",
    "pursuer_derivatives",
    "relative_estimation_error",
    "relative_kinematics",
    "run",
    "saturate",
    "scaling",
    "scaling_rate",
    "step",
    "target_derivative",
    "tgo_rate_terms",
    "time_to_go",
]
