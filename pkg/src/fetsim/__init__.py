"""fetsim: simulation and verification workbench for the FET
(Follow the Emerging Trend) self-stabilizing bit-dissemination protocol.
"""

__version__ = "0.1.0"

from .domains import DomainLabel, GridPoint, YellowLabel, audit_partition, classify
from .duel import (
    DuelProbs,
    advantage,
    binomial_pmf,
    exact_duel,
    hoeffding_duel_bound,
    underdog_lower_bound,
)
from .dynamics import (
    AnalysisConstants,
    FlipProbs,
    expected_next_fraction,
    fixed_point_f,
    flip_probs,
    speed,
)
from .errors import DomainError, FetsimError, PlantingError, StructuralError, UsageError
from .markov import Kernel, PairState, absorption_times, build_kernel, simulate_exact_check
from .protocol import (
    AgentState,
    Population,
    SimConfig,
    Trajectory,
    agent_round,
    init_adversarial,
    run_trial,
    step_agent_level,
    step_aggregate,
)

__all__ = [
    "AgentState",
    "AnalysisConstants",
    "DomainError",
    "DomainLabel",
    "DuelProbs",
    "FetsimError",
    "FlipProbs",
    "GridPoint",
    "Kernel",
    "PairState",
    "PlantingError",
    "Population",
    "SimConfig",
    "StructuralError",
    "Trajectory",
    "UsageError",
    "YellowLabel",
    "absorption_times",
    "advantage",
    "agent_round",
    "audit_partition",
    "binomial_pmf",
    "build_kernel",
    "classify",
    "exact_duel",
    "expected_next_fraction",
    "fixed_point_f",
    "flip_probs",
    "hoeffding_duel_bound",
    "init_adversarial",
    "run_trial",
    "simulate_exact_check",
    "speed",
    "step_agent_level",
    "step_aggregate",
    "underdog_lower_bound",
]
