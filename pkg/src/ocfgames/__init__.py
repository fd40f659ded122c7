"""Overlapping coalition formation (OCF) games with discrete resources."""
from .baselines import PartitionOutcome, solve_local, solve_nonoverlapping
from .core import (
    Arbitration,
    Coalition,
    Deviation,
    Division,
    GameSpec,
    InvariantViolation,
    Mode,
    Outcome,
    apply_deviation,
    arbitration_payoff,
    coalition_value,
    divide_payoff,
    empty_outcome,
    is_profitable,
    make_outcome,
    player_payoff,
    social_welfare,
)
from .cover import brute_force_cover, optimal_structure, superadditive_cover
from .estimators import LocalBaseline, NonOverlappingBaseline, OCFSolver
from .solver import (
    ConvergenceReport,
    SolverConfig,
    Transfer,
    certify_o_stable,
    enumerate_deviations_kcoalition,
    enumerate_transfers_ktask,
    find_profitable_deviation,
    solve_kcoalition,
    solve_ktask,
)

__all__ = [
    "Arbitration",
    "Coalition",
    "ConvergenceReport",
    "Deviation",
    "Division",
    "GameSpec",
    "InvariantViolation",
    "LocalBaseline",
    "Mode",
    "NonOverlappingBaseline",
    "OCFSolver",
    "Outcome",
    "PartitionOutcome",
    "SolverConfig",
    "Transfer",
    "apply_deviation",
    "arbitration_payoff",
    "brute_force_cover",
    "certify_o_stable",
    "coalition_value",
    "divide_payoff",
    "empty_outcome",
    "enumerate_deviations_kcoalition",
    "enumerate_transfers_ktask",
    "find_profitable_deviation",
    "is_profitable",
    "make_outcome",
    "optimal_structure",
    "player_payoff",
    "social_welfare",
    "solve_kcoalition",
    "solve_ktask",
    "solve_local",
    "solve_nonoverlapping",
    "superadditive_cover",
]

__version__ = "0.1.0"
