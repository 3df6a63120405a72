"""Secrecy energy-efficiency optimization for downlink NOMA assisted by
ambient backscatter devices, with Monte Carlo experiment tooling and dataset
export for learned surrogates."""

from .core import (ConstraintReport, InfeasibleError, NormalizedGains,
                   ObjectiveValue, SolveResult, check_constraints,
                   effective_gains, objectives, p_min, rates_and_secrecy,
                   sinr, theta_tails, validate_rho)
from .closedform import (BoundaryPoints, ConvergenceError, DinkelbachResult,
                         NonConcaveError, PowerResult, TwoBdGeometry,
                         TwoBdSolution, boundary_points, dinkelbach_ratio,
                         dinkelbach_ratio_gains, optimal_power,
                         optimal_rho_single, optimal_rho_two_bd)
from .scenario import (NetworkConfig, Scenario, UserOrdering,
                       generate_scenario, order_users)
from .search import GridConfig, PsoConfig, grid_search, pso
from .solve import solve_scenario
from .units import dbm_to_watts, parse_power, watts_to_dbm

__version__ = "0.1.0"

__all__ = [
    "BoundaryPoints", "ConstraintReport", "ConvergenceError",
    "DinkelbachResult", "GridConfig", "InfeasibleError", "NetworkConfig",
    "NonConcaveError", "NormalizedGains", "ObjectiveValue", "PowerResult",
    "PsoConfig", "Scenario", "SolveResult", "TwoBdGeometry", "TwoBdSolution",
    "UserOrdering", "boundary_points", "check_constraints", "dbm_to_watts",
    "dinkelbach_ratio", "dinkelbach_ratio_gains", "effective_gains",
    "generate_scenario", "grid_search", "objectives", "optimal_power",
    "optimal_rho_single", "optimal_rho_two_bd", "order_users", "p_min",
    "parse_power", "pso", "rates_and_secrecy", "sinr", "solve_scenario",
    "theta_tails", "validate_rho", "watts_to_dbm",
]
