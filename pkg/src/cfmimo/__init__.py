"""Uplink cell-free massive MIMO: rate bounds, power control and AP scheduling."""

from .bounds import Allocation, RateReport, evaluate
from .config import ConfigError, SolverSettings, SystemConfig
from .joint import alternate, fixed_count_baseline
from .pipeline import Campaign, run_campaign, solve_method
from .power import solve_power
from .sched import mm_solve, round_connections
from .topology import NetworkDrop, gen_drop

__version__ = "0.1.0"

__all__ = [
    "Allocation", "Campaign", "ConfigError", "NetworkDrop", "RateReport", "SolverSettings",
    "SystemConfig", "alternate", "evaluate", "fixed_count_baseline", "gen_drop", "mm_solve",
    "round_connections", "run_campaign", "solve_method", "solve_power",
]
