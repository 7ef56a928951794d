"""Stationary general equilibrium of venture-capital effort, entry and financing choice."""

from .distribution import GridSpec, TypeGrid, build_grid, integrate
from .equilibrium import (
    EquilibriumState,
    FixedSupply,
    FreeEntry,
    SolverControls,
    aggregate_report,
    solve_steady_state,
)
from .model import FirmType, ModelParams, Mode, Prices, discount_bundle, financing_choice

__all__ = [
    "EquilibriumState",
    "FirmType",
    "FixedSupply",
    "FreeEntry",
    "GridSpec",
    "Mode",
    "ModelParams",
    "Prices",
    "SolverControls",
    "TypeGrid",
    "aggregate_report",
    "build_grid",
    "discount_bundle",
    "financing_choice",
    "integrate",
    "solve_steady_state",
]
