"""Multi-phase level-set simulation of grain-boundary and triple-junction migration.

Three formulations are available (Merriman correction, uniform Zhao
penalization and the per-grain heterogeneous source), together with
closed-form triple-junction oracles and measurement tools.
"""
from __future__ import annotations

__version__ = "0.1.0"

from .analytic import (GarckeSolution, WettingLimitError, YoungTriple, deviation_from_line, garcke_angle,
                       garcke_profile, garcke_velocity, gamma_ratio_from_lambda_ratio,
                       lambda_ratio_from_gamma_ratio, young_angles)
from .evolution import Formulation, Microstructure, SolverConfig, SolverError, advance
from .grid import BC, Grid2, ScalarField
from .levelset import Phase

__all__ = [
    "BC", "Formulation", "GarckeSolution", "Grid2", "Microstructure", "Phase", "ScalarField",
    "SolverConfig", "SolverError", "WettingLimitError", "YoungTriple", "advance", "deviation_from_line",
    "garcke_angle", "garcke_profile", "garcke_velocity", "gamma_ratio_from_lambda_ratio",
    "lambda_ratio_from_gamma_ratio", "young_angles", "__version__",
]
