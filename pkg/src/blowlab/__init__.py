"""Numerical lab for blow-up of ``u_t - Laplace u = u^p L(u)``."""

__version__ = "0.1.0"

from .errors import (AccuracyError, BlowlabError, ConfigError, ContractError, DomainError,  # noqa: E402
                     EstimationError, LookupFailure, NumericalError, ResolutionError, SaturationError)
from .nonlinearity import Nonlinearity, catalog, catalog_names, eval_f, get_entry  # noqa: E402
from .ode_profile import OdeProfile, build_profile, invert_F, psi  # noqa: E402
from .heat_solver import (SpatialGrid, StepPolicy, Trajectory, graded_interval, radial_grid,  # noqa: E402
                          run_to_blowup, uniform_interval)

__all__ = [
    "AccuracyError", "BlowlabError", "ConfigError", "ContractError", "DomainError", "EstimationError",
    "LookupFailure", "NumericalError", "ResolutionError", "SaturationError", "Nonlinearity", "catalog",
    "catalog_names", "eval_f", "get_entry", "OdeProfile", "build_profile", "invert_F", "psi", "SpatialGrid",
    "StepPolicy", "Trajectory", "graded_interval", "radial_grid", "run_to_blowup", "uniform_interval",
]
