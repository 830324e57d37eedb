"""Conditional distributions of max-infinitely-divisible fields on a site grid."""

from maxcond.errors import (
    AcceptanceFloorError,
    AccuracyError,
    CapacityError,
    ConfigError,
    InconsistentObservation,
    InvariantViolation,
    MaxCondError,
    ModelError,
    SimulationBudgetError,
    TieDetected,
)
from maxcond.grid import ObservationSet, Site, SiteVector, make_grid
from maxcond.models import (
    LogGaussianModel,
    MaxLinearModel,
    MovingMaxModel,
    SpectralModel,
    gaussian_kernel,
    indicator_kernel,
    make_log_gaussian_model,
    make_max_linear_model,
    make_moving_max_model,
    power_variogram,
)
from maxcond.partitions import (
    Partition,
    enumerate_partitions,
    partition_from_assignment,
    scenario_from_realization,
)

__version__ = "0.1.0"

__all__ = [
    "AcceptanceFloorError",
    "AccuracyError",
    "CapacityError",
    "ConfigError",
    "InconsistentObservation",
    "InvariantViolation",
    "LogGaussianModel",
    "MaxCondError",
    "MaxLinearModel",
    "ModelError",
    "MovingMaxModel",
    "ObservationSet",
    "Partition",
    "SimulationBudgetError",
    "Site",
    "SiteVector",
    "SpectralModel",
    "TieDetected",
    "enumerate_partitions",
    "gaussian_kernel",
    "indicator_kernel",
    "make_grid",
    "make_log_gaussian_model",
    "make_max_linear_model",
    "make_moving_max_model",
    "partition_from_assignment",
    "power_variogram",
    "scenario_from_realization",
]
