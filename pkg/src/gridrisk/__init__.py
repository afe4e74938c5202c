"""gridrisk: dynamic probabilistic occupancy mapping and cooperative
collision-risk evaluation, with a synthetic intersection simulator."""

__version__ = "0.1.0"

from .beta import BetaState, SensorModel, conjugate_update, discount, occupancy_mean, occupancy_variance, pseudo_counts, sensor_weights
from .errors import ContractViolation
from .filtering import CellStatistics, FilterConfig, OccupancyFilter
from .grid import CellIndex, GridMap, GridSpec
from .rays import cast_ray
from .risk import EgoState, LossConfig, RiskProfile, cell_loss, ego_occupancy, instantaneous_risk
from .runner import RunOutput, compare_scenario, run_scenario
from .scenario import Scenario, SensorFrame, bundled_intersection, interpolate, simulate_frame
from .sensing import BeamReturn, MeasurementGrid, Pose, merge, sample_beams

__all__ = [
    "__version__",
    "BetaState",
    "SensorModel",
    "conjugate_update",
    "discount",
    "occupancy_mean",
    "occupancy_variance",
    "pseudo_counts",
    "sensor_weights",
    "ContractViolation",
    "CellStatistics",
    "FilterConfig",
    "OccupancyFilter",
    "CellIndex",
    "GridMap",
    "GridSpec",
    "cast_ray",
    "EgoState",
    "LossConfig",
    "RiskProfile",
    "cell_loss",
    "ego_occupancy",
    "instantaneous_risk",
    "RunOutput",
    "compare_scenario",
    "run_scenario",
    "Scenario",
    "SensorFrame",
    "bundled_intersection",
    "interpolate",
    "simulate_frame",
    "BeamReturn",
    "MeasurementGrid",
    "Pose",
    "merge",
    "sample_beams",
]
