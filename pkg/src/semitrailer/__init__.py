"""Tractor-semitrailer lateral/roll dynamics with grey-box parameter identification."""
from .dynamics import (
    InputTrajectory, SimulationResult, assemble, consistent_state, output, simulate,
    state_derivative, step_rk4,
)
from .errors import DatasetError, DomainError, IntegrationError, InvalidParameterError, SingularArticulationError
from .params import (
    IDENTIFIABLE, OUTPUT_NAMES, STATE_NAMES, InputSample, OutputVector, StateVector, TireParams,
    VehicleParameters, default_params, load_params, save_params,
)

__version__ = "0.1.0"

__all__ = [
    "InputTrajectory", "SimulationResult", "assemble", "consistent_state", "output", "simulate",
    "state_derivative", "step_rk4",
    "DatasetError", "DomainError", "IntegrationError", "InvalidParameterError", "SingularArticulationError",
    "IDENTIFIABLE", "OUTPUT_NAMES", "STATE_NAMES", "InputSample", "OutputVector", "StateVector", "TireParams",
    "VehicleParameters", "default_params", "load_params", "save_params",
]
