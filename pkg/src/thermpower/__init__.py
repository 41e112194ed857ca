"""Per-component electrical power from thermal images of a circuit board."""

from .core import (
    Component,
    ComponentLayout,
    MeasurementInstance,
    ModelParams,
    ParseError,
    PowerMap,
    TemperatureMap,
    ThermError,
    ValidationError,
    Variant,
    component_mask,
    load_layout,
    load_params,
    load_power_map,
    load_temperature_map,
    save_layout,
    save_params,
    save_power_map,
    save_temperature_map,
    trained_parameter_count,
)
from .fit import CrossValResult, FitProblem, FitResult, cross_validate, fit_parameters, predict
from .metrics import (
    ErrorSummary,
    NoSamplesError,
    aggregate,
    aggregate_all,
    error_rel,
    error_std,
    min_power_sweep,
    spread,
)
from .powerflow import BACKEND, estimate_pixel_powers, prepare_map
from .preprocess import (
    EmissivityError,
    InpaintError,
    compensate_emissivity,
    estimate_ambient,
    inpaint_low_emissivity,
)
from .simulator import Scenario, SolverError, generate_dataset, solve_steady_state, synthesize_observation

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
