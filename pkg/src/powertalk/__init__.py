"""Signaling between droop-controlled converters over a shared DC bus.

A transmitter perturbs its droop setpoint (reference voltage, virtual
resistance) inside a power-deviation budget; the receiver reads the bus
voltage and decodes.  The package covers the steady-state circuit model,
the feasible signaling space, constellation design, ML detection and its
closed-form error rates, adaptive constellation switching, Monte Carlo
validation, and a CLI that exports CSV artifacts with figures.
"""

from .adaptive import (
    AdaptivePolicy,
    build_policy,
    error_curves,
    policy_average_ser,
    policy_conditional_ser,
)
from .circuit import (
    TheveninState,
    VscParams,
    bus_voltage,
    bus_voltage_open_load,
    bus_voltage_thevenin,
    output_current,
    output_power,
    thevenin,
    thevenin_open_load,
)
from .config import (
    ConstraintSet,
    LoadModel,
    SamplingConfig,
    SystemConfig,
    default_config,
)
from .constellation import (
    CUSTOM,
    DIAGONAL,
    FAMILIES,
    FIXED_RDA,
    FIXED_VA,
    Constellation,
    DegenerateDesignError,
    DesignError,
    InfeasibleDesignError,
    Segment,
    design,
    diagonal_direction,
    reference_load,
    segments_intersect,
    to_segments,
    validate_constellation,
)
from .detection import (
    DegenerateTrainingError,
    DetectedLine,
    LineDistribution,
    NonPhysicalEstimateError,
    average_ser,
    binary_error_prob,
    conditional_ser,
    decide_sorted,
    estimate_channel_state,
    estimate_line,
    line_distribution,
    mld_decide,
    q_function,
)
from .montecarlo import (
    ADAPTIVE,
    MODE_DIRECT,
    MODE_RAW,
    SimulationResult,
    SimulationSpec,
    SweepRow,
    run,
    sweep_order,
)
from .scenario import Scenario, ScenarioError, load_scenario, parse_scenario
from .signaling import (
    ANC,
    ATTC,
    GammaHull,
    QuadratureError,
    SignalingSpaceGrid,
    classify_region,
    gamma_hull,
    is_feasible,
    load_expectation,
    power_deviation,
    power_deviation_map,
    render_grid,
    require_valid_config,
)

__version__ = "0.1.0"
