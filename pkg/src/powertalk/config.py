"""Scenario configuration: load model, operating constraints, sampling.

The defaults build a workable reference scenario: both converters at 400 V
with 2 ohm droop, load anywhere in [5, 100] ohm, and noise/budget values
sigma = 0.1 V, gamma = 0.004.  Every number is overridable through
SystemConfig or a scenario file; nothing downstream treats the defaults as
ground truth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .circuit import VscParams

UNIFORM = "uniform"
POINT = "point"

# Reference scenario values.
DEFAULT_V_REF = 400.0      # reference voltage, both converters [V]
DEFAULT_R_DROOP = 2.0      # virtual resistance, both converters [ohm]
DEFAULT_R_MIN = 5.0        # heaviest load [ohm]
DEFAULT_R_MAX = 100.0      # lightest load [ohm]
DEFAULT_V_MIN = 325.0      # lower bus-voltage limit [V]
DEFAULT_V_MAX = 399.0      # upper bus-voltage limit [V]
DEFAULT_I_A_MAX = 40.0     # transmitter current limit [A]
DEFAULT_SIGMA = 0.1        # std of each half-slot voltage estimate [V]
DEFAULT_N_SAMPLES = 100    # bus-voltage samples per symbol slot
DEFAULT_GAMMA = 0.004      # relative power-deviation budget


@dataclass(frozen=True)
class LoadModel:
    """Random load resistance: uniform on [r_min, r_max] or a point mass."""

    r_min: float        # [ohm]
    r_max: float        # [ohm]
    distribution: str = UNIFORM

    def __post_init__(self) -> None:
        if not 0 < self.r_min <= self.r_max:
            raise ValueError(f"need 0 < r_min <= r_max, got [{self.r_min}, {self.r_max}]")
        if self.distribution not in (UNIFORM, POINT):
            raise ValueError(f"unknown load distribution {self.distribution!r}")
        if self.distribution == POINT and self.r_min != self.r_max:
            raise ValueError("point-mass load needs r_min == r_max")

    @classmethod
    def uniform(cls, r_min: float, r_max: float) -> "LoadModel":
        return cls(r_min, r_max, UNIFORM)

    @classmethod
    def point(cls, r: float) -> "LoadModel":
        return cls(r, r, POINT)

    @property
    def is_point(self) -> bool:
        return self.distribution == POINT or self.r_min == self.r_max


@dataclass(frozen=True)
class ConstraintSet:
    """Operating limits that define the admissible signaling region."""

    v_min: float    # [V]
    v_max: float    # [V]
    i_a_max: float  # [A]

    def __post_init__(self) -> None:
        if not self.v_min < self.v_max:
            raise ValueError(f"need v_min < v_max, got {self.v_min} >= {self.v_max}")
        if not self.i_a_max > 0:
            raise ValueError(f"i_a_max must be positive, got {self.i_a_max}")


@dataclass(frozen=True)
class SamplingConfig:
    """Per-slot bus-voltage sampling and measurement noise.

    A slot of n_samples readings is split into two halves whose means give
    two independent voltage estimates, each with variance
    sigma^2 = 2 sigma_m^2 / n_samples.
    """

    sigma_m: float               # per-sample noise std [V]
    n_samples: int = DEFAULT_N_SAMPLES
    f_s: float | None = None     # sampling rate [Hz], informational
    t_slot: float | None = None  # slot duration [s], informational

    def __post_init__(self) -> None:
        if self.sigma_m < 0:
            raise ValueError(f"sigma_m must be >= 0, got {self.sigma_m}")
        if self.n_samples < 2 or self.n_samples % 2:
            raise ValueError(f"n_samples must be even and >= 2, got {self.n_samples}")
        if self.f_s is not None and self.t_slot is not None:
            if not math.isclose(self.f_s * self.t_slot, self.n_samples, rel_tol=1e-9):
                raise ValueError("f_s * t_slot must equal n_samples when both are given")

    @property
    def line_noise_std(self) -> float:
        """Std sigma of each half-slot mean voltage estimate."""
        return self.sigma_m * math.sqrt(2.0 / self.n_samples)

    @classmethod
    def from_line_noise(cls, sigma: float, n_samples: int = DEFAULT_N_SAMPLES,
                        **kwargs) -> "SamplingConfig":
        """Build from the half-slot estimate std instead of sigma_m."""
        return cls(sigma * math.sqrt(n_samples / 2.0), n_samples, **kwargs)


@dataclass(frozen=True)
class SystemConfig:
    """Full scenario: receiver, pilot, load, constraints, sampling, budget."""

    receiver: VscParams
    pilot: VscParams
    load: LoadModel
    constraints: ConstraintSet
    sampling: SamplingConfig
    gamma: float

    def __post_init__(self) -> None:
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")


def default_config(**overrides) -> SystemConfig:
    """The reference scenario; keyword overrides replace whole fields."""
    cfg = SystemConfig(
        receiver=VscParams(DEFAULT_V_REF, DEFAULT_R_DROOP),
        pilot=VscParams(DEFAULT_V_REF, DEFAULT_R_DROOP),
        load=LoadModel.uniform(DEFAULT_R_MIN, DEFAULT_R_MAX),
        constraints=ConstraintSet(DEFAULT_V_MIN, DEFAULT_V_MAX, DEFAULT_I_A_MAX),
        sampling=SamplingConfig.from_line_noise(DEFAULT_SIGMA, DEFAULT_N_SAMPLES),
        gamma=DEFAULT_GAMMA,
    )
    return replace(cfg, **overrides) if overrides else cfg
