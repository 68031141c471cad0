"""Line-oriented key=value scenario files for the command-line runner.

A scenario fixes the full system (converters, limits, load, noise,
budget) plus experiment knobs.  Unknown or duplicate keys are rejected
so a typo cannot silently fall back to a default.  Noise is given either
as sigma (std of a half-slot voltage estimate) or sigma_m (per-sample
std), never both.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .circuit import VscParams
from .config import (
    POINT,
    UNIFORM,
    ConstraintSet,
    LoadModel,
    SamplingConfig,
    SystemConfig,
)
from .constellation import FAMILIES
from .montecarlo import ADAPTIVE, MODE_DIRECT, MODES


class ScenarioError(ValueError):
    """Malformed or inconsistent scenario file."""


@dataclass(frozen=True)
class Scenario:
    """Parsed scenario: the system plus experiment parameters."""

    cfg: SystemConfig
    seed: int
    family: str
    M: int
    M_list: tuple[int, ...]
    sim_mode: str
    trials: int
    block_length: int
    r_bins: int
    estimated_csi: bool
    grid_resolution: int
    n_rays: int
    ser_grid: int
    policy_grid: int
    estimate_r: float | None
    estimate_offset: float
    estimate_reps: int
    estimate_n_list: tuple[int, ...]


def _parse_float(key: str, raw: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise ScenarioError(f"{key}: expected a number, got {raw!r}") from None


def _parse_int(key: str, raw: str) -> int:
    try:
        return int(raw)
    except ValueError:
        raise ScenarioError(f"{key}: expected an integer, got {raw!r}") from None


def _parse_int_list(key: str, raw: str) -> tuple[int, ...]:
    items = [s.strip() for s in raw.split(",") if s.strip()]
    if not items:
        raise ScenarioError(f"{key}: expected a comma-separated integer list")
    return tuple(_parse_int(key, s) for s in items)


def _parse_flag(key: str, raw: str) -> bool:
    if raw in ("0", "1"):
        return raw == "1"
    raise ScenarioError(f"{key}: expected 0 or 1, got {raw!r}")


def _parse_choice(key: str, raw: str, choices) -> str:
    if raw not in choices:
        raise ScenarioError(f"{key}: expected one of {', '.join(choices)}, got {raw!r}")
    return raw


_REQUIRED = ("v_b", "r_db", "v_a0", "r_da0", "v_min", "v_max", "i_a_max",
             "r_min", "r_max", "load", "gamma", "n_samples", "seed")
_OPTIONAL = ("sigma", "sigma_m", "family", "M", "M_list", "sim_mode", "trials",
             "block_length", "r_bins", "estimated_csi", "grid_resolution",
             "n_rays", "ser_grid", "policy_grid", "estimate_r",
             "estimate_offset", "estimate_reps", "estimate_n_list")
_KNOWN = frozenset(_REQUIRED) | frozenset(_OPTIONAL)


def parse_scenario(text: str) -> Scenario:
    """Parse scenario text; raises ScenarioError on any defect."""
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ScenarioError(f"line {lineno}: expected key=value, got {stripped!r}")
        key, _, value = stripped.partition("=")
        key, value = key.strip(), value.strip()
        if key not in _KNOWN:
            raise ScenarioError(f"line {lineno}: unknown key {key!r}")
        if key in raw:
            raise ScenarioError(f"line {lineno}: duplicate key {key!r}")
        if not value:
            raise ScenarioError(f"line {lineno}: empty value for {key!r}")
        raw[key] = value

    missing = [k for k in _REQUIRED if k not in raw]
    if missing:
        raise ScenarioError(f"missing required keys: {', '.join(missing)}")
    if ("sigma" in raw) == ("sigma_m" in raw):
        raise ScenarioError("exactly one of sigma / sigma_m must be given")

    n_samples = _parse_int("n_samples", raw["n_samples"])
    try:
        if "sigma" in raw:
            sampling = SamplingConfig.from_line_noise(
                _parse_float("sigma", raw["sigma"]), n_samples)
        else:
            sampling = SamplingConfig(_parse_float("sigma_m", raw["sigma_m"]),
                                      n_samples)
        load_kind = _parse_choice("load", raw["load"], (UNIFORM, POINT))
        load = LoadModel(_parse_float("r_min", raw["r_min"]),
                         _parse_float("r_max", raw["r_max"]), load_kind)
        cfg = SystemConfig(
            receiver=VscParams(_parse_float("v_b", raw["v_b"]),
                               _parse_float("r_db", raw["r_db"])),
            pilot=VscParams(_parse_float("v_a0", raw["v_a0"]),
                            _parse_float("r_da0", raw["r_da0"])),
            load=load,
            constraints=ConstraintSet(_parse_float("v_min", raw["v_min"]),
                                      _parse_float("v_max", raw["v_max"]),
                                      _parse_float("i_a_max", raw["i_a_max"])),
            sampling=sampling,
            gamma=_parse_float("gamma", raw["gamma"]),
        )
    except ScenarioError:
        raise
    except ValueError as exc:
        raise ScenarioError(str(exc)) from None

    family = raw.get("family", "Diagonal")
    if family != ADAPTIVE:
        family = _parse_choice("family", family, FAMILIES + (ADAPTIVE,))
    m = _parse_int("M", raw.get("M", "4"))
    if m < 2:
        raise ScenarioError(f"M: need at least 2 symbols, got {m}")
    trials = _parse_int("trials", raw.get("trials", "200000"))
    if trials < 1:
        raise ScenarioError(f"trials: must be >= 1, got {trials}")

    return Scenario(
        cfg=cfg,
        seed=_parse_int("seed", raw["seed"]),
        family=family,
        M=m,
        M_list=_parse_int_list("M_list", raw.get("M_list", "2,4,8,16")),
        sim_mode=_parse_choice("sim_mode", raw.get("sim_mode", MODE_DIRECT), MODES),
        trials=trials,
        block_length=_parse_int("block_length", raw.get("block_length", "100")),
        r_bins=_parse_int("r_bins", raw.get("r_bins", "20")),
        estimated_csi=_parse_flag("estimated_csi", raw.get("estimated_csi", "0")),
        grid_resolution=_parse_int("grid_resolution", raw.get("grid_resolution", "101")),
        n_rays=_parse_int("n_rays", raw.get("n_rays", "360")),
        ser_grid=_parse_int("ser_grid", raw.get("ser_grid", "201")),
        policy_grid=_parse_int("policy_grid", raw.get("policy_grid", "2049")),
        estimate_r=(_parse_float("estimate_r", raw["estimate_r"])
                    if "estimate_r" in raw else None),
        estimate_offset=_parse_float("estimate_offset", raw.get("estimate_offset", "-2.0")),
        estimate_reps=_parse_int("estimate_reps", raw.get("estimate_reps", "200")),
        estimate_n_list=_parse_int_list("estimate_n_list",
                                        raw.get("estimate_n_list", "100,1000,10000,100000")),
    )


def load_scenario(path) -> Scenario:
    """Read and parse a scenario file."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario file {path}: {exc}") from None
    return parse_scenario(text)
