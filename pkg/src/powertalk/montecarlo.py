"""End-to-end stochastic simulation of the signaling chain.

The load holds still for a block of symbol slots, then redraws; every
block owns a counter-based random substream keyed by the master seed, so
the realized sample path is identical no matter how blocks are scheduled
across workers.  Within a slot the receiver sees either raw voltage
samples or directly the two half-slot means, runs the line-estimator and
interval-detector algebra, and errors are tallied overall and per load
bin.
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .adaptive import AdaptivePolicy, build_policy, policy_average_ser
from .circuit import VscParams, bus_voltage_thevenin, thevenin
from .config import SystemConfig
from .constellation import FAMILIES, Constellation, design
from .detection import average_ser, decide_sorted, estimate_channel_state

MODE_RAW = "raw-samples"
MODE_DIRECT = "direct-line"
MODES = (MODE_RAW, MODE_DIRECT)
ADAPTIVE = "adaptive"
WORKERS_ENV = "POWERTALK_WORKERS"

# Training probe under estimated channel state: the pilot plus a copy
# shifted down in reference voltage, whose bus outputs stay distinct at
# every load.
_TRAINING_DROP = 2.0  # [V]


def worker_count() -> int:
    """Process count requested through the environment, at least 1."""
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ValueError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None


@dataclass(frozen=True)
class SimulationSpec:
    """One simulation campaign over a constellation or adaptive policy."""

    cfg: SystemConfig
    scheme: Constellation | AdaptivePolicy
    trials: int
    block_length: int = 100
    seed: int = 0
    mode: str = MODE_DIRECT
    estimated_csi: bool = False
    r_bins: int = 20

    def __post_init__(self) -> None:
        if self.trials < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials}")
        if self.block_length < 1:
            raise ValueError(f"block_length must be >= 1, got {self.block_length}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.r_bins < 1:
            raise ValueError(f"r_bins must be >= 1, got {self.r_bins}")


@dataclass(frozen=True)
class SimulationResult:
    """Aggregate and per-load-bin error counts of one campaign."""

    errors: int
    trials: int
    ser: float
    stderr: float
    bin_edges: np.ndarray
    bin_errors: np.ndarray
    bin_trials: np.ndarray
    elapsed_s: float

    def conditional_ser(self) -> np.ndarray:
        """Empirical per-bin error rate; NaN where a bin drew no trials."""
        return np.where(self.bin_trials > 0,
                        self.bin_errors / np.maximum(self.bin_trials, 1),
                        np.nan)


def _bin_edges(spec: SimulationSpec) -> np.ndarray:
    load = spec.cfg.load
    if load.is_point:
        return np.asarray([load.r_min, load.r_min])
    return np.linspace(load.r_min, load.r_max, spec.r_bins + 1)


def _block_rng(seed: int, block_index: int) -> np.random.Generator:
    return np.random.Generator(
        np.random.Philox(key=seed, counter=block_index << 128)
    )


def _select_constellation(scheme, h_csi: float) -> Constellation:
    """Scheme in charge for a block; policies switch on the observed
    Thevenin resistance, which equals the load threshold map exactly
    under perfect channel knowledge."""
    if isinstance(scheme, AdaptivePolicy):
        if not scheme.thresholds_h:
            return scheme.constituents[scheme.selections[0]]
        idx = int(np.searchsorted(np.asarray(scheme.thresholds_h), h_csi,
                                  side="right"))
        return scheme.constituents[scheme.selections[idx]]
    return scheme


def _simulate_block(spec: SimulationSpec, block_index: int, n_slots: int):
    """Draw one load realization and run n_slots slots; returns
    (error count, bin r)."""
    rng = _block_rng(spec.seed, block_index)
    cfg = spec.cfg
    load = cfg.load
    r = load.r_min if load.is_point else float(rng.uniform(load.r_min, load.r_max))
    state_true = thevenin(cfg.receiver, r)
    sigma_m = cfg.sampling.sigma_m
    n = cfg.sampling.n_samples

    if spec.estimated_csi:
        probes = (cfg.pilot, VscParams(cfg.pilot.v - _TRAINING_DROP, cfg.pilot.r_d))
        noise = rng.normal(0.0, sigma_m / math.sqrt(n), size=len(probes))
        training = [(p, bus_voltage_thevenin(p, state_true) + float(e))
                    for p, e in zip(probes, noise)]
        state_csi = estimate_channel_state(training)
    else:
        state_csi = state_true

    c = _select_constellation(spec.scheme, state_csi.r_eq)
    sent = rng.integers(0, c.order, size=n_slots)
    v_true = np.asarray([bus_voltage_thevenin(s, state_true) for s in c.symbols])

    if spec.mode == MODE_RAW:
        samples = v_true[sent][:, None] + rng.normal(0.0, sigma_m, size=(n_slots, n))
        half = n // 2
        v_first = samples[:, :half].mean(axis=1)
        v_second = samples[:, half:].mean(axis=1)
    else:
        eps = rng.normal(0.0, cfg.sampling.line_noise_std, size=(n_slots, 2))
        v_first = v_true[sent] + eps[:, 0]
        v_second = v_true[sent] + eps[:, 1]

    # Receiver algebra: k = (v_second - v_eq)/r_eq and
    # t = n + r_eq k + v_eq collapse to t = v_first + v_second, so the
    # channel state enters only through the decision thresholds.
    t = v_first + v_second
    v_csi = np.asarray([bus_voltage_thevenin(s, state_csi) for s in c.symbols])
    order = np.argsort(-v_csi, kind="stable")
    decided = order[decide_sorted(t, v_csi[order])]
    return int(np.count_nonzero(decided != sent)), r


def _simulate_range(spec: SimulationSpec, start: int, stop: int):
    """Run blocks [start, stop); aggregation is pure integer sums, so any
    split over workers reproduces the same totals."""
    edges = _bin_edges(spec)
    n_bins = edges.size - 1
    bin_errors = np.zeros(n_bins, dtype=np.int64)
    bin_trials = np.zeros(n_bins, dtype=np.int64)
    errors = 0
    for b in range(start, stop):
        n_slots = min(spec.block_length, spec.trials - b * spec.block_length)
        block_errors, r = _simulate_block(spec, b, n_slots)
        if n_bins == 1:
            idx = 0
        else:
            idx = min(int(np.searchsorted(edges, r, side="right")) - 1, n_bins - 1)
        errors += block_errors
        bin_errors[idx] += block_errors
        bin_trials[idx] += n_slots
    return errors, bin_errors, bin_trials


def run(spec: SimulationSpec) -> SimulationResult:
    """Execute a campaign; identical (seed, spec) gives identical counts
    for any worker count."""
    t0 = time.perf_counter()
    n_blocks = math.ceil(spec.trials / spec.block_length)
    workers = min(worker_count(), n_blocks)
    if workers > 1:
        bounds = np.linspace(0, n_blocks, workers + 1).astype(int)
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_simulate_range,
                                  [spec] * workers, bounds[:-1], bounds[1:]))
    else:
        parts = [_simulate_range(spec, 0, n_blocks)]
    errors = sum(p[0] for p in parts)
    bin_errors = np.sum([p[1] for p in parts], axis=0)
    bin_trials = np.sum([p[2] for p in parts], axis=0)
    ser = errors / spec.trials
    stderr = math.sqrt(ser * (1.0 - ser) / spec.trials)
    return SimulationResult(
        errors=errors,
        trials=spec.trials,
        ser=ser,
        stderr=stderr,
        bin_edges=_bin_edges(spec),
        bin_errors=bin_errors,
        bin_trials=bin_trials,
        elapsed_s=time.perf_counter() - t0,
    )


@dataclass(frozen=True)
class SweepRow:
    """Analytic vs empirical error probability at one modulation order."""

    M: int
    pe_analytic: float
    ser_mc: float
    stderr: float


def sweep_order(family: str, M_list, cfg: SystemConfig, trials: int = 200_000,
                block_length: int = 100, seed: int = 0,
                mode: str = MODE_DIRECT) -> list[SweepRow]:
    """Analytic and Monte Carlo error probability per modulation order.

    family is a design family name or "adaptive" for the three-family
    switching policy.  Each order gets its own derived seed so rows are
    independent yet reproducible.
    """
    rows = []
    for m in M_list:
        if family == ADAPTIVE:
            scheme = build_policy([design(f, m, cfg) for f in FAMILIES], cfg)
            pe = policy_average_ser(scheme, cfg)
        else:
            scheme = design(family, m, cfg)
            pe = average_ser(scheme, cfg)
        result = run(SimulationSpec(cfg=cfg, scheme=scheme, trials=trials,
                                    block_length=block_length, seed=seed + m,
                                    mode=mode))
        rows.append(SweepRow(M=m, pe_analytic=pe, ser_mc=result.ser,
                             stderr=result.stderr))
    return rows
