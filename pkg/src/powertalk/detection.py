"""Receiver chain: line estimation, ML detection, and error probabilities.

The receiver sees the bus voltage only through N noisy samples per slot.
Averaging the two halves of the slot gives two independent estimates of
the bus voltage; one becomes the line intercept, the other (mapped through
the channel state) the line slope.  Detection then reduces to an interval
test on a single statistic, and the symbol error rate has a closed form
as a sum of Gaussian tail terms over adjacent-symbol gaps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import erfc

from .circuit import TheveninState, bus_voltage, bus_voltage_thevenin
from .config import LoadModel, SystemConfig
from .constellation import Constellation, segments_intersect
from .signaling import load_expectation

_SQRT2 = float(np.sqrt(2.0))


class DegenerateTrainingError(ValueError):
    """Training pairs do not determine the channel state."""


class NonPhysicalEstimateError(ValueError):
    """Training solves to a channel state with nonpositive parameters."""


@dataclass(frozen=True)
class DetectedLine:
    """Line parameters recovered from one slot of samples."""

    k_hat: float  # slope estimate, the transmitter output current [A]
    n_hat: float  # intercept estimate, the bus voltage [V]

    def __post_init__(self) -> None:
        if not (np.isfinite(self.k_hat) and np.isfinite(self.n_hat)):
            raise ValueError("line estimates must be finite")


@dataclass(frozen=True)
class LineDistribution:
    """Gaussian law of (k_hat, n_hat) for one symbol at one channel state.

    Components are independent because they come from disjoint halves of
    the slot; sigma is the std of a half-slot sample mean.
    """

    mean_k: float
    mean_n: float
    var_k: float
    var_n: float

    def __post_init__(self) -> None:
        if self.var_k < 0 or self.var_n < 0:
            raise ValueError("variances must be nonnegative")


def q_function(x):
    """Standard normal tail probability, Q(x) = 0.5 erfc(x / sqrt 2)."""
    return 0.5 * erfc(np.asarray(x, dtype=float) / _SQRT2)


def estimate_line(samples, state: TheveninState) -> DetectedLine:
    """ML line estimate from one slot of bus-voltage samples.

    The first half-slot mean is the intercept n_hat; the second half-slot
    mean, pulled through the state, is the slope k_hat = (v_II - v_eq)/r_eq.
    """
    y = np.asarray(samples, dtype=float)
    if y.ndim != 1 or y.size == 0 or y.size % 2:
        raise ValueError(f"need a nonempty even-length sample vector, got shape {y.shape}")
    half = y.size // 2
    v_first = float(np.mean(y[:half]))
    v_second = float(np.mean(y[half:]))
    return DetectedLine(k_hat=(v_second - state.v_eq) / state.r_eq, n_hat=v_first)


def line_distribution(sym, state: TheveninState, sigma: float) -> LineDistribution:
    """Distribution of the line estimate for a symbol at a channel state.

    sigma is the half-slot mean noise std, sigma_m * sqrt(2/N).
    """
    v_star = bus_voltage_thevenin(sym, state)
    return LineDistribution(
        mean_k=(v_star - state.v_eq) / state.r_eq,
        mean_n=v_star,
        var_k=sigma**2 / state.r_eq**2,
        var_n=sigma**2,
    )


# ============================================================
# Detection
# ============================================================

def _sorted_outputs(c: Constellation, state: TheveninState):
    """Symbol bus voltages at the state, sorted descending, with positions."""
    v = np.asarray([bus_voltage_thevenin(s, state) for s in c.symbols])
    order = np.argsort(-v, kind="stable")
    return v[order], order


def decide_sorted(t, v_sorted):
    """Interval test of the statistic t against descending symbol outputs.

    Thresholds sit at v_i + v_j of adjacent outputs; a tie goes to the
    smaller sorted index (the larger output).  Vectorized over t; returns
    indices into v_sorted.
    """
    thresholds = v_sorted[:-1] + v_sorted[1:]
    ascending = thresholds[::-1]
    n_le = np.searchsorted(ascending, t, side="right")
    return (v_sorted.size - 1) - n_le


def mld_decide(line: DetectedLine, c: Constellation, state: TheveninState,
               sigma: float | None = None) -> int:
    """ML symbol decision; returns the 0-based index into c.symbols.

    Equal per-symbol covariances make the likelihood argmax collapse to a
    nearest-output test on t = n_hat + r_eq k_hat + v_eq, so sigma does
    not move the boundaries; the argument is kept for signature symmetry
    with the likelihood form.
    """
    del sigma
    v_sorted, order = _sorted_outputs(c, state)
    t = line.n_hat + state.r_eq * line.k_hat + state.v_eq
    return int(order[int(decide_sorted(t, v_sorted))])


# ============================================================
# Error probabilities
# ============================================================

def binary_error_prob(v1, v2, sigma: float):
    """Error probability of two symbols with bus outputs v1 > v2.

    Q((v1 - v2)/(sigma sqrt 2)); both conditional errors coincide, so this
    is also their equally-likely average.  sigma = 0 returns the limit:
    0 when the outputs differ, 0.5 when they coincide.
    """
    v1 = np.asarray(v1, dtype=float)
    v2 = np.asarray(v2, dtype=float)
    if sigma < 0:
        raise ValueError(f"sigma must be nonnegative, got {sigma}")
    if sigma == 0:
        out = np.where(v1 != v2, 0.0, 0.5)
        return float(out) if out.ndim == 0 else out
    out = q_function((v1 - v2) / (sigma * _SQRT2))
    return float(out) if out.ndim == 0 else out


def conditional_ser(c: Constellation, cfg: SystemConfig, r,
                    sigma: float | None = None):
    """Symbol error probability at load r, averaged over equally likely symbols.

    P(err | r) = (2/M) sum over adjacent sorted pairs of
    Q(gap / (sigma sqrt 2)).  Vectorized over r.
    """
    if sigma is None:
        sigma = cfg.sampling.line_noise_std
    r_arr = np.atleast_1d(np.asarray(r, dtype=float))
    v = np.vstack([np.asarray(bus_voltage(s, cfg.receiver, r_arr))
                   for s in c.symbols])
    v_desc = np.sort(v, axis=0)[::-1]
    gaps = v_desc[:-1] - v_desc[1:]
    m = c.order
    if sigma == 0:
        terms = np.where(gaps > 0, 0.0, 0.5)
    else:
        terms = q_function(gaps / (sigma * _SQRT2))
    p = (2.0 / m) * np.sum(terms, axis=0)
    return float(p[0]) if np.ndim(r) == 0 else p


def average_ser_interval(c: Constellation, cfg: SystemConfig, r_lo: float,
                         r_hi: float, sigma: float | None = None) -> float:
    """Mean conditional error over a uniform load on [r_lo, r_hi].

    The sorted-gap integrand kinks where two symbols cross, so the
    interval is split at every crossing load and each smooth piece is
    integrated separately.
    """
    if r_hi <= r_lo:
        return float(conditional_ser(c, cfg, r_lo, sigma))

    def fn(r):
        return conditional_ser(c, cfg, r, sigma)

    cuts = sorted({root for _, _, root in segments_intersect(c, cfg)
                   if r_lo < root < r_hi})
    bounds = (r_lo, *cuts, r_hi)
    span = r_hi - r_lo
    return sum((hi - lo) / span * load_expectation(fn, LoadModel.uniform(lo, hi))
               for lo, hi in zip(bounds[:-1], bounds[1:]))


def average_ser(c: Constellation, cfg: SystemConfig,
                sigma: float | None = None) -> float:
    """Error probability averaged over the load distribution by quadrature."""
    load = cfg.load
    if load.is_point:
        return float(conditional_ser(c, cfg, load.r_min, sigma))
    return average_ser_interval(c, cfg, load.r_min, load.r_max, sigma)


# ============================================================
# Channel-state estimation
# ============================================================

def estimate_channel_state(training) -> TheveninState:
    """Least-squares channel state from (symbol, measured bus voltage) pairs.

    Each pair constrains the unknowns u = 1/r_eq, w = v_eq/r_eq through
    w - v_meas u = (v_meas - v_a)/r_da; two distinct measurements fix the
    state, more are averaged by least squares.
    """
    pairs = list(training)
    if len(pairs) < 2:
        raise DegenerateTrainingError(f"need at least 2 training pairs, got {len(pairs)}")
    v_meas = np.asarray([float(v) for _, v in pairs])
    a = np.column_stack([-v_meas, np.ones_like(v_meas)])
    b = np.asarray([(float(v) - sym.v) / sym.r_d for sym, v in pairs])
    solution, _, rank, _ = np.linalg.lstsq(a, b, rcond=None)
    if rank < 2:
        raise DegenerateTrainingError(
            "training measurements are identical; the state is unobservable"
        )
    u, w = float(solution[0]), float(solution[1])
    if u <= 0 or w <= 0:
        raise NonPhysicalEstimateError(
            f"training solves to nonpositive channel parameters (u={u:.3e}, w={w:.3e})"
        )
    return TheveninState(v_eq=w / u, r_eq=1.0 / u)
