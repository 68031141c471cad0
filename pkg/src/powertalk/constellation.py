"""Constellation design under the deviation budget and segment geometry.

Three families fill the budget hull in different directions: FixedVa varies
only the droop resistance, FixedRda varies only the reference voltage, and
Diagonal walks the ray through the pilot along which the deviation cost
grows slowest, so that all of its symbols collapse onto the pilot's output
at one common load (the zero-rate state).  Each symbol maps to a segment in
the detection space as the load sweeps its interval.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .circuit import VscParams, bus_voltage, thevenin
from .config import SystemConfig
from .signaling import (
    _gl_nodes,
    is_feasible,
    power_deviation,
    require_valid_config,
)

FIXED_VA = "FixedVa"
FIXED_RDA = "FixedRda"
DIAGONAL = "Diagonal"
CUSTOM = "Custom"
FAMILIES = (FIXED_VA, FIXED_RDA, DIAGONAL)

_ENDPOINT_TOL = 1e-6       # |delta - gamma| at the first and last symbol
_BUDGET_SLACK = 1e-9       # numerical slack on delta <= gamma
_INTERSECT_POINTS = 2048


class DesignError(ValueError):
    """Raised when a constellation cannot be built or validated."""


class InfeasibleDesignError(DesignError):
    """No budget roots inside the feasible region."""


class DegenerateDesignError(DesignError):
    """Symbols collide in output voltage at the reference load."""


@dataclass(frozen=True)
class Constellation:
    """Ordered symbols under one budget; index 0 has the highest v* at r_ref."""

    family: str
    symbols: tuple[VscParams, ...]
    pilot: VscParams
    gamma: float

    @property
    def order(self) -> int:
        return len(self.symbols)


@dataclass(frozen=True)
class Segment:
    """Detection-space segment endpoints of one symbol at r_min and r_max.

    index is the 1-based symbol position used by the CSV exports; each
    endpoint satisfies n = -r_da * k + v_a.
    """

    index: int
    k_rmin: float
    n_rmin: float
    k_rmax: float
    n_rmax: float
    symbol: VscParams


def reference_load(cfg: SystemConfig) -> float:
    """Load used to fix the symbol ordering: the interval midpoint."""
    return 0.5 * (cfg.load.r_min + cfg.load.r_max)


# ============================================================
# Construction
# ============================================================

def _bracket_root(delta_of, step0: float, cap: float, gamma: float):
    """March outward until delta crosses gamma; return (lo, hi) or None."""
    lo, hi = 0.0, None
    step = step0
    while lo + step < cap:
        t = lo + step
        if delta_of(t) >= gamma:
            hi = t
            break
        lo = t
        step *= 2.0
    if hi is None:
        if delta_of(cap) >= gamma:
            hi = cap
        else:
            return None
    return lo, hi


def _budget_root(delta_of, sign: float, cap: float, gamma: float) -> float:
    """Signed offset where delta(offset) = gamma along one direction."""
    bracket = _bracket_root(lambda t: delta_of(sign * t), 1e-4, cap, gamma)
    if bracket is None:
        raise InfeasibleDesignError(
            "deviation budget is never reached inside the parameter range"
        )
    root = brentq(lambda t: delta_of(sign * t) - gamma, *bracket, xtol=1e-13)
    return sign * root


def diagonal_direction(cfg: SystemConfig) -> float:
    """Slope dv_a/dr_da of the ray along which delta grows slowest.

    Small-budget limit of minimizing delta over v_a at fixed r_da:
    c = E[w(R) (v_a0 - v_eq)] / E[w(R) (r_eq + r_da0)] with weight
    w = r_eq^2 v0*^2 / (r^2 (r_eq + r_da0)^3).  Every symbol on this ray
    meets the pilot's output voltage at the same load.
    """
    if cfg.load.is_point:
        r = np.asarray([cfg.load.r_min])
        w_q = np.asarray([1.0])
    else:
        x, w_gl = _gl_nodes(512)
        lo, hi = cfg.load.r_min, cfg.load.r_max
        r = 0.5 * (hi - lo) * x + 0.5 * (hi + lo)
        w_q = 0.5 * w_gl
    rx, pilot = cfg.receiver, cfg.pilot
    v_eq = rx.v * r / (r + rx.r_d)
    r_eq = r * rx.r_d / (r + rx.r_d)
    v0 = np.asarray(bus_voltage(pilot, rx, r))
    w = r_eq**2 * v0**2 / (r**2 * (r_eq + pilot.r_d) ** 3)
    num = float(np.dot(w_q, w * (pilot.v - v_eq)))
    den = float(np.dot(w_q, w * (r_eq + pilot.r_d)))
    return num / den


def design(family: str, M: int, cfg: SystemConfig) -> Constellation:
    """Build an M-symbol constellation of the given family.

    The varied parameter spans the two roots of delta = gamma with uniform
    interior spacing; symbols come back ordered by decreasing bus voltage
    at the reference load.
    """
    if M < 2:
        raise DesignError(f"need M >= 2 symbols, got {M}")
    require_valid_config(cfg)
    pilot = cfg.pilot

    if family == FIXED_VA:
        def delta_of(t: float) -> float:
            return power_deviation(VscParams(pilot.v, pilot.r_d + t), cfg)

        lo = _budget_root(delta_of, -1.0, pilot.r_d * (1.0 - 1e-9), cfg.gamma)
        hi = _budget_root(delta_of, +1.0, 100.0 * pilot.r_d, cfg.gamma)
        symbols = [VscParams(pilot.v, pilot.r_d + t) for t in np.linspace(lo, hi, M)]
    elif family == FIXED_RDA:
        def delta_of(t: float) -> float:
            return power_deviation(VscParams(pilot.v + t, pilot.r_d), cfg)

        lo = _budget_root(delta_of, -1.0, pilot.v * (1.0 - 1e-9), cfg.gamma)
        hi = _budget_root(delta_of, +1.0, pilot.v, cfg.gamma)
        symbols = [VscParams(pilot.v + t, pilot.r_d) for t in np.linspace(lo, hi, M)]
    elif family == DIAGONAL:
        slope = diagonal_direction(cfg)

        def delta_of(t: float) -> float:
            return power_deviation(VscParams(pilot.v + slope * t, pilot.r_d + t), cfg)

        cap_neg = min(pilot.r_d, pilot.v / abs(slope) if slope > 0 else np.inf)
        lo = _budget_root(delta_of, -1.0, cap_neg * (1.0 - 1e-9), cfg.gamma)
        hi = _budget_root(delta_of, +1.0, 100.0 * pilot.r_d, cfg.gamma)
        symbols = [VscParams(pilot.v + slope * t, pilot.r_d + t)
                   for t in np.linspace(lo, hi, M)]
    else:
        raise DesignError(f"unknown design family {family!r}; use one of {FAMILIES}")

    c = Constellation(family=family, symbols=_ordered(symbols, cfg),
                      pilot=pilot, gamma=cfg.gamma)
    validate_constellation(c, cfg)
    return c


def _ordered(symbols, cfg: SystemConfig) -> tuple[VscParams, ...]:
    r_ref = reference_load(cfg)
    v = np.asarray([bus_voltage(s, cfg.receiver, r_ref) for s in symbols])
    order = np.argsort(-v, kind="stable")
    v_sorted = v[order]
    if np.any(v_sorted[:-1] == v_sorted[1:]):
        raise DegenerateDesignError(
            f"duplicate output voltage at reference load {r_ref} ohm"
        )
    return tuple(symbols[int(i)] for i in order)


def validate_constellation(c: Constellation, cfg: SystemConfig) -> None:
    """Check feasibility, budget, ordering; endpoint equality for designed families."""
    if c.order < 2:
        raise DesignError(f"need M >= 2 symbols, got {c.order}")
    deltas = []
    for sym in c.symbols:
        if not is_feasible(sym, cfg):
            raise DesignError(f"symbol {sym} violates the constraint set")
        d = power_deviation(sym, cfg)
        if d > c.gamma + max(_BUDGET_SLACK, _ENDPOINT_TOL if c.family in FAMILIES else 0):
            raise DesignError(f"symbol {sym} exceeds the budget: delta={d:.3e}")
        deltas.append(d)
    if c.family in FAMILIES:
        for end in (0, -1):
            if abs(deltas[end] - c.gamma) > _ENDPOINT_TOL:
                raise DesignError(
                    f"endpoint symbol delta {deltas[end]:.9e} not within "
                    f"{_ENDPOINT_TOL} of gamma {c.gamma}"
                )
    r_ref = reference_load(cfg)
    v = np.asarray([bus_voltage(s, cfg.receiver, r_ref) for s in c.symbols])
    if not np.all(v[:-1] > v[1:]):
        raise DegenerateDesignError(
            "symbols are not strictly ordered by output voltage at the reference load"
        )


# ============================================================
# Detection-space geometry
# ============================================================

def to_segments(c: Constellation, cfg: SystemConfig) -> list[Segment]:
    """Segment endpoints (k, n) of every symbol at r_min and r_max.

    k = (v* - v_eq)/r_eq is the transmitter output current and n = v* the
    bus voltage, so each endpoint obeys n = -r_da * k + v_a.
    """
    ends = []
    for r in (cfg.load.r_min, cfg.load.r_max):
        state = thevenin(cfg.receiver, r)
        pairs = []
        for sym in c.symbols:
            v = bus_voltage(sym, cfg.receiver, r)
            pairs.append(((v - state.v_eq) / state.r_eq, v))
        ends.append(pairs)
    return [
        Segment(index=i + 1,
                k_rmin=ends[0][i][0], n_rmin=ends[0][i][1],
                k_rmax=ends[1][i][0], n_rmax=ends[1][i][1],
                symbol=sym)
        for i, sym in enumerate(c.symbols)
    ]


def segments_intersect(c: Constellation, cfg: SystemConfig,
                       scan_points: int = _INTERSECT_POINTS) -> list[tuple[int, int, float]]:
    """Loads where two symbols become indistinguishable.

    For every symbol pair, scans v*_i(r) - v*_j(r) for sign changes on a
    dense grid and polishes each root; returns (i, j, r*) with 1-based
    indices, sorted by (i, j).
    """
    lo, hi = cfg.load.r_min, cfg.load.r_max
    if lo == hi:
        return []
    r = np.linspace(lo, hi, scan_points)
    v = np.vstack([np.asarray(bus_voltage(s, cfg.receiver, r)) for s in c.symbols])
    hits = []
    for i in range(c.order):
        for j in range(i + 1, c.order):
            d = v[i] - v[j]
            zeros = np.flatnonzero(d == 0.0)
            if zeros.size:
                hits.append((i + 1, j + 1, float(r[zeros[0]])))
                continue
            flips = np.flatnonzero(d[:-1] * d[1:] < 0.0)
            if flips.size:
                k = int(flips[0])
                si, sj = c.symbols[i], c.symbols[j]
                root = brentq(
                    lambda rr: float(bus_voltage(si, cfg.receiver, rr)
                                     - bus_voltage(sj, cfg.receiver, rr)),
                    r[k], r[k + 1], xtol=1e-13,
                )
                hits.append((i + 1, j + 1, float(root)))
    return hits
