"""Signaling space construction and the power-deviation budget.

A transmit symbol is any droop setpoint that keeps the bus voltage and the
transmitter current inside their limits for every admissible load.  Symbols
are further charged a deviation cost delta: the rms deviation of delivered
load power from the pilot's, relative to the pilot's mean power.  The locus
delta = gamma (the budget hull) bounds usable constellations; symbols are
also classified by whether the channel can make them indistinguishable from
the pilot at some load (AttC) or not (ANC).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq

from .circuit import VscParams, bus_voltage, output_current, output_power
from .config import LoadModel, SystemConfig

ATTC = "AttC"  # channel can fully attenuate the symbol at some load
ANC = "ANC"    # behaves as a state-dependent additive-noise channel

_FEASIBILITY_POINTS = 258   # interval endpoints plus a 256-point grid
_CLASSIFY_POINTS = 1024
_EDGE_REL_TOL = 1e-9        # crossing this close to r_min/r_max counts as boundary


class QuadratureError(RuntimeError):
    """Raised when the load expectation fails to converge."""


# ============================================================
# Expectations over the load distribution
# ============================================================

_GL_ORDERS = (32, 64, 128, 256, 512, 1024, 2048)
_TRAPEZOID_NODES = 4096


@lru_cache(maxsize=None)
def _gl_nodes(order: int):
    return np.polynomial.legendre.leggauss(order)


def load_expectation(fn, load: LoadModel, rel_tol: float = 1e-12,
                     abs_tol: float = 0.0) -> float:
    """E[fn(R)] over the load distribution by deterministic quadrature.

    fn must accept a numpy array of loads and return values elementwise.
    Gauss-Legendre order escalates until two successive orders agree to
    rel_tol or abs_tol; a 4096-node trapezoid is the fallback before
    giving up.  abs_tol matters when the integrand is a near-cancelling
    difference whose float noise keeps relative agreement out of reach.
    """
    if load.is_point:
        return float(np.asarray(fn(np.asarray([load.r_min])))[0])
    lo, hi = load.r_min, load.r_max
    mid, half = 0.5 * (hi + lo), 0.5 * (hi - lo)
    prev = None
    for order in _GL_ORDERS:
        x, w = _gl_nodes(order)
        # mean over U[lo, hi]: the interval length cancels, leaving weights/2
        val = 0.5 * float(np.dot(w, np.asarray(fn(half * x + mid))))
        if prev is not None and abs(val - prev) <= max(
                rel_tol * max(abs(val), abs(prev)), abs_tol):
            return val
        prev = val
    r = np.linspace(lo, hi, _TRAPEZOID_NODES)
    trap = float(np.trapezoid(np.asarray(fn(r)), r)) / (hi - lo)
    if abs(trap - prev) <= max(1e-9 * max(abs(trap), abs(prev), 1e-300), abs_tol):
        return trap
    raise QuadratureError(
        f"load expectation did not converge: Gauss-Legendre orders {_GL_ORDERS} "
        f"ended at {prev!r}, trapezoid({_TRAPEZOID_NODES}) gave {trap!r}"
    )


# ============================================================
# Feasibility and deviation cost
# ============================================================

def _check_grid(load: LoadModel) -> np.ndarray:
    if load.is_point:
        return np.asarray([load.r_min])
    return np.linspace(load.r_min, load.r_max, _FEASIBILITY_POINTS)


def is_feasible(sym: VscParams, cfg: SystemConfig) -> bool:
    """True iff voltage and current limits hold across the load interval."""
    r = _check_grid(cfg.load)
    v = np.asarray(bus_voltage(sym, cfg.receiver, r))
    i = np.asarray(output_current(sym, v))
    c = cfg.constraints
    return bool(
        np.all(v >= c.v_min) and np.all(v <= c.v_max)
        and np.all(i >= 0.0) and np.all(i <= c.i_a_max)
    )


def require_valid_config(cfg: SystemConfig) -> None:
    """Enforce the scenario invariant that the pilot is always feasible."""
    if not is_feasible(cfg.pilot, cfg):
        raise ValueError(
            f"pilot {cfg.pilot} violates the constraint set over "
            f"[{cfg.load.r_min}, {cfg.load.r_max}] ohm"
        )


@lru_cache(maxsize=256)
def _mean_pilot_power(cfg: SystemConfig) -> float:
    return load_expectation(lambda r: output_power(cfg.pilot, cfg.receiver, r), cfg.load)


def power_deviation(sym: VscParams, cfg: SystemConfig) -> float:
    """Relative rms deviation of load power from the pilot's.

    delta = sqrt(E[(P(sym, R) - P(pilot, R))^2]) / E[P(pilot, R)]
    """
    mean_p0 = _mean_pilot_power(cfg)

    def sq_diff(r):
        d = output_power(sym, cfg.receiver, r) - output_power(cfg.pilot, cfg.receiver, r)
        return d * d

    # The squared power difference cancels catastrophically for symbols
    # near the pilot, capping relative quadrature agreement; the absolute
    # floor keeps delta accurate to ~1e-9 of the pilot power scale.
    mean_sq = load_expectation(sq_diff, cfg.load, rel_tol=1e-11,
                               abs_tol=(1e-9 * mean_p0) ** 2)
    return float(np.sqrt(mean_sq) / mean_p0)


def power_deviation_map(v_a: np.ndarray, r_da: np.ndarray, cfg: SystemConfig) -> np.ndarray:
    """power_deviation evaluated over the outer grid v_a x r_da, vectorized."""
    if cfg.load.is_point:
        r = np.asarray([cfg.load.r_min])
        w = np.asarray([1.0])
    else:
        x, w_gl = _gl_nodes(512)
        lo, hi = cfg.load.r_min, cfg.load.r_max
        r = 0.5 * (hi - lo) * x + 0.5 * (hi + lo)
        w = 0.5 * w_gl
    rx = cfg.receiver
    v_eq = rx.v * r / (r + rx.r_d)
    r_eq = r * rx.r_d / (r + rx.r_d)
    va = np.asarray(v_a, dtype=float)[:, None, None]
    rd = np.asarray(r_da, dtype=float)[None, :, None]
    v = (va / rd + v_eq / r_eq) / (1.0 / rd + 1.0 / r_eq)
    p = v**2 / r
    p0 = np.asarray(bus_voltage(cfg.pilot, rx, r)) ** 2 / r
    mean_sq = np.tensordot((p - p0) ** 2, w, axes=([2], [0]))
    return np.sqrt(mean_sq) / _mean_pilot_power(cfg)


# ============================================================
# Budget hull
# ============================================================

@dataclass(frozen=True)
class GammaHull:
    """Boundary of the deviation budget around the pilot, traced by rays."""

    points: np.ndarray   # (n_rays, 2) of (v_a, r_da)
    angles: np.ndarray   # ray angles [rad], ascending
    clipped: np.ndarray  # True where feasibility ended before delta reached gamma
    pilot: VscParams

    def deltas(self, cfg: SystemConfig) -> np.ndarray:
        return np.asarray([power_deviation(VscParams(v, rd), cfg) for v, rd in self.points])


def _ray_cap(pilot: VscParams, direction: np.ndarray) -> float:
    """Largest radius keeping v_a and r_da positive along the ray."""
    cap = 1e6
    for origin, d in ((pilot.v, direction[0]), (pilot.r_d, direction[1])):
        if d < 0:
            cap = min(cap, -origin / d * (1.0 - 1e-12))
    return cap


def gamma_hull(cfg: SystemConfig, n_rays: int = 360) -> GammaHull:
    """Trace the locus delta = gamma with n_rays rays from the pilot.

    Each ray reports the radius where delta crosses gamma (|delta - gamma|
    well under 1e-9), or the last feasible point flagged clipped when the
    feasible region ends first.  Ray directions live in raw (volt, ohm)
    units; points come back ordered by angle.
    """
    require_valid_config(cfg)
    pilot = cfg.pilot
    angles = np.arange(n_rays) * (2.0 * np.pi / n_rays)
    points = np.empty((n_rays, 2))
    clipped = np.zeros(n_rays, dtype=bool)

    for idx, theta in enumerate(angles):
        direction = np.asarray([np.cos(theta), np.sin(theta)])

        def sym_at(rho: float) -> VscParams:
            return VscParams(pilot.v + rho * direction[0], pilot.r_d + rho * direction[1])

        def delta_at(rho: float) -> float:
            return power_deviation(sym_at(rho), cfg)

        cap = _ray_cap(pilot, direction)
        rho_lo, rho_hi = 0.0, None
        rho = min(1e-3, 0.5 * cap)
        infeasible_at = None
        while rho < cap:
            if not is_feasible(sym_at(rho), cfg):
                infeasible_at = rho
                break
            if delta_at(rho) >= cfg.gamma:
                rho_hi = rho
                break
            rho_lo = rho
            rho *= 2.0
        if rho_hi is None and infeasible_at is None:
            # positivity cap reached; treat like a feasibility end
            infeasible_at = cap
        if rho_hi is None:
            # feasible region (or positivity) ends before the budget: bisect the edge
            lo, hi = rho_lo, infeasible_at
            for _ in range(80):
                mid = 0.5 * (lo + hi)
                if is_feasible(sym_at(mid), cfg):
                    lo = mid
                else:
                    hi = mid
            if delta_at(lo) >= cfg.gamma:
                rho_hi = lo  # crossing happens inside the feasible stretch
            else:
                clipped[idx] = True
                sym = sym_at(lo)
                points[idx] = (sym.v, sym.r_d)
                continue
        root = brentq(lambda s: delta_at(s) - cfg.gamma, rho_lo, rho_hi, xtol=1e-13)
        sym = sym_at(root)
        points[idx] = (sym.v, sym.r_d)

    return GammaHull(points=points, angles=angles, clipped=clipped, pilot=pilot)


# ============================================================
# Region classification
# ============================================================

def _voltage_gap(sym: VscParams, cfg: SystemConfig, r: np.ndarray) -> np.ndarray:
    return np.asarray(bus_voltage(sym, cfg.receiver, r)) - np.asarray(
        bus_voltage(cfg.pilot, cfg.receiver, r)
    )


def classify_region(sym: VscParams, cfg: SystemConfig) -> str:
    """AttC if the symbol's bus voltage meets the pilot's at an interior load.

    Solves v*(sym, r) = v*(pilot, r) by a dense sign-change scan plus root
    polishing.  Roots landing on r_min or r_max (within 1e-9 of the span)
    count as boundary and classify as ANC; the pilot itself is the
    degenerate AttC member.
    """
    if sym.v == cfg.pilot.v and sym.r_d == cfg.pilot.r_d:
        return ATTC
    lo, hi = cfg.load.r_min, cfg.load.r_max
    if lo == hi:
        return ANC
    r = np.linspace(lo, hi, _CLASSIFY_POINTS)
    d = _voltage_gap(sym, cfg, r)
    edge = _EDGE_REL_TOL * (hi - lo)
    interior_zero = np.flatnonzero((d == 0.0) & (r > lo + edge) & (r < hi - edge))
    if interior_zero.size:
        return ATTC
    flips = np.flatnonzero(d[:-1] * d[1:] < 0.0)
    for k in flips:
        root = brentq(lambda rr: float(_voltage_gap(sym, cfg, np.asarray([rr]))[0]),
                      r[k], r[k + 1], xtol=1e-13)
        if lo + edge < root < hi - edge:
            return ATTC
    return ANC


# ============================================================
# Grid rendering
# ============================================================

@dataclass(frozen=True)
class SignalingSpaceGrid:
    """Feasibility, deviation cost, and region tag over a setpoint grid."""

    v_a: np.ndarray      # (n_v,) grid axis [V]
    r_da: np.ndarray     # (n_r,) grid axis [ohm]
    feasible: np.ndarray  # (n_v, n_r) bool
    delta: np.ndarray     # (n_v, n_r) deviation cost
    region: np.ndarray    # (n_v, n_r) '<U4' tags


def _axis_with(value: float, lo: float, hi: float, n: int) -> np.ndarray:
    axis = np.linspace(lo, hi, n)
    if lo <= value <= hi:
        axis[int(np.argmin(np.abs(axis - value)))] = value
    return axis


def render_grid(cfg: SystemConfig, resolution=101,
                v_a_range: tuple[float, float] | None = None,
                r_da_range: tuple[float, float] | None = None) -> SignalingSpaceGrid:
    """Evaluate feasibility, delta, and region over a rectangular grid.

    The default window brackets the pilot (v_a within -4%/+2%, r_da within
    x0.25..x2); the nearest grid node on each axis is snapped onto the pilot
    so its cell reports delta = 0 exactly.
    """
    require_valid_config(cfg)
    if isinstance(resolution, int):
        n_v = n_r = resolution
    else:
        n_v, n_r = resolution
    pilot = cfg.pilot
    if v_a_range is None:
        v_a_range = (0.96 * pilot.v, 1.02 * pilot.v)
    if r_da_range is None:
        r_da_range = (0.25 * pilot.r_d, 2.0 * pilot.r_d)
    v_axis = _axis_with(pilot.v, v_a_range[0], v_a_range[1], n_v)
    r_axis = _axis_with(pilot.r_d, r_da_range[0], r_da_range[1], n_r)

    delta = power_deviation_map(v_axis, r_axis, cfg)

    r_chk = _check_grid(cfg.load)
    rx = cfg.receiver
    v_eq = rx.v * r_chk / (r_chk + rx.r_d)
    r_eq = r_chk * rx.r_d / (r_chk + rx.r_d)
    va = v_axis[:, None, None]
    rd = r_axis[None, :, None]
    v = (va / rd + v_eq / r_eq) / (1.0 / rd + 1.0 / r_eq)
    i = (va - v) / rd
    c = cfg.constraints
    feasible = (
        (v >= c.v_min).all(axis=2) & (v <= c.v_max).all(axis=2)
        & (i >= 0.0).all(axis=2) & (i <= c.i_a_max).all(axis=2)
    )

    # region: sign change of v*(sym, r) - v*(pilot, r) at an interior load
    v0 = np.asarray(bus_voltage(pilot, rx, r_chk))
    gap = v - v0
    flips = ((gap[..., :-1] * gap[..., 1:]) < 0.0).any(axis=2)
    flips |= (gap[..., 1:-1] == 0.0).any(axis=2)
    region = np.where(flips, ATTC, ANC).astype("<U4")
    iv = int(np.argmin(np.abs(v_axis - pilot.v)))
    ir = int(np.argmin(np.abs(r_axis - pilot.r_d)))
    if v_axis[iv] == pilot.v and r_axis[ir] == pilot.r_d:
        region[iv, ir] = ATTC  # degenerate member

    return SignalingSpaceGrid(v_a=v_axis, r_da=r_axis, feasible=feasible,
                              delta=delta, region=region)
