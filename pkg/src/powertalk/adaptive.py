"""Adaptive modulation: switch constellations where their error curves cross.

Conditional error curves of different constellation families cross as the
load moves, so no single family wins everywhere.  The policy partitions
the load range at refined curve crossings and assigns each interval the
constituent with the smallest conditional error there.  Thresholds are
kept both in load resistance and in the equivalent Thevenin resistance,
which is what a receiver actually observes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .config import SystemConfig
from .constellation import Constellation
from .detection import average_ser_interval, conditional_ser

_SLIVER = 1e-9          # intervals narrower than this collapse into a neighbor
_REFINE_XTOL = 1e-9     # crossing refinement tolerance [ohm]
_DEFAULT_GRID = 2049


@dataclass(frozen=True)
class AdaptivePolicy:
    """Piecewise-constant constellation choice over the load range.

    thresholds_r is strictly increasing and interior to the load interval;
    selections has one 0-based constituent index per interval, one more
    than the threshold count.  thresholds_h mirrors thresholds_r through
    the load-to-Thevenin-resistance map.  unused lists constituents no
    interval selects.
    """

    constituents: tuple[Constellation, ...]
    thresholds_r: tuple[float, ...]
    thresholds_h: tuple[float, ...]
    selections: tuple[int, ...]
    unused: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if len(self.selections) != len(self.thresholds_r) + 1:
            raise ValueError("need exactly one selection per threshold interval")
        if len(self.thresholds_h) != len(self.thresholds_r):
            raise ValueError("r and h threshold lists must align")
        thr = np.asarray(self.thresholds_r)
        if thr.size and not np.all(thr[1:] > thr[:-1]):
            raise ValueError("thresholds must be strictly increasing")
        for s in self.selections:
            if not 0 <= s < len(self.constituents):
                raise ValueError(f"selection index {s} out of range")

    def select(self, r):
        """Constituent index in charge at load r; a threshold belongs to
        the interval on its right.  Vectorized over r."""
        sel = np.asarray(self.selections)
        if not self.thresholds_r:
            out = np.broadcast_to(sel[0], np.shape(r))
            return int(sel[0]) if np.ndim(r) == 0 else out.copy()
        idx = np.searchsorted(np.asarray(self.thresholds_r), r, side="right")
        out = sel[idx]
        return int(out) if np.ndim(r) == 0 else out

    def constellation_at(self, r) -> Constellation:
        return self.constituents[self.select(float(r))]


def error_curves(constellations, cfg: SystemConfig, r_grid) -> np.ndarray:
    """Conditional error of each constellation on a shared load grid.

    Returns an array of shape (len(constellations), len(r_grid)).
    """
    r = np.atleast_1d(np.asarray(r_grid, dtype=float))
    return np.vstack([conditional_ser(c, cfg, r) for c in constellations])


def _refined_crossing(ca: Constellation, cb: Constellation, cfg: SystemConfig,
                      lo: float, hi: float) -> float:
    """Root of the conditional-error difference inside one grid cell."""
    def diff(r: float) -> float:
        return conditional_ser(ca, cfg, r) - conditional_ser(cb, cfg, r)

    fa, fb = diff(lo), diff(hi)
    if fa == 0.0:
        return lo
    if fb == 0.0:
        return hi
    return float(brentq(diff, lo, hi, xtol=_REFINE_XTOL))


def build_policy(constituents, cfg: SystemConfig,
                 grid_resolution: int = _DEFAULT_GRID) -> AdaptivePolicy:
    """Assemble the minimal-error policy over the load range.

    Selects the argmin constituent on a dense grid (ties to the lowest
    index), refines every selection change to the exact curve crossing,
    and collapses slivers below the refinement tolerance.
    """
    constituents = tuple(constituents)
    if not constituents:
        raise ValueError("need at least one constituent constellation")
    if grid_resolution < 2:
        raise ValueError(f"grid_resolution must be >= 2, got {grid_resolution}")
    lo, hi = cfg.load.r_min, cfg.load.r_max
    if cfg.load.is_point:
        curves = error_curves(constituents, cfg, [lo])
        choice = int(np.argmin(curves[:, 0]))
        unused = tuple(i for i in range(len(constituents)) if i != choice)
        return AdaptivePolicy(constituents, (), (), (choice,), unused)

    grid = np.linspace(lo, hi, grid_resolution)
    curves = error_curves(constituents, cfg, grid)
    sel = np.argmin(curves, axis=0)

    pieces: list[tuple[float, float, int]] = []
    start, current = lo, int(sel[0])
    for k in np.flatnonzero(sel[:-1] != sel[1:]):
        root = _refined_crossing(constituents[current], constituents[int(sel[k + 1])],
                                 cfg, float(grid[k]), float(grid[k + 1]))
        pieces.append((start, root, current))
        start, current = root, int(sel[k + 1])
    pieces.append((start, hi, current))

    merged: list[tuple[float, float, int]] = []
    for p_lo, p_hi, s in pieces:
        if p_hi - p_lo <= _SLIVER and len(pieces) > 1:
            continue
        prev_hi = merged[-1][1] if merged else lo
        if merged and merged[-1][2] == s:
            merged[-1] = (merged[-1][0], p_hi, s)
        else:
            merged.append((prev_hi, p_hi, s))
    merged[-1] = (merged[-1][0], hi, merged[-1][2])

    thresholds = tuple(p[1] for p in merged[:-1])
    selections = tuple(p[2] for p in merged)
    thresholds_h = tuple(r * cfg.receiver.r_d / (r + cfg.receiver.r_d)
                         for r in thresholds)
    unused = tuple(sorted(set(range(len(constituents))) - set(selections)))
    return AdaptivePolicy(constituents, thresholds, thresholds_h, selections, unused)


def policy_conditional_ser(policy: AdaptivePolicy, cfg: SystemConfig, r):
    """Conditional error of the policy-selected constituent.  Vectorized."""
    r_arr = np.atleast_1d(np.asarray(r, dtype=float))
    sel = policy.select(r_arr)
    out = np.empty_like(r_arr)
    for s in np.unique(sel):
        mask = sel == s
        out[mask] = conditional_ser(policy.constituents[int(s)], cfg, r_arr[mask])
    return float(out[0]) if np.ndim(r) == 0 else out


def policy_average_ser(policy: AdaptivePolicy, cfg: SystemConfig) -> float:
    """Average error of the policy over the load distribution.

    Piecewise quadrature over the threshold partition, each interval
    weighted by its load probability.
    """
    load = cfg.load
    if load.is_point:
        return float(policy_conditional_ser(policy, cfg, load.r_min))
    bounds = (load.r_min, *policy.thresholds_r, load.r_max)
    total = 0.0
    span = load.r_max - load.r_min
    for b_lo, b_hi, s in zip(bounds[:-1], bounds[1:], policy.selections):
        mean = average_ser_interval(policy.constituents[s], cfg, b_lo, b_hi)
        total += (b_hi - b_lo) / span * mean
    return total


def verify_policy(policy: AdaptivePolicy, cfg: SystemConfig, r_grid) -> float:
    """Largest excess of the policy curve over the pointwise constituent
    minimum on a grid; zero up to float noise when the policy is optimal."""
    curves = error_curves(policy.constituents, cfg, r_grid)
    chosen = policy_conditional_ser(policy, cfg, r_grid)
    return float(np.max(chosen - np.min(curves, axis=0)))
