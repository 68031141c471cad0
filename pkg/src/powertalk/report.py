"""Figure rendering for the command-line runner.

Each helper draws one PNG next to the CSVs the command writes, so a run
directory is self-describing.  Everything renders through the Agg
backend; no display is ever required.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .signaling import ANC, ATTC, GammaHull, SignalingSpaceGrid

_DPI = 120


def _finish(fig, path) -> None:
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def save_space_figure(path, grid: SignalingSpaceGrid, hull: GammaHull,
                      gamma: float) -> None:
    """Deviation cost over the setpoint window with the budget hull on top."""
    fig, ax = plt.subplots(figsize=(7.0, 5.0))
    delta = np.where(grid.feasible, grid.delta, np.nan)
    mesh = ax.pcolormesh(grid.r_da, grid.v_a, delta, shading="nearest",
                         cmap="viridis")
    fig.colorbar(mesh, ax=ax, label="relative power deviation")
    anc = grid.feasible & (grid.region == ANC)
    if np.any(anc):
        rr, vv = np.meshgrid(grid.r_da, grid.v_a)
        ax.scatter(rr[anc], vv[anc], s=2.0, c="white", alpha=0.25,
                   label="additive-noise region")
    closed = np.vstack([hull.points, hull.points[:1]])
    ax.plot(closed[:, 1], closed[:, 0], "r-", lw=1.2,
            label=f"deviation = {gamma:g}")
    ax.plot(hull.pilot.r_d, hull.pilot.v, "w*", ms=12, mec="black",
            label="pilot")
    ax.set_xlabel("droop resistance [ohm]")
    ax.set_ylabel("reference voltage [V]")
    ax.set_title("Signaling space")
    ax.legend(loc="lower right", fontsize=8)
    _finish(fig, path)


def save_design_figure(path, segments, intersections, family: str, M: int) -> None:
    """Symbol segments in the (current, voltage) detection plane."""
    fig, ax = plt.subplots(figsize=(7.0, 5.0))
    cmap = plt.get_cmap("tab10")
    for seg in segments:
        color = cmap((seg.index - 1) % 10)
        ax.plot([seg.k_rmin, seg.k_rmax], [seg.n_rmin, seg.n_rmax],
                "-", color=color, lw=1.5, label=f"symbol {seg.index}")
        ax.plot([seg.k_rmin], [seg.n_rmin], "o", color=color, ms=4)
        ax.plot([seg.k_rmax], [seg.n_rmax], "s", color=color, ms=4)
    if intersections:
        ax.set_title(f"{family}, M={M} ({len(intersections)} segment crossing(s))")
    else:
        ax.set_title(f"{family}, M={M}")
    ax.set_xlabel("line slope k [A]")
    ax.set_ylabel("line intercept n [V]")
    if M <= 10:
        ax.legend(fontsize=8)
    _finish(fig, path)


def save_ser_curves_figure(path, r_grid, curves: dict[str, np.ndarray]) -> None:
    """Conditional error vs load, one curve per labeled scheme."""
    fig, ax = plt.subplots(figsize=(7.0, 5.0))
    for label, p in curves.items():
        safe = np.clip(np.asarray(p, dtype=float), 1e-300, None)
        ax.semilogy(r_grid, safe, lw=1.4, label=label)
    ax.set_xlabel("load resistance [ohm]")
    ax.set_ylabel("symbol error probability")
    ax.set_title("Conditional error vs load")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    _finish(fig, path)


def save_ser_table_figure(path, m_values, analytic=None, mc=None, stderr=None) -> None:
    """Error probability vs modulation order, analytic and/or empirical."""
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    if analytic is not None:
        ax.semilogy(m_values, analytic, "o-", lw=1.4, label="analytic")
    if mc is not None:
        err = 3.0 * np.asarray(stderr) if stderr is not None else None
        ax.errorbar(m_values, mc, yerr=err, fmt="s--", lw=1.2, capsize=3,
                    label="simulated (3 SE bars)")
    ax.set_xlabel("modulation order M")
    ax.set_ylabel("average symbol error probability")
    ax.set_xticks(list(m_values))
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    _finish(fig, path)


def save_thresholds_figure(path, r_grid, curves, labels, policy) -> None:
    """Constituent error curves with the selected intervals shaded."""
    fig, ax = plt.subplots(figsize=(7.0, 5.0))
    cmap = plt.get_cmap("tab10")
    for i, (label, p) in enumerate(zip(labels, curves)):
        safe = np.clip(np.asarray(p, dtype=float), 1e-300, None)
        ax.semilogy(r_grid, safe, lw=1.4, color=cmap(i % 10), label=label)
    bounds = (r_grid[0], *policy.thresholds_r, r_grid[-1])
    for lo, hi, s in zip(bounds[:-1], bounds[1:], policy.selections):
        ax.axvspan(lo, hi, color=cmap(s % 10), alpha=0.12)
    for t in policy.thresholds_r:
        ax.axvline(t, color="black", lw=0.8, ls=":")
    ax.set_xlabel("load resistance [ohm]")
    ax.set_ylabel("symbol error probability")
    ax.set_title("Adaptive switching thresholds")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    _finish(fig, path)


def save_estimate_figure(path, n_values, g_std, h_std) -> None:
    """Estimation error spread vs training length on log-log axes."""
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    ax.loglog(n_values, g_std, "o-", label="source voltage estimate std [V]")
    ax.loglog(n_values, h_std, "s-", label="resistance estimate std [ohm]")
    n = np.asarray(n_values, dtype=float)
    ref = g_std[0] * np.sqrt(n[0] / n)
    ax.loglog(n, ref, "k:", lw=1.0, label="inverse square-root reference")
    ax.set_xlabel("samples per training slot")
    ax.set_ylabel("error std over repetitions")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    _finish(fig, path)
