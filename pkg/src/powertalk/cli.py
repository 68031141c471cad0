"""Command-line experiment runner.

Every command loads a scenario file, runs one named experiment, and
writes CSV artifacts plus a rendered figure into the output directory.
CSV cells carry 9 significant digits with a period decimal separator, so
repeated runs with the same scenario and seed are byte-identical.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import report
from .adaptive import build_policy, error_curves, policy_average_ser, policy_conditional_ser
from .circuit import VscParams, bus_voltage_thevenin, thevenin
from .config import SystemConfig
from .constellation import FAMILIES, DesignError, design, segments_intersect, to_segments
from .detection import (
    DegenerateTrainingError,
    NonPhysicalEstimateError,
    average_ser,
    conditional_ser,
    estimate_channel_state,
)
from .montecarlo import ADAPTIVE, SimulationSpec, run
from .scenario import Scenario, ScenarioError, load_scenario
from .signaling import QuadratureError, gamma_hull, power_deviation, render_grid

EXIT_OK = 0
EXIT_DOMAIN = 2
EXIT_IO = 3

_SER_MODES = ("analytic", "mc", "both")


def _format_cell(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".9g")


def write_csv(path, header, rows) -> None:
    """One-line header, comma separators, newline-terminated lines."""
    lines = [",".join(header)]
    lines.extend(",".join(_format_cell(cell) for cell in row) for row in rows)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _emit(path) -> None:
    print(f"wrote {path}")


# ============================================================
# Commands
# ============================================================

def cmd_space(scn: Scenario, out: Path) -> None:
    cfg = scn.cfg
    grid = render_grid(cfg, resolution=scn.grid_resolution)
    hull = gamma_hull(cfg, n_rays=scn.n_rays)

    grid_rows = []
    for iv, v_a in enumerate(grid.v_a):
        for ir, r_da in enumerate(grid.r_da):
            grid_rows.append((float(v_a), float(r_da), int(grid.feasible[iv, ir]),
                              float(grid.delta[iv, ir]), str(grid.region[iv, ir])))
    grid_path = out / "space_grid.csv"
    write_csv(grid_path, ("v_a", "r_da", "feasible", "delta", "region"), grid_rows)
    _emit(grid_path)

    hull_rows = [(float(a), float(p[0]), float(p[1]), int(c))
                 for a, p, c in zip(hull.angles, hull.points, hull.clipped)]
    hull_path = out / "space_hull.csv"
    write_csv(hull_path, ("angle", "v_a", "r_da", "clipped"), hull_rows)
    _emit(hull_path)

    fig_path = out / "space.png"
    report.save_space_figure(fig_path, grid, hull, cfg.gamma)
    _emit(fig_path)


def cmd_design(scn: Scenario, out: Path) -> None:
    if scn.family == ADAPTIVE:
        raise ScenarioError(
            f"design needs a single family; choose one of {', '.join(FAMILIES)}"
        )
    cfg = scn.cfg
    c = design(scn.family, scn.M, cfg)

    symbol_rows = [(i + 1, s.v, s.r_d, power_deviation(s, cfg))
                   for i, s in enumerate(c.symbols)]
    symbols_path = out / "symbols.csv"
    write_csv(symbols_path, ("i", "v_a", "r_da", "delta"), symbol_rows)
    _emit(symbols_path)

    segments = to_segments(c, cfg)
    seg_rows = [(s.index, s.k_rmin, s.n_rmin, s.k_rmax, s.n_rmax) for s in segments]
    segments_path = out / "segments.csv"
    write_csv(segments_path, ("i", "k_rmin", "n_rmin", "k_rmax", "n_rmax"), seg_rows)
    _emit(segments_path)

    crossings = segments_intersect(c, cfg)
    intersections_path = out / "intersections.csv"
    write_csv(intersections_path, ("i", "j", "r_star"), crossings)
    _emit(intersections_path)

    fig_path = out / "design.png"
    report.save_design_figure(fig_path, segments, crossings, scn.family, scn.M)
    _emit(fig_path)


def _scheme_for(scn: Scenario, m: int):
    """Constellation, or adaptive policy over the three families."""
    if scn.family == ADAPTIVE:
        constituents = [design(f, m, scn.cfg) for f in FAMILIES]
        return build_policy(constituents, scn.cfg, grid_resolution=scn.policy_grid)
    return design(scn.family, m, scn.cfg)


def _scheme_curve(scheme, cfg: SystemConfig, r_grid):
    if hasattr(scheme, "selections"):
        return policy_conditional_ser(scheme, cfg, r_grid)
    return conditional_ser(scheme, cfg, r_grid)


def _scheme_average(scheme, cfg: SystemConfig) -> float:
    if hasattr(scheme, "selections"):
        return policy_average_ser(scheme, cfg)
    return average_ser(scheme, cfg)


def cmd_ser(scn: Scenario, out: Path, mode: str) -> None:
    cfg = scn.cfg
    load = cfg.load
    if load.is_point:
        r_grid = np.asarray([load.r_min])
    else:
        r_grid = np.linspace(load.r_min, load.r_max, scn.ser_grid)

    schemes = {m: _scheme_for(scn, m) for m in scn.M_list}

    if mode in ("analytic", "both"):
        curve_labels = {}
        for m, scheme in schemes.items():
            p_cond = np.atleast_1d(_scheme_curve(scheme, cfg, r_grid))
            curve_path = out / f"ser_curve_M{m}.csv"
            write_csv(curve_path, ("r", "p_cond"), zip(r_grid, p_cond))
            _emit(curve_path)
            curve_labels[f"{scn.family} M={m}"] = p_cond
        fig_path = out / "ser_curves.png"
        report.save_ser_curves_figure(fig_path, r_grid, curve_labels)
        _emit(fig_path)

    table_rows = []
    analytic, mc, stderr = [], [], []
    for m, scheme in schemes.items():
        row: list = [m]
        if mode in ("analytic", "both"):
            pe = _scheme_average(scheme, cfg)
            analytic.append(pe)
            row.append(pe)
        if mode in ("mc", "both"):
            result = run(SimulationSpec(
                cfg=cfg, scheme=scheme, trials=scn.trials,
                block_length=scn.block_length, seed=scn.seed + m,
                mode=scn.sim_mode, estimated_csi=scn.estimated_csi,
                r_bins=scn.r_bins))
            mc.append(result.ser)
            stderr.append(result.stderr)
            row.extend((result.ser, result.stderr))
        table_rows.append(tuple(row))

    header = {"analytic": ("M", "pe_analytic"),
              "mc": ("M", "pe_mc", "stderr"),
              "both": ("M", "pe_analytic", "pe_mc", "stderr")}[mode]
    table_path = out / "ser_table.csv"
    write_csv(table_path, header, table_rows)
    _emit(table_path)

    fig_path = out / "ser_vs_M.png"
    report.save_ser_table_figure(
        fig_path, list(scn.M_list),
        analytic=analytic or None, mc=mc or None, stderr=stderr or None)
    _emit(fig_path)


def cmd_thresholds(scn: Scenario, out: Path) -> None:
    cfg = scn.cfg
    constituents = [design(f, scn.M, cfg) for f in FAMILIES]
    policy = build_policy(constituents, cfg, grid_resolution=scn.policy_grid)

    bounds = (cfg.load.r_min, *policy.thresholds_r, cfg.load.r_max)
    rows = []
    for lo, hi, sel in zip(bounds[:-1], bounds[1:], policy.selections):
        h_lo = thevenin(cfg.receiver, lo).r_eq
        h_hi = thevenin(cfg.receiver, hi).r_eq
        rows.append((lo, hi, h_lo, h_hi, sel + 1))
    thr_path = out / "thresholds.csv"
    write_csv(thr_path, ("r_low", "r_high", "h_low", "h_high",
                         "constellation_index"), rows)
    _emit(thr_path)

    if cfg.load.is_point:
        r_grid = np.asarray([cfg.load.r_min])
    else:
        r_grid = np.linspace(cfg.load.r_min, cfg.load.r_max, scn.ser_grid)
    curves = error_curves(constituents, cfg, r_grid)
    fig_path = out / "thresholds.png"
    report.save_thresholds_figure(fig_path, r_grid, curves,
                                  [f"{f} M={scn.M}" for f in FAMILIES], policy)
    _emit(fig_path)


def cmd_estimate(scn: Scenario, out: Path) -> None:
    cfg = scn.cfg
    if scn.estimate_offset == 0:
        raise ScenarioError("estimate_offset must be nonzero for distinct probes")
    r = scn.estimate_r
    if r is None:
        r = 0.5 * (cfg.load.r_min + cfg.load.r_max)
    state = thevenin(cfg.receiver, r)
    probes = (cfg.pilot, VscParams(cfg.pilot.v + scn.estimate_offset, cfg.pilot.r_d))
    truth = np.asarray([bus_voltage_thevenin(p, state) for p in probes])

    rng = np.random.default_rng(scn.seed)
    rows = []
    g_stds, h_stds = [], []
    for n in scn.estimate_n_list:
        if n < 1:
            raise ScenarioError(f"estimate_n_list entries must be >= 1, got {n}")
        scale = cfg.sampling.sigma_m / np.sqrt(n)
        g_hat = np.empty(scn.estimate_reps)
        h_hat = np.empty(scn.estimate_reps)
        for rep in range(scn.estimate_reps):
            measured = truth + rng.normal(0.0, scale, size=truth.size)
            est = estimate_channel_state(list(zip(probes, measured)))
            g_hat[rep] = est.v_eq
            h_hat[rep] = est.r_eq
        g_std = float(np.std(g_hat - state.v_eq, ddof=1))
        h_std = float(np.std(h_hat - state.r_eq, ddof=1))
        g_stds.append(g_std)
        h_stds.append(h_std)
        rows.append((n, float(np.mean(g_hat)), g_std, float(np.mean(h_hat)), h_std))

    est_path = out / "estimate.csv"
    write_csv(est_path, ("n_samples", "g_mean", "g_err_std", "h_mean", "h_err_std"),
              rows)
    _emit(est_path)

    if len(scn.estimate_n_list) >= 2:
        log_n = np.log10(np.asarray(scn.estimate_n_list, dtype=float))
        slope_g = float(np.polyfit(log_n, np.log10(g_stds), 1)[0])
        slope_h = float(np.polyfit(log_n, np.log10(h_stds), 1)[0])
        print(f"true state: v_eq={state.v_eq:.9g} V, r_eq={state.r_eq:.9g} ohm at r={r:.9g} ohm")
        print(f"error-std slope vs sample count: v_eq {slope_g:.3f}, r_eq {slope_h:.3f}")

    fig_path = out / "estimate.png"
    report.save_estimate_figure(fig_path, list(scn.estimate_n_list), g_stds, h_stds)
    _emit(fig_path)


# ============================================================
# Argument handling
# ============================================================

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="scenario file (key=value lines)")
    common.add_argument("--out", required=True, help="output directory for CSVs and figures")
    common.add_argument("--family", default=None, choices=FAMILIES + (ADAPTIVE,),
                        help="override the scenario's constellation family")
    common.add_argument("--M", default=None,
                        help="override symbol count (ser accepts a comma list)")
    common.add_argument("--seed", type=int, default=None,
                        help="override the scenario seed")

    parser = argparse.ArgumentParser(
        prog="powertalk",
        description="Design and evaluate bus-voltage signaling between "
                    "droop-controlled converters.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("space", parents=[common],
                   help="map the feasible signaling region and budget hull")
    sub.add_parser("design", parents=[common],
                   help="build a constellation and its detection-space segments")
    ser = sub.add_parser("ser", parents=[common],
                         help="error probability curves and order sweep")
    ser.add_argument("--mode", default="both", choices=_SER_MODES,
                     help="analytic closed forms, Monte Carlo, or both")
    sub.add_parser("thresholds", parents=[common],
                   help="adaptive switching thresholds over the load range")
    sub.add_parser("estimate", parents=[common],
                   help="channel-state estimation accuracy vs training length")
    return parser


def _apply_overrides(scn: Scenario, args) -> Scenario:
    if args.seed is not None:
        scn = replace(scn, seed=args.seed)
    if args.family is not None:
        scn = replace(scn, family=args.family)
    if args.M is not None:
        try:
            m_values = tuple(int(s) for s in str(args.M).split(",") if s.strip())
        except ValueError:
            raise ScenarioError(f"--M expects integers, got {args.M!r}") from None
        if not m_values or any(m < 2 for m in m_values):
            raise ScenarioError(f"--M values must be >= 2, got {args.M!r}")
        scn = replace(scn, M=m_values[0], M_list=m_values)
    return scn


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        scn = _apply_overrides(load_scenario(args.config), args)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        if args.command == "space":
            cmd_space(scn, out)
        elif args.command == "design":
            cmd_design(scn, out)
        elif args.command == "ser":
            cmd_ser(scn, out, args.mode)
        elif args.command == "thresholds":
            cmd_thresholds(scn, out)
        else:
            cmd_estimate(scn, out)
    except (ScenarioError, DesignError, QuadratureError, DegenerateTrainingError,
            NonPhysicalEstimateError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
