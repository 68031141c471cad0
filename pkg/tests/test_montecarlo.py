"""Monte Carlo engine: reproducibility, binning, analytic agreement.

The binary point-load oracle: two symbols 0.2 V apart at the bus with
half-slot noise std 0.1 err with probability Q(sqrt 2) = 0.0786496.
"""

import numpy as np
import pytest

from powertalk import (
    ADAPTIVE,
    CUSTOM,
    DIAGONAL,
    FAMILIES,
    FIXED_RDA,
    FIXED_VA,
    MODE_DIRECT,
    MODE_RAW,
    Constellation,
    SimulationSpec,
    SweepRow,
    VscParams,
    average_ser,
    build_policy,
    conditional_ser,
    design,
    policy_average_ser,
    run,
    sweep_order,
)
from powertalk.montecarlo import WORKERS_ENV, worker_count

Q_SQRT2 = 0.07864960352514257


def binary_point_constellation(point_cfg):
    """Point-load symbols with bus outputs exactly 0.2 V apart."""
    targets = np.asarray([363.8, 363.6])
    v_a = (targets * 11.0 - 2000.0) / 5.0
    return Constellation(
        family=CUSTOM,
        symbols=tuple(VscParams(float(v), 2.0) for v in v_a),
        pilot=point_cfg.pilot, gamma=point_cfg.gamma)


def test_spec_validation(cfg):
    c = design(DIAGONAL, 2, cfg)
    with pytest.raises(ValueError):
        SimulationSpec(cfg=cfg, scheme=c, trials=0)
    with pytest.raises(ValueError):
        SimulationSpec(cfg=cfg, scheme=c, trials=10, block_length=0)
    with pytest.raises(ValueError):
        SimulationSpec(cfg=cfg, scheme=c, trials=10, mode="streaming")
    with pytest.raises(ValueError):
        SimulationSpec(cfg=cfg, scheme=c, trials=10, r_bins=0)


def test_worker_count_env(monkeypatch):
    monkeypatch.delenv(WORKERS_ENV, raising=False)
    assert worker_count() == 1
    monkeypatch.setenv(WORKERS_ENV, "4")
    assert worker_count() == 4
    monkeypatch.setenv(WORKERS_ENV, "0")
    assert worker_count() == 1
    monkeypatch.setenv(WORKERS_ENV, "three")
    with pytest.raises(ValueError):
        worker_count()


def test_identical_reruns(cfg):
    spec = SimulationSpec(cfg=cfg, scheme=design(FIXED_VA, 4, cfg),
                          trials=20_000, seed=7)
    a, b = run(spec), run(spec)
    assert a.errors == b.errors
    np.testing.assert_array_equal(a.bin_errors, b.bin_errors)
    np.testing.assert_array_equal(a.bin_trials, b.bin_trials)


def test_worker_split_invariance(cfg, monkeypatch):
    """The realized sample path must not depend on how blocks are
    scheduled across processes."""
    spec = SimulationSpec(cfg=cfg, scheme=design(FIXED_VA, 4, cfg),
                          trials=20_000, seed=3)
    monkeypatch.setenv(WORKERS_ENV, "1")
    serial = run(spec)
    monkeypatch.setenv(WORKERS_ENV, "3")
    split = run(spec)
    assert serial.errors == split.errors
    np.testing.assert_array_equal(serial.bin_errors, split.bin_errors)
    np.testing.assert_array_equal(serial.bin_trials, split.bin_trials)


def test_seed_changes_the_path(cfg):
    scheme = design(FIXED_VA, 4, cfg)
    a = run(SimulationSpec(cfg=cfg, scheme=scheme, trials=20_000, seed=1))
    b = run(SimulationSpec(cfg=cfg, scheme=scheme, trials=20_000, seed=2))
    assert (a.errors != b.errors
            or not np.array_equal(a.bin_trials, b.bin_trials))


def test_partial_trailing_block(cfg):
    spec = SimulationSpec(cfg=cfg, scheme=design(DIAGONAL, 4, cfg),
                          trials=1050, block_length=100, seed=0)
    result = run(spec)
    assert result.trials == 1050
    assert int(result.bin_trials.sum()) == 1050
    assert 0.0 <= result.ser <= 1.0


def test_binary_point_oracle(point_cfg):
    c = binary_point_constellation(point_cfg)
    spec = SimulationSpec(cfg=point_cfg, scheme=c, trials=200_000, seed=42)
    result = run(spec)
    se = np.sqrt(Q_SQRT2 * (1 - Q_SQRT2) / spec.trials)
    assert abs(result.ser - Q_SQRT2) < 4 * se
    assert result.bin_edges[0] == result.bin_edges[-1] == 10.0
    assert result.bin_trials.sum() == spec.trials


def test_raw_and_direct_modes_agree(point_cfg):
    """Averaging N raw samples or drawing the two half-means directly
    must give the same error law."""
    c = binary_point_constellation(point_cfg)
    base = dict(cfg=point_cfg, scheme=c, trials=50_000)
    raw = run(SimulationSpec(mode=MODE_RAW, seed=10, **base))
    direct = run(SimulationSpec(mode=MODE_DIRECT, seed=11, **base))
    combined_se = np.sqrt(raw.stderr**2 + direct.stderr**2)
    assert abs(raw.ser - direct.ser) < 4 * combined_se


def test_bins_track_conditional_error(cfg):
    scheme = design(FIXED_VA, 4, cfg)
    spec = SimulationSpec(cfg=cfg, scheme=scheme, trials=100_000, seed=5,
                          r_bins=10)
    result = run(spec)
    assert result.bin_trials.sum() == spec.trials
    emp = result.conditional_ser()
    for i in range(10):
        n_i = int(result.bin_trials[i])
        if n_i < 2_000:
            continue
        grid = np.linspace(result.bin_edges[i], result.bin_edges[i + 1], 101)
        ref = float(np.mean(conditional_ser(scheme, cfg, grid)))
        se = np.sqrt(max(ref * (1 - ref), 1e-12) / n_i)
        assert abs(emp[i] - ref) < 5 * se + 0.01


@pytest.mark.parametrize("m", [2, 4, 8, 16])
def test_total_ser_matches_analytic(cfg, m):
    """With a fresh load per slot, errors are iid Bernoulli and the
    binomial standard error is the exact estimator spread."""
    scheme = design(DIAGONAL, m, cfg)
    spec = SimulationSpec(cfg=cfg, scheme=scheme, trials=10_000,
                          block_length=1, seed=9 + m)
    result = run(spec)
    pe = average_ser(scheme, cfg)
    se = np.sqrt(pe * (1 - pe) / spec.trials)
    assert abs(result.ser - pe) < 3 * se


def test_adaptive_scheme_runs(cfg):
    policy = build_policy([design(f, 4, cfg) for f in FAMILIES], cfg)
    spec = SimulationSpec(cfg=cfg, scheme=policy, trials=200_000, seed=13)
    result = run(spec)
    pe = policy_average_ser(policy, cfg)
    se = np.sqrt(pe * (1 - pe) / spec.trials)
    assert abs(result.ser - pe) < 4 * se


def test_estimated_csi_costs_little(cfg):
    """Two-probe training shifts the thresholds slightly; the error rate
    stays in the neighborhood of the known-channel rate."""
    scheme = design(DIAGONAL, 4, cfg)
    base = dict(cfg=cfg, scheme=scheme, trials=100_000)
    known = run(SimulationSpec(seed=21, estimated_csi=False, **base))
    trained = run(SimulationSpec(seed=21, estimated_csi=True, **base))
    assert trained.errors > 0
    assert trained.ser < 2.0 * known.ser + 4 * known.stderr


def test_sweep_order_rows(cfg):
    rows = sweep_order(FIXED_RDA, [2, 4], cfg, trials=50_000, seed=1)
    assert [r.M for r in rows] == [2, 4]
    for row in rows:
        c = design(FIXED_RDA, row.M, cfg)
        np.testing.assert_allclose(row.pe_analytic, average_ser(c, cfg),
                                   rtol=1e-12)
        se = max(row.stderr, np.sqrt(row.pe_analytic / 50_000))
        assert abs(row.ser_mc - row.pe_analytic) < 4 * se + 1e-4
    again = sweep_order(FIXED_RDA, [2, 4], cfg, trials=50_000, seed=1)
    assert [r.ser_mc for r in again] == [r.ser_mc for r in rows]


def test_sweep_order_adaptive(cfg):
    rows = sweep_order(ADAPTIVE, [4], cfg, trials=50_000, seed=2)
    policy = build_policy([design(f, 4, cfg) for f in FAMILIES], cfg)
    np.testing.assert_allclose(rows[0].pe_analytic,
                               policy_average_ser(policy, cfg), rtol=1e-12)
    assert isinstance(rows[0], SweepRow)
