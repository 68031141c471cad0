"""Line estimation, ML decisions, error probabilities, channel training.

Hand oracles, all on the 10 ohm point load where the receiver-plus-load
equivalent is (1000/3 V, 5/3 ohm):
  - noiseless slot at the pilot: v* = 4000/11, line (200/11, 4000/11)
  - four samples [364, 363, 364, 363]: n_hat 363.5, k_hat 90.5/5 = 18.1
  - two-point training on bus readings 4000/11 and 3990/11 solves the
    2x2 system to u = 0.6, w = 200, so the state is (1000/3, 5/3)
  - four symbols with sorted output gaps 0.2, 0.3, 0.25 V at sigma 0.1:
    P(err) = (Q(sqrt 2) + Q(3/sqrt 2) + Q(2.5/sqrt 2))/2 = 0.06707348...
"""

import numpy as np
import pytest

from powertalk import (
    CUSTOM,
    DIAGONAL,
    FIXED_RDA,
    FIXED_VA,
    Constellation,
    DegenerateTrainingError,
    DetectedLine,
    LineDistribution,
    NonPhysicalEstimateError,
    VscParams,
    average_ser,
    binary_error_prob,
    bus_voltage,
    conditional_ser,
    decide_sorted,
    design,
    estimate_channel_state,
    estimate_line,
    line_distribution,
    mld_decide,
    q_function,
    thevenin,
)
from powertalk.detection import average_ser_interval

Q_SQRT2 = 0.07864960352514257  # 0.5 erfc(1)
GAP_SER_ORACLE = 0.06707348307962911

AVG_SER_M4 = {
    FIXED_VA: 0.37297217727785414,
    FIXED_RDA: 0.004337531270600701,
    DIAGONAL: 0.03358258241883026,
}


@pytest.fixture
def point_state(point_cfg):
    return thevenin(point_cfg.receiver, 10.0)


def gap_constellation(point_cfg):
    """Symbols whose point-load outputs sit at 364, 363.8, 363.5, 363.25 V."""
    targets = np.asarray([364.0, 363.8, 363.5, 363.25])
    v_a = (targets * 11.0 - 2000.0) / 5.0
    return Constellation(
        family=CUSTOM,
        symbols=tuple(VscParams(float(v), 2.0) for v in v_a),
        pilot=point_cfg.pilot,
        gamma=point_cfg.gamma,
    )


def test_q_function_values():
    assert q_function(0.0) == 0.5
    np.testing.assert_allclose(q_function(np.sqrt(2.0)), Q_SQRT2, rtol=1e-14)
    x = np.linspace(-3, 3, 13)
    np.testing.assert_allclose(q_function(x) + q_function(-x), 1.0, rtol=1e-14)
    assert np.all(np.diff(q_function(x)) < 0)


def test_estimate_line_noiseless(point_state):
    samples = np.full(100, 4000.0 / 11.0)
    line = estimate_line(samples, point_state)
    np.testing.assert_allclose(line.n_hat, 4000.0 / 11.0, rtol=1e-14)
    np.testing.assert_allclose(line.k_hat, 200.0 / 11.0, rtol=1e-12)


def test_estimate_line_four_samples(point_state):
    line = estimate_line([364.0, 363.0, 364.0, 363.0], point_state)
    assert line.n_hat == 363.5
    np.testing.assert_allclose(line.k_hat, 18.1, rtol=1e-12)


def test_estimate_line_rejects_bad_shapes(point_state):
    for bad in ([], [1.0, 2.0, 3.0], np.ones((2, 2))):
        with pytest.raises(ValueError):
            estimate_line(bad, point_state)


def test_detected_line_rejects_nonfinite():
    with pytest.raises(ValueError):
        DetectedLine(np.nan, 300.0)
    with pytest.raises(ValueError):
        DetectedLine(18.0, np.inf)


def test_line_distribution_moments(point_state):
    d = line_distribution(VscParams(400.0, 2.0), point_state, sigma=0.1)
    np.testing.assert_allclose(d.mean_n, 4000.0 / 11.0, rtol=1e-14)
    np.testing.assert_allclose(d.mean_k, 200.0 / 11.0, rtol=1e-12)
    np.testing.assert_allclose(d.var_n, 0.01, rtol=1e-14)
    np.testing.assert_allclose(d.var_k, 0.0036, rtol=1e-12)
    with pytest.raises(ValueError):
        LineDistribution(0.0, 0.0, -1.0, 0.0)


def test_estimate_line_statistics(point_cfg, point_state):
    """Sample moments of repeated slot estimates match the predicted law."""
    rng = np.random.default_rng(11)
    n_slots, n = 10_000, point_cfg.sampling.n_samples
    sigma_m = point_cfg.sampling.sigma_m
    truth = 4000.0 / 11.0
    samples = truth + rng.normal(0.0, sigma_m, (n_slots, n))
    k = np.empty(n_slots)
    v = np.empty(n_slots)
    for i in range(n_slots):
        line = estimate_line(samples[i], point_state)
        k[i], v[i] = line.k_hat, line.n_hat
    d = line_distribution(VscParams(400.0, 2.0), point_state,
                          point_cfg.sampling.line_noise_std)
    assert abs(np.mean(v) - d.mean_n) < 4 * np.sqrt(d.var_n / n_slots)
    assert abs(np.mean(k) - d.mean_k) < 4 * np.sqrt(d.var_k / n_slots)
    np.testing.assert_allclose(np.var(v, ddof=1), d.var_n, rtol=0.1)
    np.testing.assert_allclose(np.var(k, ddof=1), d.var_k, rtol=0.1)
    assert abs(np.corrcoef(k, v)[0, 1]) < 0.05


def test_decide_sorted_intervals_and_ties():
    v = np.asarray([4.0, 3.0, 2.0, 1.0])
    # thresholds at sums of adjacent outputs; ties go to the larger output
    cases = {8.0: 0, 7.0: 0, 6.9: 1, 5.0: 1, 4.9: 2, 3.0: 2, 2.9: 3, 0.0: 3}
    for t, want in cases.items():
        assert decide_sorted(t, v) == want
    np.testing.assert_array_equal(
        decide_sorted(np.asarray(list(cases)), v), list(cases.values()))


def test_mld_decides_true_symbol(cfg):
    c = design(DIAGONAL, 4, cfg)
    state = thevenin(cfg.receiver, 30.0)
    for i, sym in enumerate(c.symbols):
        d = line_distribution(sym, state, 0.1)
        line = DetectedLine(d.mean_k, d.mean_n)
        assert mld_decide(line, c, state) == i
        assert mld_decide(line, c, state, sigma=5.0) == i


def test_mld_tie_goes_to_larger_output(cfg):
    c = design(FIXED_RDA, 4, cfg)
    state = thevenin(cfg.receiver, 30.0)
    v = [line_distribution(s, state, 0.1).mean_n for s in c.symbols]
    for i in range(3):
        k_i = line_distribution(c.symbols[i], state, 0.1).mean_k
        # statistic lands exactly on the boundary between symbols i and i+1
        n_tie = v[i + 1]
        assert mld_decide(DetectedLine(k_i, n_tie), c, state) == i


def test_mld_matches_brute_force(cfg):
    """Interval test equals the two-dimensional likelihood argmax."""
    c = design(DIAGONAL, 8, cfg)
    state = thevenin(cfg.receiver, 17.0)
    v = np.asarray([line_distribution(s, state, 0.1).mean_n for s in c.symbols])
    k = (v - state.v_eq) / state.r_eq
    rng = np.random.default_rng(5)
    sent = rng.integers(0, 8, 2000)
    k_hat = k[sent] + rng.normal(0.0, 0.1 / state.r_eq, sent.size)
    n_hat = v[sent] + rng.normal(0.0, 0.1, sent.size)
    cost = (state.r_eq * (k_hat[:, None] - k[None, :])) ** 2 \
        + (n_hat[:, None] - v[None, :]) ** 2
    brute = np.argmin(cost, axis=1)
    got = np.asarray([mld_decide(DetectedLine(kh, nh), c, state)
                      for kh, nh in zip(k_hat, n_hat)])
    np.testing.assert_array_equal(got, brute)


def test_binary_error_prob_values():
    # the 0.2 V gap carries the subtraction noise of its 400 V operands
    np.testing.assert_allclose(binary_error_prob(400.2, 400.0, 0.1),
                               Q_SQRT2, rtol=1e-11)
    assert binary_error_prob(400.2, 400.0, 0.0) == 0.0
    assert binary_error_prob(400.0, 400.0, 0.0) == 0.5
    with pytest.raises(ValueError):
        binary_error_prob(1.0, 0.0, -0.1)
    out = binary_error_prob(np.asarray([1.0, 2.0]), 0.0, 1.0)
    assert out.shape == (2,)


def test_conditional_ser_gap_oracle(point_cfg):
    c = gap_constellation(point_cfg)
    got = conditional_ser(c, point_cfg, 10.0, sigma=0.1)
    np.testing.assert_allclose(got, GAP_SER_ORACLE, rtol=1e-12)
    # agrees with the 6-decimal reference figure at its printed precision
    np.testing.assert_allclose(got, 0.067074, atol=1e-6)


def test_conditional_ser_uses_config_noise(cfg):
    c = design(DIAGONAL, 4, cfg)
    assert conditional_ser(c, cfg, 20.0) == conditional_ser(c, cfg, 20.0, sigma=0.1)


def test_conditional_ser_zero_noise(cfg):
    c = design(DIAGONAL, 4, cfg)
    assert conditional_ser(c, cfg, 20.0, sigma=0.0) == 0.0
    r = np.asarray([8.0, 20.0, 60.0])
    np.testing.assert_array_equal(conditional_ser(c, cfg, r, sigma=0.0),
                                  np.zeros(3))


def test_conditional_ser_vectorizes(cfg):
    c = design(FIXED_VA, 4, cfg)
    r = np.linspace(6.0, 90.0, 7)
    vec = conditional_ser(c, cfg, r)
    assert vec.shape == (7,)
    for i, ri in enumerate(r):
        assert vec[i] == conditional_ser(c, cfg, float(ri))


@pytest.mark.parametrize("family", [FIXED_VA, FIXED_RDA, DIAGONAL])
def test_average_ser_regression(cfg, family):
    c = design(family, 4, cfg)
    np.testing.assert_allclose(average_ser(c, cfg), AVG_SER_M4[family],
                               rtol=1e-9)


def test_average_ser_against_trapezoid(cfg):
    """Independent check: dense trapezoid over the load density."""
    c = design(DIAGONAL, 4, cfg)
    r = np.linspace(cfg.load.r_min, cfg.load.r_max, 200_001)
    p = conditional_ser(c, cfg, r)
    ref = np.trapezoid(p, r) / (cfg.load.r_max - cfg.load.r_min)
    np.testing.assert_allclose(average_ser(c, cfg), ref, rtol=1e-6)


def test_average_ser_point_load(point_cfg):
    c = gap_constellation(point_cfg)
    assert average_ser(c, point_cfg, sigma=0.1) == \
        conditional_ser(c, point_cfg, 10.0, sigma=0.1)


def test_average_ser_interval_additivity(cfg):
    c = design(DIAGONAL, 4, cfg)
    lo, mid, hi = cfg.load.r_min, 40.0, cfg.load.r_max
    whole = average_ser_interval(c, cfg, lo, hi)
    parts = ((mid - lo) * average_ser_interval(c, cfg, lo, mid)
             + (hi - mid) * average_ser_interval(c, cfg, mid, hi)) / (hi - lo)
    np.testing.assert_allclose(whole, parts, rtol=1e-10)


def test_estimate_channel_state_exact(point_cfg):
    rx = point_cfg.receiver
    pairs = [(VscParams(400.0, 2.0), bus_voltage(VscParams(400.0, 2.0), rx, 10.0)),
             (VscParams(398.0, 2.0), bus_voltage(VscParams(398.0, 2.0), rx, 10.0))]
    state = estimate_channel_state(pairs)
    np.testing.assert_allclose(state.v_eq, 1000.0 / 3.0, rtol=1e-12)
    np.testing.assert_allclose(state.r_eq, 5.0 / 3.0, rtol=1e-12)


def test_estimate_channel_state_overdetermined(cfg):
    rx = cfg.receiver
    syms = [VscParams(400.0, 2.0), VscParams(398.0, 2.0), VscParams(400.0, 2.5)]
    pairs = [(s, bus_voltage(s, rx, 35.0)) for s in syms]
    state = estimate_channel_state(pairs)
    truth = thevenin(rx, 35.0)
    np.testing.assert_allclose(state.v_eq, truth.v_eq, rtol=1e-10)
    np.testing.assert_allclose(state.r_eq, truth.r_eq, rtol=1e-10)


def test_estimate_channel_state_degenerate():
    with pytest.raises(DegenerateTrainingError):
        estimate_channel_state([(VscParams(400.0, 2.0), 350.0)])
    with pytest.raises(DegenerateTrainingError):
        estimate_channel_state([(VscParams(400.0, 2.0), 350.0),
                                (VscParams(400.0, 2.0), 350.0)])


def test_estimate_channel_state_nonphysical():
    """Measurements rising with a falling setpoint solve to u < 0."""
    with pytest.raises(NonPhysicalEstimateError):
        estimate_channel_state([(VscParams(400.0, 2.0), 300.0),
                                (VscParams(398.0, 2.0), 310.0)])
