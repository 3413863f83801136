import csv
import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, strategies as st

from spinwalk.cells import (
    CalibrationError,
    CellCircuit,
    CellStateError,
    DeviceArrays,
    HardwareConfig,
    HistoryConfig,
    Neuron,
    Outcome,
    ProgrammingRangeError,
    WeightNoiseModel,
    achievable_weights,
    activation_cycle,
    boundary_cycle,
    build_activation_history,
    build_cluster,
    calibrate_batch,
    calibrate_cluster,
    calibrate_drive,
    cell_probabilities,
    fresh_synapse,
    hardware_table,
    marginal_law,
    program_weights,
    programming_pulses,
    sample_weight_noise,
    simulate_cluster,
    stay_probability,
    synapse_output,
    synapse_program,
)
from spinwalk.chain import RightBoundary, build_chain
from spinwalk.devices import FtjParams, MtjParams, MtjState, VariationSpec, sample_device_batch

# DERIVED: mpmath closed forms at 30 digits
I_RATIO_TWO = 0.737228046037863165725458089754  # two series MTJs, Ps = 0.5317, 5 ns window
I_RATIO_ONE = 0.772578760281541145624462121429  # single MTJ, same target
W_TWO = 0.506844281651030926436252436706  # i * (2 r_p + r_access) / v_read
W_RANGE = (0.240253073352042147999877060493, 0.759746926647957852000122939507)

CIRC = CellCircuit()
NOMINAL = MtjParams()


def test_achievable_weight_range():
    lo, hi = achievable_weights(FtjParams(), CIRC.r_series)
    assert lo == pytest.approx(W_RANGE[0], rel=1e-12)
    assert hi == pytest.approx(W_RANGE[1], rel=1e-12)


def test_calibrate_drive_oracle():
    i, w = calibrate_drive(0.5317, NOMINAL, CIRC.pulse_width, CIRC)
    assert i / NOMINAL.i_c0 == pytest.approx(I_RATIO_TWO, rel=1e-12)
    assert w == pytest.approx(W_TWO, rel=1e-12)
    i1, _ = calibrate_drive(0.5317, NOMINAL, CIRC.pulse_width, CIRC, n_series=1)
    assert i1 / NOMINAL.i_c0 == pytest.approx(I_RATIO_ONE, rel=1e-12)


def test_calibrated_drive_hits_target():
    i, _ = calibrate_drive(0.5317, NOMINAL, CIRC.pulse_width, CIRC)
    assert stay_probability(i, [NOMINAL, NOMINAL], CIRC.pulse_width) == pytest.approx(0.5317, rel=1e-12)


@pytest.mark.parametrize("ps", [0.0, 1.0, 1e-300])
def test_calibration_unreachable(ps):
    with pytest.raises(CalibrationError):
        calibrate_drive(ps, NOMINAL, CIRC.pulse_width, CIRC)


def test_numeric_calibration_matches_closed_form():
    i, w = calibrate_cluster(0.5317, [NOMINAL, NOMINAL], CIRC)
    i0, w0 = calibrate_drive(0.5317, NOMINAL, CIRC.pulse_width, CIRC)
    assert i == pytest.approx(i0, rel=1e-12)
    assert w == pytest.approx(w0, rel=1e-12)


def test_batch_calibration_matches_scalar(rng):
    devs = sample_device_batch(NOMINAL, VariationSpec(), rng, 40)
    rows = [devs[k:k + 2] for k in range(0, 40, 2)]
    i, w = calibrate_batch(0.5317, DeviceArrays.from_params(rows), CIRC)
    for row, ib, wb in zip(rows, i, w):
        ii, ww = calibrate_cluster(0.5317, row, CIRC)
        assert ib == pytest.approx(ii, rel=1e-12)
        assert wb == pytest.approx(ww, rel=1e-12)


@given(st.floats(0.2402531, 0.7597469))
def test_programming_reaches_target(w):
    s = synapse_program(fresh_synapse(), w, CIRC)
    assert abs(s.weight - w) <= CIRC.weight_tolerance
    assert 0 < s.weight < 1


def test_programming_pulse_train_bounded():
    s = fresh_synapse()
    pulses = programming_pulses(s, 0.7, CIRC)
    assert pulses and all(0 < t <= CIRC.max_program_pulse for _, t in pulses)
    assert all(v == CIRC.program_voltage for v, _ in pulses)
    assert programming_pulses(synapse_program(s, 0.7, CIRC), 0.7, CIRC) == []


def test_programming_can_lower_the_weight():
    s = synapse_program(fresh_synapse(), 0.7, CIRC)
    s2 = synapse_program(s, 0.3, CIRC)
    assert s2.weight == pytest.approx(0.3, abs=CIRC.weight_tolerance)


@pytest.mark.parametrize("w", [0.1, 0.8])
def test_programming_out_of_range(w):
    with pytest.raises(ProgrammingRangeError):
        programming_pulses(fresh_synapse(), w, CIRC)
    with pytest.raises(ProgrammingRangeError):
        program_weights(np.array([w]))


def test_vectorized_programming_matches_pulses():
    target = np.array([0.3, 0.5068, 0.7])
    got = program_weights(target)
    want = [synapse_program(fresh_synapse(), w, CIRC).weight for w in target]
    np.testing.assert_allclose(got, want, atol=CIRC.weight_tolerance)


def test_synapse_output():
    s = synapse_program(fresh_synapse(), 0.5, CIRC)
    assert synapse_output(s, 0.8) == pytest.approx(0.8 * s.weight)
    with pytest.raises(ValueError):
        synapse_output(s, -0.1)


def test_nominal_cluster_law_is_the_target():
    cl = build_cluster(5, [NOMINAL] * 10, 0.5317)
    pl, ps, pr = cell_probabilities(cl, WeightNoiseModel.zero())
    assert ps == pytest.approx(0.5317, abs=2 * CIRC.weight_tolerance)
    assert pl == pytest.approx(pr, rel=1e-12)
    assert pl + ps + pr == pytest.approx(1.0)


def test_edge_cluster_only_moves_inward():
    devs = [NOMINAL] * 10
    left = cell_probabilities(build_cluster(0, devs, 0.5317), WeightNoiseModel())
    right = cell_probabilities(build_cluster(9, devs, 0.5317), WeightNoiseModel())
    assert left[0] == 0.0 and left[2] > 0
    assert right[2] == 0.0 and right[0] > 0


def test_noise_lowers_the_switching_rate():
    # a mean-negative multiplicative shift plus a convex rate curve
    cl = build_cluster(5, [NOMINAL] * 10, 0.5317)
    quiet = cell_probabilities(cl, WeightNoiseModel.zero())[1]
    noisy = cell_probabilities(cl, WeightNoiseModel())[1]
    assert noisy > quiet


def test_simulated_cluster_matches_law(rng):
    cl = build_cluster(5, [NOMINAL] * 10, 0.5317)
    noise = WeightNoiseModel()
    n = 100_000
    moves = simulate_cluster(cl, noise, rng, n)
    law = cell_probabilities(cl, noise)
    for k, p in zip((-1, 0, 1), law):
        assert abs(np.mean(moves == k) - p) < 4 * math.sqrt(p * (1 - p) / n)


def test_noise_quadrature_moments():
    m = WeightNoiseModel()
    f, w = m.quadrature()
    assert w.sum() == pytest.approx(1.0)
    assert f @ w == pytest.approx(1 + m.shift, abs=1e-12)
    from scipy.stats import truncnorm
    var = (f - f @ w) ** 2 @ w
    assert var == pytest.approx(m.variance * truncnorm.var(-3, 3), rel=1e-6)


def test_noise_samples_and_table_override(rng):
    m = WeightNoiseModel()
    f = sample_weight_noise(m, rng, size=200_000)
    assert abs(f.mean() - (1 + m.shift)) < 5e-5
    table = WeightNoiseModel(samples=(0.9, 1.1))
    assert set(np.unique(sample_weight_noise(table, rng, size=100))) <= {0.9, 1.1}
    assert WeightNoiseModel.zero().is_zero
    assert sample_weight_noise(WeightNoiseModel.zero(), rng) == 1.0


def test_activation_cycle_protocol(rng):
    syn = synapse_program(fresh_synapse(), W_TWO, CIRC)
    for _ in range(200):
        left, center, right = Neuron(0), Neuron(1), Neuron(2)
        center.activate()
        out = activation_cycle(left, center, right, syn, WeightNoiseModel(), rng)
        active = [n.active for n in (left, center, right)]
        assert sum(active) == 1
        assert out.energy_j > 0 and out.time_s > 0
        expected = {Outcome.MOVED_LEFT: 0, Outcome.STAYED: 1, Outcome.MOVED_RIGHT: 2}[out.result]
        assert active[expected]
        if out.result is not Outcome.STAYED:
            assert center.state is MtjState.PARALLEL


def test_boundary_cycle_never_moves_left(rng):
    _, w = calibrate_drive(0.5317, NOMINAL, CIRC.pulse_width, CIRC, n_series=1)
    syn = synapse_program(fresh_synapse(), w, CIRC)
    results = set()
    for _ in range(300):
        c, r = Neuron(0), Neuron(1)
        c.activate()
        out = boundary_cycle(c, r, syn, WeightNoiseModel(), rng)
        results.add(out.result)
        assert c.active + r.active == 1
    assert Outcome.MOVED_LEFT not in results


def test_cycle_state_preconditions(rng):
    syn = fresh_synapse()
    with pytest.raises(CellStateError):
        activation_cycle(Neuron(0), Neuron(1), Neuron(2), syn, WeightNoiseModel(), rng)
    c, r = Neuron(0), Neuron(2)
    c.activate()
    with pytest.raises(CellStateError):
        boundary_cycle(c, r, syn, WeightNoiseModel(), rng)


def test_ideal_hardware_reproduces_software_table(rng):
    hw = HardwareConfig(variation=VariationSpec.none(), noise=WeightNoiseModel.zero())
    chain = build_chain(2.0, 50, 0.00038, RightBoundary.REFLECTING)
    for sampling in ("per_activation", "per_position"):
        tab = hardware_table(50, chain.ps, replace(hw, device_sampling=sampling), rng, absorbing_right=False)
        for got, want in zip(tab, chain.probability_table()):
            np.testing.assert_allclose(got, want, atol=1e-12)


def test_per_device_calibration_removes_process_variation(rng):
    # with the drive calibrated against each instance, every cluster hits the target
    chain = build_chain(2.0, 50, 0.00038)
    hw = HardwareConfig(noise=WeightNoiseModel.zero(), device_sampling="per_position")
    pl, ps, pr = hardware_table(50, chain.ps, hw, rng, absorbing_right=True)
    np.testing.assert_allclose(ps[:-1], chain.ps, atol=1e-12)
    assert np.all(np.abs(pl[1:-1] - pr[1:-1]) > 0)  # the race itself is asymmetric per instance


def test_nominal_calibration_spreads_the_law(rng):
    hw = HardwareConfig(noise=WeightNoiseModel.zero(), device_sampling="per_position", calibration="nominal")
    _, ps, _ = hardware_table(50, 0.5318, hw, rng, absorbing_right=True)
    assert ps[:-1].std() > 1e-3


def test_marginal_law_history_agrees_with_analytic(rng):
    hw = HardwareConfig(history_trials=200_000)
    (al, as_, ar), (es, em) = marginal_law(hw, 0.5318, rng)
    (hl, hs, hr), (fs, fm) = marginal_law(replace(hw, table_source="history"), 0.5318, rng)
    n = hw.history_trials
    for a, h in ((al, hl), (as_, hs), (ar, hr), (es, fs)):
        assert abs(a - h) < 4.5 * math.sqrt(a * (1 - a) / n) + 2e-3
    assert al == ar


def test_activation_history_policies(rng, tmp_path):
    hw = HardwareConfig(noise=WeightNoiseModel.zero())
    for policy in ("per_position", "per_trial"):
        h = build_activation_history(HistoryConfig(hw, 0.5317, 10, policy), 5000, rng)
        assert len(h) == 5000
        probs = h.cell_probabilities()
        assert probs[0, 0] == 0 and probs[-1, 2] == 0
        np.testing.assert_allclose(probs.sum(axis=1), 1.0)
        assert abs(np.mean(h.move == 0) - 0.5317) < 0.03
    path = tmp_path / "hist.csv"
    h.to_csv(path, header=["seed=1"])
    lines = path.read_text().splitlines()
    assert lines[0] == "# seed=1"
    rows = list(csv.DictReader(lines[1:]))
    assert len(rows) == 5000
    assert set(rows[0]) == {"trial_id", "start_index", "outcome", "ps_empirical", "device_seed"}
    assert {r["outcome"] for r in rows} <= {"L", "S", "R"}


def test_history_per_trial_is_seed_reproducible():
    cfg = HistoryConfig(HardwareConfig(), 0.5317, 8, "per_trial")
    a = build_activation_history(cfg, 500, np.random.default_rng(3))
    b = build_activation_history(cfg, 500, np.random.default_rng(3))
    np.testing.assert_array_equal(a.move, b.move)
    np.testing.assert_array_equal(a.device_seed, b.device_seed)


def test_config_validation():
    with pytest.raises(ValueError):
        HardwareConfig(table_source="spice")
    with pytest.raises(ValueError):
        HardwareConfig(device_sampling="per_wafer")
    with pytest.raises(ValueError):
        CellCircuit(pulse_width=0)
    with pytest.raises(ValueError):
        WeightNoiseModel(variance=-1)
