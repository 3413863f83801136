import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.stats import truncnorm

from spinwalk.devices import (
    DeviceDomainError,
    FtjParams,
    FtjState,
    MtjParams,
    MtjState,
    VariationSpec,
    ftj_apply_pulse,
    ftj_fraction_for_resistance,
    ftj_resistance,
    ftj_switching_time,
    mtj_mean_switching_time,
    mtj_resistance,
    mtj_sample_switch_time,
    mtj_switching_probability,
    perturb,
    sample_device_batch,
    sample_device_instance,
    truncated_normal,
)

# DERIVED: evaluated with mpmath at 30 digits
TAU_AT_070 = 3.65982344436779877525947658992e-08  # tau0*exp(40*0.3**2)
FTJ_TAU_2V = 2.09918285228271988523074016911e-09


def test_mtj_resistances():
    p = MtjParams()
    assert mtj_resistance(MtjState.PARALLEL, p) == 5e3
    assert mtj_resistance(MtjState.ANTIPARALLEL, p) == pytest.approx(15e3)


def test_mean_switching_time_oracle():
    assert mtj_mean_switching_time(MtjParams(), 0.7 * 50e-6) == pytest.approx(TAU_AT_070, rel=1e-12)


@pytest.mark.parametrize("i", [0.0, -1e-6, 50e-6, 60e-6])
def test_current_outside_thermal_regime(i):
    with pytest.raises(DeviceDomainError):
        mtj_mean_switching_time(MtjParams(), i)


def test_negative_pulse_rejected():
    with pytest.raises(DeviceDomainError):
        mtj_switching_probability(MtjParams(), 30e-6, -1e-9)


@given(st.floats(0.05, 0.99), st.floats(0.05, 0.99), st.floats(0.0, 1e-7), st.floats(0.0, 1e-7))
def test_switching_probability_monotone(a, b, t1, t2):
    p = MtjParams()
    lo, hi = sorted((a, b))
    t_lo, t_hi = sorted((t1, t2))
    assert mtj_switching_probability(p, lo * p.i_c0, t_hi) <= mtj_switching_probability(p, hi * p.i_c0, t_hi)
    assert mtj_switching_probability(p, hi * p.i_c0, t_lo) <= mtj_switching_probability(p, hi * p.i_c0, t_hi)
    assert 0.0 <= mtj_switching_probability(p, lo * p.i_c0, t_lo) <= 1.0


def test_switching_probability_array_form():
    p = MtjParams()
    i = np.array([0.6, 0.7, 0.8]) * p.i_c0
    got = mtj_switching_probability(p, i, 5e-9)
    want = 1 - np.exp(-5e-9 / (p.tau0 * np.exp(p.delta * (1 - i / p.i_c0) ** 2)))
    np.testing.assert_allclose(got, want, rtol=1e-13)


def test_sampled_switch_times_follow_exponential(rng):
    p = MtjParams()
    i = 0.72 * p.i_c0
    t = mtj_sample_switch_time(p, i, rng, size=200_000)
    tau = mtj_mean_switching_time(p, i)
    assert abs(t.mean() / tau - 1) < 5 / math.sqrt(t.size)
    frac = np.mean(t < 5e-9)
    want = mtj_switching_probability(p, i, 5e-9)
    assert abs(frac - want) < 4 * math.sqrt(want * (1 - want) / t.size)


def test_ftj_creep_time_oracle():
    assert ftj_switching_time(FtjParams(), 2.0) == pytest.approx(FTJ_TAU_2V, rel=1e-9)
    assert ftj_switching_time(FtjParams(), -2.0) == ftj_switching_time(FtjParams(), 2.0)
    assert ftj_switching_time(FtjParams(), 0.0) == math.inf


def test_ftj_read_disturb_negligible():
    p = FtjParams()
    st0 = FtjState(0.3)
    s = ftj_apply_pulse(st0, p, 0.2, 1e6 * 5e-9)
    assert abs(s.s - st0.s) < 1e-6


def test_ftj_resistance_endpoints():
    p = FtjParams()
    assert ftj_resistance(FtjState(0.0), p) == pytest.approx(p.r_off)
    assert ftj_resistance(FtjState(1.0), p) == pytest.approx(p.r_on)


@given(st.floats(0.0, 1.0))
def test_fraction_resistance_roundtrip(s):
    p = FtjParams()
    assert ftj_fraction_for_resistance(p, ftj_resistance(FtjState(s), p)) == pytest.approx(s, abs=1e-12)


@given(st.floats(0.0, 1.0), st.floats(-3.0, 3.0), st.floats(0.0, 1e-7))
def test_pulse_direction_and_bounds(s, v, t):
    p = FtjParams()
    new = ftj_apply_pulse(FtjState(s), p, v, t).s
    assert 0.0 <= new <= 1.0
    if v > 0:
        assert new >= s
    elif v < 0:
        assert new <= s


def test_ftj_state_bounds():
    with pytest.raises(ValueError):
        FtjState(1.5)


def test_truncated_normal_moments(rng):
    z = truncated_normal(rng, 400_000)
    assert np.abs(z).max() <= 3.0
    # DERIVED oracle: scipy's truncated normal on [-3, 3]
    assert abs(z.var() - truncnorm.var(-3, 3)) < 0.01
    assert abs(z.mean()) < 0.01


def test_perturb_sensitivity_map():
    nom = MtjParams()
    p = perturb(nom, 0.039, 0.0255, 0.06)
    assert p.delta == pytest.approx(40 * (1.3 + 0.039) / 1.3)
    assert p.r_p == pytest.approx(5e3 * (1 + 2 * 0.0255 / 0.85))
    assert p.tmr == pytest.approx(2.06)
    assert p.cd == nom.cd


def test_zero_variation_returns_nominal(rng):
    vs = VariationSpec.none()
    assert vs.is_zero
    assert sample_device_instance(MtjParams(), vs, rng) == MtjParams()
    assert sample_device_batch(MtjParams(), vs, rng, 4) == [MtjParams()] * 4


def test_variation_stays_within_three_sigma(rng):
    vs = VariationSpec()
    devs = sample_device_batch(MtjParams(), vs, rng, 5000)
    t_fl = np.array([d.t_fl for d in devs])
    assert np.all(np.abs(t_fl - 1.3) <= 3 * vs.sigma_t_fl + 1e-12)
    assert abs(t_fl.std() / vs.sigma_t_fl - math.sqrt(truncnorm.var(-3, 3))) < 0.05


def test_invalid_params():
    with pytest.raises(ValueError):
        MtjParams(delta=-1)
    with pytest.raises(ValueError):
        VariationSpec(family="uniform")
