"""Behavioral device models: stochastic STT-MTJ switching and FTJ domain kinetics.

MTJ switching follows the thermally activated law

    P(I, t) = 1 - exp(-t / tau(I)),    tau(I) = tau0 * exp(delta * (1 - I/I_c0)**2)

valid for 0 < I < I_c0. The FTJ is a two-domain parallel-conductance model whose
switched (down-polarized) fraction ``s`` relaxes under a creep-law time constant.

Geometric lengths are in nm, everything else in SI units.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np

K_B_EV = 8.617333262e-5  # Boltzmann constant, eV/K


class DeviceDomainError(ValueError):
    """Raised when a device model is evaluated outside its validity regime."""


@dataclass(frozen=True)
class MtjParams:
    t_fl: float = 1.3  # free-layer thickness, nm
    cd: float = 32.0  # critical diameter, nm (stored, not used by the switching law)
    t_tb: float = 0.85  # tunnel-barrier thickness, nm
    tmr: float = 2.0  # (R_AP - R_P) / R_P
    tau0: float = 1e-9  # attempt time, s
    delta: float = 40.0  # thermal stability factor
    i_c0: float = 50e-6  # critical current at 0 K, A
    r_p: float = 5e3  # parallel resistance, ohm

    def __post_init__(self):
        for name in ("t_fl", "cd", "t_tb", "tmr", "tau0", "delta", "i_c0", "r_p"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise ValueError(f"MtjParams.{name} must be positive and finite, got {value!r}")

    @property
    def r_ap(self) -> float:
        return self.r_p * (1.0 + self.tmr)


class MtjState(enum.Enum):
    PARALLEL = "P"
    ANTIPARALLEL = "AP"


def mtj_resistance(state: MtjState, p: MtjParams) -> float:
    return p.r_ap if state is MtjState.ANTIPARALLEL else p.r_p


@dataclass(frozen=True)
class FtjParams:
    t_b: float = 2.0  # barrier thickness, nm
    r: float = 175.0  # junction radius, nm
    u_n: float = 0.67  # nucleation creep barrier, eV
    u_p: float = 0.52  # domain-wall creep barrier, eV
    tau0_n: float = 2.8e-15  # nucleation attempt time, s
    tau0_p: float = 9e-14  # domain-wall attempt time, s
    phi1_off: float = 0.678  # V
    phi1_on: float = 0.53  # V
    phi2_off: float = 0.978  # V
    phi2_on: float = 1.014  # V
    m_off: float = 0.931  # units of m_e
    m_on: float = 0.437  # units of m_e
    r_on: float = 10e3  # fully switched resistance, ohm
    r_off: float = 100e3  # unswitched resistance, ohm
    v_c: float = 1.0  # creep reference voltage, V
    temperature: float = 300.0  # K

    def __post_init__(self):
        if not (self.r_off > self.r_on > 0):
            raise ValueError("FtjParams requires r_off > r_on > 0")
        if not (self.u_n > 0 and self.u_p > 0):
            raise ValueError("FtjParams creep barriers must be positive")
        if not self.temperature > 0:
            raise ValueError("FtjParams.temperature must be positive")
        if not (self.tau0_n > 0 and self.tau0_p > 0 and self.v_c > 0):
            raise ValueError("FtjParams attempt times and v_c must be positive")


@dataclass(frozen=True)
class FtjState:
    s: float = 0.0  # switched-domain fraction

    def __post_init__(self):
        if not 0.0 <= self.s <= 1.0:
            raise ValueError(f"domain fraction must lie in [0, 1], got {self.s!r}")


@dataclass(frozen=True)
class VariationSpec:
    """Per-device process spread. Sigmas are absolute (nm for thicknesses)."""

    sigma_t_fl: float = 0.03 * 1.3
    sigma_t_tb: float = 0.03 * 0.85
    sigma_tmr: float = 0.03 * 2.0
    family: str = "truncated_normal"

    def __post_init__(self):
        for name in ("sigma_t_fl", "sigma_t_tb", "sigma_tmr"):
            value = getattr(self, name)
            if not (value >= 0 and math.isfinite(value)):
                raise ValueError(f"VariationSpec.{name} must be finite and >= 0, got {value!r}")
        if self.family not in ("truncated_normal", "normal"):
            raise ValueError(f"unknown variation family {self.family!r}")

    @classmethod
    def none(cls) -> "VariationSpec":
        return cls(0.0, 0.0, 0.0)

    @property
    def is_zero(self) -> bool:
        return self.sigma_t_fl == 0 and self.sigma_t_tb == 0 and self.sigma_tmr == 0


# --------------------------------------------------------------------------- MTJ


def _check_current(p: MtjParams, i):
    i = np.asarray(i, dtype=float)
    if np.any(i <= 0) or np.any(i >= p.i_c0):
        raise DeviceDomainError(
            f"drive current must satisfy 0 < i < i_c0 = {p.i_c0:g} A (thermally activated regime)"
        )
    return i


def mtj_mean_switching_time(p: MtjParams, i):
    """Mean switching time tau(i) in seconds. Accepts scalars or arrays."""
    i = _check_current(p, i)
    tau = p.tau0 * np.exp(p.delta * (1.0 - i / p.i_c0) ** 2)
    return float(tau) if tau.ndim == 0 else tau


def mtj_switching_probability(p: MtjParams, i, t):
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise DeviceDomainError("pulse duration must be >= 0")
    prob = -np.expm1(-t / mtj_mean_switching_time(p, i))
    return float(prob) if np.ndim(prob) == 0 else prob


def mtj_sample_switch_time(p: MtjParams, i: float, rng: np.random.Generator, size=None):
    """Exponential switching-time draw(s) with mean tau(i)."""
    return rng.exponential(mtj_mean_switching_time(p, i), size=size)


# --------------------------------------------------------------------------- FTJ


def ftj_switching_time(p: FtjParams, v: float) -> float:
    """Creep-law time constant at |v|; infinite for v == 0."""
    v = abs(v)
    if v == 0:
        return math.inf
    exponent = (p.u_p / (K_B_EV * p.temperature)) * (p.v_c / v)
    if exponent > 700:
        return math.inf
    return p.tau0_p * math.exp(exponent)


def ftj_apply_pulse(st: FtjState, p: FtjParams, v: float, t: float) -> FtjState:
    """Relax the switched fraction under a rectangular pulse of amplitude v for t seconds."""
    if t < 0:
        raise DeviceDomainError("pulse duration must be >= 0")
    if v == 0 or t == 0:
        return st
    gain = -math.expm1(-t / ftj_switching_time(p, v))  # 1 - exp(-t/tau), exact for tiny t
    if v > 0:
        s = st.s + (1.0 - st.s) * gain
    else:
        s = st.s - st.s * gain
    return FtjState(min(1.0, max(0.0, s)))


def ftj_resistance(st: FtjState, p: FtjParams) -> float:
    return 1.0 / (st.s / p.r_on + (1.0 - st.s) / p.r_off)


def ftj_fraction_for_resistance(p: FtjParams, r: float) -> float:
    """Inverse of ``ftj_resistance``."""
    return (1.0 / r - 1.0 / p.r_off) / (1.0 / p.r_on - 1.0 / p.r_off)


# --------------------------------------------------------------------------- variation


def truncated_normal(rng: np.random.Generator, size=None, bound: float = 3.0):
    """Standard normal draws rejected outside +-bound."""
    z = rng.standard_normal(size)
    if np.ndim(z) == 0:
        while abs(z) > bound:
            z = rng.standard_normal()
        return float(z)
    bad = np.abs(z) > bound
    while bad.any():
        z[bad] = rng.standard_normal(int(bad.sum()))
        bad = np.abs(z) > bound
    return z


def _draw(rng, vs: VariationSpec, size=None):
    if vs.family == "normal":
        return rng.standard_normal(size)
    return truncated_normal(rng, size)


def perturb(nominal: MtjParams, d_t_fl: float, d_t_tb: float, d_tmr: float) -> MtjParams:
    """Apply thickness/TMR offsets and propagate them through the sensitivity map.

    delta scales with free-layer volume (linear in t_fl at fixed diameter) and r_p
    follows the linearized tunneling dependence dR/R = 2 dt_tb/t_tb.
    """
    t_fl = nominal.t_fl + d_t_fl
    t_tb = nominal.t_tb + d_t_tb
    return replace(
        nominal,
        t_fl=t_fl,
        t_tb=t_tb,
        tmr=nominal.tmr + d_tmr,
        delta=nominal.delta * t_fl / nominal.t_fl,
        r_p=nominal.r_p * (1.0 + 2.0 * d_t_tb / nominal.t_tb),
    )


def sample_device_instance(nominal: MtjParams, vs: VariationSpec, rng: np.random.Generator) -> MtjParams:
    if vs.is_zero:
        return nominal
    z = _draw(rng, vs, 3)
    return perturb(nominal, vs.sigma_t_fl * z[0], vs.sigma_t_tb * z[1], vs.sigma_tmr * z[2])


def sample_device_batch(nominal: MtjParams, vs: VariationSpec, rng: np.random.Generator, n: int) -> list[MtjParams]:
    """``n`` independent instances; same law as repeated ``sample_device_instance``."""
    if vs.is_zero:
        return [nominal] * n
    z = _draw(rng, vs, (n, 3))
    return [perturb(nominal, vs.sigma_t_fl * a, vs.sigma_t_tb * b, vs.sigma_tmr * c) for a, b, c in z]
