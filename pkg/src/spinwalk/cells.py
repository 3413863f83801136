"""Neuron and synapse cells and the activation cycle that moves a walker.

A walker sits on the single active neuron (MTJ in AP). Each cycle the active
neuron's synapse scales the read voltage by its weight; the resulting write
voltage drives one current through the destination MTJs in series. Each MTJ
draws an exponential switching time, the earliest one inside the write window
wins and the current monitor freezes the other (winner-takes-all), then the
source neuron resets (self-inhibition).
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

from .devices import (
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
    sample_device_batch,
    truncated_normal,
)


class CalibrationError(ValueError):
    pass


class ProgrammingRangeError(ValueError):
    pass


class CellStateError(RuntimeError):
    pass


@dataclass(frozen=True)
class CellCircuit:
    """Electrical and timing constants shared by every cell."""

    v_read: float = 0.8  # V, sense-amplifier output of an active neuron
    r_access: float = 1e3  # ohm, access transistors in the write path
    r_series: float = math.sqrt(10e3 * 100e3)  # ohm, divider resistor of the synapse
    pulse_width: float = 5e-9  # s, write window
    cycle_time: float = 10e-9  # s, charged per activation cycle
    energy_per_cycle: float = 1.451e-12  # J, charged per activation cycle
    program_voltage: float = 2.0  # V
    max_program_pulse: float = 10e-9  # s
    weight_tolerance: float = 1e-4

    def __post_init__(self):
        for name in ("v_read", "r_access", "r_series", "pulse_width", "cycle_time",
                     "energy_per_cycle", "program_voltage", "max_program_pulse", "weight_tolerance"):
            if not getattr(self, name) > 0:
                raise ValueError(f"CellCircuit.{name} must be positive")


# --------------------------------------------------------------------------- synapse


@dataclass(frozen=True)
class Synapse:
    ftj: FtjState
    params: FtjParams
    r_series: float

    @property
    def resistance(self) -> float:
        return ftj_resistance(self.ftj, self.params)

    @property
    def weight(self) -> float:
        r = self.resistance
        return r / (r + self.r_series)


def achievable_weights(params: FtjParams, r_series: float) -> tuple[float, float]:
    return params.r_on / (params.r_on + r_series), params.r_off / (params.r_off + r_series)


def synapse_output(s: Synapse, vin: float) -> float:
    if vin < 0:
        raise ValueError("synapse input voltage must be >= 0")
    return s.weight * vin


def programming_pulses(s: Synapse, target_w: float, circuit: CellCircuit = CellCircuit()) -> list[tuple[float, float]]:
    """Pulse train (volts, seconds) that moves ``s`` to ``target_w``.

    Durations are obtained by inverting the first-order domain kinetics, split
    into pulses no longer than ``circuit.max_program_pulse``.
    """
    lo, hi = achievable_weights(s.params, s.r_series)
    if not lo <= target_w <= hi:
        raise ProgrammingRangeError(f"target weight {target_w!r} outside achievable interval [{lo:.6g}, {hi:.6g}]")
    if abs(s.weight - target_w) <= circuit.weight_tolerance:
        return []
    r_target = s.r_series * target_w / (1.0 - target_w)
    s_goal = min(max(ftj_fraction_for_resistance(s.params, r_target), 1e-15), 1.0 - 1e-15)
    v = circuit.program_voltage if s_goal > s.ftj.s else -circuit.program_voltage
    tau = ftj_switching_time(s.params, v)
    if v > 0:
        total = tau * math.log((1.0 - s.ftj.s) / (1.0 - s_goal))
    else:
        total = tau * math.log(s.ftj.s / s_goal)
    n_full, rest = divmod(total, circuit.max_program_pulse)
    pulses = [(v, circuit.max_program_pulse)] * int(n_full)
    if rest > 0:
        pulses.append((v, rest))
    return pulses


def synapse_program(s: Synapse, target_w: float, circuit: CellCircuit = CellCircuit()) -> Synapse:
    for _ in range(8):
        pulses = programming_pulses(s, target_w, circuit)
        if not pulses:
            return s
        ftj = s.ftj
        for v, t in pulses:
            ftj = ftj_apply_pulse(ftj, s.params, v, t)
        s = Synapse(ftj, s.params, s.r_series)
    if abs(s.weight - target_w) > circuit.weight_tolerance:
        raise ProgrammingRangeError(f"programming did not converge to {target_w!r}")
    return s


def fresh_synapse(params: FtjParams = FtjParams(), circuit: CellCircuit = CellCircuit()) -> Synapse:
    return Synapse(FtjState(0.0), params, circuit.r_series)


# --------------------------------------------------------------------------- neuron


class Outcome(enum.Enum):
    MOVED_LEFT = "L"
    MOVED_RIGHT = "R"
    STAYED = "S"


@dataclass
class Neuron:
    index: int
    params: MtjParams = field(default_factory=MtjParams)
    state: MtjState = MtjState.PARALLEL

    @property
    def active(self) -> bool:
        return self.state is MtjState.ANTIPARALLEL

    def activate(self):
        self.state = MtjState.ANTIPARALLEL

    def reset(self):
        self.state = MtjState.PARALLEL


@dataclass(frozen=True)
class ActivationOutcome:
    result: Outcome
    energy_j: float
    time_s: float


# --------------------------------------------------------------------------- weight noise


@dataclass(frozen=True)
class WeightNoiseModel:
    """Multiplicative factor on the synapse output voltage.

    ``variance`` is that of the underlying normal before +-3 sigma truncation.
    A non-empty ``samples`` table overrides the parametric family: factors are
    resampled from it with replacement.
    """

    shift: float = -0.0016
    variance: float = 1.0e-4
    family: str = "truncated_normal"
    samples: tuple[float, ...] = ()

    def __post_init__(self):
        if not (math.isfinite(self.shift) and math.isfinite(self.variance) and self.variance >= 0):
            raise ValueError("weight noise shift/variance must be finite, variance >= 0")
        if self.family not in ("truncated_normal", "normal"):
            raise ValueError(f"unknown weight noise family {self.family!r}")

    @classmethod
    def zero(cls) -> "WeightNoiseModel":
        return cls(0.0, 0.0)

    @property
    def is_zero(self) -> bool:
        return not self.samples and self.shift == 0 and self.variance == 0

    def quadrature(self, order: int = 64) -> tuple[np.ndarray, np.ndarray]:
        """Nodes (factors) and probability weights integrating against the noise law."""
        if self.samples:
            f = np.asarray(self.samples, dtype=float)
            return np.maximum(f, _MIN_FACTOR), np.full(f.size, 1.0 / f.size)
        if self.variance == 0:
            return np.array([max(1.0 + self.shift, _MIN_FACTOR)]), np.array([1.0])
        if self.family == "normal":
            z, w = np.polynomial.hermite_e.hermegauss(order)
        else:
            z, w = np.polynomial.legendre.leggauss(order)
            z = 3.0 * z
            w = w * np.exp(-0.5 * z * z)
        w = w / w.sum()
        return np.maximum(1.0 + self.shift + math.sqrt(self.variance) * z, _MIN_FACTOR), w


_MIN_FACTOR = 1e-6


def sample_weight_noise(m: WeightNoiseModel, rng: np.random.Generator, size=None):
    if m.samples:
        f = rng.choice(np.asarray(m.samples, dtype=float), size=size)
    elif m.variance == 0:
        f = np.full(size, 1.0 + m.shift) if size is not None else 1.0 + m.shift
    else:
        z = rng.standard_normal(size) if m.family == "normal" else truncated_normal(rng, size)
        f = 1.0 + m.shift + math.sqrt(m.variance) * z
    return np.maximum(f, _MIN_FACTOR) if size is not None else max(float(f), _MIN_FACTOR)


# --------------------------------------------------------------------------- calibration


# --------------------------------------------------------------------------- calibration


def stay_probability(i, destinations: Sequence[MtjParams], pulse_t: float):
    """Probability that none of the series MTJs switches within ``pulse_t``."""
    rate = sum(1.0 / np.asarray(mtj_mean_switching_time(p, i)) for p in destinations)
    return np.exp(-pulse_t * rate)


def drive_current(v_wr, destinations: Sequence[MtjParams], circuit: CellCircuit):
    """Linear V->I map of the write path through the destination MTJs (all in P)."""
    return v_wr / (sum(p.r_p for p in destinations) + circuit.r_access)


def calibrate_drive(ps_target: float, p: MtjParams, pulse_t: float,
                    circuit: CellCircuit = CellCircuit(), n_series: int = 2) -> tuple[float, float]:
    """Drive current and synapse weight for which ``n_series`` identical MTJs all stay
    unswitched over ``pulse_t`` with probability ``ps_target``."""
    if not 0 < ps_target < 1:
        raise CalibrationError("ps_target must lie in (0, 1)")
    tau = -n_series * pulse_t / math.log(ps_target)
    if not p.tau0 < tau < p.tau0 * math.exp(p.delta):
        raise CalibrationError(
            f"stay probability {ps_target!r} needs tau = {tau:.4g} s, outside (tau0, tau0*e^delta)"
        )
    i = p.i_c0 * (1.0 - math.sqrt(math.log(tau / p.tau0) / p.delta))
    w = i * (n_series * p.r_p + circuit.r_access) / circuit.v_read
    return i, w


def calibrate_cluster(ps_target: float, destinations: Sequence[MtjParams],
                      circuit: CellCircuit = CellCircuit()) -> tuple[float, float]:
    """Numerical calibration for non-identical destination devices."""
    if not 0 < ps_target < 1:
        raise CalibrationError("ps_target must lie in (0, 1)")
    i_max = min(p.i_c0 for p in destinations)
    target = math.log(ps_target)

    def f(i):
        return math.log(stay_probability(i, destinations, circuit.pulse_width)) - target

    lo, hi = i_max * 1e-12, i_max * (1.0 - 1e-12)
    if f(lo) < 0 or f(hi) > 0:
        raise CalibrationError(f"stay probability {ps_target!r} not reachable within 0 < i < i_c0")
    i = brentq(f, lo, hi, xtol=1e-22, rtol=4 * np.finfo(float).eps, maxiter=200)
    w = i * (sum(p.r_p for p in destinations) + circuit.r_access) / circuit.v_read
    return i, w


# --------------------------------------------------------------------------- device arrays


@dataclass(frozen=True)
class DeviceArrays:
    """Destination devices of ``m`` clusters that share one layout, as (m, k) arrays."""

    tau0: np.ndarray
    delta: np.ndarray
    i_c0: np.ndarray
    r_p: np.ndarray

    @classmethod
    def from_params(cls, rows: Sequence[Sequence[MtjParams]]) -> "DeviceArrays":
        get = lambda name: np.array([[getattr(p, name) for p in row] for row in rows], dtype=float)
        return cls(get("tau0"), get("delta"), get("i_c0"), get("r_p"))

    @property
    def shape(self) -> tuple[int, int]:
        return self.tau0.shape

    def rates(self, i: np.ndarray) -> np.ndarray:
        """Switching rates, shape (m, k, q), for currents ``i`` of shape (m, q)."""
        i = i[:, None, :]
        ic0 = self.i_c0[:, :, None]
        if np.any(i <= 0) or np.any(i >= ic0):
            raise DeviceDomainError("drive current outside (0, i_c0)")
        return np.exp(-self.delta[:, :, None] * (1.0 - i / ic0) ** 2) / self.tau0[:, :, None]


def calibrate_batch(ps_target: float, dev: DeviceArrays, circuit: CellCircuit = CellCircuit(),
                    iterations: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized ``calibrate_cluster``: (currents, weights) for every cluster row."""
    if not 0 < ps_target < 1:
        raise CalibrationError("ps_target must lie in (0, 1)")
    need = -math.log(ps_target) / circuit.pulse_width  # total rate at the target

    def total(i):
        return dev.rates(i[:, None])[:, :, 0].sum(axis=1)

    i_max = dev.i_c0.min(axis=1)
    lo, hi = i_max * 1e-12, i_max * (1.0 - 1e-12)
    if np.any(total(lo) > need) or np.any(total(hi) < need):
        raise CalibrationError(f"stay probability {ps_target!r} not reachable within 0 < i < i_c0")
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        up = total(mid) < need
        lo = np.where(up, mid, lo)
        hi = np.where(up, hi, mid)
    i = 0.5 * (lo + hi)
    w = i * (dev.r_p.sum(axis=1) + circuit.r_access) / circuit.v_read
    return i, w


def program_weights(target: np.ndarray, ftj: FtjParams = FtjParams(),
                    circuit: CellCircuit = CellCircuit()) -> np.ndarray:
    """Weights realised by programming fresh synapses to ``target`` (vectorized).

    The pulse train inverts the domain kinetics exactly, so the realised
    weight follows the target through the FTJ state round trip.
    """
    target = np.asarray(target, dtype=float)
    lo, hi = achievable_weights(ftj, circuit.r_series)
    bad = (target < lo) | (target > hi)
    if np.any(bad):
        w = float(target[bad][0])
        raise ProgrammingRangeError(f"target weight {w!r} outside achievable interval [{lo:.6g}, {hi:.6g}]")
    r = circuit.r_series * target / (1.0 - target)
    s = np.clip((1.0 / r - 1.0 / ftj.r_off) / (1.0 / ftj.r_on - 1.0 / ftj.r_off), 0.0, 1.0)
    r_real = 1.0 / (s / ftj.r_on + (1.0 - s) / ftj.r_off)
    return r_real / (r_real + circuit.r_series)


def batch_law(weights: np.ndarray, dev: DeviceArrays, noise: WeightNoiseModel,
              circuit: CellCircuit = CellCircuit()) -> tuple[np.ndarray, np.ndarray]:
    """Exact per-cluster law marginalized over weight noise.

    Returns (move, stay): ``move`` has shape (m, k), the probability that
    destination k wins, and ``stay`` shape (m,).
    """
    factors, qw = noise.quadrature()
    v = weights[:, None] * circuit.v_read * factors[None, :]
    i = v / (dev.r_p.sum(axis=1)[:, None] + circuit.r_access)
    rates = dev.rates(i)
    total = rates.sum(axis=1)
    stay = np.exp(-circuit.pulse_width * total)
    move = (1.0 - stay)[:, None, :] * rates / total[:, None, :]
    return move @ qw, stay @ qw


def batch_simulate(weights: np.ndarray, dev: DeviceArrays, noise: WeightNoiseModel,
                   rng: np.random.Generator, circuit: CellCircuit = CellCircuit()) -> np.ndarray:
    """One activation cycle per cluster row; index of the winning destination or -1."""
    m, k = dev.shape
    factors = sample_weight_noise(noise, rng, size=m)
    i = (weights * circuit.v_read * factors / (dev.r_p.sum(axis=1) + circuit.r_access))[:, None]
    times = rng.exponential(1.0, size=(m, k)) / dev.rates(i)[:, :, 0]
    win = np.argmin(times, axis=1)
    return np.where(times[np.arange(m), win] < circuit.pulse_width, win, -1)


# --------------------------------------------------------------------------- activation


def _charge(result: Outcome, circuit: CellCircuit) -> ActivationOutcome:
    return ActivationOutcome(result, circuit.energy_per_cycle, circuit.cycle_time)


def _race(destinations: Sequence[Neuron], syn: Synapse, noise: WeightNoiseModel,
          rng: np.random.Generator, circuit: CellCircuit) -> int | None:
    """Index of the destination that switches first inside the window, else None."""
    factor = sample_weight_noise(noise, rng)
    params = [n.params for n in destinations]
    i = drive_current(synapse_output(syn, circuit.v_read) * factor, params, circuit)
    times = [rng.exponential(mtj_mean_switching_time(p, i)) for p in params]
    k = int(np.argmin(times))
    return k if times[k] < circuit.pulse_width else None


def activation_cycle(left: Neuron, center: Neuron, right: Neuron, syn: Synapse,
                     noise: WeightNoiseModel, rng: np.random.Generator,
                     circuit: CellCircuit = CellCircuit()) -> ActivationOutcome:
    if not center.active or left.active or right.active:
        raise CellStateError("activation cycle needs an active center and inactive neighbours")
    winner = _race([left, right], syn, noise, rng, circuit)
    if winner is None:
        return _charge(Outcome.STAYED, circuit)
    (left if winner == 0 else right).activate()
    center.reset()
    return _charge(Outcome.MOVED_LEFT if winner == 0 else Outcome.MOVED_RIGHT, circuit)


def boundary_cycle(center: Neuron, neighbor: Neuron, syn: Synapse, noise: WeightNoiseModel,
                   rng: np.random.Generator, circuit: CellCircuit = CellCircuit()) -> ActivationOutcome:
    """Edge neuron with a single destination; the direction follows the neighbour's index."""
    if not center.active or neighbor.active:
        raise CellStateError("boundary cycle needs an active center and inactive neighbour")
    if abs(neighbor.index - center.index) != 1:
        raise CellStateError("boundary neighbour must be adjacent")
    if _race([neighbor], syn, noise, rng, circuit) is None:
        return _charge(Outcome.STAYED, circuit)
    neighbor.activate()
    center.reset()
    moved = Outcome.MOVED_RIGHT if neighbor.index > center.index else Outcome.MOVED_LEFT
    return _charge(moved, circuit)


# --------------------------------------------------------------------------- clusters


@dataclass(frozen=True)
class Cluster:
    """A source position with its programmed synapse and destination devices.

    ``directions`` holds -1/+1 per destination, in series order.
    """

    center: int
    destinations: tuple[MtjParams, ...]
    directions: tuple[int, ...]
    synapse: Synapse


def build_cluster(center: int, devices: Sequence[MtjParams], ps_target: float,
                  ftj: FtjParams = FtjParams(), circuit: CellCircuit = CellCircuit(),
                  calibrate_with: Sequence[MtjParams] | None = None) -> Cluster:
    """Program the synapse of position ``center`` for stay probability ``ps_target``.

    ``devices`` is the per-position device list. Calibration uses the actual
    destination devices unless ``calibrate_with`` supplies stand-ins (e.g. nominal).
    """
    n = len(devices)
    dirs = tuple(d for d in (-1, 1) if 0 <= center + d < n)
    if not dirs:
        raise ValueError("a cluster needs at least one neighbour")
    dests = tuple(devices[center + d] for d in dirs)
    ref = tuple(calibrate_with) if calibrate_with is not None else dests
    _, w = calibrate_cluster(ps_target, ref, circuit)
    syn = synapse_program(fresh_synapse(ftj, circuit), w, circuit)
    return Cluster(center, dests, dirs, syn)


def _split(dirs: Sequence[int], move: np.ndarray, stay: np.ndarray):
    p = {-1: np.zeros_like(stay), 1: np.zeros_like(stay)}
    for k, d in enumerate(dirs):
        p[d] = move[:, k]
    return p[-1], stay, p[1]


def cell_probabilities(cluster: Cluster, noise: WeightNoiseModel,
                       circuit: CellCircuit = CellCircuit()) -> tuple[float, float, float]:
    """Exact (left, stay, right) law of one activation, marginalized over weight noise."""
    dev = DeviceArrays.from_params([cluster.destinations])
    move, stay = batch_law(np.array([cluster.synapse.weight]), dev, noise, circuit)
    return tuple(float(x[0]) for x in _split(cluster.directions, move, stay))


def simulate_cluster(cluster: Cluster, noise: WeightNoiseModel, rng: np.random.Generator, n: int,
                     circuit: CellCircuit = CellCircuit()) -> np.ndarray:
    """Vectorized activation cycles; returns per-cycle moves in {-1, 0, +1}."""
    factors = sample_weight_noise(noise, rng, size=n)
    v = synapse_output(cluster.synapse, circuit.v_read) * factors
    i = drive_current(v, cluster.destinations, circuit)
    times = np.stack([rng.exponential(mtj_mean_switching_time(p, i)) for p in cluster.destinations])
    k = np.argmin(times, axis=0)
    switched = times[k, np.arange(n)] < circuit.pulse_width
    dirs = np.asarray(cluster.directions)
    return np.where(switched, dirs[k], 0)


# --------------------------------------------------------------------------- hardware tables


@dataclass(frozen=True)
class HardwareConfig:
    """Everything the hardware-emulated walk backend needs to build its cells.

    ``table_source``: "analytic" integrates the device law exactly, "history"
    uses empirical frequencies from ``history_trials`` simulated cycles.
    ``calibration``: "per_device" programs each synapse against the actual
    (perturbed) destination devices, "nominal" against unperturbed ones.
    ``device_sampling``: "per_activation" draws a freshly fabricated cluster
    for every activation, so one shared table holds the law averaged over
    process variation; "per_position" fabricates one fixed array per backend.
    ``marginal_samples`` is the number of fabricated clusters averaged by the
    analytic per-activation table.
    """

    mtj: MtjParams = MtjParams()
    ftj: FtjParams = FtjParams()
    variation: VariationSpec = VariationSpec()
    noise: WeightNoiseModel = WeightNoiseModel()
    circuit: CellCircuit = CellCircuit()
    table_source: str = "analytic"
    history_trials: int = 50_000
    calibration: str = "per_device"
    device_sampling: str = "per_activation"
    marginal_samples: int = 4096

    def __post_init__(self):
        if self.table_source not in ("analytic", "history"):
            raise ValueError(f"unknown table_source {self.table_source!r}")
        if self.calibration not in ("per_device", "nominal"):
            raise ValueError(f"unknown calibration {self.calibration!r}")
        if self.device_sampling not in ("per_activation", "per_position"):
            raise ValueError(f"unknown device_sampling {self.device_sampling!r}")
        if self.history_trials < 1 or self.marginal_samples < 1:
            raise ValueError("history_trials and marginal_samples must be >= 1")


def build_clusters(n: int, ps_target: float, hw: HardwareConfig, rng: np.random.Generator,
                   centers: Sequence[int] | None = None) -> tuple[list[MtjParams], list[Cluster]]:
    devices = sample_device_batch(hw.mtj, hw.variation, rng, n)
    centers = range(n) if centers is None else centers
    clusters = []
    for c in centers:
        nominal = [hw.mtj] * sum(1 for d in (-1, 1) if 0 <= c + d < n) if hw.calibration == "nominal" else None
        clusters.append(build_cluster(c, devices, ps_target, hw.ftj, hw.circuit, nominal))
    return devices, clusters


def fabricate(hw: HardwareConfig, ps_target: float, k: int, m: int,
              rng: np.random.Generator) -> tuple[DeviceArrays, np.ndarray]:
    """``m`` freshly fabricated and programmed clusters with ``k`` destinations each."""
    flat = sample_device_batch(hw.mtj, hw.variation, rng, m * k)
    dev = DeviceArrays.from_params([flat[j * k:(j + 1) * k] for j in range(m)])
    ref = DeviceArrays.from_params([[hw.mtj] * k]) if hw.calibration == "nominal" else dev
    _, w = calibrate_batch(ps_target, ref, hw.circuit)
    return dev, program_weights(np.broadcast_to(w, (m,)), hw.ftj, hw.circuit)


def marginal_law(hw: HardwareConfig, ps_target: float, rng: np.random.Generator):
    """Cell laws averaged over process variation.

    Returns ((left, stay, right) of an interior cell, (stay, move) of an edge
    cell). Interior left/right are symmetrized: the two destinations are
    exchangeable, so their win probabilities agree in law.
    """
    if hw.table_source == "history":
        t = hw.history_trials
        dev, w = fabricate(hw, ps_target, 2, t, rng)
        win = batch_simulate(w, dev, hw.noise, rng, hw.circuit)
        interior = np.bincount(win + 1, minlength=3)[[1, 0, 2]] / t
        dev, w = fabricate(hw, ps_target, 1, t, rng)
        moved = np.mean(batch_simulate(w, dev, hw.noise, rng, hw.circuit) == 0)
        return tuple(float(x) for x in interior), (1.0 - float(moved), float(moved))
    m = 1 if hw.variation.is_zero else hw.marginal_samples
    dev, w = fabricate(hw, ps_target, 2, m, rng)
    move, stay = batch_law(w, dev, hw.noise, hw.circuit)
    side = float(move.mean())
    interior = (side, float(stay.mean()), side)
    dev, w = fabricate(hw, ps_target, 1, m, rng)
    _, stay = batch_law(w, dev, hw.noise, hw.circuit)
    s = float(stay.mean())
    return interior, (s, 1.0 - s)


def hardware_table(n: int, ps_target: float, hw: HardwareConfig, rng: np.random.Generator,
                   absorbing_right: bool) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-position (left, stay, right) probabilities of the emulated array.

    With ``absorbing_right`` the last position has no cell; its row is left as
    a pure self-loop.
    """
    centers = list(range(n - 1 if absorbing_right else n))
    pl, ps, pr = np.zeros(n), np.ones(n), np.zeros(n)
    if hw.device_sampling == "per_activation":
        (il, is_, ir), (es, em) = marginal_law(hw, ps_target, rng)
        for c in centers:
            if 0 < c < n - 1:
                pl[c], ps[c], pr[c] = il, is_, ir
            elif c == 0:
                pl[c], ps[c], pr[c] = 0.0, es, em
            else:
                pl[c], ps[c], pr[c] = em, es, 0.0
        return pl, ps, pr
    _, clusters = build_clusters(n, ps_target, hw, rng, centers)
    for cl in clusters:
        c = cl.center
        if hw.table_source == "analytic":
            pl[c], ps[c], pr[c] = cell_probabilities(cl, hw.noise, hw.circuit)
        else:
            moves = simulate_cluster(cl, hw.noise, rng, hw.history_trials, hw.circuit)
            counts = np.bincount(moves + 1, minlength=3)
            pl[c], ps[c], pr[c] = counts / hw.history_trials
    return pl, ps, pr


# --------------------------------------------------------------------------- activation history


@dataclass(frozen=True)
class HistoryConfig:
    hardware: HardwareConfig = HardwareConfig()
    ps_target: float = 0.5317
    n_positions: int = 50
    policy: str = "per_position"

    def __post_init__(self):
        if self.policy not in ("per_position", "per_trial"):
            raise ValueError(f"unknown device policy {self.policy!r}")
        if self.n_positions < 2:
            raise ValueError("n_positions must be >= 2")


@dataclass
class ActivationHistory:
    trial_id: np.ndarray
    start_index: np.ndarray
    move: np.ndarray  # -1 / 0 / +1
    device_seed: np.ndarray
    n_positions: int

    def __len__(self):
        return len(self.trial_id)

    def cell_probabilities(self) -> np.ndarray:
        """Empirical (left, stay, right) frequencies, one row per start position."""
        counts = np.zeros((self.n_positions, 3))
        np.add.at(counts, (self.start_index, self.move + 1), 1)
        totals = counts.sum(axis=1, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(totals > 0, counts / totals, np.nan)

    def ps_empirical(self) -> np.ndarray:
        """Per-record stay fraction of the record's start position."""
        return self.cell_probabilities()[self.start_index, 1]

    def to_csv(self, path, header: Sequence[str] = ()):
        letters = np.array(["L", "S", "R"])[self.move + 1]
        ps = self.ps_empirical()
        with open(path, "w", newline="") as fh:
            for line in header:
                fh.write(f"# {line}\n")
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["trial_id", "start_index", "outcome", "ps_empirical", "device_seed"])
            for row in zip(self.trial_id, self.start_index, letters, ps, self.device_seed):
                writer.writerow([int(row[0]), int(row[1]), row[2], repr(float(row[3])), int(row[4])])


def build_activation_history(config: HistoryConfig, n_trials: int, rng: np.random.Generator) -> ActivationHistory:
    """Run ``n_trials`` activation cycles, cycling the start position over the array.

    ``per_position``: one fabricated array for the whole table (device_seed is
    shared by all records). ``per_trial``: every record uses freshly sampled
    and freshly calibrated devices; its device_seed regenerates them.
    """
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    hw = config.hardware
    n = config.n_positions
    trial_id = np.arange(n_trials)
    start = trial_id % n
    move = np.zeros(n_trials, dtype=np.int64)
    if config.policy == "per_position":
        seed = int(rng.integers(2**62))
        _, clusters = build_clusters(n, config.ps_target, hw, np.random.default_rng(seed))
        for cl in clusters:
            idx = np.flatnonzero(start == cl.center)
            if idx.size:
                move[idx] = simulate_cluster(cl, hw.noise, rng, idx.size, hw.circuit)
        return ActivationHistory(trial_id, start, move, np.full(n_trials, seed, dtype=np.int64), n)
    seeds = rng.integers(2**62, size=n_trials, dtype=np.int64)
    groups = [
        (np.flatnonzero((start > 0) & (start < n - 1)), (-1, 1)),
        (np.flatnonzero(start == 0), (1,)),
        (np.flatnonzero(start == n - 1), (-1,)),
    ]
    for idx, dirs in groups:
        if not idx.size:
            continue
        rows = [sample_device_batch(hw.mtj, hw.variation, np.random.default_rng(int(seeds[t])), len(dirs))
                for t in idx]
        dev = DeviceArrays.from_params(rows)
        ref = DeviceArrays.from_params([[hw.mtj] * len(dirs)]) if hw.calibration == "nominal" else dev
        _, w = calibrate_batch(config.ps_target, ref, hw.circuit)
        w = program_weights(np.broadcast_to(w, (idx.size,)), hw.ftj, hw.circuit)
        win = batch_simulate(w, dev, hw.noise, rng, hw.circuit)
        move[idx] = np.where(win >= 0, np.asarray(dirs)[np.maximum(win, 0)], 0)
    return ActivationHistory(trial_id, start, move, seeds, n)
