"""Parallel random-walk engine, stochastic backends and the time/energy ledger."""

from __future__ import annotations

import csv
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from fractions import Fraction

import numba as nb
import numpy as np

from .cells import CellCircuit, HardwareConfig, hardware_table
from .chain import MarkovChain1D, RightBoundary
from .rng import WalkerStream, stream_base, uniform, walker_key

log = logging.getLogger(__name__)

DEFAULT_MAX_STEPS = 10_000_000


class WalkCapExceeded(RuntimeError):
    def __init__(self, start: int, walker: int, cap: int):
        super().__init__(f"walker {walker} started at position {start} exceeded {cap} steps")
        self.start = start
        self.walker = walker
        self.cap = cap


class LedgerConfigError(ValueError):
    pass


# --------------------------------------------------------------------------- backends


class _TableBackend:
    chain: MarkovChain1D

    def table(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        raise NotImplementedError

    @cached_property
    def cuts(self) -> tuple[np.ndarray, np.ndarray]:
        """(lo, hi) cut points of one uniform draw: left if u < lo, right if u >= hi."""
        pl, _, pr = self.table()
        return np.ascontiguousarray(pl, dtype=float), np.ascontiguousarray(1.0 - pr, dtype=float)


@dataclass(frozen=True)
class SoftwareBackend(_TableBackend):
    chain: MarkovChain1D
    name: str = "software"

    def table(self):
        return self.chain.probability_table()


@dataclass(frozen=True)
class HardwareBackend(_TableBackend):
    """Cell-derived per-position probabilities of one fabricated device array."""

    chain: MarkovChain1D
    hardware: HardwareConfig
    device_seed: int
    name: str = "hardware"
    _table: tuple = field(default=None, repr=False, compare=False)

    @classmethod
    def build(cls, chain: MarkovChain1D, hardware: HardwareConfig, device_seed: int, name: str = "hardware"):
        rng = np.random.default_rng(device_seed)
        absorbing = chain.right_boundary is RightBoundary.ABSORBING
        tab = hardware_table(chain.n, chain.ps, hardware, rng, absorbing_right=absorbing)
        return cls(chain, hardware, device_seed, name, tab)

    def table(self):
        return self._table


# --------------------------------------------------------------------------- single step


def step(pos: int, backend: _TableBackend, stream: WalkerStream) -> int | None:
    """Advance one walker by one activation; ``None`` means absorbed."""
    chain = backend.chain
    if not 0 <= pos < chain.n or pos == chain.absorbing:
        raise ValueError(f"invalid walker position {pos}")
    lo, hi = backend.cuts
    u = stream.random()
    new = pos - 1 if u < lo[pos] else pos + 1 if u >= hi[pos] else pos
    return None if new == chain.absorbing else new


# --------------------------------------------------------------------------- kernels


@nb.njit(nogil=True, cache=True)
def _steady_kernel(base, lo, hi, absorb, start, w_lo, w_hi, row, cap):
    """Counts occupancy at every step start (initial position included)."""
    steps = 0
    for w in range(w_lo, w_hi):
        key = walker_key(base, start, w)
        pos = start
        ctr = np.uint64(0)
        n = 0
        while pos != absorb:
            if n >= cap:
                return steps, w
            row[pos] += 1
            u = uniform(key, ctr)
            ctr += np.uint64(1)
            n += 1
            pos += np.int64(u >= hi[pos]) - np.int64(u < lo[pos])
        steps += n
    return steps, -1


@nb.njit(nogil=True, cache=True)
def _timed_kernel(base, lo, hi, source, w_lo, w_hi, n_steps, hist):
    for w in range(w_lo, w_hi):
        key = walker_key(base, source, w)
        pos = source
        for k in range(n_steps):
            u = uniform(key, np.uint64(k))
            pos += np.int64(u >= hi[pos]) - np.int64(u < lo[pos])
        hist[pos] += 1


def _chunks(total: int, parts: int) -> list[tuple[int, int]]:
    parts = max(1, min(parts, total))
    edges = np.linspace(0, total, parts + 1).astype(int)
    return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]


# --------------------------------------------------------------------------- results


@dataclass
class PassageMatrix:
    """counts[i, j]: visits to position j by the walkers that started at i."""

    counts: np.ndarray
    walkers: int

    def to_csv(self, path, header=()):
        with open(path, "w", newline="") as fh:
            for line in header:
                fh.write(f"# {line}\n")
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["i", "j", "count"])
            for i, j in zip(*np.nonzero(self.counts)):
                writer.writerow([int(i), int(j), int(self.counts[i, j])])


def _exact(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(repr(float(x)))


@dataclass(frozen=True)
class Baseline:
    time_per_step_s: Fraction
    energy_per_step_j: Fraction


@dataclass
class Ledger:
    """Per-activation accounting. Costs are kept as exact decimals."""

    steps: int = 0
    time_per_step_s: Fraction = Fraction("10e-9")
    energy_per_step_j: Fraction = Fraction("1.451e-12")
    baselines: dict[str, Baseline] = field(default_factory=dict)

    @classmethod
    def for_circuit(cls, circuit: CellCircuit, steps: int = 0, baselines=None) -> "Ledger":
        return cls(steps, _exact(circuit.cycle_time), _exact(circuit.energy_per_cycle), dict(baselines or {}))

    def with_baseline(self, name: str, time_per_step_s, energy_per_step_j) -> "Ledger":
        b = dict(self.baselines)
        b[name] = Baseline(_exact(time_per_step_s), _exact(energy_per_step_j))
        return Ledger(self.steps, self.time_per_step_s, self.energy_per_step_j, b)

    @property
    def hw_time_s(self) -> float:
        return float(self.steps * self.time_per_step_s)

    @property
    def hw_energy_j(self) -> float:
        return float(self.steps * self.energy_per_step_j)

    def __add__(self, other: "Ledger") -> "Ledger":
        if (self.time_per_step_s, self.energy_per_step_j) != (other.time_per_step_s, other.energy_per_step_j):
            raise LedgerConfigError("cannot merge ledgers with different per-step costs")
        return Ledger(self.steps + other.steps, self.time_per_step_s, self.energy_per_step_j,
                      {**other.baselines, **self.baselines})


def ledger_report(l: Ledger) -> list[dict]:
    """Speedup and energy-efficiency ratio against every configured baseline.

    Ratios are per step, so they are defined even for an empty ledger.
    """
    if not l.baselines:
        raise LedgerConfigError("no baseline configured for the ledger report")
    rows = []
    for name in sorted(l.baselines):
        b = l.baselines[name]
        rows.append({
            "baseline": name,
            "speedup": float(b.time_per_step_s / l.time_per_step_s),
            "energy_ratio": float(b.energy_per_step_j / l.energy_per_step_j),
            "baseline_time_s": float(l.steps * b.time_per_step_s),
            "baseline_energy_j": float(l.steps * b.energy_per_step_j),
        })
    return rows


def ledger_json(l: Ledger) -> str:
    doc = {
        "steps": l.steps,
        "hw_time_s": l.hw_time_s,
        "hw_energy_j": l.hw_energy_j,
        "baselines": ledger_report(l) if l.baselines else [],
    }
    return json.dumps(doc, indent=2)


# --------------------------------------------------------------------------- engine


@dataclass(frozen=True)
class WalkConfig:
    """``steady``: W walkers per start position, run to absorption.
    ``timed``: W walkers from ``source`` for exactly ``n_steps`` steps."""

    mode: str = "steady"
    walkers: int = 10_000
    starts: tuple[int, ...] | None = None
    source: int = 0
    n_steps: int = 0
    max_steps: int = DEFAULT_MAX_STEPS
    stream: tuple[int, ...] = ()

    def __post_init__(self):
        if self.mode not in ("steady", "timed"):
            raise ValueError(f"unknown walk mode {self.mode!r}")
        if self.walkers < 1 or self.max_steps < 1 or self.n_steps < 0:
            raise ValueError("walkers and max_steps must be >= 1, n_steps >= 0")


def _pool(workers: int):
    if workers < 1:
        raise ValueError("workers must be >= 1")
    return ThreadPoolExecutor(max_workers=workers)


def run_walkers(config: WalkConfig, backend: _TableBackend, master_seed: int, workers: int = 1,
                circuit: CellCircuit = CellCircuit()):
    """Run the walkers; returns (PassageMatrix or occupancy histogram, Ledger).

    Output is bit-identical for a given seed whatever ``workers`` is: every
    walker owns its stream and the integer reductions are order-free.
    """
    chain = backend.chain
    lo, hi = backend.cuts
    base = stream_base(master_seed, *config.stream)
    if config.mode == "timed":
        return _run_timed(config, chain, lo, hi, base, workers, circuit)
    if chain.absorbing is None:
        raise ValueError("steady-state walks need an absorbing right boundary")
    starts = range(chain.n) if config.starts is None else config.starts
    tasks = [(i, a, b) for i in starts for a, b in _chunks(config.walkers, workers)]

    def work(task):
        i, a, b = task
        row = np.zeros(chain.n, dtype=np.int64)
        steps, bad = _steady_kernel(base, lo, hi, chain.absorbing, i, a, b, row, config.max_steps)
        return i, row, steps, bad

    counts = np.zeros((chain.n, chain.n), dtype=np.int64)
    total = 0
    with _pool(workers) as pool:
        for i, row, steps, bad in pool.map(work, tasks):
            if bad >= 0:
                raise WalkCapExceeded(i, int(bad), config.max_steps)
            counts[i] += row
            total += int(steps)
    log.debug("steady walk: %d steps over %d starts", total, len(starts))
    return PassageMatrix(counts, config.walkers), Ledger.for_circuit(circuit, total)


def _run_timed(config, chain, lo, hi, base, workers, circuit):
    if not 0 <= config.source < chain.n:
        raise ValueError(f"invalid source position {config.source}")
    if config.source == chain.absorbing:
        raise ValueError("time-dependent walks must not start on an absorbing position")

    def work(chunk):
        a, b = chunk
        hist = np.zeros(chain.n, dtype=np.int64)
        _timed_kernel(base, lo, hi, config.source, a, b, config.n_steps, hist)
        return hist

    hist = np.zeros(chain.n, dtype=np.int64)
    with _pool(workers) as pool:
        for h in pool.map(work, _chunks(config.walkers, workers)):
            hist += h
    return hist, Ledger.for_circuit(circuit, config.walkers * config.n_steps)
