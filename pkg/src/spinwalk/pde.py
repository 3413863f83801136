"""Problem definitions, random-walk estimators and closed-form references.

Two workloads are covered: the 1D steady heat problem u'' = F (L - x) with
u(0) = u'(0) = 0, solved from absorption-time functionals of walkers started
at every grid point, and point-source diffusion in 2D, solved as the outer
product of two independent 1D occupancy densities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .cells import HardwareConfig, WeightNoiseModel
from .chain import MarkovChain1D, RightBoundary, build_chain
from .walk import HardwareBackend, Ledger, PassageMatrix, SoftwareBackend, WalkConfig, run_walkers

BACKENDS = ("software", "hw-p", "hw-pv")

# stream tags keep the random streams of different workloads apart
_TAG_STEADY = 1
_TAG_DIFFUSION = 2


@dataclass(frozen=True)
class SteadyHeat1D:
    """``time_weight`` selects the time charged per step in the estimator:
    "dt" (the nominal step) or "matched" (pg*dx^2/D, the step time that
    matches the chain's actual per-step variance)."""

    l: float = 2.0
    n: int = 50
    f: float = 3.0
    dt: float = 0.00038
    w: int = 10_000
    time_weight: str = "dt"

    def __post_init__(self):
        if not (self.l > 0 and self.dt > 0 and self.w >= 1 and self.n >= 2 and self.f >= 0):
            raise ValueError("SteadyHeat1D needs l, dt > 0, f >= 0, n >= 2, w >= 1")
        if self.time_weight not in ("dt", "matched"):
            raise ValueError(f"unknown time_weight {self.time_weight!r}")

    def chain(self) -> MarkovChain1D:
        return build_chain(self.l, self.n, self.dt, RightBoundary.ABSORBING)


@dataclass(frozen=True)
class Diffusion2D:
    c0: float = 1.0
    d: float = 1.0
    w: int = 100_000
    n_steps: int = 80
    dt: float = 0.00038
    l: float = 2.0
    n: int = 50
    source: tuple[int, int] = (25, 25)

    def __post_init__(self):
        if not (self.c0 > 0 and self.d > 0 and self.dt > 0 and self.l > 0):
            raise ValueError("Diffusion2D needs c0, d, dt, l > 0")
        if self.w < 1 or self.n_steps < 1 or self.n < 2:
            raise ValueError("Diffusion2D needs w >= 1, n_steps >= 1, n >= 2")
        if not all(0 <= s < self.n for s in self.source):
            raise ValueError("source index outside the grid")

    @classmethod
    def at_time(cls, t: float, dt: float = 0.00038, **kw) -> "Diffusion2D":
        k = round(t / dt)
        if k < 1 or not math.isclose(k * dt, t, rel_tol=1e-9):
            raise ValueError(f"t = {t!r} is not a positive integer multiple of dt = {dt!r}")
        return cls(n_steps=k, dt=dt, **kw)

    @property
    def t(self) -> float:
        return self.n_steps * self.dt

    def chain(self) -> MarkovChain1D:
        return build_chain(self.l, self.n, self.dt, RightBoundary.REFLECTING, self.d)

    @property
    def source_xy(self) -> tuple[float, float]:
        dx = self.l / self.n
        return self.source[0] * dx, self.source[1] * dx


# --------------------------------------------------------------------------- references


def analytical_steady_heat(x, f: float, l: float):
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) or np.any(x > l):
        raise ValueError("x outside [0, L]")
    u = f * l * x**2 / 2 - f * x**3 / 6
    return float(u) if u.ndim == 0 else u


def analytical_diffusion_2d(x, y, t: float, p: Diffusion2D):
    """Free-space heat kernel of the point source."""
    if not t > 0:
        raise ValueError("t must be positive")
    x0, y0 = p.source_xy
    r2 = (np.asarray(x, dtype=float) - x0) ** 2 + (np.asarray(y, dtype=float) - y0) ** 2
    c = p.c0 / (4 * math.pi * p.d * t) * np.exp(-r2 / (4 * p.d * t))
    return float(c) if np.ndim(c) == 0 else c


# --------------------------------------------------------------------------- variance


@dataclass(frozen=True)
class VarianceReport:
    sigma2: np.ndarray
    runs: int

    @property
    def max(self) -> float:
        return float(self.sigma2.max())

    @property
    def mean(self) -> float:
        return float(self.sigma2.mean())

    @property
    def argmax(self) -> tuple[int, ...]:
        return tuple(int(i) for i in np.unravel_index(np.argmax(self.sigma2), self.sigma2.shape))


def variance(mean_solution, analytical, runs: int = 1) -> VarianceReport:
    """Squared deviation of the across-run mean solution from the reference."""
    a = np.asarray(mean_solution, dtype=float)
    b = np.asarray(analytical, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return VarianceReport(np.abs(a - b) ** 2, runs)


# --------------------------------------------------------------------------- backends


def make_backend(kind: str, chain: MarkovChain1D, hardware: HardwareConfig, device_seed: int):
    """software | hw-p (process variation only) | hw-pv (process + voltage noise)."""
    if kind == "software":
        return SoftwareBackend(chain)
    if kind == "hw-p":
        return HardwareBackend.build(chain, replace(hardware, noise=WeightNoiseModel.zero()), device_seed, kind)
    if kind == "hw-pv":
        return HardwareBackend.build(chain, hardware, device_seed, kind)
    raise ValueError(f"unknown backend {kind!r}; expected one of {BACKENDS}")


def device_seed(master_seed: int, *tags: int) -> int:
    return int(np.random.SeedSequence([int(master_seed), *tags]).generate_state(1, np.uint64)[0])


# --------------------------------------------------------------------------- 1D steady


def steady_estimator(pm: PassageMatrix, chain: MarkovChain1D, f: float, l: float,
                     time_weight: str = "dt") -> np.ndarray:
    """u_i = -(F*tau/W) * sum_j n_ij (L - X_j), returned as u_i - u_0."""
    tau = chain.dt if time_weight == "dt" else chain.pg * chain.dx**2 / chain.d
    u = -(f * tau / pm.walkers) * (pm.counts @ (l - chain.positions))
    return u - u[0]


def solve_steady_heat(p: SteadyHeat1D, backend, master_seed: int, workers: int = 1,
                      run: int = 0, max_steps: int | None = None):
    """One Monte Carlo run; returns (solution, PassageMatrix, Ledger)."""
    cfg = WalkConfig("steady", p.w, stream=(_TAG_STEADY, run))
    if max_steps is not None:
        cfg = replace(cfg, max_steps=max_steps)
    if p.f == 0:
        # zero source: the functional vanishes for every trajectory
        return np.zeros(backend.chain.n), PassageMatrix(np.zeros((p.n, p.n), np.int64), p.w), Ledger()
    pm, ledger = run_walkers(cfg, backend, master_seed, workers)
    return steady_estimator(pm, backend.chain, p.f, p.l, p.time_weight), pm, ledger


@dataclass
class ProtocolResult:
    runs: list[np.ndarray]
    mean: np.ndarray
    analytical: np.ndarray
    report: VarianceReport
    ledger: Ledger
    grid: tuple[np.ndarray, ...] = field(default_factory=tuple)


def run_steady_protocol(p: SteadyHeat1D, kind: str, hardware: HardwareConfig, master_seed: int,
                        runs: int = 10, workers: int = 1, max_steps: int | None = None) -> ProtocolResult:
    """Repeat the 1D solve ``runs`` times (fresh devices per run for hardware backends)."""
    chain = p.chain()
    sols, ledger = [], Ledger.for_circuit(hardware.circuit)
    for r in range(runs):
        backend = make_backend(kind, chain, hardware, device_seed(master_seed, _TAG_STEADY, r))
        u, _, led = solve_steady_heat(p, backend, master_seed, workers, run=r, max_steps=max_steps)
        sols.append(u)
        ledger = ledger + Ledger.for_circuit(hardware.circuit, led.steps)
    mean = np.mean(sols, axis=0)
    ref = analytical_steady_heat(chain.positions, p.f, p.l)
    return ProtocolResult(sols, mean, ref, variance(mean, ref, runs), ledger, (chain.positions,))


# --------------------------------------------------------------------------- 2D diffusion


def occupancy_density(hist: np.ndarray, w: int, dx: float, c0: float) -> np.ndarray:
    return math.sqrt(c0) * hist / (w * dx)


def solve_diffusion_2d(p: Diffusion2D, backends: Sequence, master_seed: int, workers: int = 1, run: int = 0):
    """One run with one walk per axis; returns (C grid, Ledger)."""
    chain = backends[0].chain
    dens, steps = [], 0
    for axis, (backend, src) in enumerate(zip(backends, p.source)):
        cfg = WalkConfig("timed", p.w, source=src, n_steps=p.n_steps, stream=(_TAG_DIFFUSION, run, axis))
        hist, led = run_walkers(cfg, backend, master_seed, workers)
        dens.append(occupancy_density(hist, p.w, chain.dx, p.c0))
        steps += led.steps
    return np.outer(dens[0], dens[1]), Ledger(steps)


def diffusion_reference(p: Diffusion2D) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    x = np.arange(p.n) * (p.l / p.n)
    gx, gy = np.meshgrid(x, x, indexing="ij")
    return gx, gy, analytical_diffusion_2d(gx, gy, p.t, p)


def run_diffusion_protocol(p: Diffusion2D, kind: str, hardware: HardwareConfig, master_seed: int,
                           runs: int = 10, workers: int = 1) -> ProtocolResult:
    chain = p.chain()
    grids, ledger = [], Ledger.for_circuit(hardware.circuit)
    for r in range(runs):
        backends = [make_backend(kind, chain, hardware, device_seed(master_seed, _TAG_DIFFUSION, r, axis))
                    for axis in range(2)]
        c, led = solve_diffusion_2d(p, backends, master_seed, workers, run=r)
        grids.append(c)
        ledger = ledger + Ledger.for_circuit(hardware.circuit, led.steps)
    mean = np.mean(grids, axis=0)
    gx, gy, ref = diffusion_reference(p)
    return ProtocolResult(grids, mean, ref, variance(mean, ref, runs), ledger, (gx, gy))


def plateau_estimate(grids, reference) -> float:
    """Bias-corrected max sigma^2 of the pooled mean: the W -> infinity limit.

    Subtracting the across-run variance of the mean from each cell's squared
    error removes the Monte Carlo part, leaving the squared systematic error.
    """
    g = np.asarray(grids, dtype=float)
    if g.shape[0] < 2:
        raise ValueError("plateau_estimate needs at least two runs")
    err2 = (g.mean(axis=0) - reference) ** 2 - g.var(axis=0, ddof=1) / g.shape[0]
    return float(err2.max())


@dataclass
class SweepResult:
    rows: list[dict]
    plateau: dict[str, float]

    def max_sigma2(self, backend: str) -> np.ndarray:
        """(len(w_values), repeats) array of max sigma^2 for one backend."""
        rows = [r for r in self.rows if r["backend"] == backend]
        ws = sorted({r["w"] for r in rows})
        reps = sorted({r["repeat"] for r in rows})
        out = np.empty((len(ws), len(reps)))
        for r in rows:
            out[ws.index(r["w"]), reps.index(r["repeat"])] = r["max_sigma2"]
        return out


def convergence_sweep(p: Diffusion2D, w_values: Sequence[int], backends: Sequence[str],
                      hardware: HardwareConfig, master_seed: int, runs: int = 10,
                      workers: int = 1, repeats: int = 1) -> SweepResult:
    """Max sigma^2 of the 2D solution for each (W, backend, repeat) cell.

    Every cell has its own streams and devices. The plateau of each backend is
    estimated at the largest W, pooling all repeats.
    """
    if not w_values or list(w_values) != sorted(w_values):
        raise ValueError("w_values must be non-empty and ascending")
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    rows, last = [], {kind: [] for kind in backends}
    for k, w in enumerate(w_values):
        for b, kind in enumerate(backends):
            for rep in range(repeats):
                seed = device_seed(master_seed, k, BACKENDS.index(kind) if kind in BACKENDS else b, rep)
                res = run_diffusion_protocol(replace(p, w=int(w)), kind, hardware, seed, runs, workers)
                rows.append({"w": int(w), "backend": kind, "repeat": rep, "max_sigma2": res.report.max})
                if k == len(w_values) - 1:
                    last[kind].extend(res.runs)
    _, _, ref = diffusion_reference(p)
    plateau = {kind: plateau_estimate(g, ref) for kind, g in last.items() if len(g) >= 2}
    return SweepResult(rows, plateau)


def paired_log_test(a, b, k: float = 3.0) -> tuple[float, bool]:
    """Paired test of equal level on log scale; returns (mean log ratio / se, pass)."""
    d = np.log(np.asarray(a, dtype=float).ravel()) - np.log(np.asarray(b, dtype=float).ravel())
    if d.size < 2:
        raise ValueError("paired test needs at least two pairs")
    se = d.std(ddof=1) / math.sqrt(d.size)
    if se == 0:
        return 0.0, bool(d.mean() == 0)
    z = float(d.mean() / se)
    return z, abs(z) <= k
