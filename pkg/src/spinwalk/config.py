"""Run configuration: TOML loading, validation, emission and hashing.

Every section maps onto one dataclass. Defaults reproduce the reference
experiments, so an empty file is a valid configuration.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass, field, fields
from typing import Any

import tomli
import tomli_w

from .cells import CellCircuit, HardwareConfig, WeightNoiseModel
from .devices import FtjParams, MtjParams, VariationSpec
from .pde import BACKENDS, Diffusion2D, SteadyHeat1D
from .walk import DEFAULT_MAX_STEPS, Ledger


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class HardwareSection:
    table_source: str = "analytic"
    history_trials: int = 50_000
    calibration: str = "per_device"
    device_sampling: str = "per_activation"
    marginal_samples: int = 4096


@dataclass(frozen=True)
class SweepSection:
    w_values: tuple[int, ...] = (100, 1_000, 10_000, 100_000)
    backends: tuple[str, ...] = BACKENDS
    repeats: int = 10


@dataclass(frozen=True)
class CalibrateSection:
    ps_target: float = 0.5317
    n_series: int = 2
    verify_trials: int = 50_000


@dataclass(frozen=True)
class DevicesMcSection:
    weight_samples: int = 50_000
    history_trials: int = 50_000
    n_positions: int = 50
    policy: str = "per_trial"
    voltage_noise: bool = False  # the activation table covers process variation and switching only


@dataclass(frozen=True)
class ToleranceSection:
    steady_software: float = 1e-3
    steady_hw_p: float = 1e-3
    steady_hw_pv: float = 1e-2
    diffusion: float = 1e-2
    weight_mean_shift: float = 0.0032  # |mean(w)/w0 - 1|
    weight_variance: float = 1.38e-4

    def steady(self, backend: str) -> float:
        return getattr(self, "steady_" + backend.replace("-", "_"))


@dataclass(frozen=True)
class RunSection:
    seed: int = 0
    workers: int = 0  # 0 = all available cores
    backend: str = "software"
    runs: int = 10
    max_steps: int = DEFAULT_MAX_STEPS
    out: str = "out"

    @property
    def effective_workers(self) -> int:
        return self.workers or os.cpu_count() or 1


@dataclass(frozen=True)
class BaselineSection:
    time_per_step_s: float
    energy_per_step_j: float


DEFAULT_BASELINES = {
    "ref_fast": BaselineSection(34.8e-9, 3.918e-12),
    "ref_slow": BaselineSection(3.15e-6, 43.25e-12),
}


@dataclass(frozen=True)
class RunConfig:
    run: RunSection = RunSection()
    mtj: MtjParams = MtjParams()
    ftj: FtjParams = FtjParams()
    variation: VariationSpec = VariationSpec()
    noise: WeightNoiseModel = WeightNoiseModel()
    circuit: CellCircuit = CellCircuit()
    hardware: HardwareSection = HardwareSection()
    steady: SteadyHeat1D = SteadyHeat1D()
    diffusion: Diffusion2D = Diffusion2D()
    sweep: SweepSection = SweepSection()
    calibrate: CalibrateSection = CalibrateSection()
    devices_mc: DevicesMcSection = DevicesMcSection()
    tolerance: ToleranceSection = ToleranceSection()
    baselines: dict[str, BaselineSection] = field(default_factory=lambda: dict(DEFAULT_BASELINES))

    def hardware_config(self) -> HardwareConfig:
        h = self.hardware
        return HardwareConfig(self.mtj, self.ftj, self.variation, self.noise, self.circuit,
                              h.table_source, h.history_trials, h.calibration,
                              h.device_sampling, h.marginal_samples)

    def ledger(self, steps: int = 0) -> Ledger:
        led = Ledger.for_circuit(self.circuit, steps)
        for name, b in sorted(self.baselines.items()):
            led = led.with_baseline(name, b.time_per_step_s, b.energy_per_step_j)
        return led

    def replace(self, **sections) -> "RunConfig":
        return dataclasses.replace(self, **sections)


# --------------------------------------------------------------------------- parsing


def _coerce(value: Any, default: Any, where: str):
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: expected a boolean, got {value!r}")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}: expected an integer, got {value!r}")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: expected a number, got {value!r}")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{where}: expected a string, got {value!r}")
        return value
    if isinstance(default, tuple):
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{where}: expected an array, got {value!r}")
        proto = default[0] if default else 0.0
        return tuple(_coerce(v, proto, f"{where}[{k}]") for k, v in enumerate(value))
    raise ConfigError(f"{where}: unsupported field type")


def _section(cls, data: Any, where: str, base=None):
    if not isinstance(data, dict):
        raise ConfigError(f"[{where}] must be a table")
    base = base if base is not None else cls()
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"[{where}] unknown key(s): {', '.join(unknown)}")
    kw = {k: _coerce(v, getattr(base, k), f"{where}.{k}") for k, v in data.items()}
    try:
        return dataclasses.replace(base, **kw)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"[{where}] {e}") from e


def _baselines(data: Any) -> dict[str, BaselineSection]:
    if not isinstance(data, dict):
        raise ConfigError("[baselines] must be a table of tables")
    out = {}
    for name, spec in data.items():
        if not isinstance(spec, dict) or set(spec) != {"time_per_step_s", "energy_per_step_j"}:
            raise ConfigError(f"[baselines.{name}] needs exactly time_per_step_s and energy_per_step_j")
        t = _coerce(spec["time_per_step_s"], 0.0, f"baselines.{name}.time_per_step_s")
        e = _coerce(spec["energy_per_step_j"], 0.0, f"baselines.{name}.energy_per_step_j")
        if not (t > 0 and e > 0):
            raise ConfigError(f"[baselines.{name}] costs must be positive")
        out[name] = BaselineSection(t, e)
    return out


def _validate(cfg: RunConfig) -> RunConfig:
    r = cfg.run
    if r.backend not in BACKENDS:
        raise ConfigError(f"run.backend must be one of {BACKENDS}, got {r.backend!r}")
    if not 0 <= r.seed < 2**64:
        raise ConfigError("run.seed must be an unsigned 64-bit integer")
    if r.workers < 0 or r.runs < 1 or r.max_steps < 1:
        raise ConfigError("run.workers must be >= 0, run.runs and run.max_steps >= 1")
    bad = [b for b in cfg.sweep.backends if b not in BACKENDS]
    if bad or not cfg.sweep.backends:
        raise ConfigError(f"sweep.backends must be a non-empty subset of {BACKENDS}")
    if not cfg.sweep.w_values or list(cfg.sweep.w_values) != sorted(cfg.sweep.w_values) \
            or cfg.sweep.w_values[0] < 1 or cfg.sweep.repeats < 1:
        raise ConfigError("sweep.w_values must be ascending positive integers, sweep.repeats >= 1")
    if len(cfg.diffusion.source) != 2:
        raise ConfigError("diffusion.source must hold two indices")
    c = cfg.calibrate
    if not 0 < c.ps_target < 1 or c.n_series < 1 or c.verify_trials < 1:
        raise ConfigError("calibrate needs 0 < ps_target < 1, n_series >= 1, verify_trials >= 1")
    d = cfg.devices_mc
    if d.weight_samples < 1 or d.history_trials < 1 or d.n_positions < 2 or d.policy not in ("per_position", "per_trial"):
        raise ConfigError("devices_mc: invalid sample counts, n_positions or policy")
    if any(not v > 0 for v in dataclasses.astuple(cfg.tolerance)):
        raise ConfigError("tolerances must be positive")
    try:
        cfg.hardware_config()
    except ValueError as e:
        raise ConfigError(f"[hardware] {e}") from e
    return cfg


_SECTIONS = {f.name: f for f in fields(RunConfig) if f.name != "baselines"}


def config_from_dict(data: dict) -> RunConfig:
    unknown = sorted(set(data) - set(_SECTIONS) - {"baselines"})
    if unknown:
        raise ConfigError(f"unknown section(s): {', '.join(unknown)}")
    if isinstance(data.get("run"), dict) and isinstance(data["run"].get("seed"), str):
        # TOML integers stop at 2**63 - 1; larger u64 seeds travel as decimal strings
        run = dict(data["run"])
        if not run["seed"].isdigit():
            raise ConfigError(f"run.seed: expected an integer, got {run['seed']!r}")
        run["seed"] = int(run["seed"])
        data = {**data, "run": run}
    kw = {}
    for name, f in _SECTIONS.items():
        if name in data:
            kw[name] = _section(type(f.default), data[name], name)
    if "baselines" in data:
        kw["baselines"] = _baselines(data["baselines"])
    try:
        cfg = RunConfig(**kw)
    except (TypeError, ValueError) as e:
        raise ConfigError(str(e)) from e
    return _validate(cfg)


def load_config(path=None) -> RunConfig:
    if path is None:
        return _validate(RunConfig())
    try:
        with open(path, "rb") as fh:
            data = tomli.load(fh)
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    except tomli.TOMLDecodeError as e:
        raise ConfigError(f"invalid TOML in {path}: {e}") from e
    return config_from_dict(data)


def config_to_dict(cfg: RunConfig) -> dict:
    def plain(x):
        if isinstance(x, tuple):
            return [plain(v) for v in x]
        return x

    out = {}
    for name in _SECTIONS:
        sec = getattr(cfg, name)
        out[name] = {f.name: plain(getattr(sec, f.name)) for f in fields(sec)}
    if out["run"]["seed"] >= 2**63:
        out["run"]["seed"] = str(out["run"]["seed"])
    out["baselines"] = {k: dataclasses.asdict(v) for k, v in sorted(cfg.baselines.items())}
    return out


def dump_config(cfg: RunConfig) -> str:
    return tomli_w.dumps(config_to_dict(cfg))


def config_hash(cfg: RunConfig) -> str:
    """Digest of everything that can change results; workers and out are excluded."""
    d = config_to_dict(cfg)
    del d["run"]["workers"], d["run"]["out"]
    blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]
