"""Command-line experiment runner.

Exit codes: 0 success, 2 configuration error, 3 tolerance failure,
4 walker step cap exceeded.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import plotdata
from .cells import (
    CalibrationError,
    HistoryConfig,
    ProgrammingRangeError,
    WeightNoiseModel,
    build_activation_history,
    calibrate_drive,
    sample_weight_noise,
)
from .config import ConfigError, RunConfig, config_hash, dump_config, load_config
from .devices import DeviceDomainError, mtj_mean_switching_time
from .pde import (
    BACKENDS,
    convergence_sweep,
    paired_log_test,
    run_diffusion_protocol,
    run_steady_protocol,
)
from .walk import WalkCapExceeded, ledger_report

log = logging.getLogger("spinwalk")

EXIT_OK, EXIT_CONFIG, EXIT_TOLERANCE, EXIT_CAP = 0, 2, 3, 4

# stream tags for the commands that draw from numpy generators
_TAG_DEVICES_MC = 11
_TAG_CALIBRATE = 12


class _Context:
    """Output helpers bound to one command invocation."""

    def __init__(self, cfg: RunConfig, command: str):
        self.cfg = cfg
        self.command = command
        self.hash = config_hash(cfg)
        self.seed = cfg.run.seed
        self.out = Path(cfg.run.out)
        self.out.mkdir(parents=True, exist_ok=True)

    def header(self) -> list[str]:
        return [f"config_hash={self.hash}", f"seed={self.seed}", f"command={self.command}"]

    def write_csv(self, name: str, columns: list[str], rows) -> Path:
        path = self.out / name
        with open(path, "w", newline="") as fh:
            for line in self.header():
                fh.write(f"# {line}\n")
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(columns)
            for row in rows:
                writer.writerow([_fmt(v) for v in row])
        return path

    def write_json(self, name: str, doc: dict) -> Path:
        path = self.out / name
        body = {"config_hash": self.hash, "seed": self.seed, "command": self.command, **doc}
        path.write_text(json.dumps(body, indent=2) + "\n")
        return path

    def write_plot(self, name: str, kind: str, x, series: dict, x_label: str, y_label: str, y=None) -> Path:
        doc = plotdata.plot_document(kind, self.hash, self.seed, self.command, x, series, x_label, y_label, y)
        path = self.out / name
        path.write_text(json.dumps(doc) + "\n")
        (self.out / "plot_data.schema.json").write_text(plotdata.schema_json() + "\n")
        return path

    def ledger_doc(self, steps: int) -> dict:
        led = self.cfg.ledger(steps)
        return {"steps": led.steps, "hw_time_s": led.hw_time_s, "hw_energy_j": led.hw_energy_j,
                "baselines": ledger_report(led)}


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return int(v)
    return v


def _verdict(value: float, tol: float, label: str) -> int:
    ok = value < tol
    print(f"{label} = {value:.6g} (tolerance {tol:g}): {'PASS' if ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_TOLERANCE


# --------------------------------------------------------------------------- commands


def cmd_solve_1d(cfg: RunConfig) -> int:
    """Steady 1D heat problem: repeated protocol, variance and ledger."""
    ctx = _Context(cfg, "solve-1d")
    kind, p = cfg.run.backend, cfg.steady
    res = run_steady_protocol(p, kind, cfg.hardware_config(), cfg.run.seed, cfg.run.runs,
                              cfg.run.effective_workers, cfg.run.max_steps)
    x = res.grid[0]
    ctx.write_csv(f"solution_1d_{kind}.csv", ["i", "x", "u_mean", "u_analytical", "sigma2"],
                  zip(range(p.n), x, res.mean, res.analytical, res.report.sigma2))
    tol = cfg.tolerance.steady(kind)
    ctx.write_json(f"variance_1d_{kind}.json", {
        "backend": kind, "runs": res.report.runs, "max_sigma2": res.report.max,
        "mean_sigma2": res.report.mean, "argmax": res.report.argmax[0],
        "sigma2": res.report.sigma2.tolist(), "tolerance": tol, "passed": res.report.max < tol,
    })
    ctx.write_json(f"ledger_1d_{kind}.json", ctx.ledger_doc(res.ledger.steps))
    ctx.write_plot(f"plot_1d_{kind}.json", "line", x, {"mean": res.mean, "analytical": res.analytical},
                   "x", "u")
    return _verdict(res.report.max, tol, f"solve-1d [{kind}] max sigma^2")


def cmd_solve_2d(cfg: RunConfig) -> int:
    """Point-source 2D diffusion: repeated protocol against the heat kernel."""
    ctx = _Context(cfg, "solve-2d")
    kind, p = cfg.run.backend, cfg.diffusion
    res = run_diffusion_protocol(p, kind, cfg.hardware_config(), cfg.run.seed, cfg.run.runs,
                                 cfg.run.effective_workers)
    gx, gy = res.grid
    ctx.write_csv(f"grid_2d_{kind}.csv", ["i", "j", "x", "y", "c_mean", "c_analytical", "sigma2"],
                  ((i, j, gx[i, j], gy[i, j], res.mean[i, j], res.analytical[i, j], res.report.sigma2[i, j])
                   for i in range(p.n) for j in range(p.n)))
    tol = cfg.tolerance.diffusion
    ctx.write_json(f"variance_2d_{kind}.json", {
        "backend": kind, "runs": res.report.runs, "t": p.t, "max_sigma2": res.report.max,
        "mean_sigma2": res.report.mean, "argmax": list(res.report.argmax),
        "tolerance": tol, "passed": res.report.max < tol,
    })
    ctx.write_json(f"ledger_2d_{kind}.json", ctx.ledger_doc(res.ledger.steps))
    ctx.write_plot(f"plot_2d_{kind}.json", "grid", gx[:, 0], {"mean": res.mean, "analytical": res.analytical},
                   "x", "y", y=gy[0, :])
    return _verdict(res.report.max, tol, f"solve-2d [{kind}] max sigma^2")


def cmd_sweep(cfg: RunConfig) -> int:
    """Convergence of max sigma^2 over walker counts for each backend."""
    ctx = _Context(cfg, "sweep")
    s = cfg.sweep
    res = convergence_sweep(cfg.diffusion, s.w_values, s.backends, cfg.hardware_config(), cfg.run.seed,
                            cfg.run.runs, cfg.run.effective_workers, s.repeats)
    ctx.write_csv("sweep.csv", ["w", "backend", "repeat", "max_sigma2"],
                  ((r["w"], r["backend"], r["repeat"], r["max_sigma2"]) for r in res.rows))
    means = {b: res.max_sigma2(b).mean(axis=1) for b in s.backends}
    ctx.write_csv("sweep_summary.csv", ["w"] + [f"mean_max_sigma2_{b}" for b in s.backends],
                  ([w] + [means[b][k] for b in s.backends] for k, w in enumerate(s.w_values)))
    doc = {"w_values": list(s.w_values), "repeats": s.repeats, "plateau": res.plateau}
    if "software" in s.backends and "hw-p" in s.backends and len(s.w_values) * s.repeats >= 2:
        z, ok = paired_log_test(res.max_sigma2("hw-p"), res.max_sigma2("software"))
        doc["paired_hw_p_vs_software"] = {"z": z, "indistinguishable": ok}
    if "hw-p" in res.plateau and "hw-pv" in res.plateau and res.plateau["hw-p"] > 0:
        doc["plateau_ratio_pv_over_p"] = res.plateau["hw-pv"] / res.plateau["hw-p"]
    ctx.write_json("sweep.json", doc)
    ctx.write_plot("plot_sweep.json", "line", s.w_values, means, "W", "max sigma^2")
    for k, w in enumerate(s.w_values):
        print(f"W={w}: " + ", ".join(f"{b}={means[b][k]:.4g}" for b in s.backends))
    for b, v in res.plateau.items():
        print(f"plateau {b} = {v:.4g}")
    return EXIT_OK


def cmd_devices_mc(cfg: RunConfig) -> int:
    """Weight-noise statistics and an activation-history table."""
    ctx = _Context(cfg, "devices-mc")
    d = cfg.devices_mc
    rng = np.random.default_rng(np.random.SeedSequence([cfg.run.seed, _TAG_DEVICES_MC]))
    f = sample_weight_noise(cfg.noise, rng, size=d.weight_samples)
    shift, var = float(f.mean() - 1.0), float(f.var(ddof=1))
    counts, edges = np.histogram(f, bins=60)
    hw = cfg.hardware_config()
    if not d.voltage_noise:
        hw = dataclasses.replace(hw, noise=WeightNoiseModel.zero())
    hist = build_activation_history(HistoryConfig(hw, cfg.calibrate.ps_target, d.n_positions, d.policy),
                                    d.history_trials, rng)
    hist.to_csv(ctx.out / "activation_history.csv", ctx.header())
    interior = (hist.start_index > 0) & (hist.start_index < d.n_positions - 1)
    moves = hist.move[interior]
    tol = cfg.tolerance
    doc = {
        "weight_samples": d.weight_samples,
        "weight_mean_shift": shift,
        "weight_mean_shift_pct": 100 * shift,
        "weight_variance": var,
        "history_trials": d.history_trials,
        "history_policy": d.policy,
        "history_interior_fractions": {
            "left": float(np.mean(moves == -1)), "stay": float(np.mean(moves == 0)),
            "right": float(np.mean(moves == 1)),
        },
        "history_stay_fraction": float(np.mean(hist.move == 0)),
        "passed": abs(shift) < tol.weight_mean_shift and var < tol.weight_variance,
    }
    ctx.write_json("weight_stats.json", doc)
    ctx.write_plot("plot_weights.json", "histogram", 0.5 * (edges[1:] + edges[:-1]), {"count": counts},
                   "weight factor", "count")
    print(f"weight mean shift = {100 * shift:+.4f} %, variance = {var:.4g}")
    print(f"activation history: stay fraction {doc['history_stay_fraction']:.4f} over {d.history_trials} cycles")
    a = _verdict(abs(shift), tol.weight_mean_shift, "|weight mean shift|")
    b = _verdict(var, tol.weight_variance, "weight variance")
    return max(a, b)


def cmd_calibrate(cfg: RunConfig) -> int:
    """Drive current and synapse weight for a target stay probability."""
    ctx = _Context(cfg, "calibrate")
    c, circ, mtj = cfg.calibrate, cfg.circuit, cfg.mtj
    i, w = calibrate_drive(c.ps_target, mtj, circ.pulse_width, circ, c.n_series)
    # verification: nominal devices, noiseless drive, exponential race over the window
    rng = np.random.default_rng(np.random.SeedSequence([cfg.run.seed, _TAG_CALIBRATE]))
    tau = mtj_mean_switching_time(mtj, i)
    first = rng.exponential(tau, size=(c.verify_trials, c.n_series)).min(axis=1)
    stay = float(np.mean(first >= circ.pulse_width))
    half = 3.0 * math.sqrt(c.ps_target * (1.0 - c.ps_target) / c.verify_trials)
    ok = abs(stay - c.ps_target) <= half
    ctx.write_json("calibration.json", {
        "ps_target": c.ps_target, "n_series": c.n_series, "i_drive_a": i, "i_over_ic0": i / mtj.i_c0,
        "weight": w, "verify_trials": c.verify_trials, "stay_fraction": stay,
        "ci_3sigma": [c.ps_target - half, c.ps_target + half], "passed": ok,
    })
    print(f"i_drive = {i:.6g} A (i/i_c0 = {i / mtj.i_c0:.4f}), w = {w:.6f}")
    print(f"verification: stay fraction {stay:.4f} over {c.verify_trials} cycles, "
          f"3-sigma band [{c.ps_target - half:.4f}, {c.ps_target + half:.4f}]: {'PASS' if ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_TOLERANCE


COMMANDS = {
    "solve-1d": cmd_solve_1d,
    "solve-2d": cmd_solve_2d,
    "sweep": cmd_sweep,
    "devices-mc": cmd_devices_mc,
    "calibrate": cmd_calibrate,
}


# --------------------------------------------------------------------------- entry point


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _global_flags(sub: bool) -> argparse.ArgumentParser:
    # subcommand copies default to SUPPRESS so they never clobber flags given earlier
    d = argparse.SUPPRESS if sub else None
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", default=d, help="TOML run configuration")
    p.add_argument("--seed", type=_u64, default=d, help="master seed (u64)")
    p.add_argument("--workers", type=int, default=d, help="worker threads (default: all cores)")
    p.add_argument("--backend", choices=BACKENDS, default=d)
    p.add_argument("--out", default=d, help="output directory")
    p.add_argument("--print-config", action="store_true", default=d,
                   help="print the effective configuration and exit")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spinwalk", parents=[_global_flags(False)],
                                     description="Random-walk PDE solver on emulated stochastic spin hardware.")
    subs = parser.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        subs.add_parser(name, parents=[_global_flags(True)], help=fn.__doc__)
    return parser


def effective_config(args) -> RunConfig:
    cfg = load_config(args.config)
    run = {k: getattr(args, k) for k in ("seed", "workers", "backend", "out") if getattr(args, k, None) is not None}
    if run:
        cfg = cfg.replace(run=dataclasses.replace(cfg.run, **run))
        if cfg.run.workers < 0:
            raise ConfigError("--workers must be >= 0")
    return cfg


def main(argv=None) -> int:
    level = getattr(logging, os.environ.get("NEUROPDE_LOG", "WARNING").upper(), logging.WARNING)
    logging.basicConfig(level=level if isinstance(level, int) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_CONFIG if e.code else EXIT_OK
    try:
        cfg = effective_config(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    if args.print_config:
        sys.stdout.write(dump_config(cfg))
        return EXIT_OK
    log.info("%s: config %s, seed %d", args.command, config_hash(cfg), cfg.run.seed)
    try:
        return COMMANDS[args.command](cfg)
    except WalkCapExceeded as e:
        print(f"step cap exceeded: {e}", file=sys.stderr)
        return EXIT_CAP
    except (CalibrationError, ProgrammingRangeError, DeviceDomainError, ConfigError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
