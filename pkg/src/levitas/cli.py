"""Command-line front end.

Every artifact is a pure function of (config file bytes, seed, tool
version): outputs are named by a run id derived from exactly those three
inputs, and no timestamps or machine state enter any file.  Errors are
emitted as structured JSON on stderr; exit code 1 flags data-dependent
analysis failures, 2 flags usage and configuration problems.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
from pathlib import Path

from . import __version__
from .config import ExperimentConfig, parse_config, serialize_config
from .errors import LevitasError, UsageError
from .model import sql_sensitivity, thermal_force_sensitivity, cm_temperature
from .pipeline import (
    ac_charge_estimate,
    ac_record_to_csv,
    charge_to_dict,
    dc_charge_estimate,
    dc_record_to_csv,
    enhancement_factor,
    fit_detuning_sweep,
    force_to_dict,
    min_detectable_force,
    propagate_pressure_uncertainty,
    run_ac_campaign,
    run_dc_campaign,
)
from .simulate import SimulationPlan, load_trajectory, simulate, save_trajectory
from .spectral import (
    fit_lorentzian,
    fit_to_dict,
    particle_params_from_fit,
    psd_to_csv,
    welch_psd,
)

# Reference force-noise integration window for the quantum-limit row of
# the sensitivity table.
DEFAULT_TAU_F = 0.74  # s


def run_id(config_bytes: bytes, seed: int, version: str = __version__) -> str:
    digest = hashlib.sha256(config_bytes + str(seed).encode() + version.encode())
    return digest.hexdigest()[:12]


def _load(args) -> tuple[ExperimentConfig, bytes, int]:
    try:
        raw = Path(args.config).read_bytes()
    except OSError as exc:
        raise UsageError(f"cannot read config: {exc}") from None
    config = parse_config(raw)
    seed = config.seed if args.seed is None else args.seed
    return config, raw, seed


def _outdir(args) -> Path:
    root = args.out or os.environ.get("LEVITAS_OUT") or "."
    path = Path(root)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _simulate(config: ExperimentConfig, seed: int):
    plan = SimulationPlan(experiment=config, duration=config.duration,
                          dt=config.dt, seed=seed)
    return simulate(plan)


def _default_segment(n: int) -> int:
    # Around 16 averaged segments at 50% overlap, power-of-two length.
    seg = 1 << max(int(math.floor(math.log2(max(n // 8, 8)))), 3)
    return min(seg, n)


def _welch(config: ExperimentConfig, seed: int, trajectory_path=None):
    if trajectory_path is not None:
        traj = load_trajectory(trajectory_path)
    else:
        traj = _simulate(config, seed)
    return welch_psd(traj, segment_length=_default_segment(len(traj)))


def _fit(config: ExperimentConfig, seed: int, trajectory_path=None):
    psd = _welch(config, seed, trajectory_path)
    exclude = config.drive.omega_ac if config.drive.mode == "ac" else None
    fit = fit_lorentzian(psd, exclude_omega=exclude)
    env = config.environment
    return particle_params_from_fit(
        fit, pressure=env.pressure, t0=env.gas_temperature,
        density=config.particle.density,
        gamma0=config.gamma0 if env.delta_gamma > 0 else None,
        gas_molecule_mass=env.gas_molecule_mass)


def _sensitivity_rows(config: ExperimentConfig) -> list[dict]:
    env = config.environment
    particle = config.particle
    trap = config.trap
    gamma0 = config.gamma0
    t_cm = cm_temperature(env.gas_temperature, gamma0, env.delta_gamma) \
        if gamma0 > 0 else env.gas_temperature
    rows = [
        {"quantity": "thermal_floor_gas_temperature",
         "value_n_per_sqrt_hz": thermal_force_sensitivity(
             env.gas_temperature, particle.mass, trap.omega_z, gamma0)},
        {"quantity": "thermal_floor_cm_temperature",
         "value_n_per_sqrt_hz": thermal_force_sensitivity(
             t_cm, particle.mass, trap.omega_z, gamma0)},
        {"quantity": "standard_quantum_limit",
         "value_n_per_sqrt_hz": sql_sensitivity(trap.omega_z, particle.mass,
                                                DEFAULT_TAU_F),
         "tau_f_s": DEFAULT_TAU_F},
        {"quantity": "min_detectable_force_1s",
         "value_n": min_detectable_force(env.gas_temperature, particle.mass,
                                         gamma0, 1.0)},
    ]
    return rows


def _dc_results(config: ExperimentConfig, seed: int, jobs: int):
    record = run_dc_campaign(config, seed, jobs=jobs)
    charge = dc_charge_estimate(record)
    return record, charge


def _ac_results(config: ExperimentConfig, seed: int, jobs: int):
    record = run_ac_campaign(config, seed, jobs=jobs)
    force = fit_detuning_sweep(record)
    charge = ac_charge_estimate(force.force, record.voltage, record.needle,
                                project=True, force_sigma=force.sigma)
    enhancement = enhancement_factor(record)
    return record, force, charge, enhancement


def cmd_simulate(args) -> int:
    config, raw, seed = _load(args)
    rid = run_id(raw, seed)
    out = _outdir(args)
    traj = _simulate(config, seed)
    if args.format == "json":
        payload = {"run_id": rid, "seed": seed, "dt_s": traj.dt,
                   "z_m": [float(v) for v in traj.positions]}
        _write_json(out / f"{rid}_trajectory.json", payload)
    else:
        save_trajectory(traj, out / f"{rid}_trajectory.csv")
    print(out / f"{rid}_trajectory.{args.format}")
    return 0


def cmd_psd(args) -> int:
    config, raw, seed = _load(args)
    rid = run_id(raw, seed)
    out = _outdir(args)
    psd = _welch(config, seed, args.trajectory)
    if args.format == "json":
        payload = {"run_id": rid, "seed": seed,
                   "convention": psd.convention,
                   "resolution_bandwidth_rad_s": psd.resolution_bandwidth,
                   "segment_count": psd.segment_count,
                   "omega_rad_s": [float(v) for v in psd.omega],
                   "density_m2_s": [float(v) for v in psd.density]}
        _write_json(out / f"{rid}_psd.json", payload)
    else:
        psd_to_csv(psd, out / f"{rid}_psd.csv")
    print(out / f"{rid}_psd.{args.format}")
    return 0


def cmd_fit(args) -> int:
    config, raw, seed = _load(args)
    rid = run_id(raw, seed)
    out = _outdir(args)
    fit = _fit(config, seed, args.trajectory)
    payload = {"run_id": rid, "seed": seed, "version": __version__}
    payload.update(fit_to_dict(fit))
    _write_json(out / f"{rid}_fit.json", payload)
    print(out / f"{rid}_fit.json")
    return 0


def cmd_dc_sweep(args) -> int:
    config, raw, seed = _load(args)
    rid = run_id(raw, seed)
    out = _outdir(args)
    record, charge = _dc_results(config, seed, args.jobs)
    dc_record_to_csv(record, out / f"{rid}_dc_sweep.csv")
    payload = {"run_id": rid, "seed": seed, "version": __version__,
               "charge": charge_to_dict(charge)}
    _write_json(out / f"{rid}_dc_charge.json", payload)
    print(out / f"{rid}_dc_sweep.csv")
    print(out / f"{rid}_dc_charge.json")
    return 0


def cmd_ac_sweep(args) -> int:
    config, raw, seed = _load(args)
    rid = run_id(raw, seed)
    out = _outdir(args)
    record, force, charge, enhancement = _ac_results(config, seed, args.jobs)
    ac_record_to_csv(record, out / f"{rid}_ac_sweep.csv")
    payload = {"run_id": rid, "seed": seed, "version": __version__,
               "force": force_to_dict(force),
               "charge": charge_to_dict(charge),
               "enhancement_factor": enhancement}
    _write_json(out / f"{rid}_ac_force.json", payload)
    print(out / f"{rid}_ac_sweep.csv")
    print(out / f"{rid}_ac_force.json")
    return 0


def cmd_sensitivity(args) -> int:
    config, raw, seed = _load(args)
    rid = run_id(raw, seed)
    out = _outdir(args)
    rows = _sensitivity_rows(config)
    if args.format == "json":
        _write_json(out / f"{rid}_sensitivity.json",
                    {"run_id": rid, "version": __version__, "rows": rows})
        print(out / f"{rid}_sensitivity.json")
    else:
        path = out / f"{rid}_sensitivity.csv"
        lines = ["quantity,value"]
        for row in rows:
            value = row.get("value_n_per_sqrt_hz", row.get("value_n"))
            lines.append(f"{row['quantity']},{value:.17g}")
        path.write_text("\n".join(lines) + "\n")
        print(path)
    return 0


def cmd_report(args) -> int:
    config, raw, seed = _load(args)
    rid = run_id(raw, seed)
    out = _outdir(args)
    report = {
        "run_id": rid,
        "version": __version__,
        "seed": seed,
        "config": json.loads(serialize_config(config)),
        "sensitivity": _sensitivity_rows(config),
    }
    report["calibration_fit"] = fit_to_dict(_fit(config, seed))
    if config.dc_sweep is not None:
        _, charge = _dc_results(config, seed, args.jobs)
        report["dc_charge"] = charge_to_dict(charge)
    if config.ac_sweep is not None:
        _, force, charge, enhancement = _ac_results(config, seed, args.jobs)
        report["ac_force"] = force_to_dict(force)
        report["ac_charge"] = charge_to_dict(charge)
        report["enhancement_factor"] = enhancement
    mass_val, mass_sig = propagate_pressure_uncertainty(
        config.particle.mass, "mass", 0.15)
    report["mass_kg"] = {"value": mass_val, "sigma_pressure": mass_sig}
    _write_json(out / f"{rid}_report.json", report)
    print(out / f"{rid}_report.json")
    return 0


_COMMANDS = {
    "simulate": cmd_simulate,
    "psd": cmd_psd,
    "fit": cmd_fit,
    "dc-sweep": cmd_dc_sweep,
    "ac-sweep": cmd_ac_sweep,
    "sensitivity": cmd_sensitivity,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="levitas",
        description="Levitated-nanoparticle force sensing: simulate, "
                    "calibrate, and run measurement campaigns.")
    parser.add_argument("--version", action="version",
                        version=f"levitas {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", required=True, help="experiment JSON file")
        cmd.add_argument("--seed", type=int, default=None,
                         help="override the config seed")
        cmd.add_argument("--out", default=None,
                         help="output directory (default: $LEVITAS_OUT or .)")
        cmd.add_argument("--jobs", type=int, default=1,
                         help="parallel workers for sweep points")
        cmd.add_argument("--format", choices=("csv", "json"), default="csv")
        if name in ("psd", "fit"):
            cmd.add_argument("--trajectory", default=None,
                             help="analyze a saved trajectory CSV instead "
                                  "of simulating")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse already printed its message; map to usage exit code
        return 0 if exc.code == 0 else 2
    if args.seed is not None and not 0 <= args.seed < 2**64:
        _emit_error(UsageError("--seed must be a 64-bit unsigned integer"))
        return 2
    if args.jobs < 1:
        _emit_error(UsageError("--jobs must be >= 1"))
        return 2
    try:
        return _COMMANDS[args.command](args)
    except LevitasError as exc:
        _emit_error(exc)
        return exc.exit_code


def _emit_error(exc: LevitasError) -> None:
    payload = {"error": type(exc).__name__, "message": str(exc),
               "exit_code": exc.exit_code}
    pointer = getattr(exc, "pointer", None)
    if pointer:
        payload["pointer"] = pointer
    step = getattr(exc, "step_index", None)
    if step is not None:
        payload["step_index"] = step
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
