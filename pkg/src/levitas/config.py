"""Experiment configuration: strict JSON parsing with mandatory unit suffixes.

Every numeric key in the file carries its unit (``radius_nm``,
``pressure_mbar``, ...); values are converted to SI exactly once, here.
Unknown keys are rejected and every error carries a JSON-pointer path.

Serialization re-emits a canonical normalized document (sorted keys,
two-space indent, defaults materialized), so ``serialize(parse(text))`` is
a fixed point: configs written by this module round-trip byte-identically.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .constants import ATOMIC_MASS
from .errors import ConfigError, DomainError
from .model import (
    DriveProgram,
    Environment,
    NeedleSpec,
    ParticleSpec,
    TrapSpec,
    epstein_damping,
)


@dataclass(frozen=True)
class DcSweepPlan:
    """Voltage program for a DC displacement campaign."""

    voltages: tuple[float, ...]   # V
    dwell: float                  # s per voltage point
    settle_fraction: float = 0.2

    def __post_init__(self):
        if len(set(self.voltages)) < 3 or 0.0 not in self.voltages:
            raise DomainError("dc sweep needs >= 3 distinct voltages including 0")
        if self.dwell <= 0:
            raise DomainError("dc sweep dwell must be > 0")
        if not 0 <= self.settle_fraction < 1:
            raise DomainError("settle_fraction must be in [0, 1)")


@dataclass(frozen=True)
class AcSweepPlan:
    """Detuning sweep centred on resonance, mirroring the AC campaign."""

    points: int
    step: float                   # rad/s detuning increment
    dwell: float                  # s per point
    settle_fraction: float = 0.2

    def __post_init__(self):
        if self.points < 5:
            raise DomainError("ac sweep needs >= 5 points")
        if self.step <= 0 or self.dwell <= 0:
            raise DomainError("ac sweep step and dwell must be > 0")
        if not 0 <= self.settle_fraction < 1:
            raise DomainError("settle_fraction must be in [0, 1)")

    def detunings(self) -> tuple[float, ...]:
        """Detunings omega_0 - omega_AC in rad/s, bracketing zero."""
        half = (self.points - 1) / 2.0
        return tuple(self.step * (k - half) for k in range(self.points))


@dataclass(frozen=True)
class ExperimentConfig:
    """Full description of one run, all values SI."""

    particle: ParticleSpec
    trap: TrapSpec
    environment: Environment
    drive: DriveProgram
    needle: NeedleSpec | None = None
    dt: float = 2.5e-7
    duration: float = 1.0
    seed: int = 0
    dc_sweep: DcSweepPlan | None = None
    ac_sweep: AcSweepPlan | None = None
    # Normalized source document; basis for canonical serialization.
    raw: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def gamma0(self) -> float:
        return epstein_damping(self.environment, self.particle)

    @property
    def gamma_total(self) -> float:
        return self.gamma0 + self.environment.delta_gamma


_U = ATOMIC_MASS


def _require(obj: dict, key: str, ptr: str, kind=(int, float)):
    if key not in obj:
        raise ConfigError(f"missing required field {key!r}", ptr)
    val = obj[key]
    if kind is dict and not isinstance(val, dict):
        raise ConfigError(f"{key!r} must be an object", f"{ptr}/{key}")
    if kind == (int, float) and (isinstance(val, bool) or not isinstance(val, (int, float))):
        raise ConfigError(f"{key!r} must be a number", f"{ptr}/{key}")
    return val


def _check_keys(obj: dict, allowed: set[str], ptr: str):
    unknown = set(obj) - allowed
    if unknown:
        raise ConfigError(f"unknown keys {sorted(unknown)}", ptr)


def _missing_all(doc: dict) -> None:
    required = ["particle", "trap", "environment", "drive"]
    missing = [k for k in required if k not in doc]
    if missing:
        raise ConfigError(f"missing required sections: {missing}", "")


def parse_config(source: str | bytes | dict) -> ExperimentConfig:
    """Parse and validate a configuration document (JSON text or dict)."""
    if isinstance(source, (str, bytes)):
        try:
            doc = json.loads(source)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}", "") from None
    else:
        doc = source
    if not isinstance(doc, dict):
        raise ConfigError("top-level document must be a JSON object", "")
    _missing_all(doc)
    _check_keys(doc, {"particle", "trap", "environment", "needle", "drive",
                      "simulation", "dc_sweep", "ac_sweep"}, "")

    p = _require(doc, "particle", "", dict)
    _check_keys(p, {"radius_nm", "density_kg_m3", "charge_count"}, "/particle")
    radius = _require(p, "radius_nm", "/particle") * 1e-9
    density = _require(p, "density_kg_m3", "/particle")
    charge_count = p.get("charge_count", 0)
    if isinstance(charge_count, bool) or not isinstance(charge_count, int):
        raise ConfigError("charge_count must be an integer", "/particle/charge_count")
    try:
        particle = ParticleSpec(radius=radius, density=density, charge_count=charge_count)
    except DomainError as exc:
        raise ConfigError(str(exc), "/particle") from None

    t = _require(doc, "trap", "", dict)
    _check_keys(t, {"frequency_khz", "calibration_gamma_m_per_unit"}, "/trap")
    f_khz = _require(t, "frequency_khz", "/trap")
    gamma_cal = t.get("calibration_gamma_m_per_unit", 1.0)
    try:
        trap = TrapSpec(omega_z=2.0 * math.pi * f_khz * 1e3, calibration_gamma=gamma_cal)
    except DomainError as exc:
        raise ConfigError(str(exc), "/trap") from None

    env_obj = _require(doc, "environment", "", dict)
    _check_keys(env_obj, {"pressure_mbar", "gas_temperature_k", "gas_molecule_mass_u",
                          "feedback_damping_rad_s", "feedback_cooling_ratio"}, "/environment")
    pressure = _require(env_obj, "pressure_mbar", "/environment") * 100.0
    t0 = _require(env_obj, "gas_temperature_k", "/environment")
    mgas = env_obj.get("gas_molecule_mass_u", 28.97) * _U
    if "feedback_damping_rad_s" in env_obj and "feedback_cooling_ratio" in env_obj:
        raise ConfigError("give feedback_damping_rad_s or feedback_cooling_ratio, not both",
                          "/environment")
    try:
        env = Environment(pressure=pressure, gas_temperature=t0, gas_molecule_mass=mgas,
                          delta_gamma=env_obj.get("feedback_damping_rad_s", 0.0))
        if "feedback_cooling_ratio" in env_obj:
            ratio = env_obj["feedback_cooling_ratio"]
            if ratio < 0:
                raise DomainError("feedback_cooling_ratio must be >= 0")
            gamma0 = epstein_damping(env, particle)
            env = Environment(pressure=pressure, gas_temperature=t0, gas_molecule_mass=mgas,
                              delta_gamma=ratio * gamma0)
    except DomainError as exc:
        raise ConfigError(str(exc), "/environment") from None

    needle = None
    if "needle" in doc:
        n = _require(doc, "needle", "", dict)
        _check_keys(n, {"tip_radius_um", "distance_mm", "angle_deg"}, "/needle")
        try:
            needle = NeedleSpec(tip_radius=_require(n, "tip_radius_um", "/needle") * 1e-6,
                                distance=_require(n, "distance_mm", "/needle") * 1e-3,
                                angle=math.radians(n.get("angle_deg", 0.0)))
        except DomainError as exc:
            raise ConfigError(str(exc), "/needle") from None

    d = _require(doc, "drive", "", dict)
    _check_keys(d, {"mode", "voltage_v", "ac_frequency_khz"}, "/drive")
    mode = d.get("mode", "none")
    omega_ac = None
    if "ac_frequency_khz" in d:
        omega_ac = _require(d, "ac_frequency_khz", "/drive") * 2e3 * math.pi
    try:
        drive = DriveProgram(mode=mode, voltage=d.get("voltage_v", 0.0), omega_ac=omega_ac)
    except DomainError as exc:
        raise ConfigError(str(exc), "/drive") from None
    if drive.mode in ("dc", "ac") and needle is None:
        raise ConfigError("dc/ac drive requires a needle section", "/drive")

    dt, duration, seed = 2.5e-7, 1.0, 0
    if "simulation" in doc:
        s = _require(doc, "simulation", "", dict)
        _check_keys(s, {"dt_s", "duration_s", "seed"}, "/simulation")
        dt = s.get("dt_s", dt)
        duration = s.get("duration_s", duration)
        seed = s.get("seed", 0)
        if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer", "/simulation/seed")

    dc_sweep = None
    if "dc_sweep" in doc:
        s = _require(doc, "dc_sweep", "", dict)
        _check_keys(s, {"voltages_v", "dwell_s", "settle_fraction"}, "/dc_sweep")
        volts = _require(s, "voltages_v", "/dc_sweep", kind=object)
        if not isinstance(volts, list) or not all(isinstance(v, (int, float)) for v in volts):
            raise ConfigError("voltages_v must be a list of numbers", "/dc_sweep/voltages_v")
        try:
            dc_sweep = DcSweepPlan(voltages=tuple(float(v) for v in volts),
                                   dwell=_require(s, "dwell_s", "/dc_sweep"),
                                   settle_fraction=s.get("settle_fraction", 0.2))
        except DomainError as exc:
            raise ConfigError(str(exc), "/dc_sweep") from None
        if needle is None:
            raise ConfigError("dc_sweep requires a needle section", "/dc_sweep")

    ac_sweep = None
    if "ac_sweep" in doc:
        s = _require(doc, "ac_sweep", "", dict)
        _check_keys(s, {"points", "step_hz", "dwell_s", "settle_fraction"}, "/ac_sweep")
        pts = _require(s, "points", "/ac_sweep")
        if isinstance(pts, bool) or not isinstance(pts, int):
            raise ConfigError("points must be an integer", "/ac_sweep/points")
        try:
            ac_sweep = AcSweepPlan(points=pts,
                                   step=2.0 * math.pi * _require(s, "step_hz", "/ac_sweep"),
                                   dwell=_require(s, "dwell_s", "/ac_sweep"),
                                   settle_fraction=s.get("settle_fraction", 0.2))
        except DomainError as exc:
            raise ConfigError(str(exc), "/ac_sweep") from None
        if needle is None:
            raise ConfigError("ac_sweep requires a needle section", "/ac_sweep")

    return ExperimentConfig(particle=particle, trap=trap, environment=env, drive=drive,
                            needle=needle, dt=dt, duration=duration, seed=seed,
                            dc_sweep=dc_sweep, ac_sweep=ac_sweep,
                            raw=_normalize(doc))


def _normalize(doc: dict) -> dict:
    """Materialize defaults so serialization is canonical."""
    out = json.loads(json.dumps(doc))  # deep copy, JSON-clean
    out["particle"].setdefault("charge_count", 0)
    out["trap"].setdefault("calibration_gamma_m_per_unit", 1.0)
    env = out["environment"]
    env.setdefault("gas_molecule_mass_u", 28.97)
    if "feedback_damping_rad_s" not in env and "feedback_cooling_ratio" not in env:
        env["feedback_damping_rad_s"] = 0.0
    out["drive"].setdefault("mode", "none")
    out["drive"].setdefault("voltage_v", 0.0)
    if "needle" in out:
        out["needle"].setdefault("angle_deg", 0.0)
    sim = out.setdefault("simulation", {})
    sim.setdefault("dt_s", 2.5e-7)
    sim.setdefault("duration_s", 1.0)
    sim.setdefault("seed", 0)
    for key in ("dc_sweep", "ac_sweep"):
        if key in out:
            out[key].setdefault("settle_fraction", 0.2)
    return out


def serialize_config(config: ExperimentConfig) -> str:
    """Canonical JSON text for a parsed configuration."""
    return json.dumps(config.raw, indent=2, sort_keys=True) + "\n"


def load_config(path) -> ExperimentConfig:
    with open(path, "rb") as fh:
        return parse_config(fh.read())
