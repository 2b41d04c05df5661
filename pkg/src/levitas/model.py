"""Domain types and closed-form physics of the levitated charged nanoparticle.

Everything here is a pure function over immutable value types; SI units
throughout.  The gas damping model is the Epstein free-molecular drag law
for a sphere with diffuse reflection,

    Gamma_0 = (1 + pi/8) * (P / (r * rho)) * sqrt(8 m_gas / (pi k_B T)),

which is linear in pressure and scales as 1/(r * rho), valid in the
free-molecular regime (Kn >> 1, i.e. below ~1e-2 mbar for ~100 nm spheres;
at the few-mbar reference pressures used for calibration fits it remains
the documented convention of this package).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .constants import BOLTZMANN, ELEMENTARY_CHARGE, HBAR, VACUUM_PERMITTIVITY, AIR_MOLECULE_MASS
from .errors import DomainError, SingularityError

_EPSTEIN_DIFFUSE = 1.0 + math.pi / 8.0


def mass_from_radius(radius: float, density: float) -> float:
    """Sphere mass (4/3) pi r^3 rho in kg."""
    if radius < 0:
        raise DomainError("radius must be >= 0")
    if density <= 0:
        raise DomainError("density must be > 0")
    return (4.0 / 3.0) * math.pi * radius**3 * density


@dataclass(frozen=True)
class ParticleSpec:
    """The sensed object: a charged dielectric nanosphere."""

    radius: float        # m
    density: float       # kg/m^3
    charge_count: int = 0  # signed integer multiple of e

    def __post_init__(self):
        if self.radius <= 0:
            raise DomainError("ParticleSpec.radius must be > 0")
        if self.density <= 0:
            raise DomainError("ParticleSpec.density must be > 0")
        if self.charge_count != int(self.charge_count):
            raise DomainError("ParticleSpec.charge_count must be an integer")

    @property
    def mass(self) -> float:
        """Mass in kg, always derived from radius and density."""
        return mass_from_radius(self.radius, self.density)

    @property
    def charge(self) -> float:
        """Signed charge in C."""
        return self.charge_count * ELEMENTARY_CHARGE


@dataclass(frozen=True)
class TrapSpec:
    """Optical trap along the measured z axis."""

    omega_z: float              # rad/s
    calibration_gamma: float = 1.0  # metres per detector unit

    def __post_init__(self):
        if self.omega_z <= 0:
            raise DomainError("TrapSpec.omega_z must be > 0")
        if self.calibration_gamma <= 0:
            raise DomainError("TrapSpec.calibration_gamma must be > 0")

    def spring_constant(self, mass: float) -> float:
        """k_z = m omega_z^2."""
        return mass * self.omega_z**2


@dataclass(frozen=True)
class Environment:
    """Residual gas plus feedback damping acting on the particle."""

    pressure: float              # Pa
    gas_temperature: float       # K
    gas_molecule_mass: float = AIR_MOLECULE_MASS  # kg
    delta_gamma: float = 0.0     # extra viscous damping from feedback, rad/s

    def __post_init__(self):
        if self.pressure < 0:
            raise DomainError("Environment.pressure must be >= 0")
        if self.gas_temperature <= 0:
            raise DomainError("Environment.gas_temperature must be > 0")
        if self.gas_molecule_mass <= 0:
            raise DomainError("Environment.gas_molecule_mass must be > 0")
        if self.delta_gamma < 0:
            raise DomainError("Environment.delta_gamma must be >= 0")


@dataclass(frozen=True)
class NeedleSpec:
    """Charged needle geometry relative to the trap."""

    tip_radius: float    # m
    distance: float      # m, laser focus to needle tip (d')
    angle: float = 0.0   # rad, between force direction and z axis

    def __post_init__(self):
        if self.tip_radius <= 0:
            raise DomainError("NeedleSpec.tip_radius must be > 0")
        if self.distance <= self.tip_radius:
            raise DomainError("NeedleSpec.distance must exceed tip_radius")
        if not 0 <= self.angle < math.pi / 2:
            raise DomainError("NeedleSpec.angle must be in [0, pi/2)")


@dataclass(frozen=True)
class DriveProgram:
    """Voltage program applied to the needle."""

    mode: str = "none"          # none | dc | ac
    voltage: float = 0.0        # V
    omega_ac: float | None = None  # rad/s, required iff mode == "ac"

    def __post_init__(self):
        if self.mode not in ("none", "dc", "ac"):
            raise DomainError(f"DriveProgram.mode must be none|dc|ac, got {self.mode!r}")
        if self.mode == "ac":
            if self.omega_ac is None or self.omega_ac <= 0:
                raise DomainError("DriveProgram.omega_ac must be > 0 in ac mode")
        elif self.omega_ac is not None:
            raise DomainError("DriveProgram.omega_ac only applies in ac mode")


def epstein_damping(env: Environment, particle: ParticleSpec) -> float:
    """Gas damping rate Gamma_0 in rad/s (Epstein free-molecular drag).

    Linear in pressure; 1/(radius*density) at fixed pressure.  Diffuse
    reflection accommodation factor 1 + pi/8.
    """
    thermal = math.sqrt(8.0 * env.gas_molecule_mass / (math.pi * BOLTZMANN * env.gas_temperature))
    return _EPSTEIN_DIFFUSE * env.pressure / (particle.radius * particle.density) * thermal


def epstein_radius(gamma0: float, pressure: float, gas_temperature: float,
                   density: float, gas_molecule_mass: float = AIR_MOLECULE_MASS) -> float:
    """Invert the Epstein law for the particle radius at a known pressure."""
    from .errors import InversionError

    if gamma0 <= 0 or pressure <= 0:
        raise InversionError("Epstein inversion needs Gamma_0 > 0 and pressure > 0")
    thermal = math.sqrt(8.0 * gas_molecule_mass / (math.pi * BOLTZMANN * gas_temperature))
    radius = _EPSTEIN_DIFFUSE * pressure * thermal / (density * gamma0)
    if not (1e-10 < radius < 1e-4):
        raise InversionError(f"inverted radius {radius:.3g} m outside physical range")
    return radius


def thermal_force_sensitivity(temperature: float, mass: float,
                              omega0: float, gamma0: float) -> float:
    """Thermal force noise floor sqrt(4 k_B T m omega0 / Q_m) in N/sqrt(Hz).

    With Q_m = omega0/Gamma_0 this reduces to sqrt(4 k_B T m Gamma_0), i.e.
    the floor is independent of the trap frequency.
    """
    if temperature <= 0 or mass <= 0 or omega0 <= 0:
        raise DomainError("temperature, mass, omega0 must be > 0")
    if gamma0 < 0:
        raise DomainError("gamma0 must be >= 0")
    return math.sqrt(4.0 * BOLTZMANN * temperature * mass * gamma0)


def tip_charge(voltage: float, tip_radius: float) -> float:
    """Charge on a spherical needle tip at potential V: q_t = 4 pi eps0 r_t V."""
    if tip_radius <= 0:
        raise DomainError("tip_radius must be > 0")
    return 4.0 * math.pi * VACUUM_PERMITTIVITY * tip_radius * voltage


def coulomb_force(particle_charge: float, voltage: float,
                  needle: NeedleSpec, distance: float) -> float:
    """Coulomb force on the particle: F = q_p V r_t / d^2 (signed)."""
    if distance <= 0:
        raise DomainError("distance must be > 0")
    return particle_charge * voltage * needle.tip_radius / distance**2


def dc_displacement(particle_charge: float, voltage: float, needle: NeedleSpec,
                    trap: TrapSpec, mass: float) -> float:
    """Mean displacement under a DC needle voltage (small-displacement limit).

    <z> = cos(theta) q V r_t / (omega_z^2 m d'^2), linear in q and V.
    """
    if mass <= 0:
        raise DomainError("mass must be > 0")
    force = coulomb_force(particle_charge, voltage, needle, needle.distance)
    return math.cos(needle.angle) * force / (trap.omega_z**2 * mass)


def cm_temperature(gas_temperature: float, gamma0: float, delta_gamma: float) -> float:
    """Centre-of-mass temperature under feedback: T_cm = T0 G0 / (G0 + dG)."""
    if gamma0 <= 0:
        raise DomainError("gamma0 must be > 0")
    if delta_gamma < 0:
        raise DomainError("delta_gamma must be >= 0")
    return gas_temperature * gamma0 / (gamma0 + delta_gamma)


def ac_thermal_force_sq(temperature: float, mass: float, gamma0: float) -> float:
    """Thermal force power |F_th|^2 = 2 k_B T m Gamma_0 / pi in N^2.

    The temperature here is the oscillator's operating (centre-of-mass)
    temperature; pass T_cm for a feedback-cooled particle.
    """
    if temperature < 0 or mass <= 0 or gamma0 < 0:
        raise DomainError("invalid thermal force inputs")
    return 2.0 * BOLTZMANN * temperature * mass * gamma0 / math.pi


def ac_response_psd(omega_ac: float, coulomb: float, thermal_force_sq: float,
                    mass: float, omega0: float, gamma0: float,
                    delta_gamma: float) -> float:
    """Driven peak height (|F_th|^2 + |F_C|^2) / (m^2 D(omega_AC)).

    D(w) = (omega0^2 - w^2)^2 + (Gamma_0 + dGamma)^2 w^2.  Raises on the
    exact singularity omega_AC = omega0 with zero total damping.
    """
    if mass <= 0 or omega0 <= 0:
        raise DomainError("mass and omega0 must be > 0")
    gamma_total = gamma0 + delta_gamma
    denom = (omega0**2 - omega_ac**2) ** 2 + gamma_total**2 * omega_ac**2
    if denom == 0.0:
        raise SingularityError("on-resonance response with zero total damping")
    return (thermal_force_sq + coulomb**2) / (mass**2 * denom)


def sql_sensitivity(omega0: float, mass: float, tau_f: float) -> float:
    """Standard quantum limit sqrt(hbar omega0 m / (2 tau_F)) in N/sqrt(Hz)."""
    if omega0 <= 0 or tau_f <= 0:
        raise DomainError("omega0 and tau_f must be > 0")
    if mass < 0:
        raise DomainError("mass must be >= 0")
    return math.sqrt(HBAR * omega0 * mass / (2.0 * tau_f))


def quality_factor(omega0: float, gamma0: float) -> float:
    """Mechanical quality factor Q_m = omega0 / Gamma_0."""
    if gamma0 <= 0:
        raise DomainError("gamma0 must be > 0")
    return omega0 / gamma0
