"""Force sensitivity budget.

Prints the thermal force noise floor at the gas and centre-of-mass
temperatures, the quantum-limited sensitivity for the default integration
window, and the floor for an extrapolated high-vacuum configuration
(1e-9 mbar, 10 nm radius, 100 kHz trap).
"""

import argparse

from levitas import (
    Environment,
    ParticleSpec,
    cm_temperature,
    epstein_damping,
    min_detectable_force,
    sql_sensitivity,
    thermal_force_sensitivity,
)
from levitas.cli import DEFAULT_TAU_F
from levitas.constants import mbar


def row(label, value, unit="N/sqrt(Hz)"):
    print(f"  {label:44s} {value:.3e} {unit}")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--pressure-mbar", type=float, default=1.6e-5)
    ap.add_argument("--radius-nm", type=float, default=50.0)
    ap.add_argument("--density", type=float, default=2650.0)
    ap.add_argument("--frequency-khz", type=float, default=57.3)
    ap.add_argument("--cooling-ratio", type=float, default=99.0)
    args = ap.parse_args()

    particle = ParticleSpec(radius=args.radius_nm * 1e-9, density=args.density)
    env = Environment(pressure=mbar(args.pressure_mbar), gas_temperature=300.0)
    gamma0 = epstein_damping(env, particle)
    omega0 = 2.0 * 3.141592653589793 * args.frequency_khz * 1e3
    t_cm = cm_temperature(300.0, gamma0, args.cooling_ratio * gamma0)

    print(f"operating point: {args.radius_nm} nm, {args.pressure_mbar} mbar, "
          f"Gamma_0 = {gamma0:.4g} rad/s, T_cm = {t_cm:.2f} K")
    row("thermal floor at 300 K", thermal_force_sensitivity(
        300.0, particle.mass, omega0, gamma0))
    row("thermal floor at T_cm", thermal_force_sensitivity(
        t_cm, particle.mass, omega0, gamma0))
    row(f"quantum limit (tau_F = {DEFAULT_TAU_F} s)", sql_sensitivity(
        omega0, particle.mass, DEFAULT_TAU_F))
    row("min detectable force, 10 s, SNR 1", min_detectable_force(
        300.0, particle.mass, gamma0, 10.0), "N")

    extrap = ParticleSpec(radius=10e-9, density=args.density)
    extrap_env = Environment(pressure=mbar(1e-9), gas_temperature=300.0)
    extrap_gamma = epstein_damping(extrap_env, extrap)
    extrap_t = cm_temperature(300.0, extrap_gamma, args.cooling_ratio * extrap_gamma)
    print("extrapolated: 10 nm at 1e-9 mbar, 100 kHz trap")
    row("thermal floor at 300 K", thermal_force_sensitivity(
        300.0, extrap.mass, 2.0e5 * 3.141592653589793, extrap_gamma))
    row("thermal floor at T_cm", thermal_force_sensitivity(
        extrap_t, extrap.mass, 2.0e5 * 3.141592653589793, extrap_gamma))


if __name__ == "__main__":
    main()
