"""Feedback-cooling characterization run.

Simulates the cooling preset, estimates the spectrum, fits the thermal
peak, and prints the inferred centre-of-mass temperature and particle
parameters.  Mirrors the calibration procedure used before any force
measurement.
"""

import argparse
from importlib.resources import files

from levitas import (
    SimulationPlan,
    cm_temperature,
    fit_lorentzian,
    load_config,
    parse_config,
    particle_params_from_fit,
    simulate,
    welch_psd,
)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default=None, help="experiment JSON "
                    "(default: bundled paper_cooling preset)")
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--segment", type=int, default=65536)
    args = ap.parse_args()

    if args.config:
        config = load_config(args.config)
    else:
        config = parse_config(files("levitas.presets").joinpath(
            "paper_cooling.json").read_text())
    seed = config.seed if args.seed is None else args.seed

    plan = SimulationPlan(experiment=config, duration=config.duration,
                          dt=config.dt, seed=seed, initial="thermal")
    traj = simulate(plan)
    psd = welch_psd(traj, segment_length=args.segment)
    fit = fit_lorentzian(psd)
    env = config.environment
    fit = particle_params_from_fit(fit, pressure=env.pressure,
                                   t0=env.gas_temperature,
                                   density=config.particle.density,
                                   gamma0=config.gamma0,
                                   gas_molecule_mass=env.gas_molecule_mass)

    t_cm_model = cm_temperature(env.gas_temperature, config.gamma0,
                                env.delta_gamma)
    print(f"segments averaged      {psd.segment_count}")
    print(f"fitted f_z             {fit.omega0_hat / 6.283185307179586:.1f} Hz")
    print(f"fitted Gamma_total     {fit.gamma_total_hat:.4g} rad/s "
          f"(model {config.gamma_total:.4g})")
    print(f"fitted T_cm            {fit.t_cm:.3f} K (model {t_cm_model:.3f})")
    print(f"inferred radius        {fit.radius * 1e9:.2f} nm "
          f"(true {config.particle.radius * 1e9:.2f})")
    print(f"calibration gamma      {fit.calibration_gamma:.4f}")


if __name__ == "__main__":
    main()
