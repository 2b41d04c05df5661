"""DC charge-counting campaign.

Runs the voltage sweep of the DC preset through seeded simulations, fits
the displacement-vs-voltage slope, and prints the integer charge.
"""

import argparse
from importlib.resources import files

from levitas import dc_charge_estimate, load_config, parse_config
from levitas.pipeline import run_dc_campaign


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default=None, help="experiment JSON "
                    "(default: bundled paper_dc preset)")
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()

    if args.config:
        config = load_config(args.config)
    else:
        config = parse_config(files("levitas.presets").joinpath(
            "paper_dc.json").read_text())
    seed = config.seed if args.seed is None else args.seed

    record = run_dc_campaign(config, master_seed=seed, jobs=args.jobs)
    for voltage, mean_z, stderr in record.points:
        print(f"  {voltage:9.1f} V   <z> = {mean_z:+.4e} m "
              f"(+- {stderr:.1e})")
    est = dc_charge_estimate(record)
    print(f"charge   {est.charge:.4e} C")
    print(f"count    {est.count} e  (residual {est.residual:+.4f}, "
          f"sigma {est.sigma_e:.2f} e)")
    if est.quality_warning:
        print("warning: residual exceeds the quality threshold")


if __name__ == "__main__":
    main()
