#!/usr/bin/env python3
"""Grid-solver benchmarks against the analytic linear modes.

Runs the unstable case (growing mode) and the stable case (oscillating
mode) on the reference finite-difference settings, prints mismatch tables
against the closed-form solution, and checks the measured growth rate,
phase speed, and sound speed against the dispersion relation.
"""

import argparse
import math

import numpy as np

from gravlab import (
    compare_case,
    default_units,
    growth_rate,
    measure_growth_rate,
    measure_phase_speed,
    mismatch_report_text,
    phase_speed,
    preset_case,
    run_case,
)


def print_report(report):
    print(f"\n{report.solver_a} vs {report.solver_b} on {report.case}")
    print(f"{'time':>6} {'field':>6} {'mean%':>9} {'max%':>9}")
    for r in report.records:
        print(f"{r.time:6.2f} {r.fieldname:>6} {r.mean:9.4f} {r.max:9.4f}")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--quick", action="store_true",
                    help="coarser grids for a fast smoke run")
    ap.add_argument("--save", metavar="PATH",
                    help="also write the case-1 report here")
    args = ap.parse_args()

    u = default_units()
    n1 = 250 if args.quick else 1000
    n3 = 1000 if args.quick else 8000

    cfg1 = preset_case("case1", grid_points=n1)
    report1 = compare_case(cfg1, "fd", "lt", [0.5, 1.5, 2.5], u)
    print_report(report1)
    if args.save:
        with open(args.save, "w") as fh:
            fh.write(mismatch_report_text(report1))

    cfg3 = preset_case("case3", grid_points=n3)
    report3 = compare_case(cfg3, "fd", "lt", [2.0, 4.0, 6.0], u)
    print_report(report3)

    print("\nmeasured rates vs dispersion relation")
    traj1 = run_case(preset_case("case1", grid_points=n1, t_end=3.0),
                     np.linspace(0.0, 3.0, 13), u)
    fit = measure_growth_rate(traj1, u)
    k1 = u.jeans_wavenumber() / 1.11
    alpha = growth_rate(k1, u)
    print(f"growth rate   fit {fit.rate:.6f}  theory {alpha:.6f}  "
          f"rel err {abs(fit.rate - alpha) / alpha:+.2%}")

    traj3 = run_case(preset_case("case3", grid_points=n3, t_end=4.0),
                     np.linspace(0.0, 4.0, 9), u)
    speed = measure_phase_speed(traj3, u)
    k3 = u.jeans_wavenumber() / 0.8
    vp = phase_speed(k3, u)
    print(f"phase speed   fit {speed.speed:.6f}  theory {vp:.6f}  "
          f"rel err {abs(abs(speed.speed) - vp) / vp:+.2%}")

    sound = run_case(preset_case("soundwave_linear", grid_points=2000,
                                 t_end=2.0),
                     np.linspace(0.0, 2.0, 9), u)
    cfit = measure_phase_speed(sound, u)
    print(f"sound speed   fit {cfit.speed:.6f}  theory {u.c_s:.6f}  "
          f"rel err {abs(abs(cfit.speed) - u.c_s) / u.c_s:+.2%}")

    tau = 1.0 / alpha
    print(f"\ne-folding time at lambda = 1.11 lambda_J: {tau:.4f} "
          f"(alpha = {alpha:.6f})")


if __name__ == "__main__":
    main()
