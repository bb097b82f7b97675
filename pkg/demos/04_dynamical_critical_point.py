#!/usr/bin/env python3
"""Locate a dynamical critical field at reduced scale (L = 8).

Starting from the ordered phase at h_i = 0 and T_i = 1/L, quenches to larger
h_f heat the system; interpolating T_f(h_f) against the equilibrium critical
line gives the field beyond which the steady state is paramagnetic.  About
two minutes at these settings; writes demo_out/tf_curve.csv.
"""

import time
from pathlib import Path

from quenchmap import (ModelParams, QmcConfig, build_lattice,
                       dynamical_critical_points, run_qmc, tf_curve)
from quenchmap.io import (critical_line_csv_rows, read_critical_line_csv,
                          tf_curve_csv_rows, write_csv)
from quenchmap.phases import SweepResources, build_critical_line
from quenchmap.quench import QmcEvaluator

out = Path("demo_out")
out.mkdir(exist_ok=True)

line_path = out / "critical_line.csv"
if line_path.exists():
    line = read_critical_line_csv(line_path)
    print(f"Reusing {line_path}")
else:
    print("Building a coarse critical line first (run demo 03 to reuse it)")
    line = build_critical_line([1.0, 2.0, 2.5], (8, 16),
                               SweepResources(n_thermalization=2_000,
                                              n_measure=16_000, n_bins=16,
                                              master_seed=7))
    header, rows = critical_line_csv_rows(line)
    write_csv(line_path, header, rows)

t0 = time.time()
L = 8
lattice = build_lattice(L)
est_i = run_qmc(QmcConfig(lattice=lattice, params=ModelParams(1.0, 0.0),
                          T=1.0 / L, n_thermalization=2_000,
                          n_measure=24_000, n_bins=16, rng_seed=31))
print(f"Initial ensemble at (h=0, T=1/{L}): "
      f"<zz> = {est_i['zz_bond_sum'].mean:.2f} of {2 * L * L}")

solver = SweepResources(n_thermalization=2_000, n_measure=24_000, n_bins=16,
                        master_seed=13)


def evaluator(h_f):
    return QmcEvaluator(solver.config(lattice, h_f, 1.0, 0),
                        solver.master_seed)


curve = tf_curve(est_i, [1.0, 1.2, 1.4, 1.6, 1.8, 2.0], evaluator)
print(f"\n{'h_f':>5s} {'T_f':>8s} {'bounds':>19s} {'T_c':>8s}  phase")
for p in curve.points:
    r = p.result
    t_c = line.temperature(p.h_f)
    phase = "FM" if r.T_f < t_c else "PM"
    print(f"{p.h_f:5.2f} {r.T_f:8.4f} [{r.T_lo:8.4f},{r.T_hi:8.4f}] "
          f"{t_c:8.4f}  {phase}")

points = dynamical_critical_points(curve, line)
for p in points:
    print(f"\ndynamical critical field: h_c^d = {p.h_c:.3f} "
          f"[{p.h_lo:.3f}, {p.h_hi:.3f}]  (branch {p.branch})")

header, rows = tf_curve_csv_rows(curve)
write_csv(out / "tf_curve.csv", header, rows)
print(f"\nWrote {out / 'tf_curve.csv'}  ({time.time() - t0:.0f}s)")
