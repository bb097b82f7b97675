#!/usr/bin/env python3
"""Optional long run: the 24x24 dynamical critical field at h_i = 0.

Reduced-scale results (L = 12) bracket the large-lattice value; this script
repeats the sweep at L = 24 with T_i = 1/24 and heavier statistics, targeting
h_c^d = 1.6 +- 0.1.  Expect several hours of wall time; intermediate rows
stream to stdout and everything lands in demo_out/.  Not part of any test
gate.
"""

import time
from pathlib import Path

from quenchmap import (ModelParams, QmcConfig, build_lattice,
                       dynamical_critical_points, run_qmc, tf_curve)
from quenchmap.io import (critical_line_csv_rows, tf_curve_csv_rows,
                          write_csv)
from quenchmap.phases import SweepResources, build_critical_line
from quenchmap.quench import QmcEvaluator

out = Path("demo_out")
out.mkdir(exist_ok=True)
t0 = time.time()

line_resources = SweepResources(n_thermalization=10_000, n_measure=80_000,
                                n_bins=32, master_seed=101)
line = build_critical_line([0.5, 1.0, 1.25, 1.5, 1.75, 2.0, 2.25, 2.5, 2.75,
                            2.9], (8, 16), line_resources)
write_csv(out / "critical_line_fine.csv", *critical_line_csv_rows(line))
print(f"critical line done ({time.time() - t0:.0f}s)")

L = 24
lattice = build_lattice(L)
est_i = run_qmc(QmcConfig(lattice=lattice, params=ModelParams(1.0, 0.0),
                          T=1.0 / L, n_thermalization=10_000,
                          n_measure=100_000, n_bins=32, rng_seed=2 ** 40 + 7))
print(f"initial ensemble done ({time.time() - t0:.0f}s)")

solver = SweepResources(n_thermalization=10_000, n_measure=60_000, n_bins=20,
                        master_seed=303)


def evaluator(h_f):
    return QmcEvaluator(solver.config(lattice, h_f, 1.0, 0),
                        solver.master_seed)


grid = [1.3, 1.4, 1.5, 1.55, 1.6, 1.65, 1.7, 1.8, 1.9]
curve = tf_curve(est_i, grid, evaluator)
for p in curve.points:
    if p.status == "ok":
        print(f"h_f={p.h_f:5.2f}  T_f={p.result.T_f:.4f} "
              f"[{p.result.T_lo:.4f}, {p.result.T_hi:.4f}]  "
              f"({time.time() - t0:.0f}s)")
    else:
        print(f"h_f={p.h_f:5.2f}  {p.status}")

write_csv(out / "tf_curve_L24.csv", *tf_curve_csv_rows(curve))
for p in dynamical_critical_points(curve, line):
    print(f"\nh_c^d(L=24) = {p.h_c:.3f}  [{p.h_lo:.3f}, {p.h_hi:.3f}]")
print(f"total {time.time() - t0:.0f}s")
