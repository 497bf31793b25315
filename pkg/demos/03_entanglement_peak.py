"""Rise and fall of operator entanglement entropy with circuit depth.

Two processes compete in a noisy random circuit: entangling gates spread
correlations ballistically while depolarizing noise drains information
exponentially fast.  The operator EE therefore rises, peaks at a
noise-dependent depth, and decays toward zero as the state approaches
maximal mixedness (where the vectorized state is again a product).

This desk-scale demo sweeps a 3x4 lattice over three noise rates, prints
the instance-averaged curves, and extracts the peak for each rate; smaller
noise gives a higher, later peak.  Sweep outputs (raw and aggregated CSVs,
smax.csv, manifest.json) land in demo_out/peak_sweep.
"""

import numpy as np

from dmps.harness import config_from_dict, extract_s_max, run_sweep

config = config_from_dict({
    "schema_version": 1,
    "lattices": [[3, 4]],
    "p_values": [0.12, 0.2, 0.3],
    "chi": 64,
    "depth_max": 16,
    "master_seed": 11,
    "instances": 4,
    "observe_every": 2,
    "trace_floor": 0.3,
})

result = run_sweep(config, output_dir="demo_out/peak_sweep")

for grid in result.grids:
    print(f"\np = {grid.p}  (mean over {grid.n_kept} instances, chi = {config.chi})")
    print("depth  S_max(mean)  stderr   trace(mean)")
    for i, d in enumerate(grid.depths):
        print(f"{d:5d}  {grid.s_max_mean[i]:10.4f}  {grid.s_max_se[i]:.4f}   "
              f"{grid.trace_mean[i]:.4f}")

print("\npeak summary (max of the averaged curve):")
for row in extract_s_max(result):
    note = "" if row.peak_bracketed else "  [peak not bracketed]"
    print(f"  p = {row.p}: S_max = {row.s_max:.3f} bits at depth {row.t_peak}"
          f" (mean of per-instance maxima {row.mean_of_instance_max:.3f}){note}")

print("\nwrote demo_out/peak_sweep/{raw_*,agg_*,smax}.csv and manifest.json")
