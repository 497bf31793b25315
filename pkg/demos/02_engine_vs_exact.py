"""Chain engine versus exact dense evolution on a small lattice.

With the bond cap at the maximal Schmidt rank (chi = 4^(n/2)) the chain
never truncates, so every observable must match the dense Kraus evolution
to machine precision at every depth.  A second pass with a tight cap shows
what truncation does: the trace drifts below 1 and the discarded-weight
budget grows, while the entropies stay qualitatively right.
"""

import numpy as np

from dmps.circuits import LatticeSpec, build_circuit
from dmps.engine import run_circuit
from dmps.observables import depth_record
from dmps.oracle import evolve_exact, exact_operator_ee, exact_purity

lattice = LatticeSpec(2, 3)
instance = build_circuit(lattice, depth=12, master_seed=7)
p = 0.1

exact = {}
evolve_exact(instance, p, observer=lambda d, s: exact.__setitem__(d, s),
             observe_every=2)

print(f"{lattice.L1}x{lattice.L2} lattice, p = {p}, depth 12")
print("\n-- untruncated chain (chi = 64) --")
print("depth  trace     purity    S_max    max|engine - exact|")
records = []
run_circuit(instance, p, chi_max=64, observe_every=2,
            observer=lambda d, s: records.append(depth_record(s, d)))
for rec in records:
    ds = exact[rec.depth]
    dev = max(
        abs(rec.trace - np.trace(ds.matrix).real),
        abs(rec.purity - exact_purity(ds)),
        max(abs(rec.ee_per_cut[l - 1] - exact_operator_ee(ds, l)) for l in (1, 2)),
    )
    print(f"{rec.depth:5d}  {rec.trace:.6f}  {rec.purity:.6f}  "
          f"{rec.s_max_over_cuts:6.4f}   {dev:.2e}")

print("\n-- truncated chain (chi = 8) --")
print("depth  trace     S_max    cum. discarded weight")
records = []
run_circuit(instance, p, chi_max=8, observe_every=2, trace_floor=0.0,
            observer=lambda d, s: records.append(depth_record(s, d)))
for rec in records:
    print(f"{rec.depth:5d}  {rec.trace:.6f}  {rec.s_max_over_cuts:6.4f}   "
          f"{rec.cum_discarded:.6f}")
