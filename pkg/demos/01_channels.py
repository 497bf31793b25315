"""Noisy two-qubit gates as 16x16 superoperators.

A density matrix vectorizes row-major (ket index first), turning a channel
into an ordinary matrix on the 16-dimensional two-qubit vec space.  This
script builds the three channel constructors and checks their structure
numerically: trace preservation, complete positivity (Choi spectrum),
unitality of the depolarizing part, and the complete-depolarization point
p = 15/16 where every input collapses to I/4.
"""

import numpy as np

from dmps.channels import (
    VEC_I4,
    choi_matrix,
    depolarizing_superop,
    noisy_gate_superop,
    unitary_superop,
)
from dmps.circuits import gate_rng, sample_haar_unitary

rng_u = gate_rng(master_seed=1, layer=0, a_flat=0, b_flat=1)
u = sample_haar_unitary(rng_u)
print("Haar-random U, unitarity deviation:",
      np.max(np.abs(u.conj().T @ u - np.eye(4))))

for p in (0.0, 0.1, 15 / 16):
    op = noisy_gate_superop(u, p)
    tp = np.max(np.abs(VEC_I4 @ op.matrix - VEC_I4))
    choi_floor = np.linalg.eigvalsh(choi_matrix(op)).min()
    print(f"p = {p:.4f}: trace-preservation dev {tp:.2e}, "
          f"Choi eigenvalue floor {choi_floor:+.2e}")

print("\nDepolarizing channel is unital (fixes vec(I)):")
for p in (0.05, 0.5, 1.0):
    dev = np.max(np.abs(depolarizing_superop(p).matrix @ VEC_I4 - VEC_I4))
    print(f"  p = {p}: |D vec(I) - vec(I)| = {dev:.2e}")

print("\nComplete depolarization (p = 15/16) maps any state to I/4:")
rho = np.zeros((4, 4), dtype=complex)
rho[0, 0] = 1.0  # |00><00|
out = (depolarizing_superop(15 / 16).matrix @ rho.reshape(-1)).reshape(4, 4)
print(np.round(out.real, 6))

print("\np = 0 reduces to the ideal gate: ",
      np.allclose(noisy_gate_superop(u, 0.0).matrix, unitary_superop(u).matrix))
