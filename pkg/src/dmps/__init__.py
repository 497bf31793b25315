"""Noisy random quantum circuits on 2D lattices, simulated as a vectorized
density-operator matrix-product chain with bounded bond dimension.

Subpackages by concern:

- ``tensor_core``: dense contraction and truncated SVD with exact error.
- ``circuits``: lattice geometry, eight-layer gate patterns, seeded
  Haar-random circuit instances.
- ``channels``: 16x16 superoperators for ideal and depolarizing-noisy gates.
- ``engine``: the chain itself (snake mapping, canonical form, gate and swap
  updates, circuit evolution, checkpoints).
- ``observables``: operator entanglement entropy per column cut, second
  Renyi entropy, trace, purity, singular spectra.
- ``oracle``: exact dense evolution, fidelity, exact entropies.
- ``theory``: closed-form peak predictions and power-law / decay-rate fits.
- ``harness``: sweeps, ensemble averaging, persistence, oracle validation.
- ``cli``: the ``dmps`` command.
"""

from .channels import depolarizing_superop, noisy_gate_superop, unitary_superop
from .circuits import CircuitInstance, LatticeSpec, build_circuit
from .engine import DensityMPS, init_density_mps, run_circuit
from .harness import SweepConfig, run_sweep, validate_against_oracle
from .observables import depth_record, max_operator_ee, second_renyi
from .oracle import DenseState, evolve_exact, fidelity
from .theory import TheoryParams, fit_power_law, predicted_s_max_and_t_peak

__version__ = "0.1.0"

__all__ = [
    "CircuitInstance",
    "DenseState",
    "DensityMPS",
    "LatticeSpec",
    "SweepConfig",
    "TheoryParams",
    "build_circuit",
    "depolarizing_superop",
    "depth_record",
    "evolve_exact",
    "fidelity",
    "fit_power_law",
    "init_density_mps",
    "max_operator_ee",
    "noisy_gate_superop",
    "predicted_s_max_and_t_peak",
    "run_circuit",
    "run_sweep",
    "second_renyi",
    "unitary_superop",
    "validate_against_oracle",
    "__version__",
]
