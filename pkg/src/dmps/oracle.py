"""Dense reference implementation for small systems.

Evolves the full 2^n x 2^n density matrix through the same circuits and
noise model as the chain engine, but in Kraus form and without any
vectorization, so the two code paths are independent.  Qubits are ordered by
chain position (most significant bit first), matching
``DensityMPS.to_dense_matrix``, which makes all cross-checks direct array
comparisons.

Also provides Uhlmann fidelity and exact bipartition entropies, the ground
truth for engine validation.
"""

from dataclasses import dataclass

import numpy as np

from .channels import two_qubit_paulis
from .circuits import CircuitInstance, LatticeSpec
from .engine import SiteMap

__all__ = [
    "DenseState",
    "evolve_exact",
    "apply_noisy_gate",
    "fidelity",
    "clamp_psd",
    "exact_operator_ee",
    "exact_von_neumann_ee",
    "exact_purity",
    "exact_second_renyi",
]

MAX_DENSE_QUBITS = 12
MAX_VECTORIZED_QUBITS = 10  # the vectorized object has 4^n entries

_PAULI_TENSORS = [e.reshape(2, 2, 2, 2) for e in two_qubit_paulis()]


@dataclass
class DenseState:
    """Full density matrix plus its lattice, qubits in chain order."""

    matrix: np.ndarray
    lattice: LatticeSpec

    def __post_init__(self):
        n = self.lattice.n_qubits
        if n > MAX_DENSE_QUBITS:
            raise ValueError(f"{n} qubits exceeds dense cap {MAX_DENSE_QUBITS}")
        if self.matrix.shape != (2**n, 2**n):
            raise ValueError(
                f"matrix shape {self.matrix.shape} does not match {n} qubits"
            )

    def check(self, tol: float = 1e-10) -> None:
        dev = np.max(np.abs(self.matrix - self.matrix.conj().T))
        if dev > tol:
            raise ValueError(f"state not Hermitian to {tol:g} (deviation {dev:.3e})")
        tr = complex(np.trace(self.matrix))
        if abs(tr - 1.0) > tol:
            raise ValueError(f"trace {tr} differs from 1 beyond {tol:g}")


def _conjugate_pair(t: np.ndarray, k: np.ndarray, qa: int, qb: int, n: int) -> np.ndarray:
    """t -> K t K^dag with a two-site operator on qubits (qa, qb).

    ``t`` carries 2n axes: ket 0..n-1, then bra n..2n-1.  ``k`` is the
    operator as a (2, 2, 2, 2) tensor (out_a, out_b, in_a, in_b).
    """
    t = np.moveaxis(np.tensordot(k, t, axes=([2, 3], [qa, qb])), [0, 1], [qa, qb])
    t = np.moveaxis(
        np.tensordot(k.conj(), t, axes=([2, 3], [n + qa, n + qb])), [0, 1], [n + qa, n + qb]
    )
    return t


def apply_noisy_gate(t: np.ndarray, u: np.ndarray, qa: int, qb: int, n: int,
                     p: float) -> np.ndarray:
    """One noisy gate in Kraus form on the 2n-axis density tensor:

        rho -> (1-p) U rho U^dag + (p/15) sum_E E U rho U^dag E^dag.
    """
    t = _conjugate_pair(t, np.asarray(u).reshape(2, 2, 2, 2), qa, qb, n)
    if p == 0.0:
        return t
    noisy = (1.0 - p) * t
    for e in _PAULI_TENSORS:
        noisy += (p / 15.0) * _conjugate_pair(t, e, qa, qb, n)
    return noisy


def evolve_exact(instance: CircuitInstance, p: float, *, observer=None,
                 observe_every: int = 1) -> DenseState:
    """Exact density-matrix evolution, identical gate order to the engine."""
    lattice = instance.lattice
    n = lattice.n_qubits
    if n > MAX_DENSE_QUBITS:
        raise ValueError(f"{n} qubits exceeds dense cap {MAX_DENSE_QUBITS}")
    smap = SiteMap(lattice)

    t = np.zeros((2,) * (2 * n), dtype=complex)
    t[(0,) * (2 * n)] = 1.0  # |0..0><0..0|

    def observed(d):
        return d % observe_every == 0 or d == instance.depth

    def snapshot():
        return DenseState(matrix=t.reshape(2**n, 2**n).copy(), lattice=lattice)

    if observer is not None and observed(0):
        observer(0, snapshot())
    for k, layer in enumerate(instance.layers):
        placed = sorted(
            ((min(smap.position(e.site_a), smap.position(e.site_b)),
              smap.position(e.site_a), smap.position(e.site_b), u)
             for e, u in layer),
            key=lambda g: g[0],
        )
        for _, qa, qb, u in placed:
            t = apply_noisy_gate(t, u, qa, qb, n, p)
        if observer is not None and observed(k + 1):
            observer(k + 1, snapshot())
    return snapshot()


def _as_matrix(state) -> np.ndarray:
    return state.matrix if isinstance(state, DenseState) else np.asarray(state)


def clamp_psd(m: np.ndarray) -> np.ndarray:
    """Project a Hermitian matrix onto the PSD cone (negative eigenvalues -> 0)."""
    m = _as_matrix(m)
    w, v = np.linalg.eigh((m + m.conj().T) / 2.0)
    w = np.clip(w, 0.0, None)
    return (v * w) @ v.conj().T


def _psd_eigvals(w: np.ndarray, neg_tol: float, what: str) -> np.ndarray:
    if np.min(w) < -neg_tol:
        raise ValueError(
            f"{what} has eigenvalue {np.min(w):.3e} below -{neg_tol:g}; not PSD"
        )
    return np.clip(w, 0.0, None)


def _sqrt_psd(m: np.ndarray, neg_tol: float, what: str) -> np.ndarray:
    w, v = np.linalg.eigh((m + m.conj().T) / 2.0)
    w = _psd_eigvals(w, neg_tol, what)
    return (v * np.sqrt(w)) @ v.conj().T


def fidelity(rho, sigma, neg_tol: float = 1e-10) -> float:
    """Uhlmann fidelity Tr sqrt(sqrt(rho) sigma sqrt(rho)).

    Evaluated as the nuclear norm ||sqrt(sigma) sqrt(rho)||_1, which is the
    same quantity but keeps the numerically-zero subspace out of any square
    root of noise.  Inputs must be PSD up to ``neg_tol`` (tiny negative
    eigenvalues from roundoff are floored at zero); symmetric in its
    arguments to well below 1e-9.
    """
    a = _as_matrix(rho)
    b = _as_matrix(sigma)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    product = _sqrt_psd(b, neg_tol, "sigma") @ _sqrt_psd(a, neg_tol, "rho")
    return float(np.sum(np.linalg.svd(product, compute_uv=False)))


def _entropy_bits(weights: np.ndarray) -> float:
    total = float(np.sum(weights))
    if total <= 0.0:
        raise ValueError("zero spectrum")
    q = weights / total
    q = q[q > 0.0]
    return float(-np.sum(q * np.log2(q)))


def exact_operator_ee(state, l: int, lattice: LatticeSpec | None = None) -> float:
    """Operator EE (bits) of the vectorized dense matrix across a column cut.

    Uses the same chain ordering as the engine: the cut after the first
    ``l`` columns splits the first l*L1 chain sites from the rest.
    """
    if isinstance(state, DenseState):
        lattice = state.lattice
    if lattice is None:
        raise ValueError("lattice required for a bare matrix")
    n = lattice.n_qubits
    if n > MAX_VECTORIZED_QUBITS:
        raise ValueError(f"{n} qubits exceeds vectorized cap {MAX_VECTORIZED_QUBITS}")
    if not 1 <= l <= lattice.L2 - 1:
        raise ValueError(f"cut must be in 1..{lattice.L2 - 1}, got {l}")
    m = l * lattice.L1
    t = _as_matrix(state).reshape((2,) * (2 * n))
    perm = [ax for q in range(n) for ax in (q, n + q)]  # (k0, b0, k1, b1, ...)
    v = t.transpose(perm).reshape(4**m, 4 ** (n - m))
    s = np.linalg.svd(v, compute_uv=False)
    return _entropy_bits(s * s)


def exact_von_neumann_ee(state, l: int, lattice: LatticeSpec | None = None) -> float:
    """Von Neumann entropy (bits) of the reduced state across a column cut."""
    if isinstance(state, DenseState):
        lattice = state.lattice
    if lattice is None:
        raise ValueError("lattice required for a bare matrix")
    n = lattice.n_qubits
    m = l * lattice.L1
    dl, dr = 2**m, 2 ** (n - m)
    t = _as_matrix(state).reshape(dl, dr, dl, dr)
    reduced = np.einsum("ajbj->ab", t)
    w = np.linalg.eigvalsh(reduced)
    w = _psd_eigvals(w, 1e-10, "reduced state")
    return _entropy_bits(w)


def exact_purity(state) -> float:
    """Tr(rho^2) / Tr(rho)^2, matching the engine's trace-normalized purity."""
    m = _as_matrix(state)
    tr = float(np.trace(m).real)
    return float(np.trace(m @ m).real) / tr**2


def exact_second_renyi(state) -> float:
    return float(-np.log2(exact_purity(state)))
