"""Vectorized superoperators for ideal and noisy two-qubit gates.

Vectorization convention (fixed once, shared by every module): a density
matrix is flattened row-major with the ket index first,

    |rho>> = sum_ij rho_ij |i>|j>,

so a channel ``rho -> sum_k K rho K^dag`` becomes the matrix
``sum_k kron(K, conj(K))`` acting on vec(rho).

A noisy two-qubit gate is the Haar unitary followed by two-qubit
depolarizing noise at rate p: with probability p the gated pair is hit by
one of the 15 nontrivial two-qubit Paulis (uniformly).  Superoperators are
materialized as explicit 16x16 matrices because the chain engine applies
them as single tensors; the Kraus form lives independently in the dense
oracle for cross-validation.
"""

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ChannelSuperOp",
    "unitary_superop",
    "depolarizing_superop",
    "noisy_gate_superop",
    "two_qubit_paulis",
    "choi_matrix",
    "VEC_I2",
    "VEC_I4",
]

PAULIS = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}

# vec of the single-site / two-site identity under the convention above.
VEC_I2 = np.eye(2, dtype=complex).reshape(-1)
VEC_I4 = np.eye(4, dtype=complex).reshape(-1)


def two_qubit_paulis(include_identity: bool = False):
    """The 15 nontrivial two-qubit Pauli products (16 with the identity)."""
    out = []
    for na in "IXYZ":
        for nb in "IXYZ":
            if not include_identity and na == "I" and nb == "I":
                continue
            out.append(np.kron(PAULIS[na], PAULIS[nb]))
    return out


@dataclass(frozen=True)
class ChannelSuperOp:
    """A 16x16 superoperator on the vectorized two-qubit density matrix."""

    matrix: np.ndarray
    p: float
    gate: str = "?"
    _site_tensor: list = field(default_factory=list, repr=False, compare=False)

    def site_tensor(self) -> np.ndarray:
        """Reshape to (out_a, out_b, in_a, in_b) site-local physical indices.

        The 16-dim vec index orders bits as (ket_a, ket_b, bra_a, bra_b);
        the chain stores one (ket, bra) pair of dimension 4 per site, so the
        axes are regrouped as ((ket_a, bra_a), (ket_b, bra_b)).
        """
        if not self._site_tensor:
            t = self.matrix.reshape(2, 2, 2, 2, 2, 2, 2, 2)
            t = t.transpose(0, 2, 1, 3, 4, 6, 5, 7).reshape(4, 4, 4, 4)
            self._site_tensor.append(np.ascontiguousarray(t))
        return self._site_tensor[0]

    def swapped_sites(self) -> "ChannelSuperOp":
        """The same channel with the roles of the two sites exchanged."""
        t = self.matrix.reshape(2, 2, 2, 2, 2, 2, 2, 2)
        m = t.transpose(1, 0, 3, 2, 5, 4, 7, 6).reshape(16, 16)
        return ChannelSuperOp(matrix=m, p=self.p, gate=self.gate + "~swapped")


def _check_unitary(u: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    u = np.asarray(u, dtype=complex)
    if u.shape != (4, 4):
        raise ValueError(f"expected a 4x4 unitary, got shape {u.shape}")
    dev = np.max(np.abs(u.conj().T @ u - np.eye(4)))
    if dev > tol:
        raise ValueError(f"matrix is not unitary to {tol:g} (deviation {dev:.3e})")
    return u


def unitary_superop(u: np.ndarray) -> ChannelSuperOp:
    """Superoperator of rho -> U rho U^dag, i.e. kron(U, conj(U))."""
    u = _check_unitary(u)
    return ChannelSuperOp(matrix=np.kron(u, u.conj()), p=0.0, gate="unitary")


def depolarizing_superop(p: float) -> ChannelSuperOp:
    """Two-qubit depolarizing channel at rate p.

    (1 - p) identity plus p/15 times the sum over the 15 nontrivial
    two-qubit Pauli conjugations.  p = 15/16 is complete depolarization.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"noise rate must be in [0, 1], got {p}")
    m = (1.0 - p) * np.eye(16, dtype=complex)
    for e in two_qubit_paulis():
        m += (p / 15.0) * np.kron(e, e.conj())
    return ChannelSuperOp(matrix=m, p=p, gate="depolarizing")


def noisy_gate_superop(u: np.ndarray, p: float) -> ChannelSuperOp:
    """Noise-after-gate composition: depolarizing(p) applied to U rho U^dag."""
    gate = unitary_superop(u)
    if p == 0.0:
        return gate
    noise = depolarizing_superop(p)
    return ChannelSuperOp(matrix=noise.matrix @ gate.matrix, p=p, gate="noisy-unitary")


def choi_matrix(op: ChannelSuperOp) -> np.ndarray:
    """Choi matrix of the channel; positive semidefinite iff the channel is CP."""
    t = op.matrix.reshape(4, 4, 4, 4)  # (out_ket, out_bra, in_ket, in_bra)
    return np.ascontiguousarray(t.transpose(0, 2, 1, 3).reshape(16, 16))
