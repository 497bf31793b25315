"""Vectorized density-operator chain evolution.

The 2D lattice is mapped to a 1D chain in column-major snake order, so each
column occupies a contiguous chain segment and column bipartitions are chain
bonds.  The vectorized density matrix is stored as a chain of rank-3 tensors
with physical dimension 4 (one (ket, bra) qubit pair per site), legs ordered
(left bond, physical, right bond).

Gates between chain neighbors contract the two site tensors with the 16x16
channel tensor and split back by truncated SVD; long-range gates move the
far site next to the near one through adjacent swaps, apply the local
update, and move it back.  Every SVD truncates at the bond cap and its
discarded weight is accumulated, so the running truncation-error budget is
exact.  States are kept unnormalized: trace-preserving channels keep the
trace at 1 and truncation losses show up directly as 1 - Tr.
"""

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .channels import ChannelSuperOp, VEC_I2, depolarizing_superop, unitary_superop
from .circuits import CircuitInstance, LatticeSpec
from .tensor_core import contract, svd_truncate

__all__ = [
    "SiteMap",
    "TruncationReport",
    "TraceFloorError",
    "DensityMPS",
    "init_density_mps",
    "run_circuit",
    "save_state",
    "load_state",
]


class TraceFloorError(RuntimeError):
    """Raised when truncation losses push the trace below the abort floor."""

    def __init__(self, depth: int, trace: float, floor: float):
        super().__init__(
            f"trace {trace:.4f} fell below floor {floor} at depth {depth}; "
            "bond dimension too small for this circuit"
        )
        self.depth = depth
        self.trace = trace
        self.floor = floor


class SiteMap:
    """Bijection between lattice sites and chain positions (column snake).

    chain position = c*L1 + (r if c even else L1-1-r); columns are contiguous
    chain segments, so the cut after the first ``l`` columns is chain bond
    ``l*L1``.
    """

    def __init__(self, lattice: LatticeSpec):
        self.lattice = lattice
        self._pos = {}
        self._site = [None] * lattice.n_qubits
        for r in range(lattice.L1):
            for c in range(lattice.L2):
                pos = c * lattice.L1 + (r if c % 2 == 0 else lattice.L1 - 1 - r)
                self._pos[(r, c)] = pos
                self._site[pos] = (r, c)

    def position(self, site) -> int:
        return self._pos[tuple(site)]

    def site(self, position: int):
        return self._site[position]

    def cut_bond(self, l: int) -> int:
        """Chain bond index of the bipartition columns [0, l) | [l, L2)."""
        if not 1 <= l <= self.lattice.L2 - 1:
            raise ValueError(f"column cut must be in 1..{self.lattice.L2 - 1}, got {l}")
        return l * self.lattice.L1

    def cut_bonds(self):
        return [self.cut_bond(l) for l in range(1, self.lattice.L2)]


@dataclass
class TruncationReport:
    """Discarded weight, peak bond, and SVD count for one chain operation."""

    discarded_weight: float = 0.0
    max_bond: int = 0
    svd_count: int = 0

    def absorb(self, other: "TruncationReport") -> None:
        self.discarded_weight += other.discarded_weight
        self.max_bond = max(self.max_bond, other.max_bond)
        self.svd_count += other.svd_count


def _svdvals(m: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.svd(m, compute_uv=False)
    except np.linalg.LinAlgError:
        return scipy.linalg.svd(m, compute_uv=False, lapack_driver="gesvd")


class DensityMPS:
    """Chain of (left, physical=4, right) tensors with gauge bookkeeping.

    ``center`` is the orthogonality-center site: tensors strictly left of it
    are left isometries, tensors strictly right are right isometries.  None
    means the gauge is unknown and will be rebuilt on demand.
    """

    def __init__(self, tensors, lattice: LatticeSpec, chi_max: int,
                 center=None, cum_discarded: float = 0.0):
        if chi_max < 1:
            raise ValueError(f"chi_max must be >= 1, got {chi_max}")
        if len(tensors) != lattice.n_qubits:
            raise ValueError(
                f"{len(tensors)} tensors for a {lattice.n_qubits}-qubit lattice"
            )
        self.tensors = list(tensors)
        self.lattice = lattice
        self.sitemap = SiteMap(lattice)
        self.chi_max = chi_max
        self.center = center
        self.cum_discarded = cum_discarded

    # -- construction ------------------------------------------------------

    @classmethod
    def zero_state(cls, lattice: LatticeSpec, chi_max: int) -> "DensityMPS":
        """Product chain encoding |0..0><0..0| (all bonds 1)."""
        site = np.zeros((1, 4, 1), dtype=complex)
        site[0, 0, 0] = 1.0  # vec(|0><0|) = (1, 0, 0, 0)
        return cls([site.copy() for _ in range(lattice.n_qubits)],
                   lattice, chi_max, center=0)

    @classmethod
    def infinite_temperature(cls, lattice: LatticeSpec, chi_max: int) -> "DensityMPS":
        """Product chain encoding the maximally mixed state (I / 2^n)."""
        site = np.zeros((1, 4, 1), dtype=complex)
        site[0, :, 0] = 0.5 * VEC_I2  # vec(I/2) = (1/2, 0, 0, 1/2)
        # site tensors have norm 1/2, not 1, so no valid center yet
        return cls([site.copy() for _ in range(lattice.n_qubits)],
                   lattice, chi_max, center=None)

    # -- basic geometry ------------------------------------------------------

    @property
    def n(self) -> int:
        return len(self.tensors)

    @property
    def bond_dims(self):
        return [self.tensors[0].shape[0]] + [t.shape[2] for t in self.tensors]

    @property
    def max_bond(self) -> int:
        return max(self.bond_dims)

    # -- gauge ---------------------------------------------------------------

    def _left_step(self, k: int) -> None:
        """Left-canonicalize site k (QR), absorbing the remainder into k+1."""
        a = self.tensors[k]
        l, _, r = a.shape
        q, rr = np.linalg.qr(a.reshape(l * 4, r))
        self.tensors[k] = q.reshape(l, 4, q.shape[1])
        self.tensors[k + 1] = contract(rr, self.tensors[k + 1], [(1, 0)])

    def _right_step(self, k: int) -> None:
        """Right-canonicalize site k (QR), absorbing the remainder into k-1."""
        a = self.tensors[k]
        l, _, r = a.shape
        q, rr = np.linalg.qr(a.reshape(l, 4 * r).conj().T)
        self.tensors[k] = q.conj().T.reshape(q.shape[1], 4, r)
        self.tensors[k - 1] = contract(self.tensors[k - 1], rr.conj().T, [(2, 0)])

    def move_center(self, i: int) -> None:
        """Bring the orthogonality center to site i (no truncation)."""
        if not 0 <= i < self.n:
            raise ValueError(f"center {i} out of range for {self.n} sites")
        if self.center is None:
            for k in range(0, i):
                self._left_step(k)
            for k in range(self.n - 1, i, -1):
                self._right_step(k)
        elif self.center < i:
            for k in range(self.center, i):
                self._left_step(k)
        else:
            for k in range(self.center, i, -1):
                self._right_step(k)
        self.center = i

    # -- two-site updates ------------------------------------------------------

    def _center_into(self, i: int) -> None:
        # Gauge requirement for optimal local truncation: center on the pair.
        if self.center is None or self.center < i:
            self.move_center(i)
        elif self.center > i + 1:
            self.move_center(i + 1)

    def _split_pair(self, i: int, theta: np.ndarray, absorb: str) -> TruncationReport:
        l, _, _, r = theta.shape
        res = svd_truncate(theta.reshape(l * 4, 4 * r), self.chi_max)
        s = res.singular_values
        if absorb == "right":
            self.tensors[i] = res.left.reshape(l, 4, res.rank)
            self.tensors[i + 1] = (s[:, None] * res.right).reshape(res.rank, 4, r)
            self.center = i + 1
        else:
            self.tensors[i] = (res.left * s[None, :]).reshape(l, 4, res.rank)
            self.tensors[i + 1] = res.right.reshape(res.rank, 4, r)
            self.center = i
        self.cum_discarded += res.discarded_weight
        return TruncationReport(res.discarded_weight, res.rank, 1)

    def apply_adjacent_channel(self, i: int, op: ChannelSuperOp,
                               absorb: str = "right") -> TruncationReport:
        """Apply a two-site channel to chain sites (i, i+1) and re-truncate."""
        if not 0 <= i < self.n - 1:
            raise ValueError(f"pair position {i} out of range for {self.n} sites")
        self._center_into(i)
        theta = contract(self.tensors[i], self.tensors[i + 1], [(2, 0)])  # l a b r
        theta = contract(op.site_tensor(), theta, [(2, 1), (3, 2)])  # a' b' l r
        theta = theta.transpose(2, 0, 1, 3)  # l a' b' r
        return self._split_pair(i, theta, absorb)

    def swap_adjacent(self, i: int, absorb: str = "right") -> TruncationReport:
        """Exchange the physical indices of chain sites i and i+1."""
        if not 0 <= i < self.n - 1:
            raise ValueError(f"pair position {i} out of range for {self.n} sites")
        self._center_into(i)
        theta = contract(self.tensors[i], self.tensors[i + 1], [(2, 0)])  # l a b r
        theta = theta.transpose(0, 2, 1, 3)  # l b a r
        return self._split_pair(i, theta, absorb)

    def apply_long_range_channel(self, i: int, j: int,
                                 op: ChannelSuperOp) -> TruncationReport:
        """Apply a channel to chain sites (i, j), i < j, via a swap network.

        Site j is swapped down to i+1, the adjacent update runs, and the site
        is swapped back.  Swaps truncate at the bond cap like any update and
        their discarded weight is counted once each, in the returned report.
        """
        if not 0 <= i < j < self.n:
            raise ValueError(f"invalid pair ({i}, {j}) for {self.n} sites")
        if j == i + 1:
            return self.apply_adjacent_channel(i, op)
        total = TruncationReport()
        for m in range(j - 1, i, -1):  # bring far site next to near site
            total.absorb(self.swap_adjacent(m, absorb="left"))
        total.absorb(self.apply_adjacent_channel(i, op, absorb="right"))
        for m in range(i + 1, j):  # restore original order
            total.absorb(self.swap_adjacent(m, absorb="right"))
        return total

    # -- scalar contractions -----------------------------------------------------

    def trace(self) -> float:
        """Tr(rho): contraction against the product of per-site vec(I)."""
        v = np.ones(1, dtype=complex)
        for a in self.tensors:
            v = v @ contract(a, VEC_I2, [(1, 0)])
        return float(v[0].real)

    def norm_sq(self) -> float:
        """<<rho|rho>> = Tr(rho^dag rho), cheap at a valid center."""
        if self.center is not None:
            a = self.tensors[self.center]
            return float(np.real(np.vdot(a, a)))
        e = np.ones((1, 1), dtype=complex)
        for a in self.tensors:
            t = contract(a, e, [(0, 0)])  # p r y
            e = contract(t, a.conj(), [(0, 1), (2, 0)])  # r y'
        return float(e[0, 0].real)

    # -- bond spectra -----------------------------------------------------------

    def singular_values_at(self, bond: int) -> np.ndarray:
        """Unnormalized Schmidt values across chain bond ``bond`` (1..n-1)."""
        if not 1 <= bond <= self.n - 1:
            raise ValueError(f"bond must be in 1..{self.n - 1}, got {bond}")
        self.move_center(bond - 1)
        a = self.tensors[bond - 1]
        l, _, r = a.shape
        return _svdvals(a.reshape(l * 4, r))

    def singular_values_sweep(self, bonds) -> dict:
        """Schmidt values at several bonds in one left-to-right gauge pass."""
        bonds = sorted(set(bonds))
        if not bonds:
            return {}
        if bonds[0] < 1 or bonds[-1] > self.n - 1:
            raise ValueError(f"bonds must be within 1..{self.n - 1}, got {bonds}")
        out = {}
        self.move_center(bonds[0] - 1)
        for b in bonds:
            self.move_center(b - 1)
            a = self.tensors[b - 1]
            l, _, r = a.shape
            out[b] = _svdvals(a.reshape(l * 4, r))
        return out

    # -- export -------------------------------------------------------------------

    def to_dense_matrix(self, max_qubits: int = 12) -> np.ndarray:
        """Contract the chain back to the full 2^n x 2^n density matrix.

        Qubits of the result are ordered by chain position (most significant
        first), matching the dense oracle's convention.
        """
        n = self.n
        if n > max_qubits:
            raise ValueError(f"{n} qubits exceeds dense reconstruction cap {max_qubits}")
        block = self.tensors[0][0]  # (4, r)
        for a in self.tensors[1:]:
            block = np.tensordot(block, a, axes=(-1, 0))
        block = block[..., 0]  # (4,)*n, site axes in chain order
        t = block.reshape((2,) * (2 * n))  # (k0, b0, k1, b1, ...)
        perm = list(range(0, 2 * n, 2)) + list(range(1, 2 * n, 2))
        return np.ascontiguousarray(t.transpose(perm).reshape(2**n, 2**n))


def init_density_mps(lattice: LatticeSpec, chi_max: int) -> DensityMPS:
    """Fresh |0..0><0..0| chain with the given bond cap."""
    return DensityMPS.zero_state(lattice, chi_max)


def run_circuit(instance: CircuitInstance, p: float, chi_max: int, *,
                observe_every: int = 1, observer=None,
                trace_floor: float = 0.5):
    """Evolve the zero state through a circuit with noise rate ``p``.

    Within each layer, gates run in ascending order of their smaller chain
    position.  ``observer(depth, state)`` fires at depth 0, every
    ``observe_every`` layers, and at the final depth.  The trace is checked
    after every layer; falling below ``trace_floor`` (set to 0 to disable)
    raises TraceFloorError.  Returns (final state, per-gate truncation
    reports); cost is O(n * depth * chi^3).
    """
    if observe_every < 1:
        raise ValueError(f"observe_every must be >= 1, got {observe_every}")
    state = DensityMPS.zero_state(instance.lattice, chi_max)
    smap = state.sitemap
    depol = depolarizing_superop(p) if p > 0.0 else None

    def observed(d):
        return d % observe_every == 0 or d == instance.depth

    if observer is not None and observed(0):
        observer(0, state)

    reports = []
    for k, layer in enumerate(instance.layers):
        placed = []
        for edge, u in layer:
            pa = smap.position(edge.site_a)
            pb = smap.position(edge.site_b)
            placed.append((min(pa, pb), pa, pb, u))
        placed.sort(key=lambda g: g[0])
        for _, pa, pb, u in placed:
            op = unitary_superop(u)
            if depol is not None:
                op = ChannelSuperOp(matrix=depol.matrix @ op.matrix, p=p,
                                    gate="noisy-unitary")
            if pa > pb:  # snake order can reverse the pair inside odd columns
                op = op.swapped_sites()
            i, j = min(pa, pb), max(pa, pb)
            if j == i + 1:
                reports.append(state.apply_adjacent_channel(i, op))
            else:
                reports.append(state.apply_long_range_channel(i, j, op))
        depth = k + 1
        tr = state.trace()
        if trace_floor and tr < trace_floor:
            raise TraceFloorError(depth, tr, trace_floor)
        if observer is not None and observed(depth):
            observer(depth, state)
    return state, reports


CHECKPOINT_FORMAT = "dmps-state/1"


def save_state(state: DensityMPS, path, metadata: dict | None = None) -> None:
    """Checkpoint a chain to an .npz container, sufficient for exact resume."""
    header = {
        "format": CHECKPOINT_FORMAT,
        "L1": state.lattice.L1,
        "L2": state.lattice.L2,
        "chi_max": state.chi_max,
        "center": -1 if state.center is None else state.center,
        "cum_discarded": state.cum_discarded,
        "metadata": metadata or {},
    }
    arrays = {f"site_{i}": t for i, t in enumerate(state.tensors)}
    np.savez(path, header=json.dumps(header), **arrays)


def load_state(path):
    """Load a checkpoint; returns (DensityMPS, metadata dict)."""
    with np.load(path, allow_pickle=False) as data:
        header = json.loads(str(data["header"]))
        if header.get("format") != CHECKPOINT_FORMAT:
            raise ValueError(f"unknown checkpoint format {header.get('format')!r}")
        n = header["L1"] * header["L2"]
        tensors = [data[f"site_{i}"] for i in range(n)]
    center = header["center"]
    state = DensityMPS(
        tensors,
        LatticeSpec(header["L1"], header["L2"]),
        header["chi_max"],
        center=None if center < 0 else center,
        cum_discarded=header["cum_discarded"],
    )
    return state, header["metadata"]
