"""Random-circuit generation on 2D square lattices.

The circuit architecture recycles eight layers of nearest-neighbor two-qubit
gates (period 8 in depth).  Horizontal edges ((r,c),(r,c+1)) are classified by
(c mod 2, r mod 2) and vertical edges ((r,c),(r+1,c)) by (r mod 2, c mod 2);
the layer sequence alternates vertical and horizontal classes:

    layer 0: V(0,0)   layer 1: H(0,0)   layer 2: V(1,0)   layer 3: H(1,0)
    layer 4: V(0,1)   layer 5: H(0,1)   layer 6: V(1,1)   layer 7: H(1,1)

Each class is a matching, and the eight classes partition the set of all
nearest-neighbor edges.

Every gate is an independent Haar-random 4x4 unitary.  Gate randomness is
counter-based: the generator for the gate at (layer, edge) is Philox seeded
by ``SeedSequence(master_seed, spawn_key=(layer, a_flat, b_flat))`` where
``a_flat``/``b_flat`` are the row-major site indices.  Construction is
therefore order-independent, and circuits of different depths share a prefix.
"""

import json
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

__all__ = [
    "LatticeSpec",
    "Edge",
    "CircuitInstance",
    "layer_pattern",
    "sample_haar_unitary",
    "gate_rng",
    "build_circuit",
    "circuit_to_json",
    "circuit_from_json",
]

NUM_PATTERNS = 8


@dataclass(frozen=True)
class LatticeSpec:
    """An L1 x L2 square lattice of qubits, rows x columns, with L1 <= L2."""

    L1: int
    L2: int

    def __post_init__(self):
        if self.L1 < 2 or self.L2 < 2:
            raise ValueError(f"lattice sides must be >= 2, got {self.L1}x{self.L2}")
        if self.L1 > self.L2:
            raise ValueError(
                f"convention requires L1 <= L2 (rows <= columns), got {self.L1}x{self.L2}"
            )

    @property
    def n_qubits(self) -> int:
        return self.L1 * self.L2

    def flat_index(self, site) -> int:
        """Row-major index of a lattice site (r, c)."""
        r, c = site
        if not (0 <= r < self.L1 and 0 <= c < self.L2):
            raise ValueError(f"site {site} outside {self.L1}x{self.L2} lattice")
        return r * self.L2 + c


class Edge(NamedTuple):
    """Nearest-neighbor pair of lattice sites, site_a < site_b row-major."""

    site_a: tuple
    site_b: tuple


def _edge(a, b) -> Edge:
    return Edge(a, b) if a <= b else Edge(b, a)


def all_edges(lattice: LatticeSpec):
    """Every nearest-neighbor edge of the lattice, row-major order."""
    edges = []
    for r in range(lattice.L1):
        for c in range(lattice.L2):
            if c + 1 < lattice.L2:
                edges.append(_edge((r, c), (r, c + 1)))
            if r + 1 < lattice.L1:
                edges.append(_edge((r, c), (r + 1, c)))
    return edges


def layer_pattern(k: int, lattice: LatticeSpec):
    """The matching of edges gated in pattern ``k`` (0..7).

    Even ``k`` selects a vertical parity class, odd ``k`` a horizontal one;
    the union over k = 0..7 covers every nearest-neighbor edge exactly once.
    The returned edges are sorted by the row-major index of their first site.
    """
    if not 0 <= k < NUM_PATTERNS:
        raise ValueError(f"pattern index must be in 0..7, got {k}")
    parity = ((0, 0), (1, 0), (0, 1), (1, 1))[k // 2]
    edges = []
    if k % 2 == 0:  # vertical class: (r mod 2, c mod 2) == parity
        for c in range(lattice.L2):
            if c % 2 != parity[1]:
                continue
            for r in range(parity[0], lattice.L1 - 1, 2):
                edges.append(_edge((r, c), (r + 1, c)))
    else:  # horizontal class: (c mod 2, r mod 2) == parity
        for r in range(lattice.L1):
            if r % 2 != parity[1]:
                continue
            for c in range(parity[0], lattice.L2 - 1, 2):
                edges.append(_edge((r, c), (r, c + 1)))
    edges.sort(key=lambda e: (lattice.flat_index(e.site_a), lattice.flat_index(e.site_b)))
    return edges


def gate_rng(master_seed: int, layer: int, a_flat: int, b_flat: int) -> np.random.Generator:
    """Counter-based generator for one gate, independent of draw order."""
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=(layer, a_flat, b_flat))
    return np.random.Generator(np.random.Philox(ss))


def sample_haar_unitary(rng: np.random.Generator) -> np.ndarray:
    """Draw a Haar-distributed 4x4 unitary (Ginibre + QR, phase-fixed R)."""
    z = (rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


@dataclass(frozen=True)
class CircuitInstance:
    """A fully materialized circuit: per-layer lists of (Edge, 4x4 unitary).

    Reproducible from (lattice, depth, master_seed); layer k uses pattern
    k mod 8.
    """

    lattice: LatticeSpec
    depth: int
    master_seed: int
    layers: list = field(repr=False)


def build_circuit(lattice: LatticeSpec, depth: int, master_seed: int) -> CircuitInstance:
    """Generate ``depth`` gate layers cycling through the eight patterns."""
    if depth < 0:
        raise ValueError(f"depth must be >= 0, got {depth}")
    layers = []
    for k in range(depth):
        gates = []
        for edge in layer_pattern(k % NUM_PATTERNS, lattice):
            rng = gate_rng(
                master_seed,
                k,
                lattice.flat_index(edge.site_a),
                lattice.flat_index(edge.site_b),
            )
            gates.append((edge, sample_haar_unitary(rng)))
        layers.append(gates)
    return CircuitInstance(lattice=lattice, depth=depth, master_seed=master_seed, layers=layers)


CIRCUIT_FORMAT = "rqc-circuit/1"


def circuit_to_json(instance: CircuitInstance, embed_unitaries: bool = False) -> str:
    """Serialize a circuit.  Unitaries are regenerable from the seed, so they
    are embedded (as real/imag arrays) only on request, for archival."""
    doc = {
        "format": CIRCUIT_FORMAT,
        "L1": instance.lattice.L1,
        "L2": instance.lattice.L2,
        "depth": instance.depth,
        "master_seed": instance.master_seed,
    }
    if embed_unitaries:
        doc["layers"] = [
            [
                {
                    "a": list(edge.site_a),
                    "b": list(edge.site_b),
                    "u_re": np.real(u).tolist(),
                    "u_im": np.imag(u).tolist(),
                }
                for edge, u in layer
            ]
            for layer in instance.layers
        ]
    return json.dumps(doc, indent=1)


def circuit_from_json(text: str) -> CircuitInstance:
    doc = json.loads(text)
    if doc.get("format") != CIRCUIT_FORMAT:
        raise ValueError(f"unknown circuit format {doc.get('format')!r}")
    lattice = LatticeSpec(doc["L1"], doc["L2"])
    if "layers" not in doc:
        return build_circuit(lattice, doc["depth"], doc["master_seed"])
    layers = []
    for layer in doc["layers"]:
        gates = []
        for g in layer:
            u = np.array(g["u_re"], dtype=complex) + 1j * np.array(g["u_im"], dtype=complex)
            gates.append((Edge(tuple(g["a"]), tuple(g["b"])), u))
        layers.append(gates)
    return CircuitInstance(
        lattice=lattice, depth=doc["depth"], master_seed=doc["master_seed"], layers=layers
    )
