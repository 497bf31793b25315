"""Per-depth observables of a vectorized density-operator chain.

Operator entanglement entropy at a column cut is the entropy (base 2) of the
normalized squared Schmidt spectrum of the vectorized state across the
corresponding chain bond; the headline quantity is its maximum over all
column cuts.  It vanishes both for product pure states and for the maximally
mixed state, and for a globally pure state equals twice the von Neumann
entropy of the same bipartition.

The second Renyi entropy S2 = -log2(purity) is computed from the
trace-normalized purity Tr(rho^2)/Tr(rho)^2, so truncation-induced trace
loss does not masquerade as mixedness.  All entropies are in bits.
"""

from dataclasses import dataclass

import numpy as np

from .engine import DensityMPS

__all__ = [
    "CutIndex",
    "DepthRecord",
    "InvalidStateError",
    "operator_ee_at_cut",
    "max_operator_ee",
    "trace_of",
    "purity_of",
    "second_renyi",
    "singular_spectrum",
    "depth_record",
    "record_csv_header",
    "record_csv_row",
]


class InvalidStateError(RuntimeError):
    """The chain does not encode a usable state (zero spectrum, trace <= 0)."""


@dataclass(frozen=True)
class CutIndex:
    """Column bipartition: the first ``l`` columns versus the rest."""

    l: int
    bond: int

    @classmethod
    def for_lattice(cls, lattice, l: int) -> "CutIndex":
        if not 1 <= l <= lattice.L2 - 1:
            raise ValueError(f"cut must be in 1..{lattice.L2 - 1}, got {l}")
        return cls(l=l, bond=l * lattice.L1)


@dataclass(frozen=True)
class DepthRecord:
    """All observables recorded at one circuit depth."""

    depth: int
    trace: float
    purity: float
    second_renyi: float
    ee_per_cut: tuple
    s_max_over_cuts: float
    argmax_cut: int
    max_bond: int
    cum_discarded: float


def _entropy_bits(weights: np.ndarray) -> float:
    """Shannon entropy (bits) of an unnormalized nonnegative spectrum."""
    total = float(np.sum(weights))
    if total <= 0.0:
        raise InvalidStateError("all-zero spectrum at cut")
    q = weights / total
    q = q[q > 0.0]
    return float(-np.sum(q * np.log2(q)) + 0.0)  # + 0.0 normalizes -0.0


def operator_ee_at_cut(state: DensityMPS, l: int) -> float:
    """Operator entanglement entropy (bits) across the first-l-columns cut."""
    cut = CutIndex.for_lattice(state.lattice, l)
    s = state.singular_values_at(cut.bond)
    return _entropy_bits(s * s)


def max_operator_ee(state: DensityMPS):
    """(max entropy over column cuts, argmax cut l); ties take the smaller l."""
    if state.lattice.L2 < 2:
        raise ValueError("need at least two columns for a column cut")
    ees = _ee_all_cuts(state)
    best = int(np.argmax(ees))
    return ees[best], best + 1


def _ee_all_cuts(state: DensityMPS):
    spectra = state.singular_values_sweep(state.sitemap.cut_bonds())
    return [
        _entropy_bits(spectra[state.sitemap.cut_bond(l)] ** 2)
        for l in range(1, state.lattice.L2)
    ]


def trace_of(state: DensityMPS) -> float:
    """Tr(rho); exactly 1 under untruncated evolution, < 1 after truncation."""
    return state.trace()


def purity_of(state: DensityMPS) -> float:
    """Tr(rho^2) / Tr(rho)^2 (trace-normalized purity)."""
    tr = state.trace()
    if tr <= 0.0:
        raise InvalidStateError(f"non-positive trace {tr}")
    return state.norm_sq() / tr**2


def second_renyi(state: DensityMPS) -> float:
    """S2 = -log2(purity), from 0 (pure) to n (maximally mixed), in bits."""
    return float(-np.log2(purity_of(state)) + 0.0)


def singular_spectrum(state: DensityMPS, l: int) -> np.ndarray:
    """Normalized descending Schmidt values at a column cut (squares sum to 1)."""
    cut = CutIndex.for_lattice(state.lattice, l)
    s = state.singular_values_at(cut.bond)
    norm = float(np.sqrt(np.sum(s * s)))
    if norm <= 0.0:
        raise InvalidStateError("all-zero spectrum at cut")
    return np.sort(s / norm)[::-1]


def depth_record(state: DensityMPS, depth: int) -> DepthRecord:
    """Evaluate every per-depth observable in one gauge pass over the chain."""
    tr = trace_of(state)
    if tr <= 0.0:
        raise InvalidStateError(f"non-positive trace {tr}")
    ees = _ee_all_cuts(state)
    best = int(np.argmax(ees))
    purity = state.norm_sq() / tr**2  # center is valid after the sweep
    return DepthRecord(
        depth=depth,
        trace=tr,
        purity=purity,
        second_renyi=float(-np.log2(purity) + 0.0),
        ee_per_cut=tuple(ees),
        s_max_over_cuts=ees[best],
        argmax_cut=best + 1,
        max_bond=state.max_bond,
        cum_discarded=state.cum_discarded,
    )


# -- CSV schema ---------------------------------------------------------------
#
# One row per (run, instance, depth):
#   run_id, seed, L1, L2, p, chi, depth, trace, purity, s2, s_max,
#   argmax_cut, ee_cut_1..ee_cut_{L2-1}, max_bond, cum_discarded


def record_csv_header(L2: int) -> str:
    cuts = ",".join(f"ee_cut_{l}" for l in range(1, L2))
    return (
        "run_id,seed,L1,L2,p,chi,depth,trace,purity,s2,s_max,argmax_cut,"
        f"{cuts},max_bond,cum_discarded"
    )


def _fmt(x) -> str:
    return repr(float(x))


def record_csv_row(rec: DepthRecord, run_id: str, seed: int, lattice, p: float,
                   chi: int) -> str:
    cuts = ",".join(_fmt(e) for e in rec.ee_per_cut)
    return (
        f"{run_id},{seed},{lattice.L1},{lattice.L2},{_fmt(p)},{chi},{rec.depth},"
        f"{_fmt(rec.trace)},{_fmt(rec.purity)},{_fmt(rec.second_renyi)},"
        f"{_fmt(rec.s_max_over_cuts)},{rec.argmax_cut},{cuts},{rec.max_bond},"
        f"{_fmt(rec.cum_discarded)}"
    )
