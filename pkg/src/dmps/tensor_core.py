"""Dense complex tensor kernel: contraction and truncated SVD.

Tensors are plain ``numpy.ndarray`` objects in the canonical row-major
(C-order) linearization; every other module relies on that convention when
reshaping between multi-index tensors and matrices.

The truncated SVD reports the exact truncation error (sum of squares of the
discarded singular values), which downstream code accumulates as the
simulation-error budget.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

__all__ = ["TruncatedSVD", "contract", "svd_truncate", "RELATIVE_ZERO_FLOOR"]

# Singular values below this fraction of the largest one are treated as exact
# zeros before truncation, so numerically-zero directions never inflate ranks.
RELATIVE_ZERO_FLOOR = 1e-14


@dataclass(frozen=True)
class TruncatedSVD:
    """Result of a rank-capped SVD ``m ~= left @ diag(s) @ right``.

    ``left`` has orthonormal columns, ``right`` orthonormal rows, the
    singular values are descending, and ``discarded_weight`` is the squared
    Frobenius gap between the input and its truncated reconstruction.
    """

    left: np.ndarray
    singular_values: np.ndarray
    right: np.ndarray
    discarded_weight: float

    @property
    def rank(self) -> int:
        return len(self.singular_values)


def contract(a: np.ndarray, b: np.ndarray, pairs) -> np.ndarray:
    """Contract ``a`` and ``b`` over the given ``(axis_of_a, axis_of_b)`` pairs.

    The result carries the free indices of ``a`` (in order) followed by the
    free indices of ``b`` (in order).  Entries are the summed products over
    the paired indices; contracting all indices of both yields a scalar.

    Raises ValueError when a paired axis is out of range or extents differ.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    axes_a = []
    axes_b = []
    for ax_a, ax_b in pairs:
        if not (-a.ndim <= ax_a < a.ndim) or not (-b.ndim <= ax_b < b.ndim):
            raise ValueError(
                f"contraction pair ({ax_a}, {ax_b}) out of range for shapes "
                f"{a.shape} and {b.shape}"
            )
        ax_a %= a.ndim
        ax_b %= b.ndim
        if a.shape[ax_a] != b.shape[ax_b]:
            raise ValueError(
                f"mismatched extents {a.shape[ax_a]} != {b.shape[ax_b]} for "
                f"pair ({ax_a}, {ax_b})"
            )
        axes_a.append(ax_a)
        axes_b.append(ax_b)
    return np.tensordot(a, b, axes=(axes_a, axes_b))


def _svd(m: np.ndarray):
    # gesdd is fast but occasionally fails to converge; gesvd is the slow,
    # robust fallback.  A failure of both is surfaced, never zero-filled.
    try:
        return np.linalg.svd(m, full_matrices=False)
    except np.linalg.LinAlgError:
        return scipy.linalg.svd(m, full_matrices=False, lapack_driver="gesvd")


def svd_truncate(m: np.ndarray, chi_max: int) -> TruncatedSVD:
    """SVD of a rank-2 tensor keeping at most ``chi_max`` singular values.

    Values below ``RELATIVE_ZERO_FLOOR`` times the largest singular value are
    dropped as numerical zeros even when ``chi_max`` would allow them; at
    least one value is always kept so bond extents stay >= 1.  The discarded
    weight is the exact sum of squares of every dropped value.
    """
    m = np.asarray(m)
    if m.ndim != 2:
        raise ValueError(f"svd_truncate expects a rank-2 tensor, got rank {m.ndim}")
    if chi_max < 1:
        raise ValueError(f"chi_max must be >= 1, got {chi_max}")

    u, s, vh = _svd(m)
    # LAPACK returns descending order already; a stable sort makes the kept
    # set deterministic even if a fallback driver disagrees on ties.
    order = np.argsort(-s, kind="stable")
    if not np.array_equal(order, np.arange(len(s))):
        u, s, vh = u[:, order], s[order], vh[order, :]

    keep = int(np.count_nonzero(s > RELATIVE_ZERO_FLOOR * s[0])) if s[0] > 0 else 1
    keep = max(1, min(keep, chi_max))
    discarded = float(np.sum(s[keep:] ** 2))
    return TruncatedSVD(
        left=np.ascontiguousarray(u[:, :keep]),
        singular_values=s[:keep].copy(),
        right=np.ascontiguousarray(vh[:keep, :]),
        discarded_weight=discarded,
    )
