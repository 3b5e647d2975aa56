"""Truncated SVD baseline and error metrics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["SvdReduction", "reduce", "energy_rank", "l2_error"]


@dataclass(frozen=True)
class SvdReduction:
    """Rank-``R`` truncation of a snapshot matrix.

    ``singular_values`` holds all ``min(N, M)`` values; the vectors are
    truncated to ``rank`` columns. ``mean`` is the subtracted column mean
    (zeros when no centering was requested).
    """

    singular_values: np.ndarray
    left_vectors: np.ndarray
    right_vectors: np.ndarray
    rank: int
    mean: np.ndarray

    def reconstruct(self) -> np.ndarray:
        U, V = self.left_vectors, self.right_vectors
        return (U * self.singular_values[: self.rank]) @ V.T + self.mean[:, None]

    @property
    def tail_energy(self) -> float:
        s2 = self.singular_values**2
        return float(np.sqrt(np.sum(s2[self.rank:])))

    def energy_fraction(self) -> np.ndarray:
        """Cumulative captured energy ``sum_{j<=r} s_j^2 / sum s_j^2`` for each ``r``."""
        s2 = self.singular_values**2
        total = s2.sum()
        return np.cumsum(s2) / total if total > 0 else np.ones_like(s2)


def energy_rank(singular_values, epsilon: float) -> int:
    """Smallest ``R`` with ``sum_{j>R} s_j^2 / sum s_j^2 < epsilon``."""
    if not 0.0 < epsilon < 1.0:
        raise ValueError("energy tolerance must lie in (0, 1)")
    s2 = np.asarray(singular_values, dtype=float) ** 2
    total = s2.sum()
    if total == 0.0:
        return 0
    tail = 1.0 - np.cumsum(s2) / total
    tail = np.concatenate(([1.0], np.maximum(tail, 0.0)))
    return int(np.flatnonzero(tail < epsilon)[0])


def reduce(A, rank: int | None = None, energy: float | None = None, center: bool = False) -> SvdReduction:
    """Truncated SVD of ``A`` at a fixed ``rank`` or an ``energy`` tolerance.

    Exactly one criterion must be given. With ``center`` the row-wise mean
    over snapshots is subtracted before the decomposition.
    """
    if (rank is None) == (energy is None):
        raise ValueError("give exactly one of rank or energy")
    A = np.asarray(A, dtype=float)
    if A.ndim != 2:
        raise ValueError("expected a 2-D matrix")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix contains non-finite entries")
    mean = A.mean(axis=1) if center else np.zeros(A.shape[0])
    U, s, Vt = np.linalg.svd(A - mean[:, None], full_matrices=False)
    if rank is None:
        r = energy_rank(s, energy)
    else:
        r = int(rank)
        if not 0 <= r <= s.size:
            raise ValueError(f"rank must lie in [0, {s.size}]")
    return SvdReduction(s, U[:, :r], Vt[:r].T, r, mean)


def l2_error(A, B, normalization: str = "frobenius") -> float:
    """``||A - B||_F``, divided by ``sqrt(N M)`` for ``normalization="time_space"``."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.shape != B.shape:
        raise ValueError(f"shape mismatch {A.shape} vs {B.shape}")
    err = float(np.linalg.norm(A - B))
    if normalization == "frobenius":
        return err
    if normalization == "time_space":
        return err / np.sqrt(A.size)
    raise ValueError(f"unknown normalization {normalization!r}")
