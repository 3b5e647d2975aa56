"""Real-valued shift numbers built on the upwind operator.

For a column ``a`` and pivot ``b`` the objective is
``J(w) = ||b - Kr(w)^T a||^2`` with ``Kr = shift_real``. On each unit
interval ``[s, s + 1]`` the objective is a quadratic in the fractional part
with a closed-form minimizer, so the global minimum over ``[0, N)`` is found
by comparing at most ``2N - 1`` candidates: the integers and the in-range
fractional minimizers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import reduce

import numpy as np
from scipy.linalg import solve_banded

from .core import (
    ConstantVectorError,
    RealShift,
    is_constant,
    second_difference,
    shift_real,
)

__all__ = [
    "CandidateSet",
    "optimal_fraction",
    "recursion_step",
    "fraction_at_offset",
    "candidate_set",
    "best_real_shift",
    "reverse_real",
    "forward_real",
    "sharpen",
    "sharpened_reconstruct",
    "detect_period",
    "real_objective",
]


_FRAC_EPS = 1e-12


@dataclass(frozen=True)
class CandidateSet:
    candidates: np.ndarray
    objective_values: np.ndarray

    def __len__(self):
        return self.candidates.size


def _require_nonconstant(a: np.ndarray, what: str = "vector"):
    if is_constant(a):
        raise ConstantVectorError(f"{what} is constant; the shift objective is degenerate")


def _aLa(a: np.ndarray) -> float:
    return float(a @ second_difference(a))


def optimal_fraction(a, b) -> float:
    """Unconstrained minimizer of ``w -> ||b - K(w)^T a||^2``.

    Equals ``(1 - 2 a^T D b / a^T L a) / 2`` with ``D = K - I`` and
    ``L = K + K^T - 2I``. The result may fall outside [0, 1].
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    _require_nonconstant(a)
    aDb = float(a @ (np.roll(b, 1) - b))
    return 0.5 * (1.0 - 2.0 * aDb / _aLa(a))


def fraction_at_offset(a, b, s: int, direction: int = 1) -> float:
    """Minimizer over the fraction with the integer offset fixed at ``direction * s``.

    ``direction=+1`` fits ``K(w)^T (K^T)^s a`` to ``b``; ``direction=-1``
    fits ``K(w)^T K^s a``.
    """
    a = np.asarray(a, dtype=float)
    return optimal_fraction(np.roll(a, -direction * s), b)


def recursion_step(prev: float, a, b, s: int, direction: int = 1, _aLa_value: float | None = None) -> float:
    """Advance the offset minimizer from ``s`` to ``s + 1``.

    ``+``: ``nu_{s+1} = nu_s - ((K^T)^{s+1} a)^T L b / a^T L a``
    ``-``: ``nu_{s+1} = nu_s + (K^s a)^T L b / a^T L a``
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if direction not in (1, -1):
        raise ValueError("direction must be +1 or -1")
    if _aLa_value is None:
        _require_nonconstant(a)
        _aLa_value = _aLa(a)
    Lb = second_difference(b)
    if direction == 1:
        return prev - float(np.roll(a, -(s + 1)) @ Lb) / _aLa_value
    return prev + float(np.roll(a, s) @ Lb) / _aLa_value


def _all_offset_fractions(a: np.ndarray, b: np.ndarray, count: int) -> np.ndarray:
    # Same values as chaining recursion_step; the increments are a circular
    # correlation, so all offsets come out of one FFT.
    aLa = _aLa(a)
    nu0 = optimal_fraction(a, b)
    Lb = second_difference(b)
    n = a.size
    # corr[t] = sum_i a[i + t] Lb[i] = (K^T)^t a . Lb
    corr = np.real(np.fft.ifft(np.fft.fft(a) * np.conj(np.fft.fft(Lb))))
    inc = -corr[(np.arange(1, count) % n)] / aLa
    return nu0 + np.concatenate(([0.0], np.cumsum(inc)))


def real_objective(a, b, w) -> np.ndarray:
    """``||b - Kr(w)^T a||^2`` for each shift in ``w``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    w = np.atleast_1d(np.asarray(w, dtype=float))
    out = np.empty(w.size)
    for i, wi in enumerate(w):
        r = b - shift_real(a, -wi)
        out[i] = r @ r
    return out


def _objective_batch(a: np.ndarray, b: np.ndarray, w: np.ndarray) -> np.ndarray:
    # Kr(w)^T a = (K^T)^s K(nu)^T a = (1 - nu) roll(a, -s) + nu roll(a, -s - 1)
    n = a.size
    s = np.floor(w).astype(np.int64)
    nu = w - s
    idx = (np.arange(n)[:, None] + s[None, :]) % n
    X = (1.0 - nu) * a[idx] + nu * a[(idx + 1) % n]
    r = b[:, None] - X
    return np.einsum("ij,ij->j", r, r)


def candidate_set(a, b, n_offsets: int | None = None) -> CandidateSet:
    """Integer shifts and in-range fractional minimizers on ``[0, n_offsets)``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    _require_nonconstant(a)
    n = a.size
    count = n if n_offsets is None else int(n_offsets)
    nus = _all_offset_fractions(a, b, count)
    cands = []
    for s in range(count):
        cands.append(float(s))
        # fractions within round-off of an integer duplicate that integer
        if _FRAC_EPS < nus[s] < 1.0 - _FRAC_EPS:
            cands.append(s + float(nus[s]))
    cands = np.array(cands)
    return CandidateSet(cands, _objective_batch(a, b, cands))


def best_real_shift(a, b, use_period: bool = False) -> tuple[RealShift, CandidateSet]:
    """Real shift ``w`` in ``[0, N)`` minimizing ``||b - Kr(w)^T a||^2``.

    With ``use_period`` the scan stops at the period of ``a``. Ties resolve
    to the smallest candidate.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError("column and pivot lengths differ")
    _require_nonconstant(a)
    count = detect_period(a) if use_period else a.size
    cs = candidate_set(a, b, count)
    vals = cs.objective_values
    best = vals.min()
    tol = 1e-12 * (abs(best) + float(b @ b) + float(a @ a))
    i = int(np.flatnonzero(vals <= best + tol)[0])
    return RealShift(float(cs.candidates[i])), cs


def reverse_real(A, b, use_period: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Shift numbers per column and the reversed matrix ``Kr(-nu_j) a_j``."""
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    _require_nonconstant(b, "pivot")
    nus = np.empty(A.shape[1])
    for j in range(A.shape[1]):
        try:
            nus[j] = best_real_shift(A[:, j], b, use_period)[0].value
        except ConstantVectorError as exc:
            raise ConstantVectorError(f"column {j}: {exc}") from exc
    return nus, forward_real(A, -nus)


def forward_real(A, nus) -> np.ndarray:
    """Apply ``Kr(nu_j)`` to column ``j``."""
    A = np.asarray(A, dtype=float)
    nus = np.asarray(nus, dtype=float)
    if nus.shape != (A.shape[1],):
        raise ValueError("need one shift number per column")
    return np.column_stack([shift_real(A[:, j], nus[j]) for j in range(A.shape[1])])


def sharpen(smeared, nu_fraction: float, boundary_left: float, boundary_right: float) -> np.ndarray:
    """Undo upwind diffusion by solving ``(I + alpha L_h) u = smeared``.

    ``alpha = nu (1 - nu) / N^2``; the first and last rows are replaced by
    ``u_1 = boundary_left`` and ``u_N = boundary_right``, which leaves a
    tridiagonal system.
    """
    b = np.asarray(smeared, dtype=float)
    if not 0.0 <= nu_fraction <= 1.0:
        raise ValueError("nu_fraction must lie in [0, 1]")
    n = b.size
    beta = nu_fraction * (1.0 - nu_fraction)  # alpha * N^2
    if beta == 0.0:
        return b.copy()
    if n < 3:
        raise np.linalg.LinAlgError("sharpening needs at least three cells")
    ab = np.zeros((3, n))
    ab[0, 2:] = beta
    ab[1, :] = 1.0 - 2.0 * beta
    ab[2, :-2] = beta
    ab[1, 0] = ab[1, -1] = 1.0
    rhs = b.copy()
    rhs[0], rhs[-1] = boundary_left, boundary_right
    u = solve_banded((1, 1), ab, rhs)
    if not np.all(np.isfinite(u)):
        raise np.linalg.LinAlgError("sharpening system is singular")
    return u


def sharpened_reconstruct(A_tilde, nus, boundary_values) -> np.ndarray:
    """Forward transport each column by ``nu_j`` then sharpen with ``alpha_j``."""
    A_tilde = np.asarray(A_tilde, dtype=float)
    nus = np.asarray(nus, dtype=float)
    bv = np.asarray(boundary_values, dtype=float)
    if bv.shape != (A_tilde.shape[1], 2):
        raise ValueError("need a (left, right) boundary pair per column")
    out = forward_real(A_tilde, nus)
    for j in range(out.shape[1]):
        frac = RealShift(nus[j]).fractional_part
        out[:, j] = sharpen(out[:, j], frac, bv[j, 0], bv[j, 1])
    return out


def detect_period(a, rtol: float = 1e-10) -> int:
    """Smallest cyclic period of ``a`` from the gcd of its DFT support."""
    a = np.asarray(a, dtype=float)
    _require_nonconstant(a)
    n = a.size
    mags = np.abs(np.fft.fft(a))[1:]
    support = np.flatnonzero(mags > rtol * mags.max()) + 1
    g = reduce(math.gcd, support.tolist(), 0)
    return n // math.gcd(g, n)
