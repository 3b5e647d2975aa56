"""Greedy transport reversal with integer shift numbers.

Each iteration matches a pivot profile against every snapshot column by an
exhaustive scan over the N cyclic shifts. The shifted pivot is scaled by its
projection onto the column and cut off wherever it would overshoot, and the
resulting rank-one transport pattern is subtracted from the residual.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field

import numpy as np

from .core import wrap_shift, transport_pivot

__all__ = [
    "PivotStrategy",
    "ReversalConfig",
    "ReversalModel",
    "ShiftMatch",
    "project",
    "cutoff",
    "shift_objectives",
    "find_shift",
    "adaptive_lambda",
    "greedy_reversal",
    "reconstruct",
]

log = logging.getLogger(__name__)


class PivotStrategy(str, enum.Enum):
    COLUMN = "column"
    MAX_NORM = "max_norm"
    ORTHOGONAL = "orthogonal"


@dataclass(frozen=True)
class ReversalConfig:
    """Settings for :func:`greedy_reversal`.

    ``penalty`` is either a fixed non-negative float or ``"adaptive"``, in
    which case each column's weight is ``adaptive_coefficient / (C N)`` with
    ``C`` the spread of the unpenalized objective over all shifts.
    """

    max_iterations: int = 15
    residual_tolerance: float = 0.0
    pivot_trigger: float = 1.0
    penalty: float | str = "adaptive"
    adaptive_coefficient: float = 2.5
    second_order_penalty: float = 0.0
    pivot_strategy: PivotStrategy = PivotStrategy.COLUMN

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if self.residual_tolerance < 0:
            raise ValueError("residual_tolerance must be non-negative")
        if not 0.0 < self.pivot_trigger <= 1.0:
            raise ValueError("pivot_trigger must lie in (0, 1]")
        if isinstance(self.penalty, str):
            if self.penalty != "adaptive":
                raise ValueError("penalty must be a float or 'adaptive'")
        elif self.penalty < 0:
            raise ValueError("penalty must be non-negative")
        if self.second_order_penalty < 0:
            raise ValueError("second_order_penalty must be non-negative")
        object.__setattr__(self, "pivot_strategy", PivotStrategy(self.pivot_strategy))


@dataclass
class ReversalModel:
    """Compressed output of the greedy reversal.

    Attributes
    ----------
    pivots : list of (N,) arrays
    shifts : (K, M) int array, wrapped to ``(-N/2, N/2]``
    scalings : (K, M) float array
    cutoffs : (K, N, M) bool array
    pivot_index : (K,) int array, pivot used at each iteration
    residual_history : (K + 1,) Frobenius norms of the residual
    """

    n_cells: int
    n_snaps: int
    pivots: list = field(default_factory=list)
    shifts: np.ndarray = None
    scalings: np.ndarray = None
    cutoffs: np.ndarray = None
    pivot_index: np.ndarray = None
    residual_history: np.ndarray = None

    def __post_init__(self):
        n, m = self.n_cells, self.n_snaps
        self.pivots = [np.asarray(p, dtype=float) for p in self.pivots]
        self.shifts = np.zeros((0, m), dtype=np.int64) if self.shifts is None else np.asarray(self.shifts, dtype=np.int64)
        self.scalings = np.zeros((0, m)) if self.scalings is None else np.asarray(self.scalings, dtype=float)
        self.cutoffs = np.zeros((0, n, m), dtype=bool) if self.cutoffs is None else np.asarray(self.cutoffs, dtype=bool)
        self.pivot_index = np.zeros(0, dtype=np.int64) if self.pivot_index is None else np.asarray(self.pivot_index, dtype=np.int64)
        self.residual_history = np.zeros(0) if self.residual_history is None else np.asarray(self.residual_history, dtype=float)
        k = self.shifts.shape[0]
        if self.scalings.shape != (k, m) or self.shifts.shape != (k, m):
            raise ValueError("shift and scaling blocks must be K x M")
        if self.cutoffs.shape != (k, n, m):
            raise ValueError("cutoffs must be K x N x M")
        if self.pivot_index.shape != (k,):
            raise ValueError("need one pivot index per iteration")
        if k and (self.pivot_index.min() < 0 or self.pivot_index.max() >= len(self.pivots)):
            raise ValueError("pivot index out of range")
        if any(p.shape != (n,) for p in self.pivots):
            raise ValueError("pivots must have N entries")

    @property
    def n_iterations(self) -> int:
        return self.shifts.shape[0]

    @property
    def pivot_events(self) -> list[int]:
        """Iterations (1-based) whose pivot differs from the previous iteration's."""
        idx = self.pivot_index
        return [k + 1 for k in range(1, idx.size) if idx[k] != idx[k - 1]]

    def contribution(self, k: int) -> np.ndarray:
        """N x M transport pattern subtracted at iteration ``k`` (0-based)."""
        b = self.pivots[self.pivot_index[k]]
        return transport_pivot(b, self.shifts[k], self.scalings[k], self.cutoffs[k])

    def reconstruct(self) -> np.ndarray:
        out = np.zeros((self.n_cells, self.n_snaps))
        for k in range(self.n_iterations):
            out += self.contribution(k)
        return out

    def time_space_residuals(self) -> np.ndarray:
        return self.residual_history / np.sqrt(self.n_cells * self.n_snaps)

    def __eq__(self, other):
        if not isinstance(other, ReversalModel):
            return NotImplemented
        return (
            self.n_cells == other.n_cells
            and self.n_snaps == other.n_snaps
            and len(self.pivots) == len(other.pivots)
            and all(np.array_equal(p, q) for p, q in zip(self.pivots, other.pivots))
            and np.array_equal(self.shifts, other.shifts)
            and np.array_equal(self.scalings, other.scalings)
            and np.array_equal(self.cutoffs, other.cutoffs)
            and np.array_equal(self.pivot_index, other.pivot_index)
            and np.array_equal(self.residual_history, other.residual_history)
        )


@dataclass(frozen=True)
class ShiftMatch:
    shift: int
    scaling: float
    cutoff: np.ndarray
    objective: float


def project(a, b):
    """Project ``a`` onto ``b``: returns ``(h, h * b)``; zero pivot gives ``(0, 0)``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    bb = float(b @ b)
    if bb == 0.0:
        return 0.0, np.zeros_like(b)
    h = float(b @ a) / bb
    return h, h * b


_CUT_RTOL = 1e-12


def _cut_mask(a: np.ndarray, diff: np.ndarray, scale) -> np.ndarray:
    # keep entries where the scaled pivot lies between 0 and a; overshoot
    # below the round-off level of ``scale`` does not count
    tol = _CUT_RTOL * scale
    return (diff * np.sign(a) >= -tol) & (np.abs(diff) <= np.abs(a) + tol)


def cutoff(a, scaled_pivot) -> np.ndarray:
    """Entries where the scaled pivot neither overshoots nor flips the sign of ``a``."""
    a = np.asarray(a, dtype=float)
    diff = a - np.asarray(scaled_pivot, dtype=float)
    return _cut_mask(a, diff, np.max(np.abs(a), initial=0.0))


def _circulant(b: np.ndarray) -> np.ndarray:
    # column w holds K^w b
    n = b.size
    idx = (np.arange(n)[:, None] - np.arange(n)[None, :]) % n
    return b[idx]


def _scan(A: np.ndarray, b: np.ndarray):
    """Objective, scaling and cut-off for every shift and column.

    Returns J (N_shifts x M), H (N_shifts x M) and a callable giving the
    cut-off of (shift, column).
    """
    B = _circulant(b)
    # ||K^w b||^2 comes out of the same product as the inner products, so an
    # exact copy of a shifted pivot gets h == 1 without rounding
    G = B.T @ np.column_stack([A, b])
    bb = float(G[0, -1])
    if bb == 0.0:
        H = np.zeros((b.size, A.shape[1]))
    else:
        H = G[:, :-1] / bb
    # P[i, w, j] = H[w, j] * B[i, w]
    P = B[:, :, None] * H[None, :, :]
    diff = A[:, None, :] - P
    scale = np.max(np.abs(A), axis=0, initial=0.0)[None, None, :]
    rho = _cut_mask(A[:, None, :], diff, scale)
    J = np.sum(np.where(rho, diff, A[:, None, :]) ** 2, axis=0)
    return J, H, rho


def shift_objectives(a, b) -> np.ndarray:
    """Unpenalized objective ``||a - S * P(a; K^w b)||^2`` for ``w = 0..N-1``."""
    a = np.asarray(a, dtype=float)
    J, _, _ = _scan(a[:, None], np.asarray(b, dtype=float))
    return J[:, 0]


def _wrapped_distance(w: np.ndarray, target: int, n: int) -> np.ndarray:
    d = np.mod(w - target, n)
    return np.minimum(d, n - d)


def _penalized(J: np.ndarray, n: int, prev, lam: float, prev2=None, mu: float = 0.0) -> np.ndarray:
    w = np.arange(n)
    total = J.copy()
    if prev is not None and lam > 0:
        total = total + lam * _wrapped_distance(w, prev, n) ** 2
    if prev is not None and prev2 is not None and mu > 0:
        total = total + mu * _wrapped_distance(w, 2 * prev - prev2, n) ** 2
    return total


def _argmin_closest_to_zero(total: np.ndarray, scale: float) -> int:
    n = total.size
    best = total.min()
    tol = 1e-12 * (abs(best) + scale)
    ties = np.flatnonzero(total <= best + tol)
    wrapped = wrap_shift(ties, n)
    order = np.lexsort((wrapped < 0, np.abs(wrapped)))
    return int(ties[order[0]])


def adaptive_lambda_from_objective(J: np.ndarray, coefficient: float = 2.5) -> float:
    spread = float(J.max() - J.min())
    if spread <= 0.0:
        return 0.0
    return coefficient / (spread * J.size)


def adaptive_lambda(a, b, coefficient: float = 2.5) -> float:
    """Penalty weight ``coefficient / (C N)`` with ``C = max J - min J``; 0 for a flat objective."""
    return adaptive_lambda_from_objective(shift_objectives(a, b), coefficient)


def find_shift(a, b, prev_shift=None, lam: float = 0.0, prev_prev_shift=None, mu: float = 0.0) -> ShiftMatch:
    """Best integer shift of pivot ``b`` onto column ``a``.

    Exhaustive scan over all N shifts of ``||a - S * P(a; K^w b)||^2`` plus
    ``lam * d(w, prev_shift)^2`` with ``d`` the cyclic distance. Ties go to
    the shift closest to zero, positive before negative.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if lam < 0 or mu < 0:
        raise ValueError("penalty weights must be non-negative")
    J, H, rho = _scan(a[:, None], b)
    return _pick(J[:, 0], H[:, 0], rho[:, :, 0], float(a @ a), prev_shift, lam, prev_prev_shift, mu)


def _pick(J, H, rho, scale, prev, lam, prev2, mu) -> ShiftMatch:
    n = J.size
    total = _penalized(J, n, prev, lam, prev2, mu)
    w = _argmin_closest_to_zero(total, scale)
    return ShiftMatch(wrap_shift(w, n), float(H[w]), rho[:, w].copy(), float(J[w]))


def _next_pivot(R: np.ndarray, ell: int, strategy: PivotStrategy, previous: np.ndarray) -> np.ndarray:
    if strategy is PivotStrategy.COLUMN:
        return R[:, ell % R.shape[1]].copy()
    norms = np.linalg.norm(R, axis=0)
    if strategy is PivotStrategy.MAX_NORM:
        return R[:, int(np.argmax(norms))].copy()
    # least aligned nonzero column with the previous pivot
    pn = np.linalg.norm(previous)
    live = norms > 0
    if not np.any(live) or pn == 0:
        return R[:, ell % R.shape[1]].copy()
    cos = np.full(R.shape[1], np.inf)
    cos[live] = np.abs(previous @ R[:, live]) / (norms[live] * pn)
    return R[:, int(np.argmin(cos))].copy()


def greedy_reversal(A, cfg: ReversalConfig | None = None) -> ReversalModel:
    """Decompose ``A`` into a sum of shifted, scaled and cut-off pivots.

    The first pivot is the first column of ``A``. After each iteration the
    pivot advances to column ``ell`` of the current residual whenever the
    residual norm ratio exceeds ``cfg.pivot_trigger``; ``ell`` wraps modulo M.
    """
    cfg = cfg or ReversalConfig()
    A = np.array(A, dtype=float)
    if A.ndim != 2:
        raise ValueError("expected a 2-D snapshot array")
    if not np.all(np.isfinite(A)):
        raise ValueError("snapshot matrix contains non-finite entries")
    n, m = A.shape

    R = A.copy()
    r_old = float(np.linalg.norm(R))
    history = [r_old]
    ell = 0
    pivots = [R[:, 0].copy()]
    shifts, scalings, cutoffs, pivot_index = [], [], [], []

    k = 0
    while r_old > cfg.residual_tolerance and k < cfg.max_iterations:
        k += 1
        b = pivots[-1]
        J, H, rho = _scan(R, b)
        nu = np.zeros(m, dtype=np.int64)
        h = np.zeros(m)
        P = np.zeros((n, m), dtype=bool)
        for j in range(m):
            prev = int(nu[j - 1]) if j > 0 else None
            prev2 = int(nu[j - 2]) if j > 1 else None
            if cfg.penalty == "adaptive":
                lam = adaptive_lambda_from_objective(J[:, j], cfg.adaptive_coefficient)
            else:
                lam = float(cfg.penalty)
            match = _pick(J[:, j], H[:, j], rho[:, :, j], float(R[:, j] @ R[:, j]),
                          prev, lam, prev2, cfg.second_order_penalty)
            nu[j], h[j], P[:, j] = match.shift, match.scaling, match.cutoff

        R -= transport_pivot(b, nu, h, P)
        r_new = float(np.linalg.norm(R))
        shifts.append(nu)
        scalings.append(h)
        cutoffs.append(P)
        pivot_index.append(len(pivots) - 1)
        history.append(r_new)
        log.debug("iteration %d: residual %.6e (pivot %d)", k, r_new, ell)

        if r_old > 0 and r_new / r_old > cfg.pivot_trigger:
            ell += 1
            pivots.append(_next_pivot(R, ell, cfg.pivot_strategy, b))
            log.debug("pivoting to column %d after iteration %d", ell % m, k)
        r_old = r_new

    # drop a pivot chosen after the final iteration but never used
    used = max(pivot_index) + 1 if pivot_index else 1
    return ReversalModel(
        n_cells=n,
        n_snaps=m,
        pivots=pivots[:used],
        shifts=np.array(shifts, dtype=np.int64).reshape(-1, m),
        scalings=np.array(scalings).reshape(-1, m),
        cutoffs=np.array(cutoffs, dtype=bool).reshape(-1, n, m),
        pivot_index=np.array(pivot_index, dtype=np.int64),
        residual_history=np.array(history),
    )


def reconstruct(model: ReversalModel) -> np.ndarray:
    """Sum of all transport patterns stored in ``model``."""
    return model.reconstruct()
