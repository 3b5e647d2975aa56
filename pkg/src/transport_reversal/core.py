"""Periodic shift operators on a uniform grid of the unit interval.

Conventions
-----------
``K`` is the cyclic down-shift, ``(K f)[i] = f[i-1]``. Integer powers of ``K``
are rolls, ``K(nu) = (1 - nu) I + nu K`` is the single-step upwind update and
the real shift ``shift_real(f, s + nu) = K^s K(nu) f`` extends it to any real
shift number. All operators act matrix-free on 1-D arrays or column-wise on
2-D arrays (axis 0 is space).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ConstantVectorError",
    "GridField",
    "RealShift",
    "SnapshotMatrix",
    "shift_integer",
    "shift_fractional",
    "shift_real",
    "shift_real_adjoint",
    "discrete_laplacian",
    "second_difference",
    "transport_columns",
    "transport_pivot",
    "wrap_shift",
    "is_constant",
]


class ConstantVectorError(ValueError):
    """Raised when an operation needs a non-constant vector."""


@dataclass(frozen=True)
class GridField:
    """Cell averages of one snapshot on the periodic unit interval."""

    values: np.ndarray
    n_cells: int = field(init=False)
    spacing: float = field(init=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 1 or values.size == 0:
            raise ValueError("GridField values must be a non-empty vector")
        if not np.all(np.isfinite(values)):
            raise ValueError("GridField values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "n_cells", values.size)
        object.__setattr__(self, "spacing", 1.0 / values.size)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)

    def __len__(self):
        return self.n_cells

    @property
    def centers(self) -> np.ndarray:
        return (np.arange(self.n_cells) + 0.5) * self.spacing


@dataclass(frozen=True)
class RealShift:
    """A real shift number split into integral and fractional parts."""

    value: float

    def _split(self) -> tuple[int, float]:
        s = math.floor(self.value)
        nu = self.value - s
        if nu >= 1.0:
            # tiny negative values round up to a full cell
            return s + 1, 0.0
        return s, nu

    @property
    def integral_part(self) -> int:
        return self._split()[0]

    @property
    def fractional_part(self) -> float:
        return self._split()[1]


@dataclass(frozen=True)
class SnapshotMatrix:
    """N x M matrix whose columns are snapshots taken at ``times``."""

    data: np.ndarray
    times: np.ndarray = None

    def __post_init__(self):
        data = np.array(self.data, dtype=float)
        if data.ndim != 2:
            raise ValueError("snapshot data must be 2-D (cells x snapshots)")
        if not np.all(np.isfinite(data)):
            raise ValueError("snapshot data must be finite")
        times = np.arange(data.shape[1], dtype=float) if self.times is None else np.array(self.times, dtype=float)
        if times.shape != (data.shape[1],):
            raise ValueError("need one time stamp per snapshot")
        if np.any(np.diff(times) <= 0):
            raise ValueError("snapshot times must be strictly increasing")
        data.setflags(write=False)
        times.setflags(write=False)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "times", times)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.data, dtype=dtype)

    @property
    def n_cells(self) -> int:
        return self.data.shape[0]

    @property
    def n_snaps(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self):
        return self.data.shape

    def column(self, j: int) -> GridField:
        return GridField(self.data[:, j])


def _as_array(f) -> np.ndarray:
    return np.asarray(f, dtype=float)


def wrap_shift(s, n: int):
    """Map integer shifts to the representative in ``(-n/2, n/2]``."""
    r = np.mod(s, n)
    return np.where(r > n // 2, r - n, r) if np.ndim(r) else int(r - n if r > n // 2 else r)


def is_constant(f, rtol: float = 1e-13) -> bool:
    f = _as_array(f)
    scale = np.max(np.abs(f)) if f.size else 0.0
    return bool(np.ptp(f) <= rtol * scale) if scale > 0 else True


def shift_integer(f, s: int) -> np.ndarray:
    """Apply ``K^s``: ``out[i] = f[(i - s) mod N]``. Exact permutation."""
    return np.roll(_as_array(f), int(s), axis=0)


def shift_fractional(f, nu: float) -> np.ndarray:
    """Apply the upwind operator ``K(nu) = (1 - nu) I + nu K`` for ``nu`` in [0, 1]."""
    if not 0.0 <= nu <= 1.0:
        raise ValueError(f"fractional shift must lie in [0, 1], got {nu}")
    f = _as_array(f)
    if nu == 0.0:
        return f.copy()
    if nu == 1.0:
        return shift_integer(f, 1)
    return (1.0 - nu) * f + nu * np.roll(f, 1, axis=0)


def shift_real(f, shift) -> np.ndarray:
    """Apply ``K^s K(nu)`` where ``s`` and ``nu`` are the integral and fractional parts."""
    if not isinstance(shift, RealShift):
        shift = RealShift(float(shift))
    return shift_fractional(shift_integer(f, shift.integral_part), shift.fractional_part)


def shift_real_adjoint(f, shift) -> np.ndarray:
    """Apply the transpose of ``shift_real(., shift)``, which equals ``shift_real(., -shift)``."""
    value = shift.value if isinstance(shift, RealShift) else float(shift)
    return shift_real(f, -value)


def second_difference(f) -> np.ndarray:
    """Periodic ``(K + K^T - 2I) f`` without the ``1/h^2`` scaling."""
    f = _as_array(f)
    return np.roll(f, 1, axis=0) + np.roll(f, -1, axis=0) - 2.0 * f


def discrete_laplacian(f) -> np.ndarray:
    """Periodic ``L_h f = (K + K^T - 2I) f / h^2`` with ``h = 1/N``."""
    f = _as_array(f)
    n = f.shape[0]
    return second_difference(f) * float(n * n)


def _check_columns(A: np.ndarray, nus) -> np.ndarray:
    if A.ndim != 2:
        raise ValueError("expected a 2-D snapshot array")
    nus = np.asarray(nus)
    if nus.shape != (A.shape[1],):
        raise ValueError(f"need {A.shape[1]} shift numbers, got shape {nus.shape}")
    return nus


def _shift_column(col: np.ndarray, nu) -> np.ndarray:
    if np.issubdtype(np.asarray(nu).dtype, np.integer):
        return np.roll(col, int(nu))
    return shift_real(col, float(nu))


def _finish(out: np.ndarray, scalings, cutoffs) -> np.ndarray:
    if scalings is not None:
        scalings = np.asarray(scalings, dtype=float)
        if scalings.shape != (out.shape[1],):
            raise ValueError("scalings must have one entry per column")
        out = out * scalings[None, :]
    if cutoffs is not None:
        cutoffs = np.asarray(cutoffs, dtype=bool)
        if cutoffs.shape != out.shape:
            raise ValueError("cutoffs must match the snapshot shape")
        out = np.where(cutoffs, out, 0.0)
    return out


def transport_columns(A, nus, scalings=None, cutoffs=None) -> np.ndarray:
    """Transport each column ``a_j`` to ``h_j rho_j * K^{nu_j} a_j``.

    Integer-typed ``nus`` use exact rolls; real ``nus`` use :func:`shift_real`.
    ``scalings`` (length M) and boolean ``cutoffs`` (N x M) are optional.
    """
    A = _as_array(A)
    nus = _check_columns(A, nus)
    out = np.empty_like(A)
    for j in range(A.shape[1]):
        out[:, j] = _shift_column(A[:, j], nus[j])
    return _finish(out, scalings, cutoffs)


def transport_pivot(b, nus, scalings=None, cutoffs=None) -> np.ndarray:
    """Columns ``h_j rho_j * K^{nu_j} b`` built from a single pivot ``b``."""
    b = _as_array(b)
    nus = np.asarray(nus)
    A = np.repeat(b[:, None], nus.size, axis=1)
    return transport_columns(A, nus, scalings, cutoffs)
