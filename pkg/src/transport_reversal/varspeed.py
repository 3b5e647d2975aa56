"""Transport with a piecewise-constant, spatially varying speed.

Grid edges act as material points moving with ``dx/dt = c(x)``. Because
``c`` is constant on each cell the trajectories are known in closed form:
in the travel-time coordinate ``tau(x) = int_0^x dxi / c(xi)`` every point
moves at unit speed, so the time a particle spends in a cell is an interval
overlap. A jump ``f_k - f_{k-1}`` carried by particle ``k`` changes the
average of each cell it sweeps in proportion to the swept length.

The shift number ``nu`` maps to elapsed time ``t = nu T / N`` where ``T``
is the time for one full loop of the periodic domain, so ``nu = N`` is the
identity and constant speed reduces to the upwind shift operator.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

__all__ = [
    "VelocityField",
    "TrajectorySolution",
    "PivotMap",
    "integrate_trajectories",
    "variable_shift_matrix",
    "apply_variable_shift",
    "weighted_mass",
    "build_pivot_map",
    "reverse_varspeed",
    "forward_varspeed",
    "characteristic_decompose",
    "characteristic_compose",
]


@dataclass(frozen=True)
class VelocityField:
    """Positive speeds ``c_j`` on the cells ``[edges[j], edges[j+1]]`` of [0, 1]."""

    speeds: np.ndarray
    edges: np.ndarray = None

    def __post_init__(self):
        speeds = np.array(self.speeds, dtype=float)
        if speeds.ndim != 1 or speeds.size == 0:
            raise ValueError("speeds must be a non-empty vector")
        if not np.all(np.isfinite(speeds)) or np.any(speeds <= 0):
            raise ValueError("speeds must be finite and strictly positive")
        n = speeds.size
        edges = np.linspace(0.0, 1.0, n + 1) if self.edges is None else np.array(self.edges, dtype=float)
        if edges.shape != (n + 1,):
            raise ValueError("need N + 1 cell edges")
        if edges[0] != 0.0 or edges[-1] != 1.0 or np.any(np.diff(edges) <= 0):
            raise ValueError("edges must increase strictly from 0 to 1")
        speeds.setflags(write=False)
        edges.setflags(write=False)
        object.__setattr__(self, "speeds", speeds)
        object.__setattr__(self, "edges", edges)

    @classmethod
    def constant(cls, n: int, speed: float = 1.0) -> "VelocityField":
        return cls(np.full(n, float(speed)))

    @classmethod
    def piecewise(cls, n: int, left: float, right: float, interface: float = 0.5) -> "VelocityField":
        centers = (np.arange(n) + 0.5) / n
        return cls(np.where(centers < interface, left, right))

    @property
    def n_cells(self) -> int:
        return self.speeds.size

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.edges)

    @property
    def travel_times(self) -> np.ndarray:
        """Time needed to cross each cell."""
        return self.widths / self.speeds

    @property
    def tau_edges(self) -> np.ndarray:
        return np.concatenate(([0.0], np.cumsum(self.travel_times)))

    @property
    def period(self) -> float:
        return float(np.sum(self.travel_times))

    @property
    def mean_speed(self) -> float:
        """``|Omega| / T``, the harmonic mean of the speed."""
        return 1.0 / self.period


@dataclass(frozen=True)
class TrajectorySolution:
    positions: np.ndarray  # (N + 1,) final positions of the edge particles, mod 1
    cell_times: np.ndarray  # (N, N + 1) signed time particle j spends in cell i
    period: float
    mean_speed: float
    duration: float


def _loop_overlap(c: VelocityField, start: np.ndarray, stop: np.ndarray) -> np.ndarray:
    """Time each travel-time interval ``[start, stop)`` spends in each cell.

    Intervals may wrap any number of times. Returns (cells, intervals).
    """
    T = c.period
    lo = c.tau_edges[:-1][:, None]
    w = c.travel_times[:, None]

    def G(y):
        q = np.floor(y / T)
        r = y - q * T
        return q[None, :] * w + np.clip(r[None, :] - lo, 0.0, w)

    return G(np.asarray(stop, dtype=float)) - G(np.asarray(start, dtype=float))


def integrate_trajectories(c: VelocityField, duration: float, direction: int = 1) -> TrajectorySolution:
    """Move every cell edge along ``dx/dt = direction * c(x)`` for ``duration``."""
    if duration < 0:
        raise ValueError("duration must be non-negative")
    if direction not in (1, -1):
        raise ValueError("direction must be +1 or -1")
    tau0 = c.tau_edges
    if direction == 1:
        overlap = _loop_overlap(c, tau0, tau0 + duration)
        tau1 = tau0 + duration
    else:
        overlap = _loop_overlap(c, tau0 - duration, tau0)
        tau1 = tau0 - duration
    positions = np.interp(np.mod(tau1, c.period), c.tau_edges, c.edges)
    return TrajectorySolution(
        positions=positions,
        cell_times=direction * overlap,
        period=c.period,
        mean_speed=c.mean_speed,
        duration=float(duration),
    )


def _sweep_weights(c: VelocityField, nu: float) -> tuple[np.ndarray, int]:
    n = c.n_cells
    t = abs(nu) * c.period / n
    sign = 1 if nu >= 0 else -1
    tau0 = c.tau_edges[:-1]
    if sign == 1:
        overlap = _loop_overlap(c, tau0, tau0 + t)
    else:
        overlap = _loop_overlap(c, tau0 - t, tau0)
    # swept length in cell i over its width
    return overlap * (c.speeds / c.widths)[:, None], sign


def apply_variable_shift(f, c: VelocityField, nu_tilde: float) -> np.ndarray:
    """Transport ``f`` by ``nu_tilde`` cells' worth of time under speed ``c``.

    Positive shifts move profiles to the right, negative ones reverse them.
    """
    f = np.asarray(f, dtype=float)
    if f.shape[0] != c.n_cells:
        raise ValueError("field and velocity sizes differ")
    W, sign = _sweep_weights(c, float(nu_tilde))
    jumps = f - np.roll(f, 1, axis=0)
    return f - sign * (W @ jumps)


def variable_shift_matrix(c: VelocityField, nu_tilde: float) -> np.ndarray:
    """Dense N x N matrix of :func:`apply_variable_shift`."""
    return apply_variable_shift(np.eye(c.n_cells), c, nu_tilde)


def weighted_mass(f, c: VelocityField) -> float:
    """``sum f_i dx_i / c_i``, the quantity conserved by variable-speed transport."""
    return float(np.asarray(f, dtype=float) @ c.travel_times)


@dataclass(frozen=True)
class PivotMap:
    map: np.ndarray
    trigger_gamma: float

    def __post_init__(self):
        m = np.asarray(self.map, dtype=np.int64)
        if np.any(m > np.arange(m.size)) or np.any(np.diff(m) < 0) or (m.size and m[0] != 0):
            raise ValueError("pivot map must be nondecreasing with map[j] <= j")
        object.__setattr__(self, "map", m)

    @property
    def pivots(self) -> np.ndarray:
        return np.unique(self.map)


def build_pivot_map(A, gamma: float) -> PivotMap:
    """Pivot on column ``k`` whenever ``||a_k - a_{k-1}|| / ||a_{k-1}|| >= gamma``.

    A zero column followed by a nonzero one counts as a trigger.
    """
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    A = np.asarray(A, dtype=float)
    norms = np.linalg.norm(A, axis=0)
    steps = np.linalg.norm(np.diff(A, axis=1), axis=0)
    out = np.zeros(A.shape[1], dtype=np.int64)
    current = 0
    for k in range(1, A.shape[1]):
        prev = norms[k - 1]
        if prev == 0.0:
            trigger = norms[k] > 0.0
        else:
            trigger = steps[k - 1] / prev >= gamma
        if trigger:
            current = k
        out[k] = current
    return PivotMap(out, float(gamma))


def _refine(objective, seed: float, half_width: float) -> float:
    f0 = objective(seed)
    try:
        res = minimize_scalar(
            objective,
            bracket=(seed - half_width, seed, seed + half_width),
            method="golden",
            tol=1e-4 / (2.0 * max(abs(seed), 1.0)),
        )
    except ValueError:
        return seed
    return float(res.x) if res.fun < f0 else seed


def reverse_varspeed(A, c: VelocityField, pivot_map: PivotMap | None = None,
                     seeds_per_cell: int = 4) -> tuple[np.ndarray, np.ndarray]:
    """Variable-speed shift numbers and the reversed matrix.

    ``nu_j`` minimizes ``||a_j - Kc(w) a_{l(j)}||^2`` over ``w`` in ``[0, N)``:
    a coarse scan at ``seeds_per_cell`` points per cell, then golden-section
    refinement around the best seed. Column ``j`` of the reversed matrix is
    ``Kc(-nu_j) a_j``.
    """
    A = np.asarray(A, dtype=float)
    n, m = A.shape
    if n != c.n_cells:
        raise ValueError("snapshot and velocity sizes differ")
    if not np.all(np.isfinite(A)):
        raise ValueError("snapshot matrix contains non-finite entries")
    pm = pivot_map.map if pivot_map is not None else np.zeros(m, dtype=np.int64)
    seeds = np.arange(seeds_per_cell * n) / seeds_per_cell
    nus = np.zeros(m)
    for p in np.unique(pm):
        b = A[:, p]
        Y = np.column_stack([apply_variable_shift(b, c, w) for w in seeds])
        yy = np.einsum("ij,ij->j", Y, Y)
        for j in np.flatnonzero(pm == p):
            a = A[:, j]
            J = a @ a - 2.0 * (a @ Y) + yy
            scale = a @ a + b @ b
            if J.max() - J.min() <= 1e-13 * scale:
                continue
            k = int(np.argmin(J))

            def objective(w, a=a, b=b):
                r = a - apply_variable_shift(b, c, w)
                return float(r @ r)

            nus[j] = np.mod(_refine(objective, seeds[k], 1.0 / seeds_per_cell), n)
    return nus, forward_varspeed(A, c, -nus)


def forward_varspeed(A, c: VelocityField, nus) -> np.ndarray:
    """Apply ``Kc(nu_j)`` to column ``j``."""
    A = np.asarray(A, dtype=float)
    nus = np.asarray(nus, dtype=float)
    if nus.shape != (A.shape[1],):
        raise ValueError("need one shift number per column")
    return np.column_stack([apply_variable_shift(A[:, j], c, nus[j]) for j in range(A.shape[1])])


def _impedance(rho, bulk) -> np.ndarray:
    rho = np.asarray(rho, dtype=float)
    bulk = np.asarray(bulk, dtype=float)
    if np.any(rho <= 0) or np.any(bulk <= 0):
        raise ValueError("density and bulk modulus must be positive")
    return np.sqrt(rho * bulk)


def characteristic_decompose(p, u, rho, bulk) -> tuple[np.ndarray, np.ndarray]:
    """Coordinates of ``(p, u)`` in the eigenbasis ``[-Z, 1]``, ``[Z, 1]``.

    ``r1 = (u - p/Z) / 2`` travels left, ``r2 = (u + p/Z) / 2`` travels right,
    with impedance ``Z = rho c = sqrt(rho K)`` per cell.
    """
    Z = _impedance(rho, bulk)
    if np.ndim(p) == 2 and Z.ndim == 1:
        Z = Z[:, None]
    p = np.asarray(p, dtype=float)
    u = np.asarray(u, dtype=float)
    return 0.5 * (u - p / Z), 0.5 * (u + p / Z)


def characteristic_compose(r1, r2, rho, bulk) -> tuple[np.ndarray, np.ndarray]:
    """Inverse of :func:`characteristic_decompose`: ``p = Z (r2 - r1)``, ``u = r1 + r2``."""
    Z = _impedance(rho, bulk)
    if np.ndim(r1) == 2 and Z.ndim == 1:
        Z = Z[:, None]
    r1 = np.asarray(r1, dtype=float)
    r2 = np.asarray(r2, dtype=float)
    return Z * (r2 - r1), r1 + r2
