"""First-order finite volume solvers that generate snapshot matrices.

All problems live on the unit interval with ``N`` uniform cells. Time steps
are uniform; snapshots are taken at exact step boundaries so the recorded
times are the times actually reached by the scheme.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import erf

from .core import SnapshotMatrix, shift_fractional
from .varspeed import VelocityField, characteristic_decompose

__all__ = [
    "CFLError",
    "Problem",
    "InitialCondition",
    "ProblemSpec",
    "initial_profile",
    "medium",
    "velocity_field",
    "solve",
    "snapshot_at_chebyshev_times",
    "chebyshev_nodes",
    "characteristic_snapshots",
    "acoustic_energy",
]


class CFLError(ValueError):
    """Raised when a requested time step violates the CFL condition."""


class Problem(str, enum.Enum):
    ADVECTION_PERIODIC = "advection_periodic"
    ADVECTION_SOURCE = "advection_source"
    ADVECTION_ABSORBING = "advection_absorbing"
    ACOUSTIC_HOMOGENEOUS = "acoustic_homogeneous"
    ACOUSTIC_HETEROGENEOUS = "acoustic_heterogeneous"
    BURGERS = "burgers"


@dataclass(frozen=True)
class InitialCondition:
    """Initial profile.

    ``kind`` is ``"delta"`` (mass ``1`` in the first cell), ``"gaussian"``
    (``amplitude * exp(-((x - center) / width)^2)``) or ``"twin_gaussians"``
    (a second hump at ``center + separation`` with ``second_amplitude``).
    Gaussians are integrated exactly over each cell and wrapped periodically.
    """

    kind: str = "gaussian"
    center: float = 0.25
    width: float = 0.05
    amplitude: float = 1.0
    separation: float = 0.25
    second_amplitude: float = 0.5

    def __post_init__(self):
        if self.kind not in ("delta", "gaussian", "twin_gaussians"):
            raise ValueError(f"unknown initial condition {self.kind!r}")
        if self.width <= 0:
            raise ValueError("width must be positive")


@dataclass(frozen=True)
class ProblemSpec:
    problem: Problem = Problem.ADVECTION_PERIODIC
    n_cells: int = 100
    n_snapshots: int = 100
    final_time: float = 1.0
    courant: float = 0.9
    initial_condition: InitialCondition = field(default_factory=InitialCondition)
    speed: float = 1.0
    decay_rate: float = 1.0
    rho: float = 1.0
    bulk: float = 1.0
    rho_left: float = 1.0
    bulk_left: float = 1.0
    rho_right: float = 4.0
    bulk_right: float = 1.0
    interface: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "problem", Problem(self.problem))
        if isinstance(self.initial_condition, dict):
            object.__setattr__(self, "initial_condition", InitialCondition(**self.initial_condition))
        if self.n_cells < 1 or self.n_snapshots < 1:
            raise ValueError("n_cells and n_snapshots must be positive")
        if self.final_time < 0 or (self.n_snapshots > 1 and self.final_time == 0):
            raise ValueError("final_time must be positive")
        if not 0.0 < self.courant:
            raise ValueError("courant must be positive")
        if self.courant > 1.0:
            raise CFLError(f"courant number {self.courant} exceeds 1")
        for name in ("speed", "rho", "bulk", "rho_left", "bulk_left", "rho_right", "bulk_right"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.decay_rate < 0:
            raise ValueError("decay_rate must be non-negative")

    @property
    def is_acoustic(self) -> bool:
        return self.problem in (Problem.ACOUSTIC_HOMOGENEOUS, Problem.ACOUSTIC_HETEROGENEOUS)

    def with_(self, **kw) -> "ProblemSpec":
        return replace(self, **kw)


def _gaussian_averages(edges: np.ndarray, center: float, width: float) -> np.ndarray:
    h = np.diff(edges)
    total = np.zeros(h.size)
    for image in (-2.0, -1.0, 0.0, 1.0, 2.0):
        c = center + image
        total += erf((edges[1:] - c) / width) - erf((edges[:-1] - c) / width)
    return 0.5 * math.sqrt(math.pi) * width * total / h


def initial_profile(ic: InitialCondition, n: int) -> np.ndarray:
    """Cell averages of the initial profile on ``n`` uniform cells."""
    if ic.kind == "delta":
        u = np.zeros(n)
        u[0] = ic.amplitude * n
        return u
    edges = np.linspace(0.0, 1.0, n + 1)
    u = ic.amplitude * _gaussian_averages(edges, ic.center, ic.width)
    if ic.kind == "twin_gaussians":
        u += ic.second_amplitude * _gaussian_averages(edges, ic.center + ic.separation, ic.width)
    return u


def medium(spec: ProblemSpec) -> tuple[np.ndarray, np.ndarray]:
    """Per-cell density and bulk modulus for the acoustic problems."""
    n = spec.n_cells
    if spec.problem is Problem.ACOUSTIC_HETEROGENEOUS:
        centers = (np.arange(n) + 0.5) / n
        left = centers < spec.interface
        return (np.where(left, spec.rho_left, spec.rho_right),
                np.where(left, spec.bulk_left, spec.bulk_right))
    return np.full(n, spec.rho), np.full(n, spec.bulk)


def velocity_field(spec: ProblemSpec) -> VelocityField:
    """Characteristic speed per cell (sound speed for acoustics)."""
    if spec.is_acoustic:
        rho, bulk = medium(spec)
        return VelocityField(np.sqrt(bulk / rho))
    return VelocityField.constant(spec.n_cells, spec.speed)


def acoustic_energy(p, u, rho, bulk) -> np.ndarray:
    """``sum (p^2 / K + rho u^2) / 2 * h`` per snapshot column."""
    p = np.asarray(p, dtype=float)
    u = np.asarray(u, dtype=float)
    if p.ndim == 2:
        rho, bulk = rho[:, None], bulk[:, None]
    return 0.5 * np.sum(p * p / bulk + rho * u * u, axis=0) / p.shape[0]


def _max_speed(spec: ProblemSpec, state: dict) -> float:
    if spec.problem is Problem.BURGERS:
        return max(float(np.max(np.abs(state["u"]))), 1e-300)
    return float(np.max(velocity_field(spec).speeds))


def _initial_state(spec: ProblemSpec) -> dict:
    u0 = initial_profile(spec.initial_condition, spec.n_cells)
    if spec.problem is Problem.ACOUSTIC_HOMOGENEOUS:
        return {"p": u0, "u": np.zeros_like(u0)}
    if spec.problem is Problem.ACOUSTIC_HETEROGENEOUS:
        return {"p": u0, "u": u0.copy()}
    return {"u": u0}


def _stepper(spec: ProblemSpec, dt: float):
    n = spec.n_cells
    h = 1.0 / n
    prob = spec.problem

    if prob in (Problem.ADVECTION_PERIODIC, Problem.ADVECTION_SOURCE, Problem.ADVECTION_ABSORBING):
        nu = spec.speed * dt / h
        if abs(nu - 1.0) < 1e-12:
            nu = 1.0
        if nu > 1.0:
            raise CFLError(f"Courant number {nu} exceeds 1")
        decay = math.exp(-spec.decay_rate * dt)

        def step(s):
            u = s["u"]
            if prob is Problem.ADVECTION_ABSORBING:
                # inflow ghost is zero; the outflow side needs no ghost for upwind
                new = (1.0 - nu) * u
                new[1:] += nu * u[:-1]
            else:
                new = shift_fractional(u, nu)
            if prob is Problem.ADVECTION_SOURCE:
                new = new * decay
            return {"u": new}

        return step

    if spec.is_acoustic:
        rho, bulk = medium(spec)
        Z = np.sqrt(rho * bulk)
        c = np.sqrt(bulk / rho)
        if np.max(c) * dt / h > 1.0 + 1e-12:
            raise CFLError("acoustic time step violates the CFL condition")
        ZL, ZR = np.roll(Z, 1), Z
        cL, cR = np.roll(c, 1), c
        ratio = dt / h

        def step(s):
            p, u = s["p"], s["u"]
            # interface i sits between cells i-1 and i
            dp = p - np.roll(p, 1)
            du = u - np.roll(u, 1)
            a1 = (-dp + ZR * du) / (ZL + ZR)
            a2 = (dp + ZL * du) / (ZL + ZR)
            amdq_p, amdq_u = cL * a1 * ZL, -cL * a1
            apdq_p, apdq_u = cR * a2 * ZR, cR * a2
            return {
                "p": p - ratio * (apdq_p + np.roll(amdq_p, -1)),
                "u": u - ratio * (apdq_u + np.roll(amdq_u, -1)),
            }

        return step

    if prob is Problem.BURGERS:
        ratio = dt / h

        def step(s):
            u = s["u"]
            ul = np.roll(u, 1)
            flux = np.maximum(0.5 * np.maximum(ul, 0.0) ** 2, 0.5 * np.minimum(u, 0.0) ** 2)
            return {"u": u - ratio * (np.roll(flux, -1) - flux)}

        return step

    raise ValueError(f"unsupported problem {prob}")


def _base_steps(spec: ProblemSpec, state: dict) -> int:
    h = 1.0 / spec.n_cells
    dt_max = spec.courant * h / _max_speed(spec, state)
    return max(1, math.ceil(spec.final_time / dt_max - 1e-9))


def _march(spec: ProblemSpec, n_steps: int, record: np.ndarray) -> dict:
    state = _initial_state(spec)
    dt = spec.final_time / n_steps if n_steps else 0.0
    step = _stepper(spec, dt) if n_steps else None
    out = {k: np.empty((spec.n_cells, record.size)) for k in state}
    targets = {int(r): i for i, r in enumerate(record)}
    for k in range(n_steps + 1):
        if k in targets:
            for name, v in state.items():
                out[name][:, targets[k]] = v
        if k == n_steps or k >= record.max():
            break
        state = step(state)
    times = record * dt
    return {k: SnapshotMatrix(v, times) for k, v in out.items()}


def solve(spec: ProblemSpec) -> dict[str, SnapshotMatrix]:
    """Snapshots at ``M`` uniform times on ``[0, final_time]``.

    Returns ``{"u": ...}`` for scalar problems and ``{"p": ..., "u": ...}``
    for acoustics.
    """
    m = spec.n_snapshots
    if m == 1:
        return _march(spec, 0, np.array([0]))
    base = _base_steps(spec, _initial_state(spec))
    per = math.ceil(base / (m - 1))
    return _march(spec, per * (m - 1), np.arange(m) * per)


def chebyshev_nodes(m: int, final_time: float) -> np.ndarray:
    """Chebyshev points of the first kind mapped to ``[0, final_time]``, ascending."""
    k = np.arange(1, m + 1)
    return final_time * (1.0 - np.cos(np.pi * (2 * k - 1) / (2 * m))) / 2.0


def snapshot_at_chebyshev_times(spec: ProblemSpec) -> dict[str, SnapshotMatrix]:
    """Snapshots at the computed steps nearest to the Chebyshev nodes in time.

    The march uses the same step count as :func:`solve`, refined by an
    integer factor only when two nodes would round to the same step.
    """
    m = spec.n_snapshots
    nodes = chebyshev_nodes(m, spec.final_time)
    base = _base_steps(spec, _initial_state(spec))
    steps = math.ceil(base / (m - 1)) * (m - 1) if m > 1 else base
    while True:
        record = np.rint(nodes / spec.final_time * steps).astype(np.int64)
        if np.all(np.diff(record) > 0):
            break
        steps *= 2
    return _march(spec, steps, record)


def characteristic_snapshots(spec: ProblemSpec, solution: dict[str, SnapshotMatrix]) -> dict[str, SnapshotMatrix]:
    """Left-going ``r1`` and right-going ``r2`` snapshot matrices."""
    if not spec.is_acoustic:
        raise ValueError("characteristic variables exist only for acoustics")
    rho, bulk = medium(spec)
    p, u = solution["p"], solution["u"]
    r1, r2 = characteristic_decompose(p.data, u.data, rho, bulk)
    return {"r1": SnapshotMatrix(r1, p.times), "r2": SnapshotMatrix(r2, p.times)}
