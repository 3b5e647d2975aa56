"""Text file formats for snapshot matrices and reversal models.

Floats are written with 17 significant digits, so every finite double
survives a write/read cycle bit for bit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import SnapshotMatrix
from .greedy import ReversalModel

__all__ = [
    "FormatError",
    "ShiftModel",
    "format_float",
    "write_snapshots",
    "read_snapshots",
    "write_model",
    "read_model",
    "encode_bits",
    "decode_bits",
]

SNAPSHOT_MAGIC = "# transport-reversal snapshot v1"
MODEL_MAGIC = "# transport-reversal model v1"


class FormatError(ValueError):
    """Raised when a file does not follow the expected layout."""


@dataclass
class ShiftModel:
    """Per-column real or variable-speed shift numbers.

    ``kind`` is ``"real"`` or ``"varspeed"``. ``pivot_map`` lists the pivot
    column of each snapshot; ``speeds`` is the per-cell velocity for the
    variable-speed kind and ``boundary_values`` the (M, 2) pinned values used
    by sharpening, when present.
    """

    kind: str
    shifts: np.ndarray
    pivot_map: np.ndarray
    speeds: np.ndarray | None = None
    boundary_values: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("real", "varspeed"):
            raise ValueError(f"unknown shift model kind {self.kind!r}")
        self.shifts = np.asarray(self.shifts, dtype=float)
        self.pivot_map = np.asarray(self.pivot_map, dtype=np.int64)
        if self.pivot_map.shape != self.shifts.shape:
            raise ValueError("pivot map and shifts differ in length")
        if self.speeds is not None:
            self.speeds = np.asarray(self.speeds, dtype=float)
        if self.boundary_values is not None:
            self.boundary_values = np.asarray(self.boundary_values, dtype=float).reshape(-1, 2)

    def __eq__(self, other):
        if not isinstance(other, ShiftModel):
            return NotImplemented

        def same(x, y):
            if x is None or y is None:
                return x is None and y is None
            return x.shape == y.shape and np.array_equal(x, y)

        return (self.kind == other.kind and same(self.shifts, other.shifts)
                and same(self.pivot_map, other.pivot_map) and same(self.speeds, other.speeds)
                and same(self.boundary_values, other.boundary_values) and self.meta == other.meta)


def format_float(x: float) -> str:
    return format(float(x), ".17g")


def _join(values) -> str:
    return ",".join(format_float(v) for v in np.ravel(values))


def _floats(text: str) -> np.ndarray:
    text = text.strip()
    if not text:
        return np.zeros(0)
    try:
        return np.array([float(t) for t in text.split(",")])
    except ValueError as exc:
        raise FormatError(f"bad number list: {exc}") from exc


def _ints(text: str) -> np.ndarray:
    text = text.strip()
    if not text:
        return np.zeros(0, dtype=np.int64)
    try:
        return np.array([int(t) for t in text.split(",")], dtype=np.int64)
    except ValueError as exc:
        raise FormatError(f"bad integer list: {exc}") from exc


def write_snapshots(path, snapshots: SnapshotMatrix) -> None:
    """Write one line per snapshot (column) after a three-line header."""
    A = snapshots.data
    lines = [
        SNAPSHOT_MAGIC,
        f"# N={A.shape[0]} M={A.shape[1]}",
        f"# times={_join(snapshots.times)}",
    ]
    lines += [_join(A[:, j]) for j in range(A.shape[1])]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_snapshots(path) -> SnapshotMatrix:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if len(lines) < 3 or lines[0].strip() != SNAPSHOT_MAGIC:
        raise FormatError(f"{path}: not a snapshot file")
    try:
        header = dict(tok.split("=") for tok in lines[1].lstrip("#").split())
        n, m = int(header["N"]), int(header["M"])
    except (ValueError, KeyError) as exc:
        raise FormatError(f"{path}: bad size header") from exc
    if not lines[2].startswith("# times="):
        raise FormatError(f"{path}: missing times header")
    times = _floats(lines[2][len("# times="):])
    rows = [ln for ln in lines[3:] if ln.strip()]
    if len(rows) != m or times.size != m:
        raise FormatError(f"{path}: expected {m} snapshots")
    data = np.empty((n, m))
    for j, row in enumerate(rows):
        col = _floats(row)
        if col.size != n:
            raise FormatError(f"{path}: snapshot {j} has {col.size} values, expected {n}")
        data[:, j] = col
    try:
        return SnapshotMatrix(data, times)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc


def encode_bits(bits) -> str:
    """Run-length code: first bit, then run lengths, e.g. ``1:3,2,5``."""
    bits = np.asarray(bits, dtype=bool)
    if bits.size == 0:
        return "0:"
    change = np.flatnonzero(np.diff(bits.astype(np.int8))) + 1
    bounds = np.concatenate(([0], change, [bits.size]))
    return f"{int(bits[0])}:" + ",".join(str(int(r)) for r in np.diff(bounds))


def decode_bits(text: str, n: int) -> np.ndarray:
    try:
        first, runs = text.strip().split(":")
        value = first == "1"
        out = []
        for r in _ints(runs):
            out.extend([value] * int(r))
            value = not value
    except ValueError as exc:
        raise FormatError(f"bad run-length row {text!r}") from exc
    if len(out) != n:
        raise FormatError(f"run-length row decodes to {len(out)} bits, expected {n}")
    return np.array(out, dtype=bool)


def _sections(text: str) -> dict[str, list[str]]:
    out: dict[str, list[str]] = {}
    current = None
    for ln in text.splitlines():
        s = ln.strip()
        if not s or s.startswith("#"):
            continue
        if s.startswith("[") and s.endswith("]"):
            current = s[1:-1]
            out[current] = []
        elif current is None:
            raise FormatError("content before the first section")
        else:
            out[current].append(s)
    return out


def write_model(path, model: ReversalModel | ShiftModel) -> None:
    if isinstance(model, ShiftModel):
        lines = [MODEL_MAGIC, "[shifts]", _join(model.shifts), "[pivots]", ",".join(map(str, model.pivot_map))]
        if model.speeds is not None:
            lines += ["[velocity]", _join(model.speeds)]
        if model.boundary_values is not None:
            lines += ["[boundary]", _join(model.boundary_values)]
        meta = {"format": 1, "kind": model.kind, "extra": model.meta}
        lines += ["[meta]", json.dumps(meta, sort_keys=True)]
    else:
        meta = {
            "format": 1,
            "kind": "greedy",
            "n_cells": model.n_cells,
            "n_snaps": model.n_snaps,
            "pivot_index": model.pivot_index.tolist(),
            "residual_history": [format_float(r) for r in model.residual_history],
        }
        lines = [MODEL_MAGIC, "[pivots]"]
        lines += [_join(p) for p in model.pivots]
        lines += ["[shifts]"] + [",".join(map(str, row)) for row in model.shifts]
        lines += ["[scalings]"] + [_join(row) for row in model.scalings]
        lines += ["[cutoffs]"]
        for k in range(model.n_iterations):
            lines += [encode_bits(model.cutoffs[k, :, j]) for j in range(model.n_snaps)]
        lines += ["[meta]", json.dumps(meta, sort_keys=True)]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_model(path) -> ReversalModel | ShiftModel:
    text = Path(path).read_text(encoding="utf-8")
    if not text.startswith(MODEL_MAGIC):
        raise FormatError(f"{path}: not a model file")
    sec = _sections(text)
    try:
        meta = json.loads(" ".join(sec["meta"]))
    except (KeyError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: missing or bad [meta] section") from exc
    kind = meta.get("kind")
    try:
        if kind in ("real", "varspeed"):
            return ShiftModel(
                kind=kind,
                shifts=_floats(sec["shifts"][0] if sec["shifts"] else ""),
                pivot_map=_ints(sec["pivots"][0] if sec["pivots"] else ""),
                speeds=_floats(sec["velocity"][0]) if "velocity" in sec else None,
                boundary_values=_floats(sec["boundary"][0]) if "boundary" in sec else None,
                meta=meta.get("extra", {}),
            )
        if kind != "greedy":
            raise FormatError(f"{path}: unknown model kind {kind!r}")
        n, m = int(meta["n_cells"]), int(meta["n_snaps"])
        pivots = [_floats(row) for row in sec["pivots"]]
        k = len(sec["shifts"])
        shifts = np.array([_ints(r) for r in sec["shifts"]], dtype=np.int64).reshape(k, m)
        scalings = np.array([_floats(r) for r in sec["scalings"]]).reshape(k, m)
        rows = sec["cutoffs"]
        if len(rows) != k * m:
            raise FormatError(f"{path}: expected {k * m} cutoff rows")
        cutoffs = np.zeros((k, n, m), dtype=bool)
        for i, row in enumerate(rows):
            cutoffs[i // m, :, i % m] = decode_bits(row, n)
        return ReversalModel(
            n_cells=n,
            n_snaps=m,
            pivots=pivots,
            shifts=shifts,
            scalings=scalings,
            cutoffs=cutoffs,
            pivot_index=np.array(meta["pivot_index"], dtype=np.int64),
            residual_history=np.array([float(r) for r in meta["residual_history"]]),
        )
    except KeyError as exc:
        raise FormatError(f"{path}: missing section {exc}") from exc
    except ValueError as exc:
        if isinstance(exc, FormatError):
            raise
        raise FormatError(f"{path}: {exc}") from exc
