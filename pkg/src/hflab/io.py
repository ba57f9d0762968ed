"""Trajectories, binary matrix files and their JSON sidecars.

Binary matrix layout (all little-endian)::

    8 bytes   magic  b"HFLMAT\\x00\\x01"
    uint64    number of matrices in the file
    per matrix:
        uint64 rows, uint64 cols
        rows * cols complex128 entries, row-major, as interleaved (re, im) doubles
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, BinaryIO, Iterable

import numpy as np

__all__ = [
    "Trajectory",
    "write_matrices",
    "read_matrices",
    "save_trajectory",
    "load_trajectory",
]

MAGIC = b"HFLMAT\x00\x01"
_U64 = struct.Struct("<Q")


@dataclass
class Trajectory:
    """Time-stamped sequence of states plus run metadata."""

    times: np.ndarray
    states: list
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if len(self.times) != len(self.states):
            raise ValueError("times and states differ in length")

    def __len__(self) -> int:
        return len(self.states)

    @property
    def dt(self) -> float:
        if len(self.times) < 2:
            raise ValueError("trajectory has fewer than two samples")
        steps = np.diff(self.times)
        if not np.allclose(steps, steps[0], rtol=1e-9, atol=1e-14):
            raise ValueError("trajectory grid is not uniform")
        return float(steps[0])

    def index_of(self, t: float) -> int:
        k = int(np.argmin(np.abs(self.times - t)))
        if not np.isclose(self.times[k], t, rtol=1e-9, atol=1e-12):
            raise ValueError(f"time {t} is not on the trajectory grid")
        return k

    def at(self, t: float):
        return self.states[self.index_of(t)]


def _write_one(fh: BinaryIO, a: np.ndarray) -> None:
    a = np.ascontiguousarray(a, dtype="<c16")
    if a.ndim == 1:
        a = a.reshape(-1, 1)
    fh.write(_U64.pack(a.shape[0]))
    fh.write(_U64.pack(a.shape[1]))
    fh.write(a.tobytes(order="C"))


def write_matrices(path: str | Path, matrices: Iterable[np.ndarray]) -> None:
    matrices = list(matrices)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(_U64.pack(len(matrices)))
        for a in matrices:
            _write_one(fh, a)


def read_matrices(path: str | Path) -> list[np.ndarray]:
    with open(path, "rb") as fh:
        if fh.read(len(MAGIC)) != MAGIC:
            raise ValueError(f"{path}: not a matrix file")
        (count,) = _U64.unpack(fh.read(8))
        out = []
        for _ in range(count):
            (rows,) = _U64.unpack(fh.read(8))
            (cols,) = _U64.unpack(fh.read(8))
            buf = fh.read(rows * cols * 16)
            if len(buf) != rows * cols * 16:
                raise ValueError(f"{path}: truncated matrix record")
            out.append(np.frombuffer(buf, dtype="<c16").reshape(rows, cols).astype(complex))
        return out


def _jsonable(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def save_trajectory(path: str | Path, traj: Trajectory) -> tuple[Path, Path]:
    """Write ``<path>.bin`` (states) and ``<path>.json`` (times + metadata)."""
    path = Path(path)
    states = [getattr(s, "matrix", s) for s in traj.states]
    bin_path, json_path = path.with_suffix(".bin"), path.with_suffix(".json")
    write_matrices(bin_path, states)
    sidecar = {"times": traj.times.tolist(), "meta": _jsonable(traj.meta)}
    json_path.write_text(json.dumps(sidecar, indent=2, sort_keys=True))
    return bin_path, json_path


def load_trajectory(path: str | Path) -> Trajectory:
    """Inverse of :func:`save_trajectory`; states come back as plain matrices."""
    path = Path(path)
    sidecar = json.loads(path.with_suffix(".json").read_text())
    states = read_matrices(path.with_suffix(".bin"))
    return Trajectory(np.array(sidecar["times"]), states, sidecar["meta"])

