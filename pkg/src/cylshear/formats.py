"""On-disk formats: raw float volumes, sinograms with text headers, CSV.

All float text is written with repr(), which round-trips IEEE doubles
exactly, so save/load cycles are bit-identical.
"""

from __future__ import annotations

import csv
import io
from pathlib import Path

import numpy as np

from .tomo import Geometry, SamplingPattern, Sinogram

__all__ = [
    "save_volume", "load_volume",
    "save_sinogram", "load_sinogram",
    "write_csv",
]

_VOL_MAGIC = "CYLSHVOL1"


def save_volume(path, volume: np.ndarray, scales: int = 0) -> None:
    """5-line text header (magic, nx, ny, nt, scale count) + LE float64 data."""
    volume = np.asarray(volume, dtype=float)
    if volume.ndim != 3:
        raise ValueError("volume must be 3-dimensional")
    nx, ny, nt = volume.shape
    header = f"{_VOL_MAGIC}\n{nx}\n{ny}\n{nt}\n{scales}\n"
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(np.ascontiguousarray(volume, dtype="<f8").tobytes())


def load_volume(path) -> tuple[np.ndarray, int]:
    with open(path, "rb") as fh:
        lines = [fh.readline().decode("ascii").strip() for _ in range(5)]
        if lines[0] != _VOL_MAGIC:
            raise ValueError(f"{path}: not a volume file (bad magic {lines[0]!r})")
        nx, ny, nt, scales = (int(v) for v in lines[1:])
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != nx * ny * nt:
        raise ValueError(f"{path}: truncated volume payload")
    return data.reshape(nx, ny, nt).copy(), scales


def save_sinogram(path, sino: Sinogram) -> None:
    """Header: 'kappa N n_detectors seed', then one line of angles per block."""
    kappa, n_ang, n_det = sino.blocks.shape
    head = io.StringIO()
    head.write(f"{kappa} {n_ang} {n_det} {sino.pattern.seed}\n")
    for t in range(kappa):
        head.write(" ".join(repr(float(a)) for a in sino.pattern.angles[t]))
        head.write("\n")
    with open(path, "wb") as fh:
        fh.write(head.getvalue().encode("ascii"))
        fh.write(np.ascontiguousarray(sino.blocks, dtype="<f8").tobytes())


def load_sinogram(path) -> Sinogram:
    with open(path, "rb") as fh:
        first = fh.readline().decode("ascii").split()
        if len(first) != 4:
            raise ValueError(f"{path}: bad sinogram header")
        kappa, n_ang, n_det, seed = (int(v) for v in first)
        angles = np.empty((kappa, n_ang))
        for t in range(kappa):
            row = fh.readline().decode("ascii").split()
            if len(row) != n_ang:
                raise ValueError(f"{path}: bad angle line for block {t}")
            angles[t] = [float(v) for v in row]
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != kappa * n_ang * n_det:
        raise ValueError(f"{path}: truncated sinogram payload")
    pattern = SamplingPattern(angles, seed)
    n = int(np.floor(n_det / np.sqrt(2.0)))
    geometry = Geometry(n, n_det) if n >= 1 else None
    return Sinogram(data.reshape(kappa, n_ang, n_det).copy(), pattern, geometry)


def write_csv(path, columns, rows) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow(row)
