"""Discrete parallel-beam projector, randomized angle sampling and noise.

The projector distributes each pixel's mass onto the detector with linear
interpolation at the projected pixel center (the transpose of interpolating
backprojection).  Forward and adjoint are built from the same stencil, so the
pair is an exact transpose and mass is conserved bin-wise at every angle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Geometry",
    "SamplingPattern",
    "Sinogram",
    "NoiseSpec",
    "radon_forward",
    "radon_adjoint",
    "dynamic_forward",
    "dynamic_adjoint",
    "sample_angles",
    "noise_level",
    "add_noise",
    "simulate_data",
    "power_method",
    "operator_norm",
]


def default_detector_count(n: int) -> int:
    return math.ceil(n * math.sqrt(2.0))


@dataclass(frozen=True)
class Geometry:
    """Square image of side n (unit pixel pitch) with a 1D detector.

    The image is inscribed in [-n/2, n/2]^2; detector bins have unit pitch and
    are centered on the origin, so bin i sits at s = i - (n_detectors-1)/2.
    """

    n: int
    n_detectors: int | None = None

    def __post_init__(self):
        least = default_detector_count(self.n)
        if self.n_detectors is None:
            object.__setattr__(self, "n_detectors", least)
        elif self.n_detectors < least:
            raise ValueError(
                f"n_detectors={self.n_detectors} < ceil(n*sqrt(2))={least}"
            )


def _splat_stencil(n: int, angles: np.ndarray, n_det: int, pixel_pitch: float,
                   det_pitch: float):
    """Bin indices and interpolation weights of every (angle, pixel) pair."""
    angles = np.asarray(angles, dtype=float)
    centers = (np.arange(n) - (n - 1) / 2.0) * pixel_pitch
    cos = np.cos(angles)[:, None, None]
    sin = np.sin(angles)[:, None, None]
    s = cos * centers[:, None] + sin * centers[None, :]
    u = s / det_pitch + (n_det - 1) / 2.0
    i0 = np.floor(u).astype(np.int64)
    w = u - i0
    if i0.min() < 0 or i0.max() > n_det - 2:
        # coverage is guaranteed by the geometry invariant; the clamp handles
        # rays landing exactly on the last bin center (and nothing else)
        np.clip(i0, 0, n_det - 2, out=i0)
        w = np.clip(u - i0, 0.0, 1.0)
    return i0, w


def radon_forward(image: np.ndarray, angles, geometry: Geometry | None = None,
                  *, pixel_pitch: float = 1.0, det_pitch: float = 1.0,
                  n_detectors: int | None = None) -> np.ndarray:
    """Project an n x n image onto (len(angles), n_detectors) line integrals.

    Row a holds the projection at angles[a]; detector coordinate of a point x
    is x . (cos a, sin a).  Linear in the image.
    """
    image = np.asarray(image, dtype=float)
    n = image.shape[0]
    if image.shape != (n, n):
        raise ValueError(f"image must be square, got {image.shape}")
    if geometry is None:
        geometry = Geometry(n) if n_detectors is None else Geometry(n, n_detectors)
    if geometry.n != n:
        raise ValueError(f"geometry is for n={geometry.n}, image has n={n}")
    n_det = geometry.n_detectors
    angles = np.atleast_1d(np.asarray(angles, dtype=float))
    i0, w = _splat_stencil(n, angles, n_det, pixel_pitch, det_pitch)
    scale = pixel_pitch * pixel_pitch / det_pitch
    vals = np.broadcast_to(image * scale, i0.shape).ravel()
    offs = (np.arange(len(angles)) * n_det)[:, None, None]
    flat = (i0 + offs).ravel()
    out = np.bincount(flat, weights=vals * (1.0 - w).ravel(),
                      minlength=len(angles) * n_det)
    out += np.bincount(flat + 1, weights=vals * w.ravel(),
                       minlength=len(angles) * n_det)
    return out.reshape(len(angles), n_det)


def radon_adjoint(block: np.ndarray, angles, geometry: Geometry,
                  *, pixel_pitch: float = 1.0,
                  det_pitch: float = 1.0) -> np.ndarray:
    """Exact transpose of radon_forward as a linear map."""
    block = np.asarray(block, dtype=float)
    angles = np.atleast_1d(np.asarray(angles, dtype=float))
    n = geometry.n
    n_det = geometry.n_detectors
    if block.shape != (len(angles), n_det):
        raise ValueError(
            f"block shape {block.shape} != ({len(angles)}, {n_det})"
        )
    i0, w = _splat_stencil(n, angles, n_det, pixel_pitch, det_pitch)
    rows = np.arange(len(angles))[:, None, None]
    gathered = block[rows, i0] * (1.0 - w) + block[rows, i0 + 1] * w
    scale = pixel_pitch * pixel_pitch / det_pitch
    return scale * gathered.sum(axis=0)


@dataclass(frozen=True)
class SamplingPattern:
    """Per-time-step random projection angles, reproducible from a seed."""

    angles: np.ndarray  # shape (kappa, N), radians
    seed: int
    angle_range: tuple[float, float] = (0.0, 2.0 * math.pi)
    mode: str = "uniform"

    @property
    def kappa(self) -> int:
        return self.angles.shape[0]

    @property
    def n_angles(self) -> int:
        return self.angles.shape[1]

    def permuted(self, order) -> "SamplingPattern":
        return SamplingPattern(self.angles[np.asarray(order)], self.seed,
                               self.angle_range, self.mode)


def sample_angles(n_angles: int, kappa: int,
                  angle_range: tuple[float, float] = (0.0, 2.0 * math.pi),
                  seed: int = 0, mode: str = "uniform") -> SamplingPattern:
    """Draw N angles per time step, independently across steps.

    mode 'uniform' draws from angle_range for every step; mode 'alternating'
    draws from the lower half-range on even steps and the upper half on odd
    steps.  A fixed seed reproduces the pattern exactly; each step uses its
    own derived stream so results do not depend on evaluation order.
    """
    if n_angles < 1:
        raise ValueError("need at least one angle per time step")
    if mode not in ("uniform", "alternating"):
        raise ValueError(f"unknown sampling mode {mode!r}")
    lo, hi = angle_range
    mid = 0.5 * (lo + hi)
    rows = []
    for t in range(kappa):
        rng = np.random.default_rng(np.random.SeedSequence((seed, t)))
        if mode == "alternating":
            a, b = (lo, mid) if t % 2 == 0 else (mid, hi)
        else:
            a, b = lo, hi
        rows.append(rng.uniform(a, b, size=n_angles))
    return SamplingPattern(np.array(rows), seed, angle_range, mode)


@dataclass(frozen=True)
class Sinogram:
    """kappa blocks of (N, n_detectors) projection data."""

    blocks: np.ndarray  # (kappa, N, n_detectors)
    pattern: SamplingPattern
    geometry: Geometry = None

    def __post_init__(self):
        if self.blocks.shape[:2] != self.pattern.angles.shape:
            raise ValueError("sinogram blocks inconsistent with pattern")

    @property
    def kappa(self) -> int:
        return self.blocks.shape[0]


def dynamic_forward(f: np.ndarray, pattern: SamplingPattern,
                    geometry: Geometry | None = None) -> Sinogram:
    """Apply the per-time-step projector block-diagonally over f[:, :, t]."""
    if f.shape[2] != pattern.kappa:
        raise ValueError(
            f"volume has {f.shape[2]} time steps, pattern has {pattern.kappa}"
        )
    geometry = geometry or Geometry(f.shape[0])
    blocks = np.stack([
        radon_forward(f[:, :, t], pattern.angles[t], geometry)
        for t in range(pattern.kappa)
    ])
    return Sinogram(blocks, pattern, geometry)


def dynamic_adjoint(g, pattern: SamplingPattern,
                    geometry: Geometry | None = None) -> np.ndarray:
    """Blockwise adjoint of dynamic_forward; returns an (n, n, kappa) volume."""
    blocks = g.blocks if isinstance(g, Sinogram) else np.asarray(g)
    if blocks.shape[0] != pattern.kappa:
        raise ValueError("block count does not match pattern")
    if geometry is None:
        geometry = g.geometry if isinstance(g, Sinogram) else None
    if geometry is None:
        raise ValueError("geometry required when g is a bare array")
    out = [
        radon_adjoint(blocks[t], pattern.angles[t], geometry)
        for t in range(pattern.kappa)
    ]
    return np.stack(out, axis=2)


@dataclass(frozen=True)
class NoiseSpec:
    """Noise schedule: delta as a function of the number of angles N."""

    scenario: str
    c_delta: float
    n_min: int
    ref_magnitude: float  # max |A f| over the fully sampled forward projection

    def __post_init__(self):
        if self.scenario not in ("decreasing", "fixed"):
            raise ValueError(f"unknown scenario {self.scenario!r}")
        if self.c_delta <= 0:
            raise ValueError("c_delta must be positive")


def noise_level(spec: NoiseSpec, n_angles: int) -> float:
    """decreasing: c * N_min * ref / N; fixed: c * ref."""
    if spec.scenario == "fixed":
        return spec.c_delta * spec.ref_magnitude
    if n_angles < spec.n_min:
        raise ValueError(f"N={n_angles} below N_min={spec.n_min}")
    return spec.c_delta * spec.n_min * spec.ref_magnitude / n_angles


def add_noise(g: Sinogram, delta: float, seed: int) -> Sinogram:
    """Add delta * N(0,1) noise independently per entry, per time step."""
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    if delta == 0.0:
        return g
    noisy = np.empty_like(g.blocks)
    for t in range(g.kappa):
        rng = np.random.default_rng(np.random.SeedSequence((seed, t)))
        noisy[t] = g.blocks[t] + delta * rng.standard_normal(g.blocks[t].shape)
    return Sinogram(noisy, g.pattern, g.geometry)


def simulate_data(f_highres: np.ndarray, pattern: SamplingPattern,
                  delta: float, seed: int,
                  geometry: Geometry | None = None) -> Sinogram:
    """Inverse-crime-free data: project at 2x resolution, bin, add noise.

    f_highres must have spatial side 2n for a reconstruction grid of side n.
    The fine projection uses a half-pitch detector with twice the bins; pairs
    of adjacent fine bins are averaged down to the reconstruction detector.
    """
    n2 = f_highres.shape[0]
    if n2 % 2 or f_highres.shape[1] != n2:
        raise ValueError("high-res volume must be square with even side")
    n = n2 // 2
    if f_highres.shape[2] != pattern.kappa:
        raise ValueError("time steps do not match pattern")
    geometry = geometry or Geometry(n)
    n_det = geometry.n_detectors
    blocks = np.empty((pattern.kappa, pattern.n_angles, n_det))
    for t in range(pattern.kappa):
        fine = radon_forward(
            f_highres[:, :, t], pattern.angles[t],
            geometry=Geometry(n2, 2 * n_det), pixel_pitch=0.5, det_pitch=0.5,
        )
        blocks[t] = 0.5 * (fine[:, 0::2] + fine[:, 1::2])
    return add_noise(Sinogram(blocks, pattern, geometry), delta, seed)


def power_method(apply_fwd, apply_adj, shape, tol: float = 1e-4,
                 max_iter: int = 500, seed: int = 0) -> float:
    """Largest singular value of a matrix-free linear operator."""
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(shape)
    x /= np.linalg.norm(x)
    prev = 0.0
    for _ in range(max_iter):
        y = apply_adj(apply_fwd(x))
        sigma2 = np.linalg.norm(y)
        if sigma2 == 0.0:
            return 0.0
        x = y / sigma2
        if abs(sigma2 - prev) <= tol * sigma2:
            prev = sigma2
            break
        prev = sigma2
    return float(np.sqrt(prev))


def operator_norm(pattern: SamplingPattern, geometry: Geometry,
                  tol: float = 1e-4, seed: int = 0) -> float:
    """Power-method estimate of the dynamic operator's 2-norm."""
    shape = (geometry.n, geometry.n, pattern.kappa)
    return power_method(
        lambda f: dynamic_forward(f, pattern, geometry).blocks,
        lambda b: dynamic_adjoint(b, pattern, geometry),
        shape, tol=tol, seed=seed,
    )
