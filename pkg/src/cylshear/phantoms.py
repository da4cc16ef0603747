"""Synthetic test objects: star-shaped videos and dynamic tomography phantoms.

Boundaries are rasterized with 2x2 sub-voxel supersampling to reduce
staircase bias.  Every generator is deterministic: identical inputs yield
bit-identical volumes, and each phantom comes with a twin at twice the
spatial resolution for inverse-crime-free data simulation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .frame import GridSpec

__all__ = [
    "StarRegion",
    "StarDiagnostics",
    "VideoSpec",
    "validate_star",
    "rasterize_star_slice",
    "rasterize_video",
    "EllipseSpec",
    "default_cartoon_layout",
    "cartoon_phantom",
    "stempo_surrogate",
]

_THETA_GRID = np.linspace(0.0, 2.0 * np.pi, 4096, endpoint=False)


@dataclass(frozen=True)
class StarRegion:
    """Star-shaped region: radius profile as a truncated trigonometric series.

    radius(theta) = cos_coeffs[0] + sum_m cos_coeffs[m] cos(m theta)
                                  + sum_m sin_coeffs[m] sin(m theta).
    curvature_bound caps sup|rho''| and radius_cap caps rho itself (< 1).
    """

    cos_coeffs: tuple[float, ...]
    sin_coeffs: tuple[float, ...] = ()
    curvature_bound: float = 10.0
    radius_cap: float = 0.99
    center: tuple[float, float] = (0.5, 0.5)

    def radius(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        out = np.full_like(theta, self.cos_coeffs[0])
        for m, a in enumerate(self.cos_coeffs[1:], start=1):
            out = out + a * np.cos(m * theta)
        for m, b in enumerate(self.sin_coeffs, start=1):
            out = out + b * np.sin(m * theta)
        return out

    def radius_second_derivative(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        out = np.zeros_like(theta)
        for m, a in enumerate(self.cos_coeffs[1:], start=1):
            out = out - (m * m) * a * np.cos(m * theta)
        for m, b in enumerate(self.sin_coeffs, start=1):
            out = out - (m * m) * b * np.sin(m * theta)
        return out


@dataclass(frozen=True)
class StarDiagnostics:
    sup_curvature: float
    max_radius: float
    min_radius: float
    ok: bool


def validate_star(star: StarRegion) -> StarDiagnostics:
    """Check the radius profile against its declared bounds on a fine grid."""
    rho = star.radius(_THETA_GRID)
    curv = float(np.max(np.abs(star.radius_second_derivative(_THETA_GRID))))
    ok = (
        float(rho.min()) > 0.0
        and float(rho.max()) <= star.radius_cap
        and star.radius_cap < 1.0
        and curv <= star.curvature_bound
    )
    return StarDiagnostics(curv, float(rho.max()), float(rho.min()), ok)


def _default_intensity(x1, x2):
    return np.ones_like(x1)


def _default_temporal(x3):
    # |z| <= 1/32, |z'| <= ~0.19, |z''| <= 1 on [0,1]; vanishes at both ends
    u = np.asarray(x3, dtype=float)
    return 0.5 * (u * (1.0 - u)) ** 2


def _zero_traj(x3):
    return np.zeros_like(np.asarray(x3, dtype=float))


@dataclass(frozen=True)
class VideoSpec:
    """Star region + smooth interior/temporal profiles + rigid trajectory.

    h and z must be twice differentiable with all derivatives up to order 2
    bounded by 1 in sup norm (checked by sampled finite differences);
    trajectories must vanish at x3 = 0.
    """

    star: StarRegion
    intensity: Callable = _default_intensity
    temporal: Callable = _default_temporal
    traj1: Callable = _zero_traj
    traj2: Callable = _zero_traj

    def validate(self) -> None:
        diag = validate_star(self.star)
        if not diag.ok:
            raise ValueError(f"star region violates its bounds: {diag}")
        q10 = float(self.traj1(np.array(0.0)))
        q20 = float(self.traj2(np.array(0.0)))
        if abs(q10) > 1e-12 or abs(q20) > 1e-12:
            raise ValueError("trajectories must vanish at x3 = 0")
        _check_bounded_derivatives_1d(self.temporal, "z")
        _check_bounded_derivatives_2d(self.intensity, "h")


def _check_bounded_derivatives_1d(fn, name, tol=1e-6):
    u = np.linspace(0.01, 0.99, 199)
    eps = 1e-4
    v = fn(u)
    d1 = (fn(u + eps) - fn(u - eps)) / (2 * eps)
    d2 = (fn(u + eps) - 2 * v + fn(u - eps)) / eps**2
    worst = max(np.abs(v).max(), np.abs(d1).max(), np.abs(d2).max())
    if worst > 1.0 + tol:
        raise ValueError(f"profile {name} exceeds the derivative bound: {worst:.3g}")


def _check_bounded_derivatives_2d(fn, name, tol=1e-6):
    u = np.linspace(0.01, 0.99, 40)
    x, y = np.meshgrid(u, u, indexing="ij")
    eps = 1e-4
    v = fn(x, y)
    worst = float(np.abs(v).max())
    for dx, dy in ((eps, 0.0), (0.0, eps)):
        d1 = (fn(x + dx, y + dy) - fn(x - dx, y - dy)) / (2 * eps)
        d2 = (fn(x + dx, y + dy) - 2 * v + fn(x - dx, y - dy)) / eps**2
        worst = max(worst, float(np.abs(d1).max()), float(np.abs(d2).max()))
    dxy = (
        fn(x + eps, y + eps) - fn(x + eps, y - eps)
        - fn(x - eps, y + eps) + fn(x - eps, y - eps)
    ) / (4 * eps**2)
    worst = max(worst, float(np.abs(dxy).max()))
    if worst > 1.0 + tol:
        raise ValueError(f"profile {name} exceeds the derivative bound: {worst:.3g}")


def _subpixel_offsets(step: float) -> tuple[float, float]:
    return (-0.25 * step, 0.25 * step)


def rasterize_star_slice(star: StarRegion, shift: tuple[float, float],
                         intensity: Callable, zval: float,
                         nx: int, ny: int) -> np.ndarray:
    """One temporal slice: the star region translated by `shift` on [0,1]^2.

    The indicator is supersampled 2x2 per pixel; the smooth interior profile
    is sampled at pixel centers.
    """
    hx, hy = 1.0 / nx, 1.0 / ny
    x1 = (np.arange(nx) + 0.5) * hx
    x2 = (np.arange(ny) + 0.5) * hy
    cx = star.center[0] + shift[0]
    cy = star.center[1] + shift[1]
    mask = np.zeros((nx, ny))
    for ox in _subpixel_offsets(hx):
        for oy in _subpixel_offsets(hy):
            dx = (x1 + ox - cx)[:, None]
            dy = (x2 + oy - cy)[None, :]
            r = np.hypot(dx, dy)
            theta = np.mod(np.arctan2(dy, dx), 2.0 * np.pi)
            mask += (r <= star.radius(theta)).astype(float)
    mask *= 0.25
    hvals = intensity((x1 - shift[0])[:, None], (x2 - shift[1])[None, :])
    return mask * hvals * zval


def rasterize_video(spec: VideoSpec, grid: GridSpec) -> np.ndarray:
    """Voxel volume of h(x - q) chi_S(x - q) z(x3) on the unit cube."""
    spec.validate()
    nx, ny, nt = grid.shape
    out = np.empty(grid.shape)
    for t in range(nt):
        x3 = (t + 0.5) / nt
        shift = (float(spec.traj1(np.array(x3))), float(spec.traj2(np.array(x3))))
        zval = float(spec.temporal(np.array(x3)))
        out[:, :, t] = rasterize_star_slice(
            spec.star, shift, spec.intensity, zval, nx, ny
        )
    return out


# ---------------------------------------------------------------------------
# tomography phantoms (normalized [-1, 1]^2 spatial coordinates)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EllipseSpec:
    """One ellipse of the dynamic cartoon phantom."""

    cx: float
    cy: float
    a: float
    b: float
    angle_deg: float = 0.0
    mode: str = "static"  # static | ramp | periodic
    v0: float = 0.5
    v1: float = 0.5
    freq: float = 1.0
    phase: float = 0.0

    def intensity(self, that: float) -> float:
        if self.mode == "ramp":
            return self.v0 + (self.v1 - self.v0) * that
        if self.mode == "periodic":
            return self.v0 + self.v1 * math.sin(
                2.0 * math.pi * self.freq * that + self.phase
            )
        return self.v0

    def intensity_range(self) -> tuple[float, float]:
        if self.mode == "ramp":
            return min(self.v0, self.v1), max(self.v0, self.v1)
        if self.mode == "periodic":
            return self.v0 - abs(self.v1), self.v0 + abs(self.v1)
        return self.v0, self.v0


def default_cartoon_layout() -> tuple[EllipseSpec, ...]:
    """Fixed ellipse layout: two large ramping ellipses, five periodic dots."""
    return (
        EllipseSpec(-0.42, 0.00, 0.33, 0.55, 18.0, "ramp", 0.15, 0.90),
        EllipseSpec(0.42, 0.02, 0.30, 0.48, -12.0, "ramp", 0.88, 0.22),
        EllipseSpec(0.00, 0.62, 0.11, 0.11, 0.0, "periodic", 0.55, 0.40, 1.0, 0.0),
        EllipseSpec(0.00, -0.62, 0.11, 0.11, 0.0, "periodic", 0.55, 0.40, 2.0, 1.2),
        EllipseSpec(0.02, 0.24, 0.08, 0.08, 0.0, "periodic", 0.50, 0.40, 1.5, 0.7),
        EllipseSpec(0.02, -0.24, 0.08, 0.08, 0.0, "periodic", 0.50, 0.40, 3.0, 2.1),
        EllipseSpec(0.03, 0.00, 0.07, 0.07, 0.0, "periodic", 0.50, 0.38, 2.5, 4.0),
    )


def _ellipse_mask(e: EllipseSpec, n: int) -> np.ndarray:
    """Supersampled (2x2) indicator of the ellipse on an n x n grid."""
    step = 2.0 / n
    x = (np.arange(n) + 0.5) * step - 1.0
    phi = math.radians(e.angle_deg)
    c, s = math.cos(phi), math.sin(phi)
    mask = np.zeros((n, n))
    for ox in _subpixel_offsets(step):
        for oy in _subpixel_offsets(step):
            dx = (x + ox - e.cx)[:, None]
            dy = (x + oy - e.cy)[None, :]
            u = (dx * c + dy * s) / e.a
            v = (-dx * s + dy * c) / e.b
            mask += (u * u + v * v <= 1.0).astype(float)
    return 0.25 * mask


def _paint_ellipses(n: int, kappa: int,
                    layout: tuple[EllipseSpec, ...]) -> np.ndarray:
    vol = np.zeros((n, n, kappa))
    times = np.zeros(kappa) if kappa == 1 else np.arange(kappa) / (kappa - 1)
    for e in layout:
        mask = _ellipse_mask(e, n)
        for t, that in enumerate(times):
            vol[:, :, t] += e.intensity(float(that)) * mask
    return vol


def _block_average_2x2(vol: np.ndarray) -> np.ndarray:
    """Spatial 2x2x1 block mean; the canonical low-res twin of a phantom."""
    return 0.25 * (vol[0::2, 0::2] + vol[1::2, 0::2]
                   + vol[0::2, 1::2] + vol[1::2, 1::2])


def cartoon_phantom(n: int, kappa: int,
                    layout: tuple[EllipseSpec, ...] | None = None,
                    ) -> tuple[np.ndarray, np.ndarray]:
    """Dynamic ellipse phantom at sides n and 2n (same analytic object).

    Geometry is fixed over time; only intensities evolve, staying in [0, 1]
    and strictly positive so the support mask never changes.
    """
    if n < 32:
        raise ValueError("cartoon phantom needs n >= 32")
    if kappa < 2:
        raise ValueError("cartoon phantom needs kappa >= 2")
    layout = default_cartoon_layout() if layout is None else layout
    for e in layout:
        lo, hi = e.intensity_range()
        if lo <= 0.0 or hi > 1.0:
            raise ValueError(f"ellipse intensities must stay in (0, 1]: {e}")
    highres = _paint_ellipses(2 * n, kappa, layout)
    return _block_average_2x2(highres), highres


def _disk_mask(cx, cy, r, n):
    return _ellipse_mask(EllipseSpec(cx, cy, r, r), n)


def _square_mask(cx, cy, half, n):
    step = 2.0 / n
    x = (np.arange(n) + 0.5) * step - 1.0
    mask = np.zeros((n, n))
    for ox in _subpixel_offsets(step):
        for oy in _subpixel_offsets(step):
            inx = np.abs(x + ox - cx)[:, None] <= half
            iny = np.abs(x + oy - cy)[None, :] <= half
            mask += (inx & iny).astype(float)
    return 0.25 * mask


_STEMPO_RING_OUTER = 0.92
_STEMPO_RING_INNER = 0.80
_STEMPO_SQUARE_HALF = 0.15
_STEMPO_SQUARE_PATH = ((-0.45, 0.30), (0.45, 0.30))
_STEMPO_STATICS = ((-0.35, -0.35, 0.12, 0.65), (0.33, -0.33, 0.10, 0.50))


def _paint_stempo(n: int, kappa: int) -> np.ndarray:
    ring = _disk_mask(0.0, 0.0, _STEMPO_RING_OUTER, n) - _disk_mask(
        0.0, 0.0, _STEMPO_RING_INNER, n
    )
    base = 0.20 * _disk_mask(0.0, 0.0, _STEMPO_RING_INNER, n) + 0.85 * ring
    for cx, cy, r, val in _STEMPO_STATICS:
        m = _disk_mask(cx, cy, r, n)
        base = base * (1.0 - m) + val * m
    (sx, sy), (ex, ey) = _STEMPO_SQUARE_PATH
    vol = np.empty((n, n, kappa))
    for t in range(kappa):
        lam = 0.0 if kappa == 1 else t / (kappa - 1)
        m = _square_mask(sx + lam * (ex - sx), sy + lam * (ey - sy),
                         _STEMPO_SQUARE_HALF, n)
        vol[:, :, t] = base * (1.0 - m) + 0.95 * m
    return vol


def stempo_surrogate(n: int, kappa: int) -> tuple[np.ndarray, np.ndarray]:
    """Fixed ring and static features; a square block translates linearly.

    Returns the phantom at sides n and 2n.  With kappa = 1 the square stays
    at the start of its path.
    """
    if n < 64:
        raise ValueError("surrogate phantom needs n >= 64")
    highres = _paint_stempo(2 * n, kappa)
    return _block_average_2x2(highres), highres
