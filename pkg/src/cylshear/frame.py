"""Cylindrical shearlet filter bank on a discrete 3D grid.

The system splits the (spatial) frequency plane into two cones and applies
directional windows along the spatial axes only; the third (temporal) axis is
never sheared.  Filters live on the DFT grid of the volume, the transform is
undecimated (one full-size subband per index) and, after a final pointwise
renormalization, the squared filter magnitudes sum to 1 at every frequency.
Analysis/synthesis are then an exact Parseval pair.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
import scipy.fft as sfft

from .windows import angular_window, bump3d, radial_squared

__all__ = [
    "GridSpec",
    "ShearletIndex",
    "FilterBank",
    "CoefficientSet",
    "default_shear_levels",
    "max_scales",
    "build_filter_bank",
    "analyze",
    "synthesize",
]


@dataclass(frozen=True)
class GridSpec:
    """Voxel counts of a dynamic image; axes ordered (x1, x2, x3=time)."""

    nx: int
    ny: int
    nt: int

    def __post_init__(self):
        for name, n in (("nx", self.nx), ("ny", self.ny)):
            if n < 8:
                raise ValueError(f"{name}={n} is too small (need >= 8)")
        if self.nt < 2:
            raise ValueError(f"nt={self.nt} is too small (need >= 2)")

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.nx, self.ny, self.nt)

    def admits_scales(self, scales: int) -> bool:
        return min(self.nx, self.ny) >= 2 ** (2 * scales + 1)


def max_scales(grid: GridSpec, cap: int = 3) -> int:
    """Largest admissible scale count for the grid (capped, default 3)."""
    j = 1
    while j < cap and grid.admits_scales(j + 1):
        j += 1
    if not grid.admits_scales(j):
        raise ValueError(f"grid {grid.shape} admits no scales")
    return j


@dataclass(frozen=True, order=True)
class ShearletIndex:
    """Single frame index.

    kind is one of 'lowpass', 'interior', 'boundary'.  The low-pass index is
    unique and uses the sentinel scale -1.  Boundary filters are merged across
    the two cones and carry cone=None; interior filters have cone 1 or 2 and
    |shear| strictly below the per-scale maximum.
    """

    kind: str
    scale: int = -1
    cone: int | None = None
    shear: int | None = None

    def __post_init__(self):
        if self.kind not in ("lowpass", "interior", "boundary"):
            raise ValueError(f"bad kind {self.kind!r}")
        if self.kind == "lowpass" and self.scale != -1:
            raise ValueError("lowpass index must use scale -1")
        if self.kind == "interior" and self.cone not in (1, 2):
            raise ValueError("interior index needs cone 1 or 2")


def default_shear_levels(scales: int) -> tuple[int, ...]:
    """Per-scale shear levels; the reference choice is ceil((j+1)/2).

    Scale j has 2**(level+1)+1 shears per cone before boundary merging and
    2**(level+2) directions after, so three scales give 8, 8 and 16.
    """
    return tuple(math.ceil((j + 1) / 2) for j in range(scales))


def dilation_matrix(cone: int) -> np.ndarray:
    """Anisotropic dilation generating the scales: diag(4, 2, 4) in cone 1.

    The temporal axis dilates isotropically with the dominant spatial axis;
    only the subordinate spatial axis is parabolic.
    """
    return np.diag([4.0, 2.0, 4.0]) if cone == 1 else np.diag([2.0, 4.0, 4.0])


def shear_matrix(cone: int) -> np.ndarray:
    """Unit triangular shear acting on the spatial frequency pair only."""
    b = np.eye(3)
    if cone == 1:
        b[1, 0] = 1.0
    else:
        b[0, 1] = 1.0
    return b


def _reversed_indices(n: int) -> np.ndarray:
    return (-np.arange(n)) % n


def _grid_reverse(a: np.ndarray) -> np.ndarray:
    """Value at the negated DFT frequency, -xi taken modulo the grid."""
    ix = _reversed_indices(a.shape[0])
    iy = _reversed_indices(a.shape[1])
    it = _reversed_indices(a.shape[2])
    return a[np.ix_(ix, iy, it)]


@dataclass(frozen=True)
class FilterBank:
    """Immutable set of frequency-domain filters forming a Parseval frame."""

    grid: GridSpec
    scales: int
    shear_levels: tuple[int, ...]
    filters: dict[ShearletIndex, np.ndarray]
    # rfft-half-grid copies, precomputed for the transforms
    _half: dict[ShearletIndex, np.ndarray] = field(repr=False, default=None)

    @property
    def indices(self) -> tuple[ShearletIndex, ...]:
        return tuple(self.filters.keys())

    def directions_per_scale(self) -> list[int]:
        counts = [0] * self.scales
        for idx in self.filters:
            if idx.kind != "lowpass":
                counts[idx.scale] += 1
        return counts

    def scale_of(self, idx: ShearletIndex) -> int:
        return idx.scale

    def analyze(self, f: np.ndarray) -> "CoefficientSet":
        return analyze(f, self)

    def synthesize(self, coeffs: "CoefficientSet") -> np.ndarray:
        return synthesize(coeffs, self)

    def zero_coefficients(self) -> "CoefficientSet":
        return CoefficientSet(
            {idx: np.zeros(self.grid.shape) for idx in self.filters}, self
        )


@dataclass
class CoefficientSet:
    """Undecimated subband coefficients: one full-size real array per index."""

    blocks: dict
    bank: object

    def energy(self) -> float:
        return float(sum(np.vdot(b, b).real for b in self.blocks.values()))

    def dot(self, other: "CoefficientSet") -> float:
        return float(
            sum(np.vdot(self.blocks[k], other.blocks[k]).real for k in self.blocks)
        )

    def copy(self) -> "CoefficientSet":
        return CoefficientSet({k: v.copy() for k, v in self.blocks.items()}, self.bank)

    def zeros_like(self) -> "CoefficientSet":
        return CoefficientSet(
            {k: np.zeros_like(v) for k, v in self.blocks.items()}, self.bank
        )


def _cone_ratios(grid: GridSpec):
    """Spatial frequency ratios and cone masks on the DFT grid.

    Returns (r1, r2, in_cone1, on_axis) where r1 = xi2/xi1 for cone 1 and
    r2 = xi1/xi2 for cone 2.  The degenerate line xi1 = xi2 = 0 is flagged
    separately: both cones claim it with ratio 0 and the k = 0 filters split
    its energy evenly, which keeps the bank exactly symmetric under x1 <-> x2.
    """
    f1 = sfft.fftfreq(grid.nx)[:, None, None]
    f2 = sfft.fftfreq(grid.ny)[None, :, None]
    a1 = np.abs(np.broadcast_to(f1, (grid.nx, grid.ny, 1)))
    a2 = np.abs(np.broadcast_to(f2, (grid.nx, grid.ny, 1)))
    on_axis = (a1 == 0) & (a2 == 0)
    in_cone1 = a2 <= a1  # includes the seam and the degenerate line

    big = 8.0  # any value > 1 puts the point outside every angular window
    with np.errstate(divide="ignore", invalid="ignore"):
        r1 = np.where(a1 > 0, f2 / np.where(a1 > 0, f1, 1.0), big)
        r2 = np.where(a2 > 0, f1 / np.where(a2 > 0, f2, 1.0), big)
    r1 = np.where(on_axis, 0.0, r1)
    r2 = np.where(on_axis, 0.0, r2)
    return r1, r2, in_cone1, on_axis


def build_filter_bank(
    grid: GridSpec,
    scales: int,
    shear_levels: Iterable[int] | None = None,
) -> FilterBank:
    """Construct the cylindrical shearlet filter bank for a grid.

    Parameters
    ----------
    grid : GridSpec
        Target volume dimensions.
    scales : int
        Number of band-pass scales; requires min(nx, ny) >= 2**(2*scales+1).
    shear_levels : sequence of int, optional
        Shear level per scale; defaults to ceil((j+1)/2).

    Returns
    -------
    FilterBank
        Low-pass filter, interior filters per (cone, scale, shear) and one
        merged boundary filter per (scale, +-2**level).  Squared magnitudes
        sum to exactly 1 at every DFT frequency.
    """
    if scales < 1:
        raise ValueError("scales must be >= 1")
    if not grid.admits_scales(scales):
        raise ValueError(
            f"grid {grid.shape} too small for {scales} scales "
            f"(need min(nx, ny) >= {2 ** (2 * scales + 1)})"
        )
    levels = (
        default_shear_levels(scales) if shear_levels is None else tuple(shear_levels)
    )
    if len(levels) != scales:
        raise ValueError("need one shear level per scale")

    # Scale the DFT frequencies so the whole grid sits inside the region where
    # the truncated dyadic partition sums exactly to 1 (|xi|_inf <= 2^(2J-4)).
    c = 2.0 ** (2 * scales - 3)
    x1 = c * sfft.fftfreq(grid.nx)[:, None, None]
    x2 = c * sfft.fftfreq(grid.ny)[None, :, None]
    x3 = c * sfft.fftfreq(grid.nt)[None, None, :]

    r1, r2, in_cone1, on_axis = _cone_ratios(grid)
    axis_fac = np.where(on_axis, 1.0 / np.sqrt(2.0), 1.0)
    shape = grid.shape

    filters: dict[ShearletIndex, np.ndarray] = {}
    filters[ShearletIndex("lowpass")] = np.broadcast_to(
        bump3d(x1, x2, x3), shape
    ).copy()

    for j in range(scales):
        s = 2.0 ** (-2 * j)
        w_j = np.sqrt(radial_squared(s * x1, s * x2, s * x3))
        m = 2 ** levels[j]
        for k in range(-m + 1, m):
            v1 = angular_window(m * r1 - k) * axis_fac
            v2 = angular_window(m * r2 - k) * axis_fac
            filters[ShearletIndex("interior", j, 1, k)] = np.broadcast_to(
                w_j * v1, shape
            ).copy()
            filters[ShearletIndex("interior", j, 2, k)] = np.broadcast_to(
                w_j * v2, shape
            ).copy()
        for k in (-m, m):
            b1 = angular_window(m * r1 - k)
            b2 = angular_window(m * r2 - k)
            merged = np.sqrt(
                np.where(in_cone1, b1 * b1, b2 * b2)
            )
            filters[ShearletIndex("boundary", j, None, k)] = np.broadcast_to(
                w_j * merged, shape
            ).copy()

    # Make every filter even under xi -> -xi on the grid (only the Nyquist
    # planes of even-sized axes are affected), then renormalize pointwise so
    # the partition of unity holds to machine precision.
    for idx, h in filters.items():
        filters[idx] = np.sqrt(0.5 * (h * h + _grid_reverse(h) ** 2))
    total = np.zeros(shape)
    for h in filters.values():
        total += h * h
    if total.min() <= 0.25:
        raise AssertionError("filter partition collapsed; construction bug")
    root = np.sqrt(total)
    filters = {idx: h / root for idx, h in filters.items()}

    nt_half = grid.nt // 2 + 1
    half = {idx: np.ascontiguousarray(h[:, :, :nt_half]) for idx, h in filters.items()}
    return FilterBank(grid, scales, levels, filters, half)


def analyze(f: np.ndarray, bank: FilterBank) -> CoefficientSet:
    """Subband coefficients of a real volume: IDFT(DFT(f) * filter) per index."""
    if f.shape != bank.grid.shape:
        raise ValueError(f"volume shape {f.shape} != grid {bank.grid.shape}")
    spec = sfft.rfftn(f, norm="ortho")
    blocks = {}
    for idx, h in bank._half.items():
        blocks[idx] = sfft.irfftn(spec * h, s=bank.grid.shape, norm="ortho")
    return CoefficientSet(blocks, bank)


def synthesize(coeffs: CoefficientSet, bank: FilterBank) -> np.ndarray:
    """Adjoint of analyze; inverts it exactly on the range (Parseval frame)."""
    if coeffs.bank is not bank and getattr(coeffs.bank, "grid", None) != bank.grid:
        raise ValueError("coefficient set was produced by an incompatible bank")
    nt_half = bank.grid.nt // 2 + 1
    acc = np.zeros((bank.grid.nx, bank.grid.ny, nt_half), dtype=complex)
    for idx, h in bank._half.items():
        block = coeffs.blocks[idx]
        if block.shape != bank.grid.shape:
            raise ValueError("coefficient block shape mismatch")
        acc += sfft.rfftn(block, norm="ortho") * h
    return sfft.irfftn(acc, s=bank.grid.shape, norm="ortho")
