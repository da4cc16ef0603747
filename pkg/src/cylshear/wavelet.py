"""Separable orthogonal 3D wavelet transform (Daubechies-2, 4 taps).

Used as the comparison transform for the directional system.  Boundary
handling is periodization: with orthonormal filters this makes the decimated
transform exactly orthogonal, so analysis preserves the squared norm and
synthesis is both the adjoint and the inverse to machine precision.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .frame import CoefficientSet, GridSpec

__all__ = ["WaveletIndex", "WaveletBank", "build_wavelet_bank",
           "wavelet3d_analyze", "wavelet3d_synthesize", "daubechies2_filters"]

_SQRT3 = np.sqrt(3.0)


def daubechies2_filters() -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal Daubechies-2 low/high pass pair (quadrature mirror)."""
    lo = np.array([1.0 + _SQRT3, 3.0 + _SQRT3, 3.0 - _SQRT3, 1.0 - _SQRT3])
    lo /= 4.0 * np.sqrt(2.0)
    hi = np.array([lo[3], -lo[2], lo[1], -lo[0]])
    return lo, hi


@dataclass(frozen=True, order=True)
class WaveletIndex:
    """Subband label: detail level j (finest = scales-1) and axis band.

    band is a 3-letter string over {L, H} for the (x1, x2, x3) axes; the
    approximation band 'LLL' uses the sentinel scale -1.
    """

    scale: int
    band: str

    @property
    def kind(self) -> str:
        return "lowpass" if self.band == "LLL" else "detail"


@dataclass(frozen=True)
class WaveletBank:
    """Filter pair + level count; validates orthogonality on construction."""

    grid: GridSpec
    scales: int
    boundary: str = "periodic"

    def __post_init__(self):
        if self.boundary != "periodic":
            raise ValueError("only periodic boundary handling is supported")
        step = 2**self.scales
        for name, n in zip(("nx", "ny", "nt"), self.grid.shape):
            if n % step:
                raise ValueError(
                    f"{name}={n} not divisible by 2**scales={step}"
                )
        lo, hi = daubechies2_filters()
        checks = (
            abs(lo @ lo - 1.0),
            abs(hi @ hi - 1.0),
            abs(lo @ hi),
            abs(lo[:2] @ lo[2:]),
            abs(float(np.sum(lo)) - np.sqrt(2.0)),
        )
        if max(checks) > 1e-12:
            raise AssertionError("wavelet filter identities violated")

    @property
    def indices(self) -> tuple[WaveletIndex, ...]:
        out = []
        for j in range(self.scales - 1, -1, -1):
            out.extend(
                WaveletIndex(j, b)
                for b in _detail_bands()
            )
        out.append(WaveletIndex(-1, "LLL"))
        return tuple(out)

    def scale_of(self, idx: WaveletIndex) -> int:
        return idx.scale

    def analyze(self, f: np.ndarray) -> CoefficientSet:
        return wavelet3d_analyze(f, self)

    def synthesize(self, coeffs: CoefficientSet) -> np.ndarray:
        return wavelet3d_synthesize(coeffs, self)

    def _band_shape(self, idx: WaveletIndex) -> tuple[int, int, int]:
        depth = self.scales if idx.scale < 0 else self.scales - idx.scale
        return tuple(n // 2**depth for n in self.grid.shape)

    def zero_coefficients(self) -> CoefficientSet:
        return CoefficientSet(
            {idx: np.zeros(self._band_shape(idx)) for idx in self.indices}, self
        )


def build_wavelet_bank(grid: GridSpec, scales: int = 3) -> WaveletBank:
    return WaveletBank(grid, scales)


def _detail_bands() -> list[str]:
    bands = []
    for b1 in "LH":
        for b2 in "LH":
            for b3 in "LH":
                s = b1 + b2 + b3
                if s != "LLL":
                    bands.append(s)
    return bands


def _analyze_axis(x: np.ndarray, filt: np.ndarray, axis: int) -> np.ndarray:
    """y[m] = sum_k filt[k] * x[(2m+k) mod n] along one axis."""
    n = x.shape[axis]
    acc = None
    for k, c in enumerate(filt):
        term = c * np.roll(x, -k, axis=axis)
        acc = term if acc is None else acc + term
    sl = [slice(None)] * x.ndim
    sl[axis] = slice(0, n, 2)
    return acc[tuple(sl)]


def _synthesize_axis(y: np.ndarray, filt: np.ndarray, axis: int) -> np.ndarray:
    """Adjoint of _analyze_axis: upsample by 2 then circularly convolve."""
    shape = list(y.shape)
    shape[axis] *= 2
    up = np.zeros(shape, dtype=y.dtype)
    sl = [slice(None)] * y.ndim
    sl[axis] = slice(0, shape[axis], 2)
    up[tuple(sl)] = y
    acc = None
    for k, c in enumerate(filt):
        term = c * np.roll(up, k, axis=axis)
        acc = term if acc is None else acc + term
    return acc


def wavelet3d_analyze(f: np.ndarray, bank: WaveletBank) -> CoefficientSet:
    """Multi-level separable decomposition; finest details carry scale j=scales-1."""
    if f.shape != bank.grid.shape:
        raise ValueError(f"volume shape {f.shape} != grid {bank.grid.shape}")
    lo, hi = daubechies2_filters()
    blocks: dict[WaveletIndex, np.ndarray] = {}
    approx = np.asarray(f, dtype=float)
    for depth in range(bank.scales):
        j = bank.scales - 1 - depth
        parts = {"": approx}
        for axis in range(3):
            nxt = {}
            for tag, arr in parts.items():
                nxt[tag + "L"] = _analyze_axis(arr, lo, axis)
                nxt[tag + "H"] = _analyze_axis(arr, hi, axis)
            parts = nxt
        for band in _detail_bands():
            blocks[WaveletIndex(j, band)] = parts[band]
        approx = parts["LLL"]
    blocks[WaveletIndex(-1, "LLL")] = approx
    return CoefficientSet(blocks, bank)


def wavelet3d_synthesize(coeffs: CoefficientSet, bank: WaveletBank) -> np.ndarray:
    """Inverse (= adjoint) of wavelet3d_analyze."""
    lo, hi = daubechies2_filters()
    approx = coeffs.blocks[WaveletIndex(-1, "LLL")]
    for depth in range(bank.scales - 1, -1, -1):
        j = bank.scales - 1 - depth
        parts = {"LLL": approx}
        for band in _detail_bands():
            parts[band] = coeffs.blocks[WaveletIndex(j, band)]
        for axis in range(2, -1, -1):
            merged = {}
            tags = sorted({t[:axis] + t[axis + 1:] for t in parts})
            for tag in tags:
                tl = tag[:axis] + "L" + tag[axis:]
                th = tag[:axis] + "H" + tag[axis:]
                merged[tag] = _synthesize_axis(
                    parts[tl], lo, axis
                ) + _synthesize_axis(parts[th], hi, axis)
            parts = merged
        approx = parts[""]
    if approx.shape != bank.grid.shape:
        raise ValueError("coefficient set inconsistent with bank")
    return approx
