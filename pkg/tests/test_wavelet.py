import numpy as np
import pytest

from cylshear.frame import GridSpec
from cylshear.wavelet import (
    WaveletBank,
    WaveletIndex,
    build_wavelet_bank,
    daubechies2_filters,
    wavelet3d_analyze,
    wavelet3d_synthesize,
)


def test_filter_identities():
    lo, hi = daubechies2_filters()
    assert len(lo) == 4
    assert abs(lo @ lo - 1.0) <= 1e-12
    assert abs(hi @ hi - 1.0) <= 1e-12
    assert abs(lo @ hi) <= 1e-12
    assert abs(lo[0] * lo[2] + lo[1] * lo[3]) <= 1e-12  # shift-2 orthogonality
    assert abs(lo.sum() - np.sqrt(2.0)) <= 1e-12
    assert abs(hi.sum()) <= 1e-12  # vanishing moment


def test_dimension_divisibility_enforced():
    with pytest.raises(ValueError):
        build_wavelet_bank(GridSpec(36, 32, 16), 3)
    with pytest.raises(ValueError):
        build_wavelet_bank(GridSpec(32, 32, 12), 3)


def test_norm_preservation(wbank_32, rng):
    f = rng.standard_normal(wbank_32.grid.shape)
    c = wavelet3d_analyze(f, wbank_32)
    n2 = float(np.vdot(f, f).real)
    assert abs(c.energy() - n2) / n2 <= 1e-10


def test_round_trip(wbank_32, rng):
    f = rng.standard_normal(wbank_32.grid.shape)
    back = wavelet3d_synthesize(wavelet3d_analyze(f, wbank_32), wbank_32)
    assert np.linalg.norm(back - f) / np.linalg.norm(f) <= 1e-10


def test_constant_energy_in_approximation_band(wbank_32):
    f = np.ones(wbank_32.grid.shape)
    c = wavelet3d_analyze(f, wbank_32)
    low = c.blocks[WaveletIndex(-1, "LLL")]
    frac = float(np.vdot(low, low).real) / float(np.vdot(f, f).real)
    assert frac >= 1.0 - 1e-10


def test_subband_count_and_shapes(wbank_32, rng):
    c = wavelet3d_analyze(rng.standard_normal(wbank_32.grid.shape), wbank_32)
    assert len(c.blocks) == 7 * wbank_32.scales + 1
    finest = c.blocks[WaveletIndex(wbank_32.scales - 1, "HHH")]
    assert finest.shape == (16, 16, 8)
    coarse = c.blocks[WaveletIndex(-1, "LLL")]
    step = 2 ** wbank_32.scales
    assert coarse.shape == tuple(n // step for n in wbank_32.grid.shape)


def test_adjoint_property(wbank_32, rng):
    f = rng.standard_normal(wbank_32.grid.shape)
    c = wavelet3d_analyze(f, wbank_32)
    d = c.zeros_like()
    for k in d.blocks:
        d.blocks[k] = rng.standard_normal(d.blocks[k].shape)
    lhs = c.dot(d)
    rhs = float(np.vdot(f, wavelet3d_synthesize(d, wbank_32)).real)
    assert abs(lhs - rhs) / abs(lhs) <= 1e-10


def test_only_periodic_boundary():
    with pytest.raises(ValueError):
        WaveletBank(GridSpec(32, 32, 16), 3, boundary="symmetric")
