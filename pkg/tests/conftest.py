import numpy as np
import pytest

from cylshear.frame import GridSpec, build_filter_bank
from cylshear.wavelet import build_wavelet_bank


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def bank_32():
    """Two-scale bank on the 32x32x16 reference grid."""
    return build_filter_bank(GridSpec(32, 32, 16), 2)


@pytest.fixture(scope="session")
def bank_16():
    """One-scale bank on a small grid for cheap solver/regularizer tests."""
    return build_filter_bank(GridSpec(16, 16, 8), 1)


@pytest.fixture(scope="session")
def wbank_32():
    return build_wavelet_bank(GridSpec(32, 32, 16), 3)
