"""Cylindrical shearlet frames and sparsity-regularized dynamic tomography."""

from .frame import (
    CoefficientSet,
    FilterBank,
    GridSpec,
    ShearletIndex,
    analyze,
    build_filter_bank,
    max_scales,
    synthesize,
)
from .regularizer import (
    RegularizerSpec,
    WeightScheme,
    bregman_distance,
    grad_R,
    prox_weighted_l1,
    smoothness_norm,
    subgrad_R_p1,
    weight_sequence,
)
from .solver import SolveOptions, SolveReport, objective, reconstruct
from .tomo import (
    Geometry,
    NoiseSpec,
    SamplingPattern,
    Sinogram,
    add_noise,
    dynamic_adjoint,
    dynamic_forward,
    noise_level,
    operator_norm,
    radon_adjoint,
    radon_forward,
    sample_angles,
    simulate_data,
)
from .wavelet import WaveletBank, build_wavelet_bank, wavelet3d_analyze, \
    wavelet3d_synthesize

__version__ = "0.1.0"
