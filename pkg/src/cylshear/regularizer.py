"""Weighted smoothness-space penalties on frame coefficients.

R(f) = (1/p) * sum_lambda w(lambda) |<f, psi_lambda>|^p with per-scale weights
w(j) = 2^(j*beta + (5/2) j (p/2 - 1)) and weight 1 on the low-pass index.
For p > 1 the penalty is differentiable; for p = 1 a subgradient element is
selected against a reference pattern.  The symmetric Bregman distance reduces
to a per-coefficient sum, which is how it is evaluated here.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .frame import CoefficientSet, FilterBank, GridSpec, build_filter_bank, max_scales
from .wavelet import WaveletBank, build_wavelet_bank

__all__ = [
    "WeightScheme",
    "RegularizerSpec",
    "default_beta",
    "weight_sequence",
    "get_bank",
    "smoothness_norm",
    "grad_R",
    "subgrad_R_p1",
    "bregman_distance",
    "prox_weighted_l1",
]

TRANSFORMS = ("cylindrical-shearlet", "wavelet3d")

# below this magnitude a coefficient counts as zero in |c|^(p-1) gradients
_TINY = 1e-300


def default_beta(p: float) -> float:
    """Smoothness order giving unit weights at every scale."""
    return 1.25 * (2.0 - p)


@dataclass(frozen=True)
class WeightScheme:
    """Per-scale coefficient weights; beta=None means the unit-weight choice."""

    p: float
    beta: float | None = None

    def __post_init__(self):
        if not (0.0 < self.p <= 2.0):
            raise ValueError(f"p={self.p} outside (0, 2]")

    @property
    def beta_value(self) -> float:
        return default_beta(self.p) if self.beta is None else self.beta

    def scale_weights(self, scales: int) -> np.ndarray:
        return weight_sequence(self.p, self.beta_value, scales)

    def weight_of(self, index, scales: int) -> float:
        if index.scale < 0:
            return 1.0
        return float(self.scale_weights(scales)[index.scale])


def weight_sequence(p: float, beta: float, scales: int) -> np.ndarray:
    """Weights w(j) for j = 0..scales-1; the low-pass weight is always 1."""
    if scales < 1:
        raise ValueError("scales must be >= 1")
    j = np.arange(scales, dtype=float)
    return 2.0 ** (j * beta + 2.5 * j * (p / 2.0 - 1.0))


@dataclass(frozen=True)
class RegularizerSpec:
    """Penalty choice: transform, weights and regularization strength."""

    transform: str
    weights: WeightScheme
    alpha: float
    scales: int | None = None  # None = largest admissible (capped at 3)
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.transform not in TRANSFORMS:
            raise ValueError(f"unknown transform {self.transform!r}")
        if self.alpha < 0:
            raise ValueError("alpha must be nonnegative")  # 0 = data-only stub

    @property
    def p(self) -> float:
        return self.weights.p


def get_bank(spec: RegularizerSpec, shape: tuple[int, int, int]):
    """Bank for a volume shape, cached on the spec (banks are deterministic)."""
    key = (spec.transform, tuple(shape), spec.scales)
    bank = spec._cache.get(key)
    if bank is None:
        grid = GridSpec(*shape)
        if spec.transform == "cylindrical-shearlet":
            scales = spec.scales if spec.scales is not None else max_scales(grid)
            bank = build_filter_bank(grid, scales)
        else:
            scales = spec.scales if spec.scales is not None else 3
            bank = build_wavelet_bank(grid, scales)
        spec._cache[key] = bank
    return bank


def _weights_for(bank, scheme: WeightScheme) -> dict:
    w = scheme.scale_weights(bank.scales)
    out = {}
    for idx in bank.indices:
        out[idx] = 1.0 if idx.scale < 0 else float(w[idx.scale])
    return out


def coeff_norm(coeffs: CoefficientSet, scheme: WeightScheme) -> float:
    """(1/p) sum_lambda w(lambda) |c_lambda|^p over all positions."""
    p = scheme.p
    w = _weights_for(coeffs.bank, scheme)
    total = 0.0
    for idx, block in coeffs.blocks.items():
        total += w[idx] * float(np.sum(np.abs(block) ** p))
    return total / p


def smoothness_norm(f: np.ndarray, spec: RegularizerSpec) -> float:
    """R(f) for a volume; zero exactly when f = 0."""
    bank = get_bank(spec, f.shape)
    return coeff_norm(bank.analyze(f), spec.weights)


def _grad_blocks(coeffs: CoefficientSet, scheme: WeightScheme) -> CoefficientSet:
    p = scheme.p
    w = _weights_for(coeffs.bank, scheme)
    out = {}
    for idx, c in coeffs.blocks.items():
        a = np.abs(c)
        mag = np.where(a < _TINY, 0.0, a ** (p - 1.0))
        out[idx] = w[idx] * mag * np.sign(c)
    return CoefficientSet(out, coeffs.bank)


def grad_R(f: np.ndarray, spec: RegularizerSpec) -> np.ndarray:
    """Gradient of R at f; defined for 1 < p <= 2."""
    if spec.p <= 1.0:
        raise ValueError("grad_R requires p > 1; use subgrad_R_p1 for p = 1")
    bank = get_bank(spec, f.shape)
    return bank.synthesize(_grad_blocks(bank.analyze(f), spec.weights))


def value_and_grad_R(f: np.ndarray, spec: RegularizerSpec):
    """R(f) and its gradient from a single analysis pass (solver hot path)."""
    bank = get_bank(spec, f.shape)
    coeffs = bank.analyze(f)
    return coeff_norm(coeffs, spec.weights), bank.synthesize(
        _grad_blocks(coeffs, spec.weights)
    )


def _subgrad_sign(c: np.ndarray, ref: np.ndarray) -> np.ndarray:
    """sign(c) where c != 0; elsewhere the reference value clipped to [-1, 1]."""
    return np.where(c != 0.0, np.sign(c), np.clip(ref, -1.0, 1.0))


def subgrad_R_p1(f_hat: np.ndarray, f_dag: np.ndarray,
                 spec: RegularizerSpec) -> np.ndarray:
    """An element of the subdifferential of R at f_hat (p = 1).

    At coefficients of f_hat that vanish the selection is tied to f_dag: the
    reference coefficient value clipped to [-1, 1], which stays inside the
    subdifferential of |.| at 0.
    """
    if spec.p != 1.0:
        raise ValueError("subgrad_R_p1 requires p = 1")
    bank = get_bank(spec, f_hat.shape)
    w = _weights_for(bank, spec.weights)
    c_hat = bank.analyze(f_hat)
    c_dag = bank.analyze(f_dag)
    out = {
        idx: w[idx] * _subgrad_sign(c_hat.blocks[idx], c_dag.blocks[idx])
        for idx in c_hat.blocks
    }
    return bank.synthesize(CoefficientSet(out, bank))


def bregman_coeff(c_hat: np.ndarray, c_dag: np.ndarray, weight: float,
                  p: float) -> float:
    """Per-subband symmetric Bregman term (used directly in tests)."""
    if p > 1.0:
        a = np.abs(c_hat)
        b = np.abs(c_dag)
        g_hat = np.where(a < _TINY, 0.0, a ** (p - 1.0)) * np.sign(c_hat)
        g_dag = np.where(b < _TINY, 0.0, b ** (p - 1.0)) * np.sign(c_dag)
    else:
        g_hat = _subgrad_sign(c_hat, c_dag)
        g_dag = _subgrad_sign(c_dag, c_hat)
    return weight * float(np.sum((g_hat - g_dag) * (c_hat - c_dag)))


def bregman_distance(f_hat: np.ndarray, f_dag: np.ndarray,
                     spec: RegularizerSpec) -> float:
    """Symmetric Bregman distance of R between two volumes.

    Expanding <grad R(f_hat) - grad R(f_dag), f_hat - f_dag> through the
    adjoint turns it into a per-coefficient sum, evaluated here without any
    synthesis round trip.  Nonnegative and symmetric by construction; for
    p = 1 the subgradient selection of subgrad_R_p1 is used on both sides.
    """
    bank = get_bank(spec, f_hat.shape)
    w = _weights_for(bank, spec.weights)
    c_hat = bank.analyze(f_hat)
    c_dag = bank.analyze(f_dag)
    total = 0.0
    for idx in c_hat.blocks:
        total += bregman_coeff(
            c_hat.blocks[idx], c_dag.blocks[idx], w[idx], spec.p
        )
    return max(total, 0.0)


def soft_threshold(c: np.ndarray, tau) -> np.ndarray:
    return np.sign(c) * np.maximum(np.abs(c) - tau, 0.0)


def prox_weighted_l1(coeffs: CoefficientSet, tau: float,
                     scheme: WeightScheme) -> CoefficientSet:
    """Per-coefficient soft thresholding with threshold tau * w(lambda)."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    w = _weights_for(coeffs.bank, scheme)
    out = {
        idx: soft_threshold(block, tau * w[idx])
        for idx, block in coeffs.blocks.items()
    }
    return CoefficientSet(out, coeffs.bank)
