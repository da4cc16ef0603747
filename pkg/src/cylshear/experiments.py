"""Convergence-rate studies over randomly sampled projection angles.

A rate experiment sweeps the number of angles N, reconstructs several noisy
realizations per N, measures the Bregman distance to the rasterized truth and
fits a monomial c * N^b to the per-N means.  Also provides the nonlinear
N-term approximation study and the pixelwise variance study.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from skimage.metrics import structural_similarity

from .frame import GridSpec, build_filter_bank, max_scales
from .phantoms import cartoon_phantom, stempo_surrogate
from .regularizer import RegularizerSpec, WeightScheme, bregman_distance
from .solver import SolveOptions, reconstruct
from .tomo import (
    Geometry,
    NoiseSpec,
    noise_level,
    radon_forward,
    sample_angles,
    simulate_data,
)
from .wavelet import build_wavelet_bank

__all__ = [
    "ExperimentConfig",
    "RateRecord",
    "AggregateRow",
    "ExperimentResult",
    "alpha_schedule",
    "dense_reference_magnitude",
    "run_rate_experiment",
    "fit_monomial",
    "middle_decades",
    "nterm_approximation_study",
    "variance_study",
    "RECORD_COLUMNS",
]

RECORD_COLUMNS = (
    "scenario", "transform", "p", "N", "trial", "delta", "alpha",
    "bregman", "rel_l2", "ssim", "iters", "seconds",
)


def alpha_schedule(scenario: str, n_angles: int, c_alpha: float) -> float:
    """Regularization strength: c/N (decreasing noise) or c*N^(-1/3) (fixed)."""
    if n_angles < 1:
        raise ValueError("N must be >= 1")
    if scenario == "decreasing":
        return c_alpha / n_angles
    if scenario == "fixed":
        return c_alpha * n_angles ** (-1.0 / 3.0)
    raise ValueError(f"unknown scenario {scenario!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    phantom: str = "cartoon"            # cartoon | stempo
    n: int = 64
    kappa: int = 16
    scenario: str = "decreasing"
    n_grid: tuple[int, ...] = (8, 16, 32, 64)
    trials: int = 3
    c_alpha: float = 0.03
    c_delta: float = 0.6
    p: float = 1.5
    transform: str = "cylindrical-shearlet"
    scales: int | None = None
    beta: float | None = None
    base_seed: int = 20240717
    angle_mode: str = "uniform"         # uniform | alternating
    max_iters: int = 2000
    tol: float = 1e-6
    inner_iters: int = 50
    nonneg: bool = True
    threads: int = 1
    record_timings: bool = False        # wall time breaks byte-identical reruns
    keep_volumes: bool = False

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("need at least one trial per N")
        if any(b <= a for a, b in zip(self.n_grid, self.n_grid[1:])):
            raise ValueError("n_grid must be strictly increasing")
        if self.phantom not in ("cartoon", "stempo"):
            raise ValueError(f"unknown phantom {self.phantom!r}")


@dataclass(frozen=True)
class RateRecord:
    scenario: str
    transform: str
    p: float
    n_angles: int
    trial: int
    delta: float
    alpha: float
    bregman: float
    rel_l2: float
    ssim: float
    iterations: int
    seconds: float
    converged: bool

    def csv_row(self, with_timings: bool) -> list:
        return [
            self.scenario, self.transform, repr(float(self.p)), self.n_angles,
            self.trial, repr(float(self.delta)), repr(float(self.alpha)),
            repr(float(self.bregman)), repr(float(self.rel_l2)),
            repr(float(self.ssim)), self.iterations,
            repr(round(self.seconds, 3)) if with_timings else "0.0",
        ]


@dataclass(frozen=True)
class AggregateRow:
    n_angles: int
    mean_bregman: float
    std_bregman: float
    n_used: int
    n_failed: int


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    records: list
    aggregates: list
    fit: tuple[float, float]            # (c, b) of the monomial fit
    volumes: dict = field(default_factory=dict)
    truth: np.ndarray | None = None


def _make_phantom(config: ExperimentConfig):
    if config.phantom == "cartoon":
        return cartoon_phantom(config.n, config.kappa)
    return stempo_surrogate(config.n, config.kappa)


def dense_reference_magnitude(truth: np.ndarray,
                              geometry: Geometry | None = None) -> float:
    """max |A f| over 360 equispaced angles, all time steps."""
    geometry = geometry or Geometry(truth.shape[0])
    angles = np.linspace(0.0, 2.0 * math.pi, 360, endpoint=False)
    peak = 0.0
    for t in range(truth.shape[2]):
        block = radon_forward(truth[:, :, t], angles, geometry)
        peak = max(peak, float(np.abs(block).max()))
    return peak


def _cell_seed(base: int, tag: int, i_n: int, trial: int) -> int:
    ss = np.random.SeedSequence((base, tag, i_n, trial))
    return int(ss.generate_state(1)[0])


def _ssim3d(truth: np.ndarray, recon: np.ndarray) -> float:
    rng = float(truth.max() - truth.min())
    if rng == 0.0:
        return 1.0 if np.array_equal(truth, recon) else 0.0
    win = min(7, min(truth.shape))
    if win % 2 == 0:
        win -= 1
    return float(structural_similarity(truth, recon, data_range=rng,
                                       win_size=win))


def run_rate_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Run the full sweep; deterministic for a fixed base seed.

    Every (N, trial) cell derives its own angle and noise streams from the
    base seed, so results do not depend on worker scheduling.  Cells whose
    solver did not converge are recorded but excluded from the aggregates.
    """
    truth_lo, truth_hi = _make_phantom(config)
    geometry = Geometry(config.n)
    ref = dense_reference_magnitude(truth_lo, geometry)
    noise = NoiseSpec(config.scenario, config.c_delta, config.n_grid[0], ref)
    angle_range = (0.0, 2.0 * math.pi)
    norm_truth = float(np.linalg.norm(truth_lo.ravel()))
    spec0 = RegularizerSpec(
        config.transform, WeightScheme(config.p, config.beta), 1.0,
        config.scales,
    )
    opts = SolveOptions(
        max_iters=config.max_iters, tol=config.tol,
        inner_iters=config.inner_iters, nonneg=config.nonneg,
    )

    def run_cell(i_n: int, trial: int):
        n_ang = config.n_grid[i_n]
        pattern = sample_angles(
            n_ang, config.kappa, angle_range,
            seed=_cell_seed(config.base_seed, 1, i_n, trial),
            mode=config.angle_mode,
        )
        delta = noise_level(noise, n_ang)
        sino = simulate_data(
            truth_hi, pattern, delta,
            seed=_cell_seed(config.base_seed, 2, i_n, trial),
            geometry=geometry,
        )
        alpha = alpha_schedule(config.scenario, n_ang, config.c_alpha)
        spec = replace(spec0, alpha=alpha)
        f_hat, report = reconstruct(sino, pattern, spec, opts, geometry)
        record = RateRecord(
            scenario=config.scenario,
            transform=config.transform,
            p=config.p,
            n_angles=n_ang,
            trial=trial,
            delta=delta,
            alpha=alpha,
            bregman=bregman_distance(f_hat, truth_lo, spec),
            rel_l2=float(np.linalg.norm((f_hat - truth_lo).ravel())) / norm_truth,
            ssim=_ssim3d(truth_lo, f_hat),
            iterations=report.iterations,
            seconds=report.seconds,
            converged=report.converged,
        )
        return record, (f_hat if config.keep_volumes else None)

    cells = [(i, t) for i in range(len(config.n_grid))
             for t in range(config.trials)]
    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            outputs = list(pool.map(lambda c: run_cell(*c), cells))
    else:
        outputs = [run_cell(*c) for c in cells]

    records = [rec for rec, _ in outputs]
    records.sort(key=lambda r: (r.n_angles, r.trial))
    volumes = {}
    if config.keep_volumes:
        for (i, t), (rec, vol) in zip(cells, outputs):
            volumes[(config.n_grid[i], t)] = vol

    aggregates = []
    for n_ang in config.n_grid:
        group = [r for r in records if r.n_angles == n_ang]
        used = [r.bregman for r in group if r.converged]
        failed = len(group) - len(used)
        mean = float(np.mean(used)) if used else float("nan")
        std = float(np.std(used, ddof=1)) if len(used) > 1 else 0.0
        aggregates.append(AggregateRow(n_ang, mean, std, len(used), failed))

    pts = [(a.n_angles, a.mean_bregman) for a in aggregates
           if a.n_used > 0 and a.mean_bregman > 0]
    fit = fit_monomial(pts) if len(pts) >= 2 else (float("nan"), float("nan"))
    return ExperimentResult(config, records, aggregates, fit, volumes, truth_lo)


def fit_monomial(points) -> tuple[float, float]:
    """Least-squares fit of c * N^b in log-log coordinates."""
    pts = [(float(x), float(y)) for x, y in points]
    if len(pts) < 2:
        raise ValueError("need at least two points")
    if any(y <= 0 for _, y in pts):
        raise ValueError("values must be positive for a log-log fit")
    lx = np.log([x for x, _ in pts])
    ly = np.log([y for _, y in pts])
    b, logc = np.polyfit(lx, ly, 1)
    return float(np.exp(logc)), float(b)


def middle_decades(total: int) -> tuple[float, float]:
    """Middle two decades of [1, total] in log scale."""
    center = 0.5 * math.log10(total)
    return 10.0 ** (center - 1.0), 10.0 ** (center + 1.0)


# ---------------------------------------------------------------------------
# critically sampled coefficient view of a frequency-domain filter bank
#
# Nonlinear approximation is measured against coefficients at each subband's
# own sampling density.  Every subband is spatially subsampled by the largest
# power-of-two strides whose frequency folding is alias-free on the filter's
# support, which keeps the view an exact Parseval decomposition while
# removing the redundancy of the translation-invariant transform.
# ---------------------------------------------------------------------------

def _pow2_divisors(n: int) -> list[int]:
    out = [1]
    while n % (out[-1] * 2) == 0:
        out.append(out[-1] * 2)
    return out


def _fold(arr: np.ndarray, strides: tuple[int, int, int]) -> np.ndarray:
    d1, d2, d3 = strides
    n1, n2, n3 = arr.shape
    view = arr.reshape(d1, n1 // d1, d2, n2 // d2, d3, n3 // d3)
    return view.sum(axis=(0, 2, 4))


def _aliasfree_strides(mask: np.ndarray) -> tuple[int, int, int]:
    """Largest-volume power-of-two strides whose folding never collides."""
    shape = mask.shape
    axes_ok = []
    for axis, n in enumerate(shape):
        ok = []
        for d in _pow2_divisors(n):
            sl = [1, 1, 1]
            sl[axis] = d
            if _fold(mask.astype(np.int32), tuple(sl)).max() <= 1:
                ok.append(d)
        axes_ok.append(ok)
    best, best_vol = (1, 1, 1), 1
    combos = sorted(
        ((d1, d2, d3) for d1 in axes_ok[0] for d2 in axes_ok[1]
         for d3 in axes_ok[2]),
        key=lambda d: d[0] * d[1] * d[2], reverse=True,
    )
    m32 = mask.astype(np.int32)
    for d in combos:
        vol = d[0] * d[1] * d[2]
        if vol <= best_vol:
            break
        if _fold(m32, d).max() <= 1:
            best, best_vol = d, vol
    return best


class CriticalView:
    """Per-subband decimated coefficients of a FilterBank (exact Parseval)."""

    def __init__(self, bank):
        import scipy.fft as sfft

        self._sfft = sfft
        self.bank = bank
        self.shape = bank.grid.shape
        self.supports = {idx: h != 0.0 for idx, h in bank.filters.items()}
        self.strides = {
            idx: _aliasfree_strides(m) for idx, m in self.supports.items()
        }

    @property
    def total_coefficients(self) -> int:
        full = int(np.prod(self.shape))
        return sum(full // int(np.prod(d)) for d in self.strides.values())

    def analyze(self, f: np.ndarray):
        from .frame import CoefficientSet

        spec = self._sfft.fftn(f, norm="ortho")
        blocks = {}
        for idx, h in self.bank.filters.items():
            folded = _fold(spec * h, self.strides[idx])
            blocks[idx] = self._sfft.ifftn(folded, norm="ortho").real
        return CoefficientSet(blocks, self)

    def synthesize(self, coeffs) -> np.ndarray:
        acc = np.zeros(self.shape, dtype=complex)
        for idx, h in self.bank.filters.items():
            small = self._sfft.fftn(coeffs.blocks[idx], norm="ortho")
            big = np.tile(small, self.strides[idx])
            acc += np.where(self.supports[idx], big, 0.0) * h
        return self._sfft.ifftn(acc, norm="ortho").real


def _bank_for(name: str, grid: GridSpec, scales: int | None):
    if name == "cylindrical-shearlet":
        return build_filter_bank(grid, scales or max_scales(grid))
    if name == "wavelet3d":
        return build_wavelet_bank(grid, scales or 3)
    raise ValueError(f"unknown transform {name!r}")


def nterm_approximation_study(f: np.ndarray, transforms=None, n_terms=None,
                              scales: int | None = None,
                              sampling: str = "critical") -> dict:
    """Squared error of keeping the N largest coefficients, per transform.

    Returns {name: (n_terms, squared_errors)}.  The default term grid is
    geometric from 8 up to the transform's total coefficient count.  With
    sampling='critical' (default) the directional system is counted at its
    per-subband sampling density via CriticalView; 'undecimated' counts the
    translation-invariant coefficients instead.
    """
    if not np.any(f):
        raise ValueError("input volume is zero")
    if sampling not in ("critical", "undecimated"):
        raise ValueError(f"unknown sampling {sampling!r}")
    grid = GridSpec(*f.shape)
    if transforms is None:
        transforms = ("cylindrical-shearlet", "wavelet3d")
    out = {}
    for name in transforms:
        bank = _bank_for(name, grid, scales)
        if name == "cylindrical-shearlet" and sampling == "critical":
            bank = CriticalView(bank)
        coeffs = bank.analyze(f)
        keys = sorted(coeffs.blocks.keys())
        flat = np.concatenate([coeffs.blocks[k].ravel() for k in keys])
        total = flat.size
        order = np.argsort(np.abs(flat))[::-1]
        if n_terms is None:
            grid_n = np.unique(np.geomspace(8, total, 24).astype(int))
        else:
            grid_n = np.array([min(int(v), total) for v in n_terms])
        errors = np.empty(len(grid_n))
        for i, m in enumerate(grid_n):
            kept = np.zeros_like(flat)
            sel = order[:m]
            kept[sel] = flat[sel]
            blocks = {}
            pos = 0
            for k in keys:
                size = coeffs.blocks[k].size
                blocks[k] = kept[pos:pos + size].reshape(coeffs.blocks[k].shape)
                pos += size
            approx = bank.synthesize(type(coeffs)(blocks, bank))
            diff = f - approx
            errors[i] = float(np.vdot(diff, diff).real)
        out[name] = (grid_n, errors)
    return out


def variance_study(volumes_by_group: dict) -> dict:
    """Per-voxel sample variance (ddof=1) across each group's volumes."""
    out = {}
    for key, vols in volumes_by_group.items():
        if len(vols) < 2:
            raise ValueError(f"group {key!r} needs at least two volumes")
        out[key] = np.var(np.stack(vols), axis=0, ddof=1)
    return out
