"""Variational reconstruction: (1/2N)||A f - g||^2 + alpha R(f) (+ f >= 0).

For p > 1 the penalty is smooth and an accelerated projected gradient method
with backtracking is used; acceleration restarts whenever the candidate would
increase the objective, so the recorded objective trace is nonincreasing.
For p = 1 each outer step is a data gradient step followed by an inexact
proximal map of alpha ||K f||_1 + indicator(f >= 0), computed by a fixed
number of warm-started dual ascent iterations.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .frame import CoefficientSet
from .regularizer import (
    RegularizerSpec,
    coeff_norm,
    get_bank,
    smoothness_norm,
    value_and_grad_R,
    _weights_for,
)
from .tomo import Geometry, SamplingPattern, Sinogram, dynamic_adjoint, \
    dynamic_forward, operator_norm

__all__ = ["SolveOptions", "SolveReport", "objective", "reconstruct"]


@dataclass(frozen=True)
class SolveOptions:
    max_iters: int = 2000
    tol: float = 1e-6           # relative objective change
    tol_window: int = 5         # consecutive small changes required
    step0: float | None = None  # default 1 / (||A||^2 / N)
    bt_shrink: float = 0.5
    bt_decrease: float = 1.0    # constant in the quadratic decrease test
    inner_iters: int = 50       # dual ascent steps for the p = 1 prox
    nonneg: bool = True
    x0: np.ndarray | None = None
    trace: bool = False

    def __post_init__(self):
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if not (0.0 < self.bt_shrink < 1.0):
            raise ValueError("bt_shrink must be in (0, 1)")


@dataclass
class SolveReport:
    iterations: int
    objective: float
    residual: float      # ||A f - g||_2
    reg_value: float     # R(f)
    converged: bool
    seconds: float
    # rows (iteration, objective, residual, reg_value, step) when tracing
    trace_rows: list = field(default_factory=list)

    @property
    def objective_trace(self) -> list:
        return [row[1] for row in self.trace_rows]

    def write_trace_csv(self, path) -> None:
        from .formats import write_csv

        write_csv(path, ("iteration", "objective", "residual", "reg_value",
                         "step"),
                  [[r[0], repr(r[1]), repr(r[2]), repr(r[3]), repr(r[4])]
                   for r in self.trace_rows])


def _data_misfit(f, g: Sinogram, pattern, geometry):
    r = dynamic_forward(f, pattern, geometry).blocks - g.blocks
    return r


def objective(f: np.ndarray, g: Sinogram, pattern: SamplingPattern,
              spec: RegularizerSpec, geometry: Geometry | None = None) -> float:
    """(1/(2N)) ||A f - g||^2 + alpha R(f), with N the angles per time step."""
    geometry = geometry or Geometry(f.shape[0])
    r = _data_misfit(f, g, pattern, geometry)
    n_ang = pattern.n_angles
    data = float(np.vdot(r, r).real) / (2.0 * n_ang)
    if spec.alpha == 0.0:
        return data
    return data + spec.alpha * smoothness_norm(f, spec)


def _project(f, nonneg):
    return np.maximum(f, 0.0) if nonneg else f


def reconstruct(g: Sinogram, pattern: SamplingPattern, spec: RegularizerSpec,
                opts: SolveOptions = SolveOptions(),
                geometry: Geometry | None = None):
    """Minimize the regularized functional; returns (volume, SolveReport).

    Non-convergence within the iteration budget is flagged on the report and
    the best iterate found is returned.
    """
    geometry = geometry or (g.geometry if g.geometry else Geometry(g.blocks.shape[2]))
    if spec.p > 1.0:
        return _solve_p_gt_1(g, pattern, spec, opts, geometry)
    return _solve_p_eq_1(g, pattern, spec, opts, geometry)


def _initial_step(pattern, geometry, opts):
    if opts.step0 is not None:
        return opts.step0
    norm = operator_norm(pattern, geometry, tol=1e-3)
    lip = norm * norm / pattern.n_angles
    return 1.0 / max(lip, 1e-30)


def _solve_p_gt_1(g, pattern, spec, opts, geometry):
    t_start = time.perf_counter()
    n_ang = pattern.n_angles
    shape = (geometry.n, geometry.n, pattern.kappa)
    x = np.zeros(shape) if opts.x0 is None else _project(opts.x0.copy(), opts.nonneg)
    bank = get_bank(spec, shape) if spec.alpha > 0 else None

    def fval_and_grad(f):
        r = _data_misfit(f, g, pattern, geometry)
        data = float(np.vdot(r, r).real) / (2.0 * n_ang)
        grad = dynamic_adjoint(r, pattern, geometry) / n_ang
        if spec.alpha == 0.0:
            return data, grad
        reg, reg_grad = value_and_grad_R(f, spec)
        return data + spec.alpha * reg, grad + spec.alpha * reg_grad

    def fparts(f):
        r = _data_misfit(f, g, pattern, geometry)
        rn2 = float(np.vdot(r, r).real)
        data = rn2 / (2.0 * n_ang)
        if spec.alpha == 0.0:
            return data, np.sqrt(rn2), 0.0
        reg = coeff_norm(bank.analyze(f), spec.weights)
        return data + spec.alpha * reg, np.sqrt(rn2), reg

    tau = _initial_step(pattern, geometry, opts)
    y = x.copy()
    t_mom = 1.0
    fx, resid_x, reg_x = fparts(x)
    trace = [(0, fx, resid_x, reg_x, tau)]
    small = 0
    converged = False
    iters = 0
    for iters in range(1, opts.max_iters + 1):
        fy, gy = fval_and_grad(y)
        # backtracking on the quadratic upper bound at y
        while True:
            cand = _project(y - tau * gy, opts.nonneg)
            d = cand - y
            bound = fy + float(np.vdot(gy, d).real) \
                + opts.bt_decrease * float(np.vdot(d, d).real) / (2.0 * tau)
            f_cand, resid_cand, reg_cand = fparts(cand)
            if f_cand <= bound + 1e-12 * max(1.0, abs(fy)):
                break
            tau *= opts.bt_shrink
            if tau < 1e-18:
                elapsed = time.perf_counter() - t_start
                return x, _make_report(x, g, pattern, spec, geometry, iters,
                                       False, elapsed, trace, opts)
        if f_cand > fx:
            # restart acceleration: plain projected gradient step from x
            t_mom = 1.0
            fy, gy = fval_and_grad(x)
            while True:
                cand = _project(x - tau * gy, opts.nonneg)
                d = cand - x
                bound = fy + float(np.vdot(gy, d).real) \
                    + opts.bt_decrease * float(np.vdot(d, d).real) / (2.0 * tau)
                f_cand, resid_cand, reg_cand = fparts(cand)
                if f_cand <= bound + 1e-12 * max(1.0, abs(fy)):
                    break
                tau *= opts.bt_shrink
                if tau < 1e-18:
                    break
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_mom * t_mom))
        x_prev_obj = fx
        if f_cand <= fx:
            y = cand + ((t_mom - 1.0) / t_next) * (cand - x)
            x, fx, resid_x, reg_x = cand, f_cand, resid_cand, reg_cand
        else:
            # numerical floor reached; keep the best iterate
            y = x.copy()
            t_next = 1.0
        t_mom = t_next
        trace.append((iters, fx, resid_x, reg_x, tau))
        rel = abs(x_prev_obj - fx) / max(abs(x_prev_obj), 1e-30)
        small = small + 1 if rel < opts.tol else 0
        if small >= opts.tol_window:
            converged = True
            break
    elapsed = time.perf_counter() - t_start
    return x, _make_report(x, g, pattern, spec, geometry, iters, converged,
                           elapsed, trace, opts)


def _analysis_prox(z, sigma, bank, scheme, dual0, inner_iters, nonneg):
    """Inexact prox of sigma ||K .||_1(w) + indicator(>= 0) at z.

    Accelerated projected ascent on the dual; the dual variable is projected
    onto the weighted l-infinity ball via the soft-threshold identity
    proj(c) = c - soft(c, sigma w).  Returns (primal, dual) for warm starts.
    """
    w = _weights_for(bank, scheme)
    caps = {idx: sigma * w[idx] for idx in w}
    if dual0 is None:
        u = bank.zero_coefficients().blocks
    else:
        u = {idx: dual0.blocks[idx].copy() for idx in dual0.blocks}
    ubar = {idx: a.copy() for idx, a in u.items()}
    t_mom = 1.0
    x = z
    for _ in range(inner_iters):
        x = _project(z - bank.synthesize(CoefficientSet(ubar, bank)), nonneg)
        c = bank.analyze(x)
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_mom * t_mom))
        beta = (t_mom - 1.0) / t_next
        new_u = {}
        for idx in u:
            step = ubar[idx] + c.blocks[idx]  # dual step size 1 = 1/||K||^2
            new_u[idx] = np.clip(step, -caps[idx], caps[idx])
            ubar[idx] = new_u[idx] + beta * (new_u[idx] - u[idx])
        u = new_u
        t_mom = t_next
    x = _project(z - bank.synthesize(CoefficientSet(u, bank)), nonneg)
    return x, CoefficientSet(u, bank)


def _solve_p_eq_1(g, pattern, spec, opts, geometry):
    t_start = time.perf_counter()
    n_ang = pattern.n_angles
    shape = (geometry.n, geometry.n, pattern.kappa)
    x = np.zeros(shape) if opts.x0 is None else _project(opts.x0.copy(), opts.nonneg)
    bank = get_bank(spec, shape) if spec.alpha > 0 else None

    def fparts(f):
        r = _data_misfit(f, g, pattern, geometry)
        rn2 = float(np.vdot(r, r).real)
        data = rn2 / (2.0 * n_ang)
        if spec.alpha == 0.0:
            return data, np.sqrt(rn2), 0.0
        reg = coeff_norm(bank.analyze(f), spec.weights)
        return data + spec.alpha * reg, np.sqrt(rn2), reg

    tau = _initial_step(pattern, geometry, opts)
    y = x.copy()
    t_mom = 1.0
    dual = None
    fx, resid_x, reg_x = fparts(x)
    trace = [(0, fx, resid_x, reg_x, tau)]
    small = 0
    converged = False
    iters = 0
    for iters in range(1, opts.max_iters + 1):
        r = _data_misfit(y, g, pattern, geometry)
        z = y - tau * dynamic_adjoint(r, pattern, geometry) / n_ang
        if spec.alpha == 0.0:
            cand = _project(z, opts.nonneg)
        else:
            cand, dual = _analysis_prox(z, tau * spec.alpha, bank, spec.weights,
                                        dual, opts.inner_iters, opts.nonneg)
        f_cand, resid_cand, reg_cand = fparts(cand)
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_mom * t_mom))
        if f_cand <= fx:
            # momentum from the accepted candidate
            y = cand + ((t_mom - 1.0) / t_next) * (cand - x)
            x_prev_obj = fx
            x, fx, resid_x, reg_x = cand, f_cand, resid_cand, reg_cand
        else:
            # keep the best iterate, restart momentum at it
            y = x.copy()
            t_next = 1.0
            x_prev_obj = fx
        t_mom = t_next
        trace.append((iters, fx, resid_x, reg_x, tau))
        rel = abs(x_prev_obj - fx) / max(abs(x_prev_obj), 1e-30)
        small = small + 1 if rel < opts.tol else 0
        if small >= opts.tol_window:
            converged = True
            break
    elapsed = time.perf_counter() - t_start
    return x, _make_report(x, g, pattern, spec, geometry, iters, converged,
                           elapsed, trace, opts)


def _make_report(x, g, pattern, spec, geometry, iters, converged, elapsed,
                 trace, opts):
    r = _data_misfit(x, g, pattern, geometry)
    residual = float(np.linalg.norm(r.ravel()))
    if spec.alpha > 0:
        bank = get_bank(spec, x.shape)
        reg = coeff_norm(bank.analyze(x), spec.weights)
    else:
        reg = 0.0
    obj = float(np.vdot(r, r).real) / (2.0 * pattern.n_angles) + spec.alpha * reg
    return SolveReport(
        iterations=iters,
        objective=obj,
        residual=residual,
        reg_value=reg,
        converged=converged,
        seconds=elapsed,
        trace_rows=trace if opts.trace else [],
    )
