"""Batch command line front-end.

Subcommands: phantom, forward, reconstruct, rates, nterm, fit, variance,
selftest.  Runs are driven by an INI-style key=value config; unknown keys are
rejected and the resolved config is written next to the outputs so any run
can be reproduced byte-for-byte from its artifacts.

Exit codes: 0 success, 1 validation/config error, 2 solver non-convergence.
"""

from __future__ import annotations

import argparse
import configparser
import math
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import formats
from .experiments import (
    ExperimentConfig,
    RECORD_COLUMNS,
    fit_monomial,
    middle_decades,
    nterm_approximation_study,
    run_rate_experiment,
)
from .frame import GridSpec, build_filter_bank, max_scales
from .phantoms import StarRegion, VideoSpec, cartoon_phantom, rasterize_video, \
    stempo_surrogate
from .regularizer import RegularizerSpec, WeightScheme, grad_R, smoothness_norm
from .solver import SolveOptions, reconstruct
from .tomo import Geometry, NoiseSpec, dynamic_adjoint, dynamic_forward, \
    noise_level, sample_angles, simulate_data
from .wavelet import build_wavelet_bank

_SCHEMA = {
    "phantom": {"kind", "n", "kappa"},
    "geometry": {"detectors"},
    "transform": {"kind", "scales", "p", "beta"},
    "solver": {"max_iters", "tol", "inner_iters", "nonneg"},
    "experiment": {
        "scenario", "n_grid", "trials", "c_alpha", "c_delta",
        "angle_mode", "base_seed", "timings", "n_angles",
    },
    "output": {"dir"},
}

_DEFAULTS = {
    "phantom": {"kind": "cartoon", "n": "64", "kappa": "16"},
    "geometry": {"detectors": "auto"},
    "transform": {"kind": "cylindrical-shearlet", "scales": "auto",
                  "p": "1.5", "beta": "auto"},
    "solver": {"max_iters": "2000", "tol": "1e-6", "inner_iters": "50",
               "nonneg": "true"},
    "experiment": {"scenario": "decreasing", "n_grid": "8 16 32 64",
                   "trials": "3", "c_alpha": "0.03", "c_delta": "0.6",
                   "angle_mode": "uniform", "base_seed": "20240717",
                   "timings": "false", "n_angles": "auto"},
    "output": {"dir": "out"},
}


class ConfigError(Exception):
    pass


def parse_config(path: str | None) -> dict[str, dict[str, str]]:
    """Read and validate a config file; unknown sections/keys are rejected."""
    merged = {s: dict(v) for s, v in _DEFAULTS.items()}
    if path is None:
        return merged
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        with open(path) as fh:
            parser.read_file(fh, source=str(path))
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"malformed config:\n{exc}") from exc
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"{path}: unknown section [{section}]")
        for key, value in parser.items(section):
            if key not in _SCHEMA[section]:
                raise ConfigError(f"{path}: unknown key {key!r} in [{section}]")
            merged[section][key] = value
    return merged


def write_resolved(cfg: dict, outdir: Path) -> None:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    for section in _SCHEMA:
        parser[section] = dict(sorted(cfg[section].items()))
    outdir.mkdir(parents=True, exist_ok=True)
    with open(outdir / "resolved.cfg", "w") as fh:
        parser.write(fh)


def _get_int(cfg, sec, key):
    try:
        return int(cfg[sec][key])
    except ValueError as exc:
        raise ConfigError(f"[{sec}] {key}: expected integer") from exc


def _get_float(cfg, sec, key):
    try:
        return float(cfg[sec][key])
    except ValueError as exc:
        raise ConfigError(f"[{sec}] {key}: expected number") from exc


def _get_bool(cfg, sec, key):
    v = cfg[sec][key].strip().lower()
    if v in ("true", "1", "yes"):
        return True
    if v in ("false", "0", "no"):
        return False
    raise ConfigError(f"[{sec}] {key}: expected true/false")


def _get_auto(cfg, sec, key, conv):
    v = cfg[sec][key].strip()
    return None if v == "auto" else conv(v)


def experiment_config(cfg: dict, args) -> ExperimentConfig:
    n_grid = tuple(int(v) for v in cfg["experiment"]["n_grid"].split())
    base_seed = args.seed if args.seed is not None else _get_int(
        cfg, "experiment", "base_seed")
    try:
        return ExperimentConfig(
            phantom=cfg["phantom"]["kind"],
            n=_get_int(cfg, "phantom", "n"),
            kappa=_get_int(cfg, "phantom", "kappa"),
            scenario=cfg["experiment"]["scenario"],
            n_grid=n_grid,
            trials=_get_int(cfg, "experiment", "trials"),
            c_alpha=_get_float(cfg, "experiment", "c_alpha"),
            c_delta=_get_float(cfg, "experiment", "c_delta"),
            p=_get_float(cfg, "transform", "p"),
            transform=cfg["transform"]["kind"],
            scales=_get_auto(cfg, "transform", "scales", int),
            beta=_get_auto(cfg, "transform", "beta", float),
            base_seed=base_seed,
            angle_mode=cfg["experiment"]["angle_mode"],
            max_iters=_get_int(cfg, "solver", "max_iters"),
            tol=_get_float(cfg, "solver", "tol"),
            inner_iters=_get_int(cfg, "solver", "inner_iters"),
            nonneg=_get_bool(cfg, "solver", "nonneg"),
            threads=args.threads,
            record_timings=_get_bool(cfg, "experiment", "timings"),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _make_phantom(cfg):
    kind = cfg["phantom"]["kind"]
    n = _get_int(cfg, "phantom", "n")
    kappa = _get_int(cfg, "phantom", "kappa")
    if kind == "cartoon":
        return cartoon_phantom(n, kappa)
    if kind == "stempo":
        return stempo_surrogate(n, kappa)
    raise ConfigError(f"[phantom] kind: unknown phantom {kind!r}")


def _geometry(cfg):
    n = _get_int(cfg, "phantom", "n")
    det = _get_auto(cfg, "geometry", "detectors", int)
    return Geometry(n) if det is None else Geometry(n, det)


def _outdir(cfg, args) -> Path:
    return Path(args.out if args.out else cfg["output"]["dir"])


def cmd_phantom(cfg, args) -> int:
    lo, hi = _make_phantom(cfg)
    out = _outdir(cfg, args)
    out.mkdir(parents=True, exist_ok=True)
    formats.save_volume(out / "truth.vol", lo)
    formats.save_volume(out / "truth_highres.vol", hi)
    write_resolved(cfg, out)
    print(f"wrote {out / 'truth.vol'} ({lo.shape[0]}x{lo.shape[1]}x{lo.shape[2]})")
    return 0


def _forward_n_angles(cfg):
    n_ang = _get_auto(cfg, "experiment", "n_angles", int)
    if n_ang is None:
        n_ang = int(cfg["experiment"]["n_grid"].split()[0])
    return n_ang


def cmd_forward(cfg, args) -> int:
    lo, hi = _make_phantom(cfg)
    geometry = _geometry(cfg)
    kappa = _get_int(cfg, "phantom", "kappa")
    n_ang = _forward_n_angles(cfg)
    seed = args.seed if args.seed is not None else _get_int(
        cfg, "experiment", "base_seed")
    pattern = sample_angles(n_ang, kappa, (0.0, 2.0 * math.pi), seed,
                            cfg["experiment"]["angle_mode"])
    from .experiments import dense_reference_magnitude

    ref = dense_reference_magnitude(lo, geometry)
    noise = NoiseSpec(cfg["experiment"]["scenario"],
                      _get_float(cfg, "experiment", "c_delta"),
                      min(n_ang, int(cfg["experiment"]["n_grid"].split()[0])),
                      ref)
    delta = noise_level(noise, n_ang)
    sino = simulate_data(hi, pattern, delta, seed + 1, geometry)
    out = _outdir(cfg, args)
    out.mkdir(parents=True, exist_ok=True)
    formats.save_volume(out / "truth.vol", lo)
    formats.save_sinogram(out / "data.sino", sino)
    write_resolved(cfg, out)
    print(f"wrote {out / 'data.sino'} (N={n_ang}, delta={delta:.6g})")
    return 0


def _regularizer_spec(cfg, alpha):
    return RegularizerSpec(
        cfg["transform"]["kind"],
        WeightScheme(_get_float(cfg, "transform", "p"),
                     _get_auto(cfg, "transform", "beta", float)),
        alpha,
        _get_auto(cfg, "transform", "scales", int),
    )


def cmd_reconstruct(cfg, args) -> int:
    out = _outdir(cfg, args)
    data_path = Path(args.data) if args.data else out / "data.sino"
    sino = formats.load_sinogram(data_path)
    geometry = _geometry(cfg)
    n_ang = sino.pattern.n_angles
    alpha = None
    from .experiments import alpha_schedule

    alpha = alpha_schedule(cfg["experiment"]["scenario"], n_ang,
                           _get_float(cfg, "experiment", "c_alpha"))
    spec = _regularizer_spec(cfg, alpha)
    opts = SolveOptions(
        max_iters=_get_int(cfg, "solver", "max_iters"),
        tol=_get_float(cfg, "solver", "tol"),
        inner_iters=_get_int(cfg, "solver", "inner_iters"),
        nonneg=_get_bool(cfg, "solver", "nonneg"),
        trace=True,
    )
    f_hat, report = reconstruct(sino, sino.pattern, spec, opts, geometry)
    out.mkdir(parents=True, exist_ok=True)
    formats.save_volume(out / "recon.vol", f_hat)
    formats.write_csv(
        out / "report.csv",
        ("iterations", "objective", "residual", "reg_value", "converged"),
        [[report.iterations, repr(report.objective), repr(report.residual),
          repr(report.reg_value), int(report.converged)]],
    )
    report.write_trace_csv(out / "solver_trace.csv")
    write_resolved(cfg, out)
    print(f"solved in {report.iterations} iterations, "
          f"objective {report.objective:.6g}, converged={report.converged}")
    return 0 if report.converged else 2


def cmd_rates(cfg, args) -> int:
    config = experiment_config(cfg, args)
    result = run_rate_experiment(config)
    out = _outdir(cfg, args)
    formats.write_csv(
        out / "records.csv", RECORD_COLUMNS,
        [r.csv_row(config.record_timings) for r in result.records],
    )
    formats.write_csv(
        out / "summary.csv",
        ("scenario", "transform", "p", "N", "mean_bregman", "std_bregman",
         "n_used", "n_failed"),
        [[config.scenario, config.transform, repr(config.p), a.n_angles,
          repr(a.mean_bregman), repr(a.std_bregman), a.n_used, a.n_failed]
         for a in result.aggregates],
    )
    c, b = result.fit
    formats.write_csv(
        out / "fit.csv",
        ("scenario", "transform", "p", "c", "b", "num_points"),
        [[config.scenario, config.transform, repr(config.p), repr(c), repr(b),
          sum(1 for a in result.aggregates if a.n_used > 0)]],
    )
    write_resolved(cfg, out)
    print(f"fitted decay: {c:.6g} * N^({b:.4f}) over {len(result.aggregates)} "
          f"values of N")
    failed = sum(a.n_failed for a in result.aggregates)
    if failed:
        print(f"warning: {failed} non-converged solves excluded", file=sys.stderr)
        return 2
    return 0


def _nterm_phantom(n: int) -> np.ndarray:
    star = StarRegion((0.27, 0.0, 0.05, 0.0, 0.02), (0.03,),
                      curvature_bound=2.0, radius_cap=0.5, center=(0.5, 0.5))
    spec = VideoSpec(star)
    return rasterize_video(spec, GridSpec(n, n, n))


def cmd_nterm(cfg, args) -> int:
    n = _get_int(cfg, "phantom", "n")
    f = _nterm_phantom(n)
    curves = nterm_approximation_study(f)
    out = _outdir(cfg, args)
    rows = []
    for name, (terms, errors) in sorted(curves.items()):
        for m, e in zip(terms, errors):
            rows.append([name, int(m), repr(float(e))])
    formats.write_csv(out / "nterm.csv", ("transform", "n_terms", "sq_error"), rows)
    lo_w, hi_w = middle_decades(n ** 3)
    for name, (terms, errors) in sorted(curves.items()):
        sel = (terms >= lo_w) & (terms <= hi_w) & (errors > 0)
        if sel.sum() >= 2:
            _, b = fit_monomial(list(zip(terms[sel], errors[sel])))
            print(f"{name}: middle-decade slope {b:.3f}")
    write_resolved(cfg, out)
    return 0


def cmd_variance(cfg, args) -> int:
    config = replace(experiment_config(cfg, args), keep_volumes=True)
    result = run_rate_experiment(config)
    groups = {}
    for (n_ang, trial), vol in result.volumes.items():
        groups.setdefault(n_ang, []).append(vol)
    from .experiments import variance_study

    variances = variance_study(groups)
    out = _outdir(cfg, args)
    out.mkdir(parents=True, exist_ok=True)
    for n_ang, var in sorted(variances.items()):
        formats.save_volume(out / f"variance_N{n_ang:04d}.vol", var)
    write_resolved(cfg, out)
    print(f"wrote {len(variances)} variance volumes to {out}")
    return 0


def cmd_fit(cfg, args) -> int:
    import csv as _csv

    with open(args.csv) as fh:
        reader = _csv.reader(fh)
        header = next(reader)
        rows = [row for row in reader if row]
    cols = {name: i for i, name in enumerate(header)}
    xcol = cols.get(args.xcol, 0 if args.xcol == "N" else None)
    ycol = cols.get(args.ycol, 1 if args.ycol == "value" else None)
    if xcol is None or ycol is None:
        print(f"error: columns {args.xcol!r}/{args.ycol!r} not in CSV",
              file=sys.stderr)
        return 1
    pts = [(float(r[xcol]), float(r[ycol])) for r in rows]
    try:
        c, b = fit_monomial(pts)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"c = {c!r}")
    print(f"b = {b!r}")
    return 0


def cmd_selftest(cfg, args) -> int:
    """Quick invariant suite: frame, adjoints, gradients, wavelets."""
    rng = np.random.default_rng(7)
    checks = []

    grid = GridSpec(32, 32, 16)
    bank = build_filter_bank(grid, 2)
    total = np.zeros(grid.shape)
    for h in bank.filters.values():
        total += h * h
    checks.append(("filter partition", float(np.abs(total - 1.0).max()), 1e-12))

    f = rng.standard_normal(grid.shape)
    coeffs = bank.analyze(f)
    en = coeffs.energy()
    checks.append(("tight frame energy",
                   abs(en - float(np.vdot(f, f).real)) / float(np.vdot(f, f).real),
                   1e-10))
    back = bank.synthesize(coeffs)
    checks.append(("frame round trip",
                   float(np.linalg.norm((back - f).ravel())
                         / np.linalg.norm(f.ravel())), 1e-10))

    wbank = build_wavelet_bank(grid, 2)
    wc = wbank.analyze(f)
    checks.append(("wavelet orthogonality",
                   abs(wc.energy() - float(np.vdot(f, f).real))
                   / float(np.vdot(f, f).real), 1e-10))

    pattern = sample_angles(12, 4, seed=3)
    geometry = Geometry(24)
    x = rng.standard_normal((24, 24, 4))
    y = rng.standard_normal((4, 12, geometry.n_detectors))
    lhs = float(np.vdot(dynamic_forward(x, pattern, geometry).blocks, y).real)
    rhs = float(np.vdot(x, dynamic_adjoint(y, pattern, geometry)).real)
    checks.append(("radon adjoint", abs(lhs - rhs) / max(abs(lhs), 1e-30), 1e-12))

    spec = RegularizerSpec("cylindrical-shearlet", WeightScheme(1.5), 1.0,
                           scales=1)
    g = rng.standard_normal((16, 16, 8))
    h = rng.standard_normal((16, 16, 8))
    eps = 1e-5
    fd = (smoothness_norm(g + eps * h, spec)
          - smoothness_norm(g - eps * h, spec)) / (2 * eps)
    an = float(np.vdot(grad_R(g, spec), h).real)
    checks.append(("gradient check", abs(fd - an) / max(abs(fd), 1e-30), 1e-5))

    failed = 0
    for name, value, tol in checks:
        ok = value <= tol
        failed += 0 if ok else 1
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {value:.3e} (tol {tol:g})")
    return 0 if failed == 0 else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="cylshear",
        description="Cylindrical shearlet regularized dynamic tomography",
    )
    parser.add_argument("command", choices=[
        "phantom", "forward", "reconstruct", "rates", "nterm", "fit",
        "variance", "selftest",
    ])
    parser.add_argument("--config", default=None, help="key=value config file")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the base seed")
    parser.add_argument("--threads", type=int, default=None,
                        help="worker threads (default: CYLSH_THREADS or 1)")
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--data", default=None,
                        help="sinogram path for `reconstruct`")
    parser.add_argument("--csv", default=None, help="input CSV for `fit`")
    parser.add_argument("--xcol", default="N", help="x column name for `fit`")
    parser.add_argument("--ycol", default="value",
                        help="y column name for `fit`")
    args = parser.parse_args(argv)

    if args.threads is None:
        env = os.environ.get("CYLSH_THREADS")
        args.threads = int(env) if env else (os.cpu_count() or 1)

    handlers = {
        "phantom": cmd_phantom,
        "forward": cmd_forward,
        "reconstruct": cmd_reconstruct,
        "rates": cmd_rates,
        "nterm": cmd_nterm,
        "variance": cmd_variance,
        "selftest": cmd_selftest,
    }
    try:
        if args.command == "fit":
            if args.csv is None:
                print("error: `fit` requires --csv", file=sys.stderr)
                return 1
            return cmd_fit(None, args)
        cfg = parse_config(args.config)
        return handlers[args.command](cfg, args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
