"""Command-line entry point for reproducible runs.

Subcommands: theory, synth, estimate, fit, budget.  All outputs are CSV
or plain text; plotting is left to external tools.

Exit codes by error family:
  0  success
  2  configuration (bad config file, unknown keys, bad flag values)
  3  data input/output (missing or malformed dataset files)
  4  statistics (too few segments, singular systems, degenerate targets)
  5  model numerics (non-convergence, divergent susceptibility, domain)
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

import numpy as np

from . import estimation, fitting, synth, theory
from .config import RunConfig, default_config_text, load_config
from .errors import (
    ConfigError,
    DegenerateDenominator,
    DegenerateTarget,
    DivergentSusceptibility,
    DomainError,
    FormatError,
    GridMismatch,
    InsufficientBand,
    NonConvergence,
    SingularCrossMatrix,
    TooFewSegments,
)

EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_STATS = 4
EXIT_MODEL = 5

_ERROR_FAMILIES = (
    (EXIT_CONFIG, (ConfigError,)),
    (EXIT_IO, (FormatError, OSError)),
    (
        EXIT_STATS,
        (
            TooFewSegments,
            SingularCrossMatrix,
            DegenerateDenominator,
            GridMismatch,
            InsufficientBand,
            DegenerateTarget,
        ),
    ),
    (EXIT_MODEL, (NonConvergence, DivergentSusceptibility, DomainError)),
)


def _write_csv(path, header, columns, config_hash=None):
    with open(path, "w") as fh:
        if config_hash is not None:
            fh.write(f"# config_hash={config_hash}\n")
        fh.write(",".join(header) + "\n")
        for row in zip(*columns):
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def _system(cfg: RunConfig, vacuum_only: bool):
    system = cfg.system()
    return system.vacuum_only() if vacuum_only else system


def cmd_theory(cfg: RunConfig, args) -> int:
    out = args.out
    system = _system(cfg, args.vacuum_only)
    # simplified single-oscillator curves on their documented grid
    sp = theory.SimpleModelParams(
        omega_m=1.0, gamma_m=0.005, gamma_ba=1.0, gamma_th=0.5, r_param=0.0
    )
    w = np.linspace(0.8, 1.2, 2001)
    _write_csv(
        os.path.join(out, "simple_model.csv"),
        [
            "omega_over_omega_m",
            "displacement",
            "residual_quantum_limit",
            "min_quadrature",
            "fixed_phase_output",
        ],
        [
            w,
            theory.displacement_spectrum(sp, w),
            np.ones_like(w)
            if args.vacuum_only
            else theory.simple_residual_spectrum(sp, w),
            np.ones_like(w)
            if args.vacuum_only
            else theory.min_quadrature_spectrum(sp, w),
            np.ones_like(w)
            if args.vacuum_only
            else theory.fixed_phase_output_spectrum(sp, 0.1, w),
        ],
        config_hash=system.config_hash(),
    )
    omega = theory.default_omega_grid(system)
    model = theory.SpectrumModel(system, omega)
    s_xs = model.quadrature_spectrum("signal", model.phi_s)
    s_ym = model.quadrature_spectrum("meter", model.phi_m)
    s_xy = model.cross_spectrum()
    msc = theory.coherence(s_xs, s_ym, s_xy)
    res = theory.residual_spectrum_theory(s_xs, msc)
    _write_csv(
        os.path.join(out, "full_model.csv"),
        [
            "frequency_hz",
            "s_xs",
            "s_ym",
            "s_xy_re",
            "s_xy_im",
            "msc",
            "residual",
        ],
        [omega / (2 * np.pi), s_xs, s_ym, s_xy.real, s_xy.imag, msc, res],
        config_hash=system.config_hash(),
    )
    print(f"wrote simple_model.csv and full_model.csv to {out}")
    return 0


def cmd_budget(cfg: RunConfig, args) -> int:
    system = _system(cfg, args.vacuum_only)
    omega = theory.default_omega_grid(system)
    budget = theory.noise_budget(system, "signal", None, omega)
    header = ["frequency_hz"] + list(budget.contributions) + ["total"]
    columns = [omega / (2 * np.pi)]
    columns += [budget.contributions[k] for k in budget.contributions]
    columns += [budget.total]
    path = os.path.join(args.out, "budget_signal.csv")
    _write_csv(path, header, columns, config_hash=system.config_hash())
    print(f"wrote {path}")
    return 0


def cmd_synth(cfg: RunConfig, args) -> int:
    system = _system(cfg, args.vacuum_only)
    scfg = cfg.synth_config(seed=args.seed)
    ds = synth.synthesize(system, scfg)
    path = os.path.join(args.out, "dataset.qnd")
    synth.write_dataset(ds, path)
    print(
        f"wrote {path}: {scfg.n_segments} segments of {scfg.segment_length} "
        f"samples at {scfg.sample_rate:g} Hz, seed {scfg.seed}"
    )
    return 0


def _estimate_pipeline(cfg: RunConfig, args, ds):
    """Shared selection/transform/calibration steps; returns a dict."""
    seg = estimation.segment_and_select(
        ds,
        peak_limit=cfg.get_float("estimate", "peak_limit"),
        rms_limit=cfg.get_float("estimate", "rms_limit"),
    )
    band = (
        cfg.get_float("estimate", "band_lo_hz"),
        cfg.get_float("estimate", "band_hi_hz"),
    )
    seg = estimation.transform(seg, window=cfg.get("estimate", "window"), band=band)
    p_diff = estimation.power_spectrum(seg, "difference")
    elec_level = cfg.get_float("synth", "electronic_noise_level")
    elec = estimation.SpectrumEstimate(
        frequencies=seg.frequencies,
        values=np.full_like(seg.frequencies, elec_level),
        # the stated reproducibility of the electronic-noise reference
        stderr=np.full_like(seg.frequencies, 0.1 * elec_level),
        n_averages=seg.n_kept,
    )
    p_diff = estimation.subtract_electronic_noise(p_diff, elec)
    sql, cal_report = estimation.shot_calibration(
        p_diff, analysis_freq=cfg.get_float("estimate", "analysis_freq_hz")
    )
    return {"seg": seg, "elec": elec, "sql": sql, "cal": cal_report}


def cmd_estimate(cfg: RunConfig, args) -> int:
    ds = synth.read_dataset(args.dataset)
    stage = _estimate_pipeline(cfg, args, ds)
    seg, elec, sql = stage["seg"], stage["elec"], stage["sql"]
    channels = [c.strip() for c in args.channels.split(",") if c.strip()]
    p_sum = estimation.subtract_electronic_noise(
        estimation.power_spectrum(seg, "sum"), elec
    ).normalized_by(sql)
    if channels == ["meter"]:
        res = estimation.residual_single(seg)
    elif channels == ["meter", "meter_squared"]:
        res = estimation.residual_two_channel(seg)
    else:
        raise ConfigError(
            f"--channels must be 'meter' or 'meter,meter_squared', got {args.channels!r}"
        )
    res_n = estimation.subtract_electronic_noise(res, elec).normalized_by(sql)
    msc = estimation.msc_estimate(seg)
    width = args.band_hz or cfg.get_float("estimate", "band_average_hz")
    confidence = cfg.get_float("estimate", "confidence")
    banded = estimation.band_average(res_n, width, confidence)
    diag = estimation.split_consistency(res)
    out = args.out
    estimation.write_spectrum_csv(p_sum, os.path.join(out, "spectrum_sum.csv"))
    estimation.write_spectrum_csv(res_n, os.path.join(out, "residual.csv"))
    estimation.write_spectrum_csv(banded, os.path.join(out, "residual_banded.csv"))
    estimation.write_spectrum_csv(msc, os.path.join(out, "msc.csv"))
    _write_csv(
        os.path.join(out, "split_consistency.csv"),
        ["frequency_hz", "normalized_difference"],
        [diag.frequencies, diag.values],
    )
    f = banded.frequencies
    focus = (f > 160e3) & (f < 180e3)
    imin = np.argmin(np.where(focus, banded.values, np.inf))
    report = [
        "estimation report",
        "-----------------",
        f"segments kept: {seg.n_kept}/{len(seg.kept_mask)} "
        f"({stage['seg'].kept_fraction:.1%})",
        f"SQL reference: {sql:.6g} (stderr {stage['cal']['stderr']:.3g})",
        f"channels: {','.join(channels)}",
        f"banded residual minimum: {banded.values[imin]:.4f} "
        f"+- {banded.stderr[imin]:.4f} at {f[imin]:.0f} Hz "
        f"({width:g} Hz bands, {confidence:.0%} belt)",
        f"split consistency: mean {diag.mean:.3f} +- {diag.mean_stderr:.3f}, "
        f"sd {diag.sd:.3f}",
    ]
    with open(os.path.join(out, "report.txt"), "w") as fh:
        fh.write("\n".join(report) + "\n")
    print("\n".join(report))
    return 0


def cmd_fit(cfg: RunConfig, args) -> int:
    ds = synth.read_dataset(args.dataset)
    stage = _estimate_pipeline(cfg, args, ds)
    seg, elec, sql = stage["seg"], stage["elec"], stage["sql"]
    p_sum = estimation.subtract_electronic_noise(
        estimation.power_spectrum(seg, "sum"), elec
    ).normalized_by(sql)
    system = cfg.system()
    problem = fitting.FitProblem(
        system=system,
        frequencies=p_sum.frequencies,
        target=p_sum.values,
        stderr=p_sum.stderr,
        free_params=cfg.fit_bounds(system.cavity.kappa),
        band=(cfg.get_float("fit", "band_lo_hz"), cfg.get_float("fit", "band_hi_hz")),
        n_multistarts=cfg.get_int("fit", "n_multistarts"),
        seed=args.seed if args.seed is not None else cfg.get_int("run", "seed"),
    )
    result = fitting.fit(problem)
    text = fitting.fit_report_text(result)
    with open(os.path.join(args.out, "fit_report.txt"), "w") as fh:
        fh.write(text)
    fitted_system = fitting._apply_theta(
        system, sorted(result.params), [result.params[k] for k in sorted(result.params)]
    )
    model = theory.SpectrumModel(fitted_system, 2 * np.pi * p_sum.frequencies)
    _write_csv(
        os.path.join(args.out, "fit_curves.csv"),
        ["frequency_hz", "target", "model"],
        [
            p_sum.frequencies,
            p_sum.values,
            model.quadrature_spectrum("signal", model.phi_s),
        ],
    )
    print(text, end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qndlab",
        description="Cavity optomechanics QND measurement laboratory",
    )
    parser.add_argument("--print-defaults", action="store_true",
                        help="print the default configuration and exit")
    sub = parser.add_subparsers(dest="command")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None, help="configuration file")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--seed", type=int, default=None, help="run seed override")
    common.add_argument("--workers", type=int, default=1,
                        help="parallelism bound (outputs are worker invariant)")
    common.add_argument("--vacuum-only", action="store_true",
                        help="switch off drive and classical noises")
    sub.add_parser("theory", parents=[common])
    sub.add_parser("budget", parents=[common])
    sub.add_parser("synth", parents=[common])
    p_est = sub.add_parser("estimate", parents=[common])
    p_est.add_argument("dataset", help="dataset file to analyze")
    p_est.add_argument("--channels", default="meter",
                       help="predictor channels: meter or meter,meter_squared")
    p_est.add_argument("--band-hz", type=float, default=None,
                       help="banding width override in Hz")
    p_fit = sub.add_parser("fit", parents=[common])
    p_fit.add_argument("dataset", help="dataset file to fit")
    return parser


_COMMANDS = {
    "theory": cmd_theory,
    "budget": cmd_budget,
    "synth": cmd_synth,
    "estimate": cmd_estimate,
    "fit": cmd_fit,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.print_defaults:
        sys.stdout.write(default_config_text())
        return 0
    if args.command is None:
        parser.print_help()
        return EXIT_CONFIG
    try:
        cfg = load_config(path=args.config) if args.config else load_config(text="")
        if args.workers < 1:
            raise ConfigError("--workers must be >= 1")
        os.makedirs(args.out, exist_ok=True)
        return _COMMANDS[args.command](cfg, args)
    except Exception as exc:  # map to documented exit families
        for code, types in _ERROR_FAMILIES:
            if isinstance(exc, types):
                print(f"error: {exc}", file=sys.stderr)
                return code
        raise


if __name__ == "__main__":
    sys.exit(main())
