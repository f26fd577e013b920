"""Command-line entry point: ``hsifusion <command> [options]``.

Exit codes: 0 success, 2 configuration/usage error, 3 I/O or file-format
error, 4 solver failure (non-finite iterate or inner solver breakdown).
"""

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import io, metrics, patches, report
from .config import RunConfig
from .degradation import (
    DegradationModel, parse_kernel, realized_snr, simulate_observations, spatial_degrade, spectral_apply,
)
from .errors import DimensionError, FormatError, ParameterError, SolverError
from .solver import PRESETS, solve, write_log_csv, read_log_csv
from .subspace import estimate_basis, reconstruct
from .synthetic import block_srf, synthetic_scene

EXIT_CONFIG, EXIT_IO, EXIT_SOLVER = 2, 3, 4

log = logging.getLogger("hsifusion")


class UsageError(Exception):
    pass


def _snr(value):
    if value.strip().lower() in ("none", "inf", "off"):
        return None
    try:
        return float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"SNR must be a number or 'none', got {value!r}") from None


def _alpha(value):
    try:
        vals = tuple(float(v) for v in value.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"alpha must be three comma-separated numbers, got {value!r}") from None
    if len(vals) != 3:
        raise argparse.ArgumentTypeError(f"alpha must be three comma-separated numbers, got {value!r}")
    return vals


def _model(kernel, factor, srf_path):
    return DegradationModel(parse_kernel(kernel), factor, io.read_srf(srf_path))


def cmd_simulate(args):
    z = io.read_hst(args.input)
    model = _model(args.kernel, args.factor, args.srf)
    x, y = simulate_observations(z, model, args.snr_hsi, args.snr_msi, seed=args.seed)
    io.write_hst(args.out_lr, x)
    io.write_hst(args.out_msi, y)
    snr_x = realized_snr(spatial_degrade(z, model), x)
    snr_y = realized_snr(spectral_apply(z, model.srf), y)
    print(f"LR-HSI {x.shape[0]}x{x.shape[1]}x{x.shape[2]} realized SNR {snr_x:.3f} dB")
    print(f"HR-MSI {y.shape[0]}x{y.shape[1]}x{y.shape[2]} realized SNR {snr_y:.3f} dB")


FUSE_FLAGS = {
    "hsi": "hsi", "msi": "msi", "srf": "srf", "out": "out", "log": "log", "ref": "ref",
    "figures": "figures", "groups_csv": "groups_csv", "kernel": "kernel", "factor": "factor",
    "L": "n_atoms", "N": "n_groups", "patch": "sqrt_q", "alpha": "alpha", "mu": "mu", "eps": "eps",
    "tol": "tol", "iters": "max_iters", "seed": "seed", "sylvester": "sylvester",
}


def _run_config(args):
    cfg = RunConfig.from_json(args.config) if args.config else RunConfig()
    if args.preset:
        cfg.alpha, cfg.mu = PRESETS[args.preset]
    for flag, key in FUSE_FLAGS.items():
        value = getattr(args, flag)
        if value is not None:
            setattr(cfg, key, value)
    missing = cfg.missing()
    if missing:
        raise UsageError("the following arguments are required: " + ", ".join(f"--{m}" for m in missing))
    return cfg


def cmd_fuse(args):
    cfg = _run_config(args)
    solver_cfg = cfg.validate()
    x = io.read_hst(cfg.hsi)
    y = io.read_hst(cfg.msi)
    for name, arr in (("--hsi", x), ("--msi", y)):
        if not np.all(np.isfinite(arr)):
            raise ParameterError(f"{name} contains non-finite values")
    model = _model(cfg.kernel, cfg.factor, cfg.srf)
    ref = io.read_hst(cfg.ref) if cfg.ref else None
    basis = estimate_basis(x, solver_cfg.n_atoms)
    part = patches.learn_partition(y, solver_cfg.n_groups, solver_cfg.sqrt_q, seed=solver_cfg.seed)
    trace = []

    def track(state):
        trace.append(metrics.psnr(ref, reconstruct(state.C, basis))[0])

    res = solve(x, y, model, solver_cfg, basis=basis, partition=part,
                callback=track if ref is not None else None)

    io.write_hst(cfg.out, res.z)
    if cfg.log:
        write_log_csv(cfg.log, res.log)
    if cfg.groups_csv:
        patches.write_group_sizes(cfg.groups_csv, res.partition)
    if cfg.figures:
        os.makedirs(cfg.figures, exist_ok=True)
        report.plot_convergence(res.log, os.path.join(cfg.figures, "convergence.png"), trace or None)
    k = res.kkt
    status = "converged" if res.converged else "max_iters reached"
    print(f"iterations {len(res.log)} ({status}), final rel_change {res.log[-1].rel_change:.3e}")
    print("KKT residuals: "
          + " ".join(f"r_g{t + 1}={v:.3e}" for t, v in enumerate(k.r_g)) + " "
          + " ".join(f"r_h{t + 1}={v:.3e}" for t, v in enumerate(k.r_h))
          + f" r_stat={k.r_stat:.3e} "
          + " ".join(f"r_mult{t + 1}={v:.3e}" for t, v in enumerate(k.r_mult)))
    if trace:
        print(f"final PSNR vs reference {trace[-1]:.3f} dB")


def cmd_metrics(args):
    ref = io.read_hst(args.ref)
    test = io.read_hst(args.test)
    rep = metrics.evaluate(ref, test, args.factor)
    if args.out:
        io.write_metrics_csv(args.out, rep)
    if args.figures:
        os.makedirs(args.figures, exist_ok=True)
        report.plot_band_curves(rep, os.path.join(args.figures, "band_curves.png"))
    print(rep.summary())


def cmd_errormap(args):
    ref = io.read_hst(args.ref)
    test = io.read_hst(args.test)
    if ref.shape != test.shape:
        raise DimensionError(f"reference {ref.shape} and test {test.shape} differ in shape")
    if not 0 <= args.band < ref.shape[2]:
        raise UsageError(f"--band {args.band} out of range [0, {ref.shape[2] - 1}]")
    if not args.vmax > 0:
        raise UsageError("--vmax must be positive")
    img = io.error_map(ref[:, :, args.band], test[:, :, args.band], args.vmax)
    io.write_pgm(args.out, img, comment=f"abs error band {args.band} scaled linearly [0, {args.vmax!r}] -> [0, 255]")
    if args.png:
        err = np.abs(ref[:, :, args.band] - test[:, :, args.band])
        report.plot_error_map(err, args.png, vmax=args.vmax, title=f"band {args.band}")
    print(f"max abs error {float(np.abs(ref[:, :, args.band] - test[:, :, args.band]).max()):.6g}; "
          f"{int((img == 255).sum())} pixel(s) saturated at {args.vmax!r}")


def cmd_plot_log(args):
    rows = read_log_csv(args.log)
    report.plot_convergence(rows, args.out)


def cmd_convert(args):
    io.raw_to_hst(args.input, tuple(args.dims), args.out, order=args.order)


def cmd_synth(args):
    z, basis, _ = synthetic_scene(args.size, args.size, args.bands, args.atoms, seed=args.seed)
    io.write_hst(args.out, z)
    if args.srf:
        io.write_srf(args.srf, block_srf(args.msi_bands, args.bands))
    print(f"wrote {args.size}x{args.size}x{args.bands} scene of rank {args.atoms}")


def build_parser():
    p = argparse.ArgumentParser(prog="hsifusion", description="Hyperspectral/multispectral image fusion")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="degrade a reference HSI into LR-HSI and HR-MSI observations")
    s.add_argument("--input", required=True)
    s.add_argument("--kernel", default="gaussian:7:2")
    s.add_argument("--factor", type=int, default=4)
    s.add_argument("--srf", required=True)
    s.add_argument("--snr-hsi", type=_snr, default=20.0)
    s.add_argument("--snr-msi", type=_snr, default=25.0)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out-lr", required=True)
    s.add_argument("--out-msi", required=True)
    s.set_defaults(func=cmd_simulate)

    f = sub.add_parser("fuse", help="estimate the HR-HSI from LR-HSI and HR-MSI")
    f.add_argument("--config", help="JSON file with RunConfig keys; flags override it")
    f.add_argument("--preset", choices=sorted(PRESETS), help="per-dataset alpha and mu settings")
    f.add_argument("--hsi")
    f.add_argument("--msi")
    f.add_argument("--srf")
    f.add_argument("--out")
    f.add_argument("--log", help="convergence CSV")
    f.add_argument("--ref", help="ground truth; adds a PSNR trace to the figures")
    f.add_argument("--figures", help="directory for convergence figures")
    f.add_argument("--groups-csv", dest="groups_csv", help="dump group sizes (group_id,K_n)")
    f.add_argument("--kernel")
    f.add_argument("--factor", type=int)
    f.add_argument("--L", type=int)
    f.add_argument("--N", type=int)
    f.add_argument("--patch", type=int)
    f.add_argument("--alpha", type=_alpha)
    f.add_argument("--mu", type=float)
    f.add_argument("--eps", type=float)
    f.add_argument("--tol", type=float)
    f.add_argument("--iters", type=int)
    f.add_argument("--seed", type=int)
    f.add_argument("--sylvester", choices=("cg", "dense"))
    f.set_defaults(func=cmd_fuse)

    m = sub.add_parser("metrics", help="PSNR, SSIM, ERGAS, SAM and UIQI of a result")
    m.add_argument("--ref", required=True)
    m.add_argument("--test", required=True)
    m.add_argument("--factor", type=float, default=4)
    m.add_argument("--out")
    m.add_argument("--figures", help="directory for per-band curves")
    m.set_defaults(func=cmd_metrics)

    e = sub.add_parser("errormap", help="absolute error of one band as an 8-bit PGM")
    e.add_argument("--ref", required=True)
    e.add_argument("--test", required=True)
    e.add_argument("--band", type=int, required=True, help="0-based band index")
    e.add_argument("--out", required=True)
    e.add_argument("--vmax", type=float, default=0.1)
    e.add_argument("--png", help="also render a colour-mapped PNG")
    e.set_defaults(func=cmd_errormap)

    pl = sub.add_parser("plot-log", help="render a convergence CSV")
    pl.add_argument("--log", required=True)
    pl.add_argument("--out", required=True)
    pl.set_defaults(func=cmd_plot_log)

    c = sub.add_parser("convert", help="headerless float64 raw file to HST1")
    c.add_argument("--input", required=True)
    c.add_argument("--dims", type=int, nargs=3, required=True, metavar=("I1", "I2", "I3"))
    c.add_argument("--order", choices=("F", "C"), default="F", help="F: first index fastest")
    c.add_argument("--out", required=True)
    c.set_defaults(func=cmd_convert)

    y = sub.add_parser("synth", help="write a synthetic low-rank piecewise-constant scene")
    y.add_argument("--out", required=True)
    y.add_argument("--srf", help="also write a block SRF CSV")
    y.add_argument("--size", type=int, default=64)
    y.add_argument("--bands", type=int, default=16)
    y.add_argument("--atoms", type=int, default=4)
    y.add_argument("--msi-bands", type=int, default=4)
    y.add_argument("--seed", type=int, default=0)
    y.set_defaults(func=cmd_synth)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except UsageError as exc:
        parser.error(str(exc))
    except (FormatError, OSError) as exc:
        print(f"hsifusion: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except SolverError as exc:
        print(f"hsifusion: solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (ParameterError, DimensionError, NotImplementedError, json.JSONDecodeError, KeyError) as exc:
        print(f"hsifusion: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return 0


if __name__ == "__main__":
    sys.exit(main())
