"""Command-line entry point: ``popcompress <subcommand> [flags]``.

Settings resolve in three layers: dataclass defaults, then a JSON ``--config``
document whose keys are field names, then explicit flags.

Exit codes: 0 success, 1 parameter error, 2 I/O error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import math
import os
import sys

import numpy as np

from . import bounds as B
from . import harness, io
from ._backend import BACKEND
from .compressors import codebook_diameter, diameter_reg_quantize, rate_estimate
from .errors import NumericalError, ParameterError
from .linreg import load_weights

EXIT_OK, EXIT_PARAM, EXIT_IO, EXIT_NUMERIC = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage, which would collide with the I/O code
    def error(self, message):
        raise ParameterError(f"{self.prog}: {message}")


def _int_list(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _float_list(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _global_flags():
    p = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    p.add_argument("--config", help="JSON file of field overrides")
    p.add_argument("--out", help="output path (CSV, or JSON for quantize)")
    p.add_argument("--svg", help="directory for SVG plots")
    p.add_argument("--seed", dest="base_seed", type=int, help="base seed")
    p.add_argument("--trials", type=int, help="Monte-Carlo trials per grid point")
    p.add_argument("--threads", type=int,
                   help=f"worker threads, 0 = auto (${harness.THREADS_ENV} or CPU count)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _sweep_flags(p):
    p.add_argument("--d", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--noise-var", type=float)
    p.add_argument("--sigma-x-diag", type=_float_list,
                   help="one value (isotropic) or d comma-separated values")
    p.add_argument("--max-iters", type=int)
    p.add_argument("--restarts", type=int)
    p.add_argument("--rate-mode", choices=["entropy", "log_k"])
    p.add_argument("--c-wstar-policy", choices=["max", "mean"])


def build_parser():
    g = _global_flags()
    parser = _Parser(prog="popcompress", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    kw = dict(parents=[g], argument_default=argparse.SUPPRESS)

    p = sub.add_parser("linreg", help="sweep K (or D for the oracle) on linear regression", **kw)
    _sweep_flags(p)
    p.add_argument("--method", choices=list(harness.METHODS))
    p.add_argument("--grid", type=_float_list, help="K values, or D values for the oracle")
    p.add_argument("--beta", type=float)

    p = sub.add_parser("beta-sweep", help="sweep the diameter penalty at fixed K", **kw)
    _sweep_flags(p)
    p.add_argument("--k", type=int)
    p.add_argument("--beta-grid", type=_float_list)

    p = sub.add_parser("nn-demo", help="quantize small MLPs on the two-crescent task", **kw)
    p.add_argument("--seeds", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--layers", type=_int_list)
    p.add_argument("--k-grid", type=_int_list)
    p.add_argument("--beta", dest="beta_grid", type=_float_list, help="one or more beta values")
    p.add_argument("--n-train", type=int)
    p.add_argument("--n-test", type=int)
    p.add_argument("--data", help="CSV of feature...,label rows")
    p.add_argument("--max-iters", type=int)

    p = sub.add_parser("bounds", help="tabulate the bounds over a rate or distortion grid", **kw)
    p.add_argument("--d", type=int, default=50)
    p.add_argument("--n", type=int, default=80)
    p.add_argument("--noise-var", type=float, default=1.0)
    p.add_argument("--c-wstar", type=float, default=0.0)
    p.add_argument("--sigma-x-norm", type=float, default=1.0)
    p.add_argument("--axis", choices=["rate", "distortion"], default="rate")
    p.add_argument("--grid-min", type=float)
    p.add_argument("--grid-max", type=float)
    p.add_argument("--grid-steps", type=int, default=11)

    p = sub.add_parser("quantize", help="cluster a weight vector read from a file", **kw)
    p.add_argument("--weights", required=True)
    p.add_argument("--hessian")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--beta", type=float, default=0.0)
    p.add_argument("--iters", type=int, default=100)
    p.add_argument("--restarts", type=int, default=1)
    return parser


def _load_config(path):
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParameterError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(data, dict):
        raise ParameterError(f"{path}: config must be a JSON object")
    return data


_NOT_FIELDS = {"command", "config", "out", "svg", "verbose"}


def _resolve(cls, args, renames=None):
    """Defaults < config file < flags."""
    names = {f.name for f in dataclasses.fields(cls)}
    values = {}
    sources = []
    if getattr(args, "config", None):
        sources.append(_load_config(args.config))
    sources.append({k: v for k, v in vars(args).items() if k not in _NOT_FIELDS})
    for src in sources:
        for key, value in src.items():
            key = (renames or {}).get(key, key).replace("-", "_")
            if key not in names:
                raise ParameterError(f"unknown setting {key!r} for {cls.__name__}")
            values[key] = value
    sigma = values.get("sigma_x_diag")
    if isinstance(sigma, list) and len(sigma) == 1:
        values["sigma_x_diag"] = sigma[0]
    return cls(**values)


def _print_table(rows, cols, stream=None):
    stream = stream or sys.stdout
    cells = [[c for c in cols]] + [[io._fmt(getattr(r, c) if not isinstance(r, dict) else r[c])
                                    for c in cols] for r in rows]
    widths = [max(len(row[i]) for row in cells) for i in range(len(cols))]
    for row in cells:
        print("  ".join(v.rjust(w) for v, w in zip(row, widths)), file=stream)


def _emit(records, args, plots, cols):
    if getattr(args, "out", None):
        io.write_csv(records, args.out)
    if getattr(args, "svg", None):
        os.makedirs(args.svg, exist_ok=True)
        for name, spec in plots.items():
            io.render_svg(records, spec, os.path.join(args.svg, name))
    _print_table(records, cols)


def _cmd_linreg(args):
    cfg = _resolve(harness.SweepConfig, args)
    records = harness.run_linreg_sweep(cfg)
    _emit(records, args, io.LINREG_PLOTS,
          ["grid_value", "rate_nats", "rate_bits", "distortion_mean", "gen_mean", "gen_se",
           "pop_mean", "pop_uncompressed_mean", "bound_thm3", "bound_cor1"])


def _cmd_beta_sweep(args):
    cfg = _resolve(harness.SweepConfig, args)
    records = harness.run_beta_sweep(cfg)
    _emit(records, args, io.BETA_PLOTS,
          ["grid_value", "rate_nats", "distortion_mean", "distortion_se", "gen_mean", "gen_se",
           "pop_mean", "diameter_mean", "diameter_median"])


def _cmd_nn_demo(args):
    cfg = _resolve(harness.NnConfig, args, renames={"trials": "seeds"})
    records = harness.run_nn_sweep(cfg)
    betas = sorted({r.beta for r in records})
    if getattr(args, "svg", None):
        for b in betas:
            subset = [r for r in records if r.beta == b]
            name = "nn_losses.svg" if len(betas) == 1 else f"nn_losses_beta{b:g}.svg"
            spec = dict(io.NN_PLOTS["nn_losses.svg"], title=f"beta = {b:g}")
            os.makedirs(args.svg, exist_ok=True)
            io.render_svg(subset, spec, os.path.join(args.svg, name))
    if getattr(args, "out", None):
        io.write_csv(records, args.out)
    _print_table(records, ["k", "beta", "compression_ratio", "train_ce_mean", "test_ce_mean",
                           "gap_mean", "gap_se", "train_ce_orig_mean", "gap_orig_mean", "seeds"])


def _cmd_bounds(args):
    d, n, s2 = args.d, args.n, args.noise_var
    inputs = B.BoundInputs(n, d, s2, args.c_wstar, args.sigma_x_norm)
    if args.grid_steps < 1:
        raise ParameterError("--grid-steps must be >= 1")
    rows = []
    if args.axis == "rate":
        lo = getattr(args, "grid_min", 0.0)
        hi = getattr(args, "grid_max", 200.0)
        for r in np.linspace(lo, hi, args.grid_steps):
            r = float(r)
            rows.append({
                "rate_nats": r, "rate_bits": B.nats_to_bits(r),
                "mi_gen_bound": B.mi_gen_bound(inputs.sub_gaussian_var, n, r),
                "linreg_gen_bound": B.linreg_gen_bound(args.c_wstar, args.sigma_x_norm, s2, n, r),
                "dr_upper_distortion": B.dr_upper_distortion(r, d, n, s2),
                "tradeoff_bound": B.tradeoff_bound(r, inputs),
            })
    else:
        edge = d * s2 / n
        lo = getattr(args, "grid_min", edge / args.grid_steps)
        hi = getattr(args, "grid_max", edge)
        for D in np.linspace(lo, hi, args.grid_steps):
            D = float(D)
            rd = B.rd_upper_rate(D, d, n, s2)
            orc = B.oracle_rate(D, d, n, s2) if D <= edge * (1 + 1e-12) else math.nan
            rows.append({"distortion": D, "rd_upper_rate_nats": rd,
                         "rd_upper_rate_bits": B.nats_to_bits(rd),
                         "oracle_rate_nats": orc, "oracle_rate_bits": B.nats_to_bits(orc)})
    cols = list(rows[0])
    if getattr(args, "out", None):
        with open(args.out, "w") as fh:
            fh.write(",".join(cols) + "\n")
            for row in rows:
                fh.write(",".join(io._fmt(row[c]) for c in cols) + "\n")
    _print_table(rows, cols)


def _cmd_quantize(args):
    w = load_weights(args.weights)
    h = load_weights(args.hessian) if getattr(args, "hessian", None) else np.ones_like(w)
    if h.size != w.size:
        raise ParameterError(f"hessian has {h.size} entries, weights have {w.size}")
    q = diameter_reg_quantize(w, h, args.k, args.beta, max_iters=args.iters,
                              seed=getattr(args, "base_seed", 0), restarts=args.restarts)
    rate = rate_estimate(q, w.size)
    doc = {
        "centroids": q.centroids.tolist(),
        "assignments": q.assignments.tolist(),
        "rate_nats": rate,
        "rate_bits": B.nats_to_bits(rate),
        "diameter": codebook_diameter(q),
        "objective": q.final_objective,
        "penalized_objective": q.penalized_objective,
        "iterations_run": q.iterations_run,
    }
    text = json.dumps(doc, indent=2) + "\n"
    if getattr(args, "out", None):
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


COMMANDS = {
    "linreg": _cmd_linreg,
    "beta-sweep": _cmd_beta_sweep,
    "nn-demo": _cmd_nn_demo,
    "bounds": _cmd_bounds,
    "quantize": _cmd_quantize,
}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        logging.getLogger(__name__).info("kernel backend: %s", BACKEND)
        COMMANDS[args.command](args)
    except ParameterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARAM
    except (TypeError, ValueError) as exc:
        # malformed config values surface here
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARAM
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (NumericalError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
