"""CSV tables and SVG plots for sweep records."""

from __future__ import annotations

import csv
import math
from dataclasses import fields, is_dataclass

from .errors import ParameterError
from .harness import CSV_COLUMNS, NN_CSV_COLUMNS, NnRecord

SIG_DIGITS = 9


def _fmt(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, int)) and not isinstance(value, float):
        return str(int(value))
    v = float(value)
    if math.isnan(v):
        return "nan"
    return f"{v:.{SIG_DIGITS}g}"


def _columns_for(records, columns):
    if columns is not None:
        return list(columns)
    if records and isinstance(records[0], NnRecord):
        return NN_CSV_COLUMNS
    return CSV_COLUMNS


def write_csv(records, path, columns=None) -> None:
    """Header plus one row per record; floats carry 9 significant digits.

    Sweep records use the fixed linear-regression column order, NN records
    their own. An empty list yields the header only.
    """
    records = list(records)
    cols = _columns_for(records, columns)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(cols)
        for r in records:
            writer.writerow([_fmt(getattr(r, c)) for c in cols])


def read_csv(path) -> list[dict]:
    """Parse a file written by :func:`write_csv`; numeric fields become floats."""
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            parsed = {}
            for key, value in row.items():
                try:
                    parsed[key] = float(value)
                except ValueError:
                    parsed[key] = value
            out.append(parsed)
    return out


def render_svg(records, plot_spec: dict, path) -> None:
    """Line plot with +-1 se error bars.

    ``plot_spec`` keys: ``series`` (list of ``(column, se_column_or_None,
    label)``), optional ``x`` (default ``grid_value``), ``title``,
    ``xlabel``, ``ylabel``, ``logx``, ``logy``.
    """
    records = list(records)
    if not records:
        raise ParameterError("render_svg needs at least one record")
    series = plot_spec.get("series")
    if not series:
        raise ParameterError("plot_spec must name at least one series")
    names = {f.name for f in fields(records[0])} if is_dataclass(records[0]) else set()
    x_col = plot_spec.get("x", "grid_value")
    for col, se_col, _ in series:
        for c in (x_col, col, se_col):
            if c is not None and c not in names:
                raise ParameterError(f"unknown column {c!r}")

    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    order = sorted(range(len(records)), key=lambda i: getattr(records[i], x_col))
    xs = [getattr(records[i], x_col) for i in order]
    with matplotlib.rc_context({"svg.hashsalt": "popcompress", "svg.fonttype": "path"}):
        fig, ax = plt.subplots(figsize=(6, 4))
        try:
            for col, se_col, label in series:
                ys = [getattr(records[i], col) for i in order]
                err = [getattr(records[i], se_col) for i in order] if se_col else None
                ax.errorbar(xs, ys, yerr=err, marker="o", ms=3, capsize=3, label=label)
            if plot_spec.get("logx"):
                ax.set_xscale("log")
            if plot_spec.get("logy"):
                ax.set_yscale("log")
            ax.set_xlabel(plot_spec.get("xlabel", x_col))
            ax.set_ylabel(plot_spec.get("ylabel", ""))
            if plot_spec.get("title"):
                ax.set_title(plot_spec["title"])
            ax.grid(alpha=0.3)
            ax.legend()
            fig.tight_layout()
            fig.savefig(path, format="svg", metadata={"Date": None})
        finally:
            plt.close(fig)


LINREG_PLOTS = {
    "gen_vs_rate.svg": {
        "x": "rate_nats", "xlabel": "rate (nats)", "ylabel": "generalization error",
        "series": [("gen_mean", "gen_se", "measured"), ("bound_thm3", None, "bound")],
    },
    "distortion_vs_rate.svg": {
        "x": "rate_nats", "xlabel": "rate (nats)", "ylabel": "distortion",
        "series": [("distortion_mean", "distortion_se", "measured")],
    },
    "pop_risk_vs_rate.svg": {
        "x": "rate_nats", "xlabel": "rate (nats)", "ylabel": "population risk",
        "series": [("pop_mean", "pop_se", "compressed"),
                   ("pop_uncompressed_mean", "pop_uncompressed_se", "uncompressed")],
    },
}

BETA_PLOTS = {
    "beta_sweep.svg": {
        "xlabel": "beta", "ylabel": "mean over trials",
        "series": [("gen_mean", "gen_se", "generalization error"),
                   ("distortion_mean", "distortion_se", "distortion"),
                   ("diameter_median", None, "median diameter")],
    },
}

NN_PLOTS = {
    "nn_losses.svg": {
        "x": "compression_ratio", "xlabel": "compression ratio", "ylabel": "cross-entropy",
        "series": [("train_ce_mean", "train_ce_se", "train (quantized)"),
                   ("test_ce_mean", "test_ce_se", "test (quantized)"),
                   ("gap_mean", "gap_se", "gap (quantized)"),
                   ("gap_orig_mean", "gap_orig_se", "gap (original)")],
    },
}
