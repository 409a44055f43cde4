"""CSV tables and SVG plots of sweep results.

The sweep CSV has one row per ``delta_t`` with the columns listed in
:data:`SWEEP_COLUMNS`; missing values (failed rows) are left empty and the
``error`` column holds the failure message.  Floats are written with 12
significant digits so files are byte-stable for a fixed seed.
"""
from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .certification import ENTROPY_THRESHOLD, EPR_THRESHOLD, SweepResult, SweepRow
from .histograms import ProjectionGrid, ProjectionHist

PathLike = Union[str, os.PathLike]

COUNT_COLUMNS = [
    "pairs_position", "pairs_momentum",
    "accidental_est_position", "accidental_est_momentum",
    "genuine_position", "genuine_momentum",
]
SWEEP_COLUMNS = [
    "delta_t_ns", "axis",
    "dxm", "dxm_unc", "dkp", "dkp_unc",
    "dxm_sub", "dxm_sub_unc", "dkp_sub", "dkp_sub_unc",
    "dxm_var", "dxm_var_unc", "dkp_var", "dkp_var_unc",
    "epr_raw", "epr_raw_unc", "epr_raw_certified",
    "epr_sub", "epr_sub_unc", "epr_sub_certified",
    "epr_var", "epr_var_unc", "epr_var_certified",
    "h_x", "h_k", "entropy_sum", "entropy_certified",
    *COUNT_COLUMNS,
    "error",
]


def fmt(x) -> str:
    """Deterministic text for one CSV cell."""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return format(x, ".12g")
    return str(x)


def _width(est, prefix):
    return {prefix: est and est.value, prefix + "_unc": est and est.uncertainty}


def _verdict(v, prefix):
    return {prefix: v and v.product, prefix + "_unc": v and v.uncertainty,
            prefix + "_certified": v and v.certified}


def row_record(row: SweepRow, axis: str = "") -> dict:
    rec = {"delta_t_ns": row.delta_t, "axis": axis, "error": row.error or ""}
    rec.update(_width(row.dxm, "dxm"))
    rec.update(_width(row.dkp, "dkp"))
    rec.update(_width(row.dxm_subtracted, "dxm_sub"))
    rec.update(_width(row.dkp_subtracted, "dkp_sub"))
    rec.update(_width(row.dxm_variance, "dxm_var"))
    rec.update(_width(row.dkp_variance, "dkp_var"))
    rec.update(_verdict(row.epr_raw, "epr_raw"))
    rec.update(_verdict(row.epr_subtracted, "epr_sub"))
    rec.update(_verdict(row.epr_variance, "epr_var"))
    e = row.entropy
    rec.update({"h_x": e and e.hx, "h_k": e and e.hk, "entropy_sum": e and e.sum,
                "entropy_certified": e and e.certified})
    for key in COUNT_COLUMNS:
        rec[key] = row.counts.get(key)
    return rec


def write_sweep_csv(rows: Sequence[SweepRow], path: PathLike, axis: str = "") -> None:
    with open(path, "w", newline="", encoding="ascii") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_COLUMNS)
        for row in rows:
            rec = row_record(row, axis)
            w.writerow([fmt(rec[c]) for c in SWEEP_COLUMNS])


def write_table_csv(path: PathLike, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="", encoding="ascii") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(x) for x in r])


def write_projection_csv(hist: Union[ProjectionHist, ProjectionGrid], path: PathLike) -> None:
    """Long-format projection: one ``u, v, value`` line per bin."""
    u, v = hist.spec.centers_u(), hist.spec.centers_v()
    vals = np.asarray(hist.values)
    uu, vv = np.meshgrid(u, v, indexing="ij")
    write_table_csv(path, ["u", "v", "value"],
                    zip(uu.ravel().tolist(), vv.ravel().tolist(), vals.ravel().tolist()))


@dataclass(frozen=True)
class PlotInfo:
    path: Path
    ylabel: str
    threshold: Optional[float] = None


@dataclass(frozen=True)
class EmitReport:
    csv: Path
    plots: dict  # name -> PlotInfo


def _series(rows, get):
    pts = [(r.delta_t, get(r)) for r in rows]
    pts = [(x, y) for x, y in pts if y is not None and math.isfinite(y)]
    return [p[0] for p in pts], [p[1] for p in pts]


def _plot(path: Path, rows, curves, ylabel, threshold=None, threshold_label=None) -> PlotInfo:
    import matplotlib
    from matplotlib.figure import Figure

    with matplotlib.rc_context({"svg.hashsalt": "pairsight", "svg.fonttype": "none"}):
        fig = Figure(figsize=(5.0, 3.6))
        ax = fig.add_subplot()
        for label, get, style in curves:
            x, y = _series(rows, get)
            if x:
                ax.plot(x, y, style, label=label)
        if threshold is not None:
            ax.axhline(threshold, color="k", ls="--", lw=1.0, label=threshold_label, gid="threshold")
        ax.set_xscale("log")
        ax.set_xlabel("coincidence window / exposure (ns)")
        ax.set_ylabel(ylabel)
        ax.legend(fontsize="small")
        fig.tight_layout()
        desc = f"threshold={threshold!r}" if threshold is not None else ""
        fig.savefig(path, format="svg", metadata={"Date": None, "Description": desc})
    return PlotInfo(path, ylabel, threshold)


def emit_results(result: Union[SweepResult, Sequence[SweepRow]], out_dir: PathLike,
                 stem: str = "sweep", axis: str = "") -> EmitReport:
    """Write ``<stem>.csv`` and, for a non-empty table, three SVG plots.

    Plots show the momentum width against ``delta_t``, the three EPR products
    with the 1/2 line, and the entropy sum with the ``ln(2 pi e)`` line.
    """
    rows = list(result.rows if isinstance(result, SweepResult) else result)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"{stem}.csv"
    write_sweep_csv(rows, csv_path, axis)
    plots = {}
    if not rows:
        return EmitReport(csv_path, plots)
    plots["dkp"] = _plot(out / f"{stem}_dkp.svg", rows, [
        ("fit, raw", lambda r: r.dkp and r.dkp.value, "o-"),
        ("fit, subtracted", lambda r: r.dkp_subtracted and r.dkp_subtracted.value, "s-"),
    ], "momentum correlation width (rad/um)")
    plots["epr"] = _plot(out / f"{stem}_epr.svg", rows, [
        ("fit, raw", lambda r: r.epr_raw and r.epr_raw.product, "o-"),
        ("fit, subtracted", lambda r: r.epr_subtracted and r.epr_subtracted.product, "s-"),
        ("formal variance", lambda r: r.epr_variance and r.epr_variance.product, "^-"),
    ], "EPR product", EPR_THRESHOLD, "1/2")
    plots["entropy"] = _plot(out / f"{stem}_entropy.svg", rows, [
        ("h(x2|x1) + h(k2|k1)", lambda r: r.entropy and r.entropy.sum, "o-"),
    ], "conditional entropy sum (nats)", ENTROPY_THRESHOLD, "ln(2 pi e)")
    return EmitReport(csv_path, plots)
