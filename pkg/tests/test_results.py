import csv
import math
import xml.etree.ElementTree as ET
from pathlib import Path

import numpy as np
import pytest

from pairsight.certification import (ENTROPY_THRESHOLD, EprVerdict, SweepConfig, SweepResult,
                                     SweepRow, entropic_criterion, run_sweep)
from pairsight.core import AxisKind, tpx3cam
from pairsight.estimators import WidthEstimate, WidthMethod
from pairsight.histograms import BinSpec, ProjectionHist
from pairsight.results import (SWEEP_COLUMNS, emit_results, fmt, write_projection_csv,
                               write_sweep_csv)
from pairsight.spdc import DoubleGaussianState

GOLDEN = Path(__file__).parent / "data" / "golden_sweep.csv"
SVG = "{http://www.w3.org/2000/svg}"


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def one_row(dt=6.0):
    w = WidthEstimate(1.0, 0.1, WidthMethod.GAUSSIAN_FIT)
    v = EprVerdict(0.2, 0.01, True)
    return SweepRow(dt, w, w, w, w, w, w, v, v, v, entropic_criterion(1.0, 0.5),
                    {"pairs_position": 10, "genuine_position": 8})


def test_fmt():
    assert [fmt(None), fmt(True), fmt(np.bool_(False)), fmt(3), fmt(np.int64(4))] == ["", "1", "0", "3", "4"]
    assert fmt(0.1) == "0.1" and fmt(1 / 3) == "0.333333333333"
    assert [fmt(math.nan), fmt(math.inf), fmt(-math.inf)] == ["nan", "inf", "-inf"]


def test_empty_table_header_only(tmp_path):
    rep = emit_results([], tmp_path)
    assert read_csv(rep.csv) == [SWEEP_COLUMNS]
    assert rep.plots == {} and not list(tmp_path.glob("*.svg"))
    assert emit_results(SweepResult([]), tmp_path / "b").plots == {}


def test_single_row(tmp_path):
    rep = emit_results([one_row()], tmp_path, axis="x")
    rows = read_csv(rep.csv)
    assert len(rows) - 1 == 1
    rec = dict(zip(rows[0], rows[1]))
    assert rec["epr_raw"] == "0.2" and rec["epr_raw_certified"] == "1"
    assert rec["entropy_sum"] == "1.5" and rec["pairs_momentum"] == "" and rec["error"] == ""
    assert set(rep.plots) == {"dkp", "epr", "entropy"}


def test_failed_row_serialised(tmp_path):
    write_sweep_csv([SweepRow(100.0, error="InsufficientDataError: empty")], tmp_path / "s.csv")
    rec = dict(zip(*read_csv(tmp_path / "s.csv")))
    assert rec["delta_t_ns"] == "100" and rec["epr_raw"] == ""
    assert rec["error"] == "InsufficientDataError: empty"


def threshold_of(svg_path):
    root = ET.parse(svg_path).getroot()
    line = root.find(f".//{SVG}g[@id='threshold']")
    desc = root.find(f".//{SVG}metadata").iter()
    text = " ".join(el.text or "" for el in desc)
    return line, text


def test_plot_thresholds(tmp_path):
    rep = emit_results([one_row(6.0), one_row(100.0)], tmp_path)
    assert rep.plots["epr"].threshold == 0.5
    assert rep.plots["entropy"].threshold == ENTROPY_THRESHOLD
    assert rep.plots["dkp"].threshold is None
    line, text = threshold_of(rep.plots["epr"].path)
    assert line is not None and "threshold=0.5" in text
    line, text = threshold_of(rep.plots["entropy"].path)
    assert line is not None and f"threshold={ENTROPY_THRESHOLD!r}" in text
    line, _ = threshold_of(rep.plots["dkp"].path)
    assert line is None


def test_emit_is_byte_deterministic(tmp_path):
    rows = [one_row(6.0), one_row(100.0)]
    emit_results(rows, tmp_path / "a")
    emit_results(rows, tmp_path / "b")
    for name in ("sweep.csv", "sweep_dkp.svg", "sweep_epr.svg", "sweep_entropy.svg"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_projection_csv(tmp_path):
    spec = BinSpec.centered(0.5, 1)
    counts = np.arange(9).reshape(3, 3)
    write_projection_csv(ProjectionHist(AxisKind.MINUS, spec, counts), tmp_path / "p.csv")
    rows = read_csv(tmp_path / "p.csv")
    assert rows[0] == ["u", "v", "value"] and len(rows) == 10
    assert rows[1] == ["-0.5", "-0.5", "0"] and rows[6] == ["0", "0.5", "5"]


def test_golden_sweep_csv(tmp_path):
    cfg = SweepConfig(DoubleGaussianState(12.0, 0.13 / 12, 1e7), tpx3cam(quantum_efficiency=1.0),
                      duration=0.002, delta_ts=(6.0, 1000.0), seed=7)
    write_sweep_csv(run_sweep(cfg).rows, tmp_path / "s.csv", "x")
    got, want = read_csv(tmp_path / "s.csv"), read_csv(GOLDEN)
    assert got[0] == want[0] == SWEEP_COLUMNS
    assert len(got) == len(want)
    for g, w in zip(got[1:], want[1:]):
        for col, a, b in zip(SWEEP_COLUMNS, g, w):
            try:
                assert float(a) == pytest.approx(float(b), rel=1e-9), col
            except ValueError:
                assert a == b, col
