import csv
import subprocess
import sys

import pytest

from pairsight.cli import main
from pairsight.results import SWEEP_COLUMNS

SMALL = """
[source]
pair_rate = 1e6
duration = 0.005
[camera]
preset = tpx3cam
quantum_efficiency = 1
[sweep]
delta_t = 6, 100
seed = 3
"""

SMALL_FRAME = """
[source]
pair_rate = 1e6
duration = 0.002
[camera]
preset = spad
quantum_efficiency = 1
[sweep]
delta_t = 500
seed = 3
[estimators]
projection_half = 10
min_background_bins = 50
"""


@pytest.fixture
def cfg_file(tmp_path):
    p = tmp_path / "small.ini"
    p.write_text(SMALL)
    return p


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_simulate_then_coincide_and_certify(tmp_path, cfg_file):
    out = tmp_path / "sim"
    assert main(["simulate", "--config", str(cfg_file), "--out", str(out)]) == 0
    sim = rows(out / "simulate.csv")
    assert [r[0] for r in sim[1:]] == ["position", "momentum"]
    assert (out / "events_position.txt").exists() and (out / "events_momentum.txt").exists()

    co = tmp_path / "co"
    assert main(["coincide", str(out / "events_momentum.txt"), "--basis", "momentum",
                 "--config", str(cfg_file), "--out", str(co)]) == 0
    table = rows(co / "coincide.csv")
    assert table[0] == ["delta_t_ns", "basis", "pairs", "accidental_est"]
    assert [r[0] for r in table[1:]] == ["6", "100"]
    assert int(table[2][2]) >= int(table[1][2]) > 0
    assert rows(co / "projection_raw.csv")[0] == ["u", "v", "value"]
    assert (co / "projection_subtracted.csv").exists()

    ce = tmp_path / "ce"
    assert main(["certify", "--position", str(out / "events_position.txt"),
                 "--momentum", str(out / "events_momentum.txt"), "--config", str(cfg_file),
                 "--delta-t", "6", "--out", str(ce)]) == 0
    cert = rows(ce / "certify.csv")
    assert cert[0] == SWEEP_COLUMNS and len(cert) == 2
    rec = dict(zip(cert[0], cert[1]))
    assert rec["epr_raw_certified"] == "1" and rec["error"] == ""


def test_binary_simulation_round_trip(tmp_path, cfg_file):
    out = tmp_path / "b"
    assert main(["simulate", "--config", str(cfg_file), "--basis", "position", "--binary",
                 "--out", str(out)]) == 0
    assert (out / "events_position.bin").exists()
    assert main(["coincide", str(out / "events_position.bin"), "--basis", "position",
                 "--config", str(cfg_file), "--out", str(out)]) == 0


def test_frame_camera_verbs(tmp_path):
    cfg = tmp_path / "f.ini"
    cfg.write_text(SMALL_FRAME)
    out = tmp_path / "f"
    assert main(["simulate", "--config", str(cfg), "--out", str(out)]) == 0
    assert main(["coincide", str(out / "frames_position.txt"), "--basis", "position",
                 "--config", str(cfg), "--out", str(out)]) == 0
    assert rows(out / "coincide.csv")[1][0] == "500"
    assert main(["certify", "--position", str(out / "frames_position.txt"),
                 "--momentum", str(out / "frames_momentum.txt"), "--config", str(cfg),
                 "--out", str(out)]) == 0
    assert rows(out / "certify.csv")[1][0] == "500"


def test_sweep_outputs(tmp_path, cfg_file):
    out = tmp_path / "sw"
    assert main(["sweep", "--config", str(cfg_file), "--out", str(out)]) == 0
    assert len(rows(out / "sweep.csv")) == 3
    for name in ("sweep_dkp.svg", "sweep_epr.svg", "sweep_entropy.svg"):
        assert (out / name).stat().st_size > 0
    summary = rows(out / "sweep_summary.csv")
    assert summary[0][-1] == "entropy_slope_per_efold" and float(summary[1][-1]) > 0


def test_certify_simulated_with_overrides(tmp_path, cfg_file):
    assert main(["certify", "--config", str(cfg_file), "--seed", "5", "--delta-t", "6",
                 "--duration", "0.002", "--out", str(tmp_path)]) == 0
    assert len(rows(tmp_path / "certify.csv")) == 2


def test_errors_exit_with_status_2(tmp_path, cfg_file, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("[sweep]\nsead = 1\n")
    assert main(["sweep", "--config", str(bad), "--out", str(tmp_path)]) == 2
    assert "unknown key" in capsys.readouterr().err
    assert main(["certify", "--position", str(tmp_path / "x.txt"), "--out", str(tmp_path)]) == 2
    assert main(["coincide", str(tmp_path / "missing.txt"), "--basis", "position",
                 "--out", str(tmp_path)]) == 2
    with pytest.raises(SystemExit):
        main(["coincide", "--basis", "position"])


@pytest.mark.parametrize("verb", ["simulate", "certify", "sweep"])
def test_verbs_byte_deterministic(tmp_path, cfg_file, verb):
    outs = []
    for run in ("a", "b"):
        out = tmp_path / run
        assert main([verb, "--config", str(cfg_file), "--out", str(out)]) == 0
        outs.append(out)
    files = sorted(p.name for p in outs[0].iterdir())
    assert files == sorted(p.name for p in outs[1].iterdir())
    for name in files:
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes(), name


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "pairsight.cli", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    for verb in ("simulate", "coincide", "certify", "sweep"):
        assert verb in res.stdout
