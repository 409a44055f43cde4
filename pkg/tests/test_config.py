from pathlib import Path

import pytest

from pairsight.certification import SweepConfig
from pairsight.config import SCHEMA, load_config, parse_delta_ts
from pairsight.core import Axis, spad_spc3, tpx3cam
from pairsight.errors import ConfigError

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def test_defaults():
    cfg = load_config()
    assert isinstance(cfg, SweepConfig)
    assert cfg.camera == "event" and cfg.geometry == tpx3cam()
    assert cfg.state.sigma_minus == 12.0 and cfg.state.sigma_kplus == pytest.approx(0.13 / 12)
    assert (cfg.calibration.magnification, cfg.calibration.f_eff) == (12.0, 100.0)


def test_shipped_configs_load():
    tpx = load_config(CONFIGS / "tpx3cam.ini")
    assert tpx.delta_ts == [6.0, 100.0, 1000.0, 4000.0] and tpx.duration == 0.05
    spad = load_config(CONFIGS / "spad.ini")
    assert spad.camera == "frame" and spad.geometry == spad_spc3()
    assert spad.state.pair_rate == 1e6


def test_documented_keys_match_schema():
    import pairsight.config as mod
    doc = mod.__doc__
    for section, keys in SCHEMA.items():
        assert f"[{section}]" in doc
        for key in keys:
            assert key in doc, key


def test_overrides_and_types():
    cfg = load_config(text="""
[source]
pair_rate = 2e5
dark_rate_per_arm = 10
lost_partner_fraction = 0.25
[camera]
preset = spad
kind = event
quantum_efficiency = 1
[sweep]
delta_t = 1; 2, 3
axis = Y
[estimators]
miller_madow = yes
projection_half = 12
""")
    assert cfg.camera == "event" and cfg.geometry.quantum_efficiency == 1.0
    assert cfg.geometry.width == spad_spc3().width
    assert cfg.state.stray_profile.lost_partner_fraction == 0.25
    assert cfg.delta_ts == [1.0, 2.0, 3.0] and cfg.axis is Axis.Y
    assert cfg.miller_madow is True and cfg.projection_half == 12


@pytest.mark.parametrize("text", [
    "[sorce]\nseed = 1\n",
    "[sweep]\nsead = 1\n",
    "[sweep]\nseed = one\n",
    "[sweep]\naxis = z\n",
    "[sweep]\ndelta_t = 6, fast\n",
    "[sweep]\nshift_factor = 2\n",
    "[camera]\npreset = ccd\n",
    "[camera]\nkind = video\n",
    "[estimators]\nfit_offset = maybe\n",
    "not an ini file",
])
def test_bad_configs_rejected(text):
    with pytest.raises(ConfigError):
        load_config(text=text)


def test_parse_delta_ts():
    assert parse_delta_ts("6, 100 ,1000") == [6.0, 100.0, 1000.0]
    assert parse_delta_ts("") == []
