"""INI configuration for sweeps and simulations.

Every key is optional; missing keys fall back to the camera preset or the
:class:`~pairsight.certification.SweepConfig` defaults.  Unknown sections or
keys are rejected so that typos never pass silently.

::

    [source]
    sigma_minus = 12.0            ; um, std of x1 - x2
    sigma_kplus = 0.0108333       ; rad/um, std of k1 + k2
    pair_rate = 1e7               ; pairs/s
    dark_rate_per_arm = 0         ; noise events/s per arm
    lost_partner_fraction = 0     ; share of noise following the single-photon marginal
    duration = 0.01               ; s per basis

    [camera]
    preset = tpx3cam              ; tpx3cam | spad
    kind = event                  ; event | frame
    width, height, pitch, arm_split, time_quantum, jitter_fwhm,
    dead_time, quantum_efficiency ; override preset values
    readout_gap = 0               ; ns between frames

    [calibration]
    magnification, f_eff, wavelength

    [sweep]
    delta_t = 6, 100, 1000, 4000  ; ns; window (event) or exposure (frame)
    seed = 0
    axis = x
    shift_factor = 10             ; accidental shift in units of delta_t (>= 10)
    min_shift = 50000             ; ns, floor of the accidental shift
    sigma_multiplier = 1          ; certified iff product + k * u < 1/2

    [estimators]
    projection_half = 40          ; projection half-size in pixels
    exclusion_factor = 3          ; background disc radius in fitted widths
    min_background_bins = 100
    fit_offset = false
    fit_anisotropic = false
    min_fit_total = 100
    entropy_bin_pixels = 1
    miller_madow = false
"""
from __future__ import annotations

import configparser
import dataclasses
from pathlib import Path
from typing import Optional

from .certification import SweepConfig
from .core import CAMERA_PRESETS, Axis, Calibration
from .errors import ConfigError
from .spdc import DoubleGaussianState, StrayProfile

_FLOAT, _INT, _BOOL, _STR = float, int, bool, str

SCHEMA = {
    "source": {"sigma_minus": _FLOAT, "sigma_kplus": _FLOAT, "pair_rate": _FLOAT,
               "dark_rate_per_arm": _FLOAT, "lost_partner_fraction": _FLOAT, "duration": _FLOAT},
    "camera": {"preset": _STR, "kind": _STR, "width": _INT, "height": _INT, "pitch": _FLOAT,
               "arm_split": _STR, "time_quantum": _FLOAT, "jitter_fwhm": _FLOAT,
               "dead_time": _FLOAT, "quantum_efficiency": _FLOAT, "readout_gap": _FLOAT},
    "calibration": {"magnification": _FLOAT, "f_eff": _FLOAT, "wavelength": _FLOAT},
    "sweep": {"delta_t": _STR, "seed": _INT, "axis": _STR, "shift_factor": _FLOAT,
              "min_shift": _FLOAT, "sigma_multiplier": _FLOAT},
    "estimators": {"projection_half": _INT, "exclusion_factor": _FLOAT,
                   "min_background_bins": _INT, "fit_offset": _BOOL, "fit_anisotropic": _BOOL,
                   "min_fit_total": _FLOAT, "entropy_bin_pixels": _INT, "miller_madow": _BOOL},
}

DEFAULT_SIGMA_MINUS = 12.0
DEFAULT_SIGMA_KPLUS = 0.13 / 12.0


def _parse(parser: configparser.ConfigParser, origin: str) -> dict:
    values = {}
    for section in parser.sections():
        if section not in SCHEMA:
            raise ConfigError(f"{origin}: unknown section [{section}]")
        for key, raw in parser.items(section):
            kind = SCHEMA[section].get(key)
            if kind is None:
                raise ConfigError(f"{origin}: unknown key '{key}' in [{section}]")
            try:
                if kind is _BOOL:
                    value = parser.getboolean(section, key)
                else:
                    value = kind(raw)
            except ValueError:
                raise ConfigError(f"{origin}: [{section}] {key} = {raw!r} is not a valid "
                                  f"{kind.__name__}") from None
            values[(section, key)] = value
    return values


def parse_delta_ts(text: str) -> list[float]:
    items = [s.strip() for s in text.replace(";", ",").split(",")]
    try:
        return [float(s) for s in items if s]
    except ValueError:
        raise ConfigError(f"bad delta_t list {text!r}") from None


def load_config(path: Optional[str] = None, text: Optional[str] = None) -> SweepConfig:
    """Build a :class:`SweepConfig` from an INI file (or string); both ``None`` gives defaults."""
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"),
                                       interpolation=None, default_section="__none__")
    origin = "<config>"
    try:
        if path is not None:
            origin = str(path)
            parser.read_string(Path(path).read_text(), source=origin)
        elif text is not None:
            parser.read_string(text, source=origin)
    except configparser.Error as exc:
        raise ConfigError(f"{origin}: {exc}") from None
    return build_config(_parse(parser, origin))


def build_config(v: dict) -> SweepConfig:
    def get(section, key, default=None):
        return v.get((section, key), default)

    preset = get("camera", "preset", "tpx3cam")
    if preset not in CAMERA_PRESETS:
        raise ConfigError(f"unknown camera preset {preset!r}; choose from {sorted(CAMERA_PRESETS)}")
    make_geom, make_cal = CAMERA_PRESETS[preset]
    geom = make_geom()
    overrides = {k: get("camera", k) for k in ("width", "height", "pitch", "arm_split", "time_quantum",
                                               "jitter_fwhm", "dead_time", "quantum_efficiency")
                 if get("camera", k) is not None}
    if overrides:
        geom = dataclasses.replace(geom, **overrides)
    base_cal = make_cal(geom)
    cal = Calibration.for_geometry(geom, get("calibration", "magnification", base_cal.magnification),
                                   get("calibration", "f_eff", base_cal.f_eff),
                                   get("calibration", "wavelength", base_cal.wavelength))

    state = DoubleGaussianState(
        get("source", "sigma_minus", DEFAULT_SIGMA_MINUS),
        get("source", "sigma_kplus", DEFAULT_SIGMA_KPLUS),
        get("source", "pair_rate", 1e7),
        get("source", "dark_rate_per_arm", 0.0),
        StrayProfile(get("source", "lost_partner_fraction", 0.0)))

    kwargs = dict(state=state, geometry=geom, calibration=cal,
                  camera=get("camera", "kind", "event" if preset == "tpx3cam" else "frame"))
    simple = {("source", "duration"): "duration", ("camera", "readout_gap"): "readout_gap",
              ("sweep", "seed"): "seed", ("sweep", "shift_factor"): "shift_factor",
              ("sweep", "min_shift"): "min_shift", ("sweep", "sigma_multiplier"): "sigma_multiplier"}
    simple.update({("estimators", k): k for k in SCHEMA["estimators"]})
    for key, name in simple.items():
        if key in v:
            kwargs[name] = v[key]
    if ("sweep", "delta_t") in v:
        kwargs["delta_ts"] = parse_delta_ts(v[("sweep", "delta_t")])
    if ("sweep", "axis") in v:
        try:
            kwargs["axis"] = Axis(v[("sweep", "axis")].lower())
        except ValueError:
            raise ConfigError(f"axis must be x or y, got {v[('sweep', 'axis')]!r}") from None
    return SweepConfig(**kwargs)
