"""Entanglement verdicts and coincidence-window sweeps."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .coincidence import (accumulate_pass, iter_accidentals_frames, iter_accidentals_stream,
                          iter_coincidences_frames, iter_coincidences_stream, joint_spec,
                          projection_spec, subtract_projection)
from .core import (Arm, Axis, AxisKind, Basis, Calibration, CameraGeometry, EventStream,
                   FrameSequence, field_of_view, tpx3cam, tpx3cam_calibration)
from .detector import detect_events, detect_frames, frames_for_duration
from .errors import ConfigError, PairsightError
from .estimators import (FitOptions, WidthEstimate, WidthMethod, conditional_entropy,
                         gaussian_width, variance_width)
from .spdc import DoubleGaussianState, emit_truth_stream

log = logging.getLogger(__name__)

EPR_THRESHOLD = 0.5
ENTROPY_THRESHOLD = math.log(2.0 * math.pi * math.e)


@dataclass(frozen=True)
class EprVerdict:
    product: float
    uncertainty: float
    certified: bool
    axis: Axis = Axis.X
    method: WidthMethod = WidthMethod.GAUSSIAN_FIT
    subtracted: bool = False
    threshold: float = EPR_THRESHOLD


@dataclass(frozen=True)
class EntropicVerdict:
    hx: float
    hk: float
    sum: float
    certified: bool
    threshold: float = ENTROPY_THRESHOLD


def epr_reid(dxm: WidthEstimate, dkp: WidthEstimate, axis: Axis = Axis.X, subtracted: bool = False,
             sigma_multiplier: float = 1.0) -> EprVerdict:
    """Position-momentum EPR product with its propagated uncertainty.

    Entanglement is certified only when ``product + sigma_multiplier * u``
    stays strictly below 1/2.
    """
    if dxm.method != dkp.method:
        raise ConfigError("position and momentum widths come from different methods")
    if dxm.axis is not None and dkp.axis is not None and dxm.axis != dkp.axis:
        raise ConfigError("position and momentum widths refer to different axes")
    product = dxm.value * dkp.value
    # same as product * hypot(u_x/x, u_k/k) but defined at zero width
    u = math.hypot(dxm.uncertainty * dkp.value, dxm.value * dkp.uncertainty)
    certified = product + sigma_multiplier * u < EPR_THRESHOLD
    return EprVerdict(product, u, certified, Axis(axis), dxm.method, subtracted)


def entropic_criterion(hx: float, hk: float) -> EntropicVerdict:
    total = hx + hk
    return EntropicVerdict(hx, hk, total, total < ENTROPY_THRESHOLD)


@dataclass
class SweepConfig:
    """Everything needed to reproduce one coincidence-window sweep.

    ``camera`` selects the event-camera pipeline (window = ``delta_t``) or
    the frame-camera pipeline (exposure = ``delta_t``).
    """

    state: DoubleGaussianState
    geometry: CameraGeometry = field(default_factory=tpx3cam)
    calibration: Optional[Calibration] = None
    camera: str = "event"
    delta_ts: Sequence[float] = (6.0, 100.0, 1000.0, 4000.0)
    duration: float = 0.01  # s
    seed: int = 0
    readout_gap: float = 0.0  # ns, frame mode
    axis: Axis = Axis.X
    projection_half: int = 40
    exclusion_factor: float = 3.0
    min_background_bins: int = 100
    fit_offset: bool = False
    fit_anisotropic: bool = False
    min_fit_total: float = 100.0
    entropy_bin_pixels: int = 1
    miller_madow: bool = False
    shift_factor: float = 10.0
    min_shift: float = 50_000.0  # ns
    sigma_multiplier: float = 1.0

    def __post_init__(self):
        if self.calibration is None:
            self.calibration = tpx3cam_calibration(self.geometry)
        if self.camera not in ("event", "frame"):
            raise ConfigError(f"camera must be 'event' or 'frame', got {self.camera!r}")
        if self.duration <= 0:
            raise ConfigError("duration must be positive")
        if any(dt <= 0 for dt in self.delta_ts):
            raise ConfigError("delta_t values must be positive")
        if self.entropy_bin_pixels < 1 or self.projection_half < 1:
            raise ConfigError("entropy_bin_pixels and projection_half must be >= 1")
        if self.shift_factor < 10.0:
            raise ConfigError("shift_factor must be at least 10")
        self.axis = Axis(self.axis)

    def shift_for(self, delta_t: float) -> float:
        return max(self.shift_factor * delta_t, self.min_shift)


@dataclass
class SweepRow:
    delta_t: float
    dxm: Optional[WidthEstimate] = None
    dkp: Optional[WidthEstimate] = None
    dxm_subtracted: Optional[WidthEstimate] = None
    dkp_subtracted: Optional[WidthEstimate] = None
    dxm_variance: Optional[WidthEstimate] = None
    dkp_variance: Optional[WidthEstimate] = None
    epr_raw: Optional[EprVerdict] = None
    epr_subtracted: Optional[EprVerdict] = None
    epr_variance: Optional[EprVerdict] = None
    entropy: Optional[EntropicVerdict] = None
    counts: dict = field(default_factory=dict)
    error: Optional[str] = None


@dataclass
class SweepResult:
    rows: list
    entropy_slope: Optional[float] = None  # nats per e-fold of delta_t


_PROJECTION = {Basis.POSITION: AxisKind.MINUS, Basis.MOMENTUM: AxisKind.SUM}


@dataclass
class _BasisPass:
    raw: object
    accidental: object
    normalization: float


def _simulate(cfg: SweepConfig, basis: Basis, seed_seq):
    s_truth, s_det = seed_seq.spawn(2)
    fov = field_of_view(cfg.geometry, cfg.calibration, basis, Arm.SIGNAL)
    truth = emit_truth_stream(cfg.state, basis, cfg.duration, s_truth, fov=fov)
    return truth, s_det


def _event_passes(cfg: SweepConfig, events: EventStream, basis: Basis, delta_ts,
                  period: Optional[float]) -> dict:
    cal = cfg.calibration
    kind = _PROJECTION[basis]
    pspec = projection_spec(cal, basis, kind, cfg.projection_half)
    jspec = _entropy_spec(cfg, basis)
    out = {}
    for dt in delta_ts:
        try:
            raw = accumulate_pass(iter_coincidences_stream(events, dt, cal, basis), kind, pspec,
                                  {cfg.axis: jspec})
            acc = accumulate_pass(iter_accidentals_stream(events, dt, cfg.shift_for(dt), cal, basis,
                                                          period=period), kind, pspec)
            out[dt] = _BasisPass(raw, acc, 1.0)
        except PairsightError as exc:
            out[dt] = exc
    return out


def _frame_pass(cfg: SweepConfig, frames: FrameSequence, basis: Basis) -> _BasisPass:
    cal = cfg.calibration
    kind = _PROJECTION[basis]
    pspec = projection_spec(cal, basis, kind, cfg.projection_half)
    raw = accumulate_pass(iter_coincidences_frames(frames, cal, basis), kind, pspec,
                          {cfg.axis: _entropy_spec(cfg, basis)})
    acc = accumulate_pass(iter_accidentals_frames(frames, cal, basis), kind, pspec)
    return _BasisPass(raw, acc, frames.n_frames / (frames.n_frames - 1))


def _passes_event(cfg: SweepConfig, basis: Basis, seed_seq, delta_ts) -> dict:
    truth, s_det = _simulate(cfg, basis, seed_seq)
    events = detect_events(truth, cfg.geometry, cfg.calibration, np.random.default_rng(s_det))
    del truth
    log.info("%s basis: %d events detected (%s)", basis.value, len(events), events.stats)
    return _event_passes(cfg, events, basis, delta_ts, cfg.duration * 1e9)


def _passes_frame(cfg: SweepConfig, basis: Basis, seed_seq, delta_ts) -> dict:
    truth, s_det = _simulate(cfg, basis, seed_seq)
    out = {}
    for dt, ss in zip(delta_ts, s_det.spawn(len(delta_ts))):
        try:
            n_frames = frames_for_duration(cfg.duration, dt, cfg.readout_gap)
            frames = detect_frames(truth, cfg.geometry, cfg.calibration, dt, n_frames,
                                   np.random.default_rng(ss), cfg.readout_gap)
            out[dt] = _frame_pass(cfg, frames, basis)
        except PairsightError as exc:
            out[dt] = exc
    return out


def _entropy_spec(cfg: SweepConfig, basis: Basis):
    spec = joint_spec(cfg.calibration, cfg.geometry, basis, cfg.axis)
    if cfg.entropy_bin_pixels == 1:
        return spec
    from .histograms import BinSpec
    w = spec.width_u * cfg.entropy_bin_pixels
    return BinSpec(w, w, -(-spec.n_u // cfg.entropy_bin_pixels), -(-spec.n_v // cfg.entropy_bin_pixels),
                   spec.origin_u + 0.5 * (w - spec.width_u), spec.origin_v + 0.5 * (w - spec.width_v))


def _fit_widths(hist, cfg: SweepConfig, opts: FitOptions):
    est, fit = gaussian_width(hist, opts, cfg.exclusion_factor, cfg.min_background_bins,
                              cap_radius=True)
    value = est.value
    if cfg.fit_anisotropic and cfg.axis is Axis.Y:
        value = fit.width_v
    return WidthEstimate(value, est.uncertainty * value / est.value if est.value else est.uncertainty,
                         WidthMethod.GAUSSIAN_FIT, cfg.axis.value)


def _row(cfg: SweepConfig, dt: float, px: _BasisPass, pk: _BasisPass) -> SweepRow:
    row = SweepRow(delta_t=dt)
    axis = cfg.axis
    uv = "u" if axis is Axis.X else "v"
    opts = FitOptions(offset=cfg.fit_offset, anisotropic=cfg.fit_anisotropic,
                      min_total=cfg.min_fit_total)
    row.counts = {
        "pairs_position": px.raw.n_pairs, "pairs_momentum": pk.raw.n_pairs,
        "accidental_est_position": px.accidental.n_pairs,
        "accidental_est_momentum": pk.accidental.n_pairs,
        "genuine_position": px.raw.n_genuine, "genuine_momentum": pk.raw.n_genuine,
    }
    try:
        row.dxm = _fit_widths(px.raw.projection, cfg, opts)
        row.dkp = _fit_widths(pk.raw.projection, cfg, opts)
        row.epr_raw = epr_reid(row.dxm, row.dkp, axis, False, cfg.sigma_multiplier)

        sub_x = subtract_projection(px.raw.projection, px.accidental.projection, px.normalization)
        sub_k = subtract_projection(pk.raw.projection, pk.accidental.projection, pk.normalization)
        row.dxm_subtracted = _fit_widths(sub_x, cfg, opts)
        row.dkp_subtracted = _fit_widths(sub_k, cfg, opts)
        row.epr_subtracted = epr_reid(row.dxm_subtracted, row.dkp_subtracted, axis, True,
                                      cfg.sigma_multiplier)

        vx = variance_width(px.raw.projection, uv)
        vk = variance_width(pk.raw.projection, uv)
        row.dxm_variance = WidthEstimate(vx.value, vx.uncertainty, vx.method, axis.value)
        row.dkp_variance = WidthEstimate(vk.value, vk.uncertainty, vk.method, axis.value)
        row.epr_variance = epr_reid(row.dxm_variance, row.dkp_variance, axis, False,
                                    cfg.sigma_multiplier)

        hx = conditional_entropy(px.raw.joint[axis], cfg.miller_madow)
        hk = conditional_entropy(pk.raw.joint[axis], cfg.miller_madow)
        row.entropy = entropic_criterion(hx, hk)
    except (PairsightError, ValueError, FloatingPointError) as exc:
        row.error = f"{type(exc).__name__}: {exc}"
    return row


def run_sweep(cfg: SweepConfig) -> SweepResult:
    """Simulate both bases, pair them at every window and certify each row.

    Event mode detects each basis once and re-pairs the same events at every
    ``delta_t``; frame mode re-exposes the same emitted photons with frames of
    length ``delta_t``.  Rows are returned sorted by ``delta_t``; a row whose
    estimation fails carries the error message instead of verdicts.
    """
    delta_ts = sorted(float(d) for d in cfg.delta_ts)
    if not delta_ts:
        return SweepResult([])
    seeds = np.random.SeedSequence(cfg.seed).spawn(2)
    run = _passes_event if cfg.camera == "event" else _passes_frame
    per_basis = {}
    for basis, ss in zip((Basis.POSITION, Basis.MOMENTUM), seeds):
        per_basis[basis] = run(cfg, basis, ss, delta_ts)

    return _assemble(cfg, delta_ts, per_basis[Basis.POSITION], per_basis[Basis.MOMENTUM])


def _assemble(cfg: SweepConfig, delta_ts, pos: dict, mom: dict) -> SweepResult:
    rows = []
    for dt in delta_ts:
        px, pk = pos[dt], mom[dt]
        failed = [p for p in (px, pk) if isinstance(p, Exception)]
        if failed:
            rows.append(SweepRow(delta_t=dt, error=f"{type(failed[0]).__name__}: {failed[0]}"))
        else:
            rows.append(_row(cfg, dt, px, pk))
    return SweepResult(rows, entropy_slope(rows))


def certify_data(cfg: SweepConfig, position, momentum,
                 delta_ts: Optional[Sequence[float]] = None) -> SweepResult:
    """Certify recorded data instead of simulating it.

    ``position`` and ``momentum`` are both :class:`EventStream` (paired at
    every ``delta_ts`` entry, default ``cfg.delta_ts``) or both
    :class:`FrameSequence` (one row at their common exposure).
    """
    kinds = (EventStream, FrameSequence)
    if not (isinstance(position, kinds) and type(position) is type(momentum)):
        raise ConfigError("position and momentum data must both be event streams or both frame sequences")
    g = cfg.geometry
    for data in (position, momentum):
        if (data.width, data.height) != (g.width, g.height):
            raise ConfigError(f"data sensor {data.width}x{data.height} does not match configured "
                              f"camera {g.width}x{g.height}")
    if isinstance(position, EventStream):
        delta_ts = sorted(float(d) for d in (cfg.delta_ts if delta_ts is None else delta_ts))
        pos = _event_passes(cfg, position, Basis.POSITION, delta_ts, None)
        mom = _event_passes(cfg, momentum, Basis.MOMENTUM, delta_ts, None)
        return _assemble(cfg, delta_ts, pos, mom)
    if position.exposure != momentum.exposure:
        raise ConfigError("position and momentum frames have different exposures")
    dt = position.exposure
    passes = []
    for frames, basis in ((position, Basis.POSITION), (momentum, Basis.MOMENTUM)):
        try:
            passes.append(_frame_pass(cfg, frames, basis))
        except PairsightError as exc:
            passes.append(exc)
    return _assemble(cfg, [dt], {dt: passes[0]}, {dt: passes[1]})


def entropy_slope(rows: Sequence[SweepRow]) -> Optional[float]:
    """Least-squares slope of the entropy sum against ``ln(delta_t)``."""
    pts = [(math.log(r.delta_t), r.entropy.sum) for r in rows if r.entropy is not None]
    if len(pts) < 2 or len({p[0] for p in pts}) < 2:
        return None
    x, y = np.array(pts).T
    return float(np.polyfit(x, y, 1)[0])


def isotonic_residual(values: Sequence[float]) -> float:
    """Largest relative deviation of ``values`` from their best non-decreasing fit."""
    from scipy.optimize import isotonic_regression

    y = np.asarray(values, dtype=np.float64)
    fit = isotonic_regression(y, increasing=True).x
    return float(np.max(np.abs(y - fit) / np.abs(fit)))
