"""Camera models turning emitted photons into detector output."""
from __future__ import annotations

import math

import numba
import numpy as np

from .core import Calibration, CameraGeometry, DetectionStats, EventStream, FrameSequence, coords_to_pixel
from .errors import ConfigError
from .spdc import TruthStream


@numba.njit(cache=True)
def _dead_time_keep(pixel, tick, order, dead_ticks):
    # ``order`` sorts events by (pixel, tick); dropped events do not re-arm the pixel.
    keep = np.zeros(pixel.size, dtype=np.bool_)
    prev_pixel = -1
    last = 0.0
    for k in range(order.size):
        i = order[k]
        if pixel[i] != prev_pixel or tick[i] - last >= dead_ticks:
            keep[i] = True
            prev_pixel = pixel[i]
            last = tick[i]
    return keep


def apply_dead_time(pixel: np.ndarray, tick: np.ndarray, dead_ticks: float) -> np.ndarray:
    """Mask of events surviving a per-pixel non-paralysable dead time."""
    if dead_ticks <= 0 or pixel.size == 0:
        return np.ones(pixel.size, dtype=bool)
    order = np.lexsort((tick, pixel))
    return _dead_time_keep(pixel.astype(np.int64), tick.astype(np.float64), order, float(dead_ticks))


def detect_events(truth: TruthStream, geom: CameraGeometry, cal: Calibration, seed=None) -> EventStream:
    """Simulate an event camera.

    Each photon survives with probability ``quantum_efficiency``, gets
    Gaussian timing jitter and is floored to ``time_quantum`` ticks.  Its
    coordinate is rounded to the nearest pixel; photons landing outside their
    arm region are dropped and tallied in ``stats.clipped``.  Finally a
    per-pixel dead time removes events arriving too soon after the previous
    accepted one.  Output is sorted by tick.
    """
    if len(truth) > 1 and np.any(np.diff(truth.t) < 0):
        raise ConfigError("truth stream must be sorted by time")
    rng = np.random.default_rng(seed)
    stats = DetectionStats(truth=len(truth))

    keep = rng.random(len(truth)) < geom.quantum_efficiency
    idx = np.flatnonzero(keep)
    stats.efficiency_dropped = len(truth) - len(idx)

    t = truth.t[idx]
    if geom.jitter_fwhm > 0:
        t = t + rng.normal(0.0, geom.jitter_sigma, len(idx))
    tick = np.floor(t / geom.time_quantum)
    tick = np.maximum(tick, 0).astype(np.int64)

    arm = truth.arm[idx]
    px, py, inside = coords_to_pixel(truth.x[idx], truth.y[idx], arm, cal, geom, truth.basis)
    stats.clipped = int(len(idx) - inside.sum())
    idx, tick, arm, px, py = idx[inside], tick[inside], arm[inside], px[inside], py[inside]

    if geom.dead_time > 0:
        alive = apply_dead_time(py * geom.width + px, tick, geom.dead_time / geom.time_quantum)
        stats.dead_time_dropped = int(len(idx) - alive.sum())
        idx, tick, arm, px, py = idx[alive], tick[alive], arm[alive], px[alive], py[alive]

    order = np.argsort(tick, kind="stable")
    stats.kept = len(order)
    return EventStream(tick[order], px[order], py[order], arm[order], geom.width, geom.height,
                       geom.time_quantum, pair_id=truth.pair_id[idx[order]], stats=stats)


def detect_frames(truth: TruthStream, geom: CameraGeometry, cal: Calibration, exposure: float,
                  n_frames: int, seed=None, readout_gap: float = 0.0) -> FrameSequence:
    """Simulate a binary frame camera.

    Frame ``k`` integrates photons emitted in
    ``[k * (exposure + readout_gap), k * (exposure + readout_gap) + exposure)``.
    Photons are thinned by the quantum efficiency and mapped to pixels; a
    pixel registers at most one hit per frame.
    """
    if exposure <= 0:
        raise ConfigError("exposure must be positive")
    if readout_gap < 0 or n_frames < 0:
        raise ConfigError("readout_gap and n_frames must be non-negative")
    rng = np.random.default_rng(seed)
    stats = DetectionStats(truth=len(truth))
    period = exposure + readout_gap

    frame = np.floor(truth.t / period).astype(np.int64)
    live = (frame < n_frames) & (truth.t - frame * period < exposure)
    idx = np.flatnonzero(live)

    keep = rng.random(len(idx)) < geom.quantum_efficiency
    stats.efficiency_dropped = int(len(idx) - keep.sum())
    idx = idx[keep]

    arm = truth.arm[idx]
    px, py, inside = coords_to_pixel(truth.x[idx], truth.y[idx], arm, cal, geom, truth.basis)
    stats.clipped = int(len(idx) - inside.sum())
    seq = FrameSequence(frame[idx][inside], px[inside], py[inside], arm[inside],
                        n_frames, exposure, geom.width, geom.height)
    stats.kept = seq.n_hits
    seq.stats = stats
    return seq


def frames_for_duration(duration: float, exposure: float, readout_gap: float = 0.0) -> int:
    """Number of complete frames fitting in ``duration`` seconds."""
    return int(math.floor(duration * 1e9 / (exposure + readout_gap)))
