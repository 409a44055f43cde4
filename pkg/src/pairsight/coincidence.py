"""Coincidence finding, accidental estimation and projection accumulation.

Event-camera pairing follows the all-pairs rule: every signal/idler
combination with ``|t_i - t_j| < delta_t`` is a coincidence, and one event
may take part in several pairs.  Pairs are produced in bounded-size
:class:`PairBatch` chunks so that very wide windows can be histogrammed
without materialising every pair at once.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Optional, Union

import numba
import numpy as np

from .core import (Arm, Axis, AxisKind, Basis, Calibration, CameraGeometry, EventStream,
                   FrameSequence, PairBatch, pixel_to_coords)
from .errors import ConfigError, ContractViolation
from .histograms import BinSpec, JointAxisHist, ProjectionGrid, ProjectionHist

DEFAULT_MAX_PAIRS = 2_000_000
MIN_SHIFT_FACTOR = 10.0

Pairs = Union[PairBatch, Iterable[PairBatch]]


def window_ticks(delta_t: float, time_quantum: float) -> int:
    """Smallest integer ``W`` with ``|d| < W  <=>  |d| * time_quantum < delta_t`` for integer ``d``."""
    if delta_t <= 0:
        raise ConfigError("delta_t must be positive")
    r = delta_t / time_quantum
    nearest = round(r)
    if math.isclose(r, nearest, rel_tol=1e-12, abs_tol=1e-12):
        return int(nearest)
    return int(math.ceil(r))


@numba.njit(cache=True)
def _window_bounds(t_query, t_ref, w):
    # two-cursor sweep over both sorted arrays: t_ref[lo:hi] is the open window (t - w, t + w)
    n = t_query.size
    lo = np.empty(n, dtype=np.int64)
    hi = np.empty(n, dtype=np.int64)
    a = 0
    b = 0
    m = t_ref.size
    for i in range(n):
        t = t_query[i]
        while a < m and t_ref[a] <= t - w:
            a += 1
        if b < a:
            b = a
        while b < m and t_ref[b] < t + w:
            b += 1
        lo[i] = a
        hi[i] = b
    return lo, hi


def _chunked_pairs(lo: np.ndarray, counts: np.ndarray, max_pairs: int):
    """Yield ``(a, b)`` index arrays: each ``a`` pairs with ``b`` in ``[lo[a], lo[a] + counts[a])``."""
    n = len(counts)
    if n == 0:
        return
    cum = np.cumsum(counts)
    start = 0
    while start < n:
        base = int(cum[start - 1]) if start else 0
        end = int(np.searchsorted(cum, base + max_pairs, side="right"))
        end = min(max(end, start + 1), n)
        c = counts[start:end]
        total = int(cum[end - 1]) - base
        if total:
            a = np.repeat(np.arange(start, end, dtype=np.int64), c)
            first = lo[start:end] - (cum[start:end] - c - base)
            b = np.repeat(first, c) + np.arange(total, dtype=np.int64)
            yield a, b
        start = end


@dataclass
class _Calibrated:
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    pair_id: Optional[np.ndarray]


def _calibrate(events: EventStream, cal: Calibration, basis: Basis) -> _Calibrated:
    x, y = pixel_to_coords(events.px, events.py, events.arm, cal, basis)
    return _Calibrated(events.t, x, y, events.pair_id)


def _batch(c: _Calibrated, si, ii, t_idler, time_quantum, basis) -> PairBatch:
    dt = (t_idler - c.t[si]).astype(np.float64) * time_quantum
    genuine = None
    if c.pair_id is not None:
        pid = c.pair_id[si]
        genuine = (pid >= 0) & (pid == c.pair_id[ii])
    return PairBatch(c.x[si], c.y[si], c.x[ii], c.y[ii], dt, basis, si, ii, genuine)


def _check_sorted(events: EventStream):
    if not events.is_sorted():
        raise ContractViolation("event stream must be sorted by time")


def _cross_join(c: _Calibrated, sig: np.ndarray, idl: np.ndarray, t_idl: np.ndarray, w: int,
                time_quantum: float, basis: Basis, max_pairs: int) -> Iterator[PairBatch]:
    # t_idl is sorted and aligned with idl
    lo, hi = _window_bounds(c.t[sig], t_idl, w)
    for a, b in _chunked_pairs(lo, hi - lo, max_pairs):
        yield _batch(c, sig[a], idl[b], t_idl[b], time_quantum, basis)


def _same_arm_join(c: _Calibrated, members: np.ndarray, w: int, time_quantum, basis, max_pairs):
    t = c.t[members]
    lo = np.arange(1, len(t) + 1, dtype=np.int64)
    hi = np.searchsorted(t, t + w, side="left")
    for a, b in _chunked_pairs(lo, np.maximum(hi - lo, 0), max_pairs):
        yield _batch(c, members[a], members[b], t[b], time_quantum, basis)


def iter_coincidences_stream(events: EventStream, delta_t: float, cal: Calibration, basis: Basis,
                             include_same_arm: bool = False,
                             max_pairs: int = DEFAULT_MAX_PAIRS) -> Iterator[PairBatch]:
    """Chunked form of :func:`find_coincidences_stream`; validates eagerly."""
    _check_sorted(events)
    basis = Basis(basis)
    w = window_ticks(delta_t, events.time_quantum)

    def gen():
        c = _calibrate(events, cal, basis)
        sig = np.flatnonzero(events.arm == Arm.SIGNAL)
        idl = np.flatnonzero(events.arm == Arm.IDLER)
        yield from _cross_join(c, sig, idl, c.t[idl], w, events.time_quantum, basis, max_pairs)
        if include_same_arm:
            for members in (sig, idl):
                yield from _same_arm_join(c, members, w, events.time_quantum, basis, max_pairs)

    return gen()


def find_coincidences_stream(events: EventStream, delta_t: float, cal: Calibration, basis: Basis,
                             include_same_arm: bool = False) -> PairBatch:
    """All signal/idler pairs with ``|t_i - t_j| < delta_t`` (ns), calibrated in ``basis``.

    Raises :class:`ContractViolation` if ``events`` is not time-sorted.  With
    ``include_same_arm`` the same-half pairs are appended for diagnostics.
    """
    return PairBatch.concat(list(iter_coincidences_stream(events, delta_t, cal, basis,
                                                          include_same_arm)), basis)


@numba.njit(cache=True)
def _all_pairs(t, first, second, w, ordered):
    # exhaustive scan of every (first, second) combination, counted then filled
    n = 0
    for a in first:
        for b in second:
            if abs(t[a] - t[b]) < w and (not ordered or a < b):
                n += 1
    out_a = np.empty(n, np.int64)
    out_b = np.empty(n, np.int64)
    k = 0
    for a in first:
        for b in second:
            if abs(t[a] - t[b]) < w and (not ordered or a < b):
                out_a[k] = a
                out_b[k] = b
                k += 1
    return out_a, out_b


def brute_force_pairs(events: EventStream, delta_t: float, cal: Calibration, basis: Basis,
                      include_same_arm: bool = False) -> PairBatch:
    """Reference all-pairs join: test every signal x idler combination.

    Works on unsorted input; an O(N^2) scan kept as the oracle for the
    streaming join.
    """
    basis = Basis(basis)
    w = window_ticks(delta_t, events.time_quantum)
    c = _calibrate(events, cal, basis)
    sig = np.flatnonzero(events.arm == Arm.SIGNAL)
    idl = np.flatnonzero(events.arm == Arm.IDLER)
    combos = [(sig, idl, False)]
    if include_same_arm:
        combos += [(sig, sig, True), (idl, idl, True)]
    batches = []
    t = np.ascontiguousarray(c.t, dtype=np.int64)
    for first, second, ordered in combos:
        si, ii = _all_pairs(t, first, second, w, ordered)
        batches.append(_batch(c, si, ii, c.t[ii], events.time_quantum, basis))
    return PairBatch.concat(batches, basis)


def estimate_accidentals_stream(events: EventStream, delta_t: float, shift: float, cal: Calibration,
                                basis: Basis, period: Optional[float] = None,
                                max_pairs: int = DEFAULT_MAX_PAIRS) -> PairBatch:
    """Accidental-only pairs from signal events against time-shifted idler events.

    See :func:`iter_accidentals_stream`.
    """
    return PairBatch.concat(list(iter_accidentals_stream(events, delta_t, shift, cal, basis,
                                                         period, max_pairs)), basis)


def iter_accidentals_stream(events: EventStream, delta_t: float, shift: float, cal: Calibration,
                            basis: Basis, period: Optional[float] = None,
                            max_pairs: int = DEFAULT_MAX_PAIRS) -> Iterator[PairBatch]:
    """Idler times are shifted by ``+shift`` ns and wrapped circularly over the
    acquisition (``period`` ns, default the span of the stream), so the shifted
    run covers the same duration as the raw one and needs no rescaling.
    ``shift`` must be at least ten coincidence windows.
    """
    if shift < MIN_SHIFT_FACTOR * delta_t:
        raise ConfigError(f"shift must be at least {MIN_SHIFT_FACTOR:g} x delta_t")
    _check_sorted(events)
    basis = Basis(basis)
    w = window_ticks(delta_t, events.time_quantum)
    if len(events) == 0:
        return iter(())
    c = _calibrate(events, cal, basis)
    t0 = int(events.t[0])
    span = int(events.t[-1]) - t0 + 1
    if period is not None:
        span = max(int(round(period / events.time_quantum)), span)
    shift_ticks = int(round(shift / events.time_quantum))
    sig = np.flatnonzero(events.arm == Arm.SIGNAL)
    idl = np.flatnonzero(events.arm == Arm.IDLER)
    t_shift = (c.t[idl] - t0 + shift_ticks) % span + t0
    order = np.argsort(t_shift, kind="stable")
    return _cross_join(c, sig, idl[order], t_shift[order], w, events.time_quantum, basis, max_pairs)


def _frame_join(frames: FrameSequence, cal: Calibration, basis: Basis, lag: int,
                max_pairs: int) -> Iterator[PairBatch]:
    basis = Basis(basis)
    x, y = pixel_to_coords(frames.px, frames.py, frames.arm, cal, basis)
    c = _Calibrated(np.zeros(frames.n_hits, dtype=np.int64), x, y, None)
    sig = np.flatnonzero(frames.arm == Arm.SIGNAL)
    idl = np.flatnonzero(frames.arm == Arm.IDLER)
    idl_frames = frames.frame[idl]  # sorted: rows are ordered by frame first
    target = frames.frame[sig] + lag
    lo = np.searchsorted(idl_frames, target, side="left")
    counts = np.searchsorted(idl_frames, target, side="right") - lo
    for a, b in _chunked_pairs(lo, counts, max_pairs):
        yield _batch(c, sig[a], idl[b], c.t[idl[b]], 1.0, basis)


def iter_coincidences_frames(frames: FrameSequence, cal: Calibration, basis: Basis,
                             max_pairs: int = DEFAULT_MAX_PAIRS) -> Iterator[PairBatch]:
    return _frame_join(frames, cal, basis, 0, max_pairs)


def find_coincidences_frames(frames: FrameSequence, cal: Calibration, basis: Basis) -> PairBatch:
    """Every signal hit paired with every idler hit of the same frame (``dt = 0``)."""
    return PairBatch.concat(list(iter_coincidences_frames(frames, cal, basis)), basis)


def iter_accidentals_frames(frames: FrameSequence, cal: Calibration, basis: Basis,
                            max_pairs: int = DEFAULT_MAX_PAIRS) -> Iterator[PairBatch]:
    if frames.n_frames < 2:
        raise ConfigError("adjacent-frame accidentals need at least two frames")
    return _frame_join(frames, cal, basis, 1, max_pairs)


def estimate_accidentals_frames(frames: FrameSequence, cal: Calibration, basis: Basis) -> PairBatch:
    """Signal hits of frame k paired with idler hits of frame k+1."""
    return PairBatch.concat(list(iter_accidentals_frames(frames, cal, basis)), basis)


def _as_batches(pairs: Pairs) -> Iterator[PairBatch]:
    if isinstance(pairs, PairBatch):
        yield pairs
    else:
        yield from pairs


def _projection_uv(batch: PairBatch, axis_kind: AxisKind):
    if AxisKind(axis_kind) is AxisKind.MINUS:
        return batch.x1 - batch.x2, batch.y1 - batch.y2
    return batch.x1 + batch.x2, batch.y1 + batch.y2


def accumulate_projection(pairs: Pairs, axis_kind: AxisKind, spec: BinSpec) -> ProjectionHist:
    """Histogram of ``(x1 - x2, y1 - y2)`` or ``(x1 + x2, y1 + y2)`` over the pairs."""
    hist = ProjectionHist.empty(axis_kind, spec)
    basis = None
    for batch in _as_batches(pairs):
        if basis is not None and batch.basis != basis:
            raise ConfigError("pairs mix position and momentum bases")
        basis = batch.basis
        counts, over = spec.bincount(*_projection_uv(batch, axis_kind))
        hist = hist.merge(ProjectionHist(axis_kind, spec, counts, over))
    return hist


def accumulate_joint_axis(pairs: Pairs, axis: Axis, spec: BinSpec) -> JointAxisHist:
    """Joint histogram of (photon-1, photon-2) coordinates along ``axis``."""
    axis = Axis(axis)
    hist = JointAxisHist.empty(axis, spec)
    basis = None
    for batch in _as_batches(pairs):
        if basis is not None and batch.basis != basis:
            raise ConfigError("pairs mix position and momentum bases")
        basis = batch.basis
        if axis is Axis.X:
            counts, over = spec.bincount(batch.x1, batch.x2)
        else:
            counts, over = spec.bincount(batch.y1, batch.y2)
        hist = hist.merge(JointAxisHist(axis, spec, counts, over))
    return hist


def subtract_projection(raw: ProjectionHist, accidental: ProjectionHist,
                        normalization: float = 1.0) -> ProjectionGrid:
    """``raw - normalization * accidental`` bin by bin; values may go negative."""
    if raw.axis_kind != accidental.axis_kind or raw.spec != accidental.spec:
        raise ConfigError("raw and accidental histograms have different geometry")
    return ProjectionGrid(raw.axis_kind, raw.spec,
                          raw.counts.astype(np.float64) - normalization * accidental.counts)


@dataclass
class Accumulated:
    """Everything the certification pipeline needs from one pass over the pairs."""

    projection: ProjectionHist
    joint: dict
    n_pairs: int
    n_genuine: Optional[int]


def accumulate_pass(pairs: Pairs, axis_kind: AxisKind, spec: BinSpec,
                    joint_specs: Optional[dict] = None) -> Accumulated:
    """Single sweep over chunked pairs filling a projection and joint-axis histograms."""
    joint_specs = joint_specs or {}
    proj = ProjectionHist.empty(axis_kind, spec)
    joint = {Axis(a): JointAxisHist.empty(a, s) for a, s in joint_specs.items()}
    n_pairs = 0
    n_genuine: Optional[int] = 0
    for batch in _as_batches(pairs):
        proj = proj.merge(accumulate_projection(batch, axis_kind, spec))
        for a in joint:
            joint[a] = joint[a].merge(accumulate_joint_axis(batch, a, joint[a].spec))
        n_pairs += len(batch)
        if batch.genuine is None:
            n_genuine = None
        elif n_genuine is not None:
            n_genuine += int(batch.genuine.sum())
    return Accumulated(proj, joint, n_pairs, n_genuine)


def _lattice_origin(offset: float, half: int, scale: float) -> float:
    frac = offset - round(offset)
    return (-half + frac) * scale


def projection_spec(cal: Calibration, basis: Basis, axis_kind: AxisKind, half: int = 25) -> BinSpec:
    """One-pixel bins, ``2*half+1`` per axis, aligned on the pixel lattice of the projection."""
    s = cal.scale(basis)
    (c1x, c1y), (c2x, c2y) = cal.signal_center, cal.idler_center
    if AxisKind(axis_kind) is AxisKind.MINUS:
        off_u, off_v = c2x - c1x, c2y - c1y
    else:
        off_u, off_v = -(c1x + c2x), -(c1y + c2y)
    n = 2 * half + 1
    return BinSpec(s, s, n, n, _lattice_origin(off_u, half, s), _lattice_origin(off_v, half, s))


def joint_spec(cal: Calibration, geom: CameraGeometry, basis: Basis, axis: Axis) -> BinSpec:
    """One-pixel bins spanning both arm regions along ``axis``."""
    s = cal.scale(basis)
    k = 0 if Axis(axis) is Axis.X else 2
    r1 = geom.arm_region(Arm.SIGNAL)
    r2 = geom.arm_region(Arm.IDLER)
    c1 = cal.signal_center[k // 2]
    c2 = cal.idler_center[k // 2]
    lo1, hi1 = (r1[k] - c1) * s, (r1[k + 1] - 1 - c1) * s
    lo2, hi2 = (r2[k] - c2) * s, (r2[k + 1] - 1 - c2) * s
    return BinSpec.covering(lo1, hi1, s, lo2, hi2, s)
