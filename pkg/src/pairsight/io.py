"""Event and frame file formats.

Event text files start with ``pairsight-events v1 <width> <height> <time_quantum_ns>``
followed by one ``t_ticks px py arm`` record per line, ``arm`` being ``S`` or
``I``.  The binary twin starts with a magic string and version byte, then a
fixed header and a series of length-prefixed chunks so readers can split the
file on chunk boundaries.

Frame text files start with ``pairsight-frames v1 <width> <height> <exposure_ns>``;
each ``F <index>`` line opens a frame and is followed by ``px py arm`` hit
lines.  Empty frames are omitted except the last one, which fixes the frame
count.
"""
from __future__ import annotations

import os
import struct
import warnings
from pathlib import Path
from typing import Union

import numpy as np

from .core import Arm, EventStream, FrameSequence
from .errors import ParseError

PathLike = Union[str, os.PathLike]

EVENTS_MAGIC = "pairsight-events"
FRAMES_MAGIC = "pairsight-frames"
BINARY_MAGIC = b"PSEVBIN"
BINARY_VERSION = 1
_BIN_HEADER = struct.Struct("<IId")  # width, height, time_quantum
_CHUNK_HEADER = struct.Struct("<I")
_RECORD_BYTES = 8 + 4 + 4 + 1
DEFAULT_CHUNK = 1 << 20

_ARM_LETTER = {"S": Arm.SIGNAL, "I": Arm.IDLER}


class OrderWarning(UserWarning):
    """Timestamps in a file are not non-decreasing."""


class DuplicateHitWarning(UserWarning):
    """A frame lists the same pixel of one arm more than once."""


def _fmt_float(x: float) -> str:
    return repr(float(x))


def _header(line: str, magic: str, path) -> tuple[int, int, float]:
    parts = line.split()
    if len(parts) != 5 or parts[0] != magic:
        raise ParseError(f"expected header '{magic} v1 <width> <height> <value>'", 1, path)
    if parts[1] != "v1":
        raise ParseError(f"unsupported version {parts[1]!r}", 1, path)
    try:
        width, height, value = int(parts[2]), int(parts[3]), float(parts[4])
    except ValueError:
        raise ParseError("malformed header fields", 1, path) from None
    if width <= 0 or height <= 0 or not value > 0:
        raise ParseError("header values must be positive", 1, path)
    return width, height, value


def _check_order(stream: EventStream, path, resort: bool) -> EventStream:
    if stream.is_sorted():
        return stream
    bad = int(np.flatnonzero(stream.t[1:] < stream.t[:-1])[0]) + 1
    msg = f"{path}: timestamps decrease at record {bad}"
    warnings.warn(msg + ("; re-sorting" if resort else ""), OrderWarning, stacklevel=3)
    return stream.sorted() if resort else stream


# ---------------------------------------------------------------------- events, text

def write_events(stream: EventStream, path: PathLike, binary: bool = False,
                 chunk_size: int = DEFAULT_CHUNK) -> None:
    """Write ``stream`` as text (default) or as the chunked binary container."""
    if binary:
        _write_events_binary(stream, path, chunk_size)
        return
    letters = np.array(["S", "I"])[stream.arm.astype(np.intp)] if len(stream) else np.array([], str)
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(f"{EVENTS_MAGIC} v1 {stream.width} {stream.height} {_fmt_float(stream.time_quantum)}\n")
        step = 1 << 18
        for lo in range(0, len(stream), step):
            sl = slice(lo, lo + step)
            rows = zip(stream.t[sl].tolist(), stream.px[sl].tolist(), stream.py[sl].tolist(),
                       letters[sl].tolist())
            fh.write("".join(f"{t} {x} {y} {a}\n" for t, x, y, a in rows))


def _parse_event_lines(lines, width, height, path):
    # slow path with exact line numbers
    t, px, py, arm = [], [], [], []
    for no, line in enumerate(lines, start=2):
        parts = line.split()
        if not parts:
            continue
        if len(parts) != 4:
            raise ParseError(f"expected 't px py arm', got {line.strip()!r}", no, path)
        try:
            ti, x, y = int(parts[0]), int(parts[1]), int(parts[2])
        except ValueError:
            raise ParseError(f"non-integer field in {line.strip()!r}", no, path) from None
        if parts[3] not in _ARM_LETTER:
            raise ParseError(f"arm must be S or I, got {parts[3]!r}", no, path)
        if ti < 0:
            raise ParseError(f"negative timestamp {ti}", no, path)
        if not (0 <= x < width and 0 <= y < height):
            raise ParseError(f"pixel ({x}, {y}) outside {width}x{height} sensor", no, path)
        t.append(ti)
        px.append(x)
        py.append(y)
        arm.append(int(_ARM_LETTER[parts[3]]))
    return t, px, py, arm


def _parse_events_fast(body: str, width: int, height: int):
    tok = body.split()
    if len(tok) % 4:
        return None
    try:
        t = np.array(tok[0::4]).astype(np.int64)
        px = np.array(tok[1::4]).astype(np.int32)
        py = np.array(tok[2::4]).astype(np.int32)
    except (ValueError, OverflowError):
        return None
    letters = np.array(tok[3::4])
    sig = letters == "S"
    if not np.all(sig | (letters == "I")):
        return None
    if len(t) and (t.min() < 0 or px.min() < 0 or py.min() < 0
                   or px.max() >= width or py.max() >= height):
        return None
    n_lines = body.count("\n") + (1 if body and not body.endswith("\n") else 0)
    if n_lines != len(t):
        return None  # blank lines or several records on one line
    return t, px, py, (~sig).astype(np.int8)


def read_events(path: PathLike, resort: bool = False) -> EventStream:
    """Read a text or binary event file (detected from its first bytes).

    Raises
    ------
    ParseError
        On a missing or malformed header or any malformed record; the
        message names the offending line (text) or record (binary).

    Out-of-order timestamps trigger an :class:`OrderWarning`; with
    ``resort=True`` the returned stream is sorted by time.
    """
    with open(path, "rb") as fh:
        head = fh.read(len(BINARY_MAGIC))
    if head == BINARY_MAGIC:
        return _check_order(_read_events_binary(path), path, resort)
    with open(path, "r", encoding="ascii", errors="replace") as fh:
        first = fh.readline()
        body = fh.read()
    if not first:
        raise ParseError("missing header", 1, path)
    width, height, q = _header(first, EVENTS_MAGIC, path)
    parsed = _parse_events_fast(body, width, height)
    if parsed is None:
        parsed = _parse_event_lines(body.splitlines(), width, height, path)
    stream = EventStream(*parsed, width, height, q)
    return _check_order(stream, path, resort)


# ---------------------------------------------------------------------- events, binary

def _write_events_binary(stream: EventStream, path: PathLike, chunk_size: int) -> None:
    if chunk_size <= 0:
        raise ValueError("chunk_size must be positive")
    with open(path, "wb") as fh:
        fh.write(BINARY_MAGIC)
        fh.write(bytes([BINARY_VERSION]))
        fh.write(_BIN_HEADER.pack(stream.width, stream.height, stream.time_quantum))
        for lo in range(0, len(stream), chunk_size):
            sl = slice(lo, lo + chunk_size)
            n = len(stream.t[sl])
            fh.write(_CHUNK_HEADER.pack(n))
            fh.write(stream.t[sl].astype("<i8").tobytes())
            fh.write(stream.px[sl].astype("<i4").tobytes())
            fh.write(stream.py[sl].astype("<i4").tobytes())
            fh.write(stream.arm[sl].astype("i1").tobytes())


def iter_binary_chunks(path: PathLike):
    """Yield ``(offset, n)`` for every chunk of a binary event file."""
    data = Path(path).read_bytes()
    yield from _chunk_index(data, path)[1]


def _chunk_index(data: bytes, path):
    start = len(BINARY_MAGIC)
    if len(data) < start + 1 + _BIN_HEADER.size or data[:start] != BINARY_MAGIC:
        raise ParseError("missing binary header", None, path)
    if data[start] != BINARY_VERSION:
        raise ParseError(f"unsupported binary version {data[start]}", None, path)
    header = _BIN_HEADER.unpack_from(data, start + 1)
    pos = start + 1 + _BIN_HEADER.size
    chunks = []
    while pos < len(data):
        if pos + _CHUNK_HEADER.size > len(data):
            raise ParseError(f"truncated chunk header at byte {pos}", None, path)
        (n,) = _CHUNK_HEADER.unpack_from(data, pos)
        pos += _CHUNK_HEADER.size
        if pos + n * _RECORD_BYTES > len(data):
            raise ParseError(f"truncated chunk at byte {pos} ({n} records announced)", None, path)
        chunks.append((pos, n))
        pos += n * _RECORD_BYTES
    return header, chunks


def _read_events_binary(path: PathLike) -> EventStream:
    data = Path(path).read_bytes()
    (width, height, q), chunks = _chunk_index(data, path)
    total = sum(n for _, n in chunks)
    t = np.empty(total, np.int64)
    px = np.empty(total, np.int32)
    py = np.empty(total, np.int32)
    arm = np.empty(total, np.int8)
    k = 0
    for pos, n in chunks:
        t[k:k + n] = np.frombuffer(data, "<i8", n, pos)
        pos += 8 * n
        px[k:k + n] = np.frombuffer(data, "<i4", n, pos)
        pos += 4 * n
        py[k:k + n] = np.frombuffer(data, "<i4", n, pos)
        pos += 4 * n
        arm[k:k + n] = np.frombuffer(data, "i1", n, pos)
        k += n
    bad = (t < 0) | (px < 0) | (px >= width) | (py < 0) | (py >= height) | (arm < 0) | (arm > 1)
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise ParseError(f"record {i} invalid: t={t[i]} px={px[i]} py={py[i]} arm={arm[i]}", None, path)
    return EventStream(t, px, py, arm, width, height, q)


# ---------------------------------------------------------------------- frames

def write_frames(frames: FrameSequence, path: PathLike) -> None:
    letters = np.array(["S", "I"])
    bounds = np.flatnonzero(np.diff(frames.frame)) + 1
    starts = np.concatenate([[0], bounds]) if frames.n_hits else np.zeros(0, np.int64)
    ends = np.concatenate([bounds, [frames.n_hits]]) if frames.n_hits else np.zeros(0, np.int64)
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(f"{FRAMES_MAGIC} v1 {frames.width} {frames.height} {_fmt_float(frames.exposure)}\n")
        last_written = -1
        for lo, hi in zip(starts.tolist(), ends.tolist()):
            k = int(frames.frame[lo])
            rows = zip(frames.px[lo:hi].tolist(), frames.py[lo:hi].tolist(),
                       letters[frames.arm[lo:hi].astype(np.intp)].tolist())
            fh.write(f"F {k}\n" + "".join(f"{x} {y} {a}\n" for x, y, a in rows))
            last_written = k
        if frames.n_frames - 1 > last_written:
            fh.write(f"F {frames.n_frames - 1}\n")


def read_frames(path: PathLike) -> FrameSequence:
    """Read a frame file.

    A pixel listed twice for the same arm of one frame is kept once and
    reported with a :class:`DuplicateHitWarning` (a binary pixel fires at
    most once per exposure).
    """
    with open(path, "r", encoding="ascii", errors="replace") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ParseError("missing header", 1, path)
    width, height, exposure = _header(lines[0], FRAMES_MAGIC, path)
    frame, px, py, arm = [], [], [], []
    current = None
    last = -1
    seen = set()
    for no, line in enumerate(lines[1:], start=2):
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "F":
            if len(parts) != 2:
                raise ParseError(f"expected 'F <index>', got {line.strip()!r}", no, path)
            try:
                current = int(parts[1])
            except ValueError:
                raise ParseError(f"bad frame index {parts[1]!r}", no, path) from None
            if current < 0:
                raise ParseError(f"negative frame index {current}", no, path)
            if current <= last:
                warnings.warn(f"{path}:{no}: frame {current} out of order", OrderWarning, stacklevel=2)
            last = max(last, current)
            continue
        if current is None:
            raise ParseError("hit line before the first 'F <index>' line", no, path)
        if len(parts) != 3:
            raise ParseError(f"expected 'px py arm', got {line.strip()!r}", no, path)
        try:
            x, y = int(parts[0]), int(parts[1])
        except ValueError:
            raise ParseError(f"non-integer pixel in {line.strip()!r}", no, path) from None
        if parts[2] not in _ARM_LETTER:
            raise ParseError(f"arm must be S or I, got {parts[2]!r}", no, path)
        if not (0 <= x < width and 0 <= y < height):
            raise ParseError(f"pixel ({x}, {y}) outside {width}x{height} sensor", no, path)
        a = int(_ARM_LETTER[parts[2]])
        key = (current, a, x, y)
        if key in seen:
            warnings.warn(f"{path}:{no}: duplicate hit ({x}, {y}, {parts[2]}) in frame {current} collapsed",
                          DuplicateHitWarning, stacklevel=2)
            continue
        seen.add(key)
        frame.append(current)
        px.append(x)
        py.append(y)
        arm.append(a)
    return FrameSequence(frame, px, py, arm, last + 1, exposure, width, height)
