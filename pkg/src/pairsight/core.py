"""Domain types and pixel-to-physical calibration.

Coordinates are expressed per arm with the arm-region centre as origin.
Lengths are in micrometres, transverse momenta in rad/um and times in
nanoseconds; event timestamps are integer ticks of ``time_quantum`` ns.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Optional

import numpy as np

from .errors import ConfigError, DomainError

FWHM_PER_SIGMA = 2.0 * math.sqrt(2.0 * math.log(2.0))


class Arm(enum.IntEnum):
    SIGNAL = 0
    IDLER = 1

    @property
    def letter(self) -> str:
        return "S" if self is Arm.SIGNAL else "I"

    @classmethod
    def from_letter(cls, letter: str) -> "Arm":
        if letter == "S":
            return cls.SIGNAL
        if letter == "I":
            return cls.IDLER
        raise ValueError(f"unknown arm tag {letter!r}")


class Basis(str, enum.Enum):
    POSITION = "position"
    MOMENTUM = "momentum"


class AxisKind(str, enum.Enum):
    MINUS = "minus"
    SUM = "sum"


class Axis(str, enum.Enum):
    X = "x"
    Y = "y"


@dataclass(frozen=True)
class PhotonEvent:
    t: int
    px: int
    py: int
    arm: Arm


@dataclass(frozen=True)
class CameraGeometry:
    """Sensor layout and timing characteristics of a single-photon camera.

    The active area is split into two disjoint halves, one per arm.  With
    ``arm_split="columns"`` the signal arm owns ``px < width // 2`` and the
    idler arm the rest; ``"rows"`` splits along ``py`` instead.
    """

    width: int
    height: int
    pitch: float  # um
    arm_split: str = "columns"
    time_quantum: float = 1.0  # ns
    jitter_fwhm: float = 0.0  # ns
    dead_time: float = 0.0  # ns
    quantum_efficiency: float = 1.0
    name: str = "camera"

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ConfigError("sensor dimensions must be positive")
        if self.arm_split not in ("columns", "rows"):
            raise ConfigError(f"arm_split must be 'columns' or 'rows', got {self.arm_split!r}")
        split_dim = self.width if self.arm_split == "columns" else self.height
        if split_dim < 2:
            raise ConfigError("sensor too small to split into two arms")
        if self.pitch <= 0 or self.time_quantum <= 0:
            raise ConfigError("pitch and time_quantum must be positive")
        if self.jitter_fwhm < 0 or self.dead_time < 0:
            raise ConfigError("jitter_fwhm and dead_time must be non-negative")
        if not 0.0 <= self.quantum_efficiency <= 1.0:
            raise ConfigError("quantum_efficiency must lie in [0, 1]")

    @property
    def jitter_sigma(self) -> float:
        return self.jitter_fwhm / FWHM_PER_SIGMA

    def arm_region(self, arm: Arm) -> tuple[int, int, int, int]:
        """Half-open pixel box ``(px0, px1, py0, py1)`` owned by ``arm``."""
        if self.arm_split == "columns":
            half = self.width // 2
            if Arm(arm) is Arm.SIGNAL:
                return 0, half, 0, self.height
            return half, self.width, 0, self.height
        half = self.height // 2
        if Arm(arm) is Arm.SIGNAL:
            return 0, self.width, 0, half
        return 0, self.width, half, self.height

    def region_center(self, arm: Arm) -> tuple[float, float]:
        px0, px1, py0, py1 = self.arm_region(arm)
        return (px0 + px1 - 1) / 2.0, (py0 + py1 - 1) / 2.0

    def arm_of_pixel(self, px, py):
        """Arm index (0 signal, 1 idler) for each pixel; raises if off-sensor."""
        px = np.asarray(px)
        py = np.asarray(py)
        if np.any((px < 0) | (px >= self.width) | (py < 0) | (py >= self.height)):
            raise DomainError("pixel outside the sensor")
        if self.arm_split == "columns":
            return (px >= self.width // 2).astype(np.int8)
        return (py >= self.height // 2).astype(np.int8)

    def in_region(self, px, py, arm) -> np.ndarray:
        """Boolean mask: pixel lies inside the region of its arm."""
        px = np.asarray(px)
        py = np.asarray(py)
        arm = np.asarray(arm)
        inside = np.zeros(np.broadcast(px, py, arm).shape, dtype=bool)
        for a in Arm:
            px0, px1, py0, py1 = self.arm_region(a)
            inside |= (arm == a) & (px >= px0) & (px < px1) & (py >= py0) & (py < py1)
        return inside


@dataclass(frozen=True)
class Calibration:
    """Optical constants mapping pixels to crystal-plane coordinates.

    ``magnification`` applies in the imaging (position) configuration and
    ``f_eff`` (mm) in the Fourier (momentum) configuration.  Centres are
    sub-pixel positions of the optical axis in each arm region.  The sensor
    pixel pitch (um) is carried along so pairs can be calibrated without the
    full camera geometry.
    """

    magnification: float
    f_eff: float  # mm
    wavelength: float  # nm
    pitch: float  # um
    signal_center: tuple[float, float]
    idler_center: tuple[float, float]

    def __post_init__(self):
        if min(self.magnification, self.f_eff, self.wavelength, self.pitch) <= 0:
            raise ConfigError("magnification, f_eff, wavelength and pitch must be positive")

    @classmethod
    def for_geometry(cls, geom: CameraGeometry, magnification: float, f_eff: float,
                     wavelength: float = 810.0) -> "Calibration":
        """Calibration whose arm centres sit in the middle of each arm region."""
        return cls(magnification, f_eff, wavelength, geom.pitch,
                   geom.region_center(Arm.SIGNAL), geom.region_center(Arm.IDLER))

    def center(self, arm: Arm) -> tuple[float, float]:
        return self.signal_center if Arm(arm) is Arm.SIGNAL else self.idler_center

    def scale(self, basis: Basis) -> float:
        """Physical units per pixel: um (position) or rad/um (momentum)."""
        if Basis(basis) is Basis.POSITION:
            return self.pitch / self.magnification
        wavelength_um = self.wavelength * 1e-3
        f_eff_um = self.f_eff * 1e3
        return (2.0 * math.pi / wavelength_um) * self.pitch / f_eff_um


def _centers(cal: Calibration, arm):
    table = np.array([cal.signal_center, cal.idler_center], dtype=np.float64)
    arm = np.asarray(arm, dtype=np.intp)
    return table[arm, 0], table[arm, 1]


def pixel_to_coords(px, py, arm, cal: Calibration, basis: Basis):
    """Vectorised pixel-to-physical conversion for pixels of known arm.

    No region check; callers that accept user input go through
    :func:`pixel_to_position` / :func:`pixel_to_momentum`.
    """
    s = cal.scale(basis)
    cx, cy = _centers(cal, arm)
    x = (np.asarray(px, dtype=np.float64) - cx) * s
    y = (np.asarray(py, dtype=np.float64) - cy) * s
    return x, y


def coords_to_pixel(x, y, arm, cal: Calibration, geom: CameraGeometry, basis: Basis):
    """Nearest pixel for physical coordinates, plus an in-region mask."""
    s = cal.scale(basis)
    cx, cy = _centers(cal, arm)
    px = np.rint(np.asarray(x) / s + cx)
    py = np.rint(np.asarray(y) / s + cy)
    big = np.iinfo(np.int32).max
    px = np.clip(np.nan_to_num(px, nan=-1.0), -1, big).astype(np.int64)
    py = np.clip(np.nan_to_num(py, nan=-1.0), -1, big).astype(np.int64)
    inside = geom.in_region(px, py, arm)
    return px, py, inside


def _checked(px, py, cal, geom, basis, arm):
    inferred = geom.arm_of_pixel(px, py)
    if arm is not None and np.any(inferred != int(arm)):
        raise DomainError(f"pixel outside the {Arm(arm).name.lower()} arm region")
    x, y = pixel_to_coords(px, py, inferred, cal, basis)
    if np.ndim(x) == 0:
        return float(x), float(y)
    return x, y


def pixel_to_position(px, py, cal: Calibration, geom: CameraGeometry, arm: Optional[Arm] = None):
    """Crystal-plane position (um) of a pixel in the imaging configuration.

    Without ``arm`` the camera half containing the pixel decides the arm.
    Off-sensor pixels, or pixels outside the requested arm's region, raise
    :class:`DomainError`.
    """
    return _checked(px, py, cal, geom, Basis.POSITION, arm)


def pixel_to_momentum(px, py, cal: Calibration, geom: CameraGeometry, arm: Optional[Arm] = None):
    """Transverse momentum (rad/um) of a pixel in the Fourier configuration."""
    return _checked(px, py, cal, geom, Basis.MOMENTUM, arm)


def field_of_view(geom: CameraGeometry, cal: Calibration, basis: Basis, arm: Arm):
    """Physical extent ``(xmin, xmax, ymin, ymax)`` of an arm region, pixel edges included."""
    px0, px1, py0, py1 = geom.arm_region(arm)
    s = cal.scale(basis)
    cx, cy = cal.center(arm)
    return ((px0 - 0.5 - cx) * s, (px1 - 0.5 - cx) * s,
            (py0 - 0.5 - cy) * s, (py1 - 0.5 - cy) * s)


# Camera presets and their imaging calibrations.
def tpx3cam(jitter_fwhm: float = 6.0, dead_time: float = 1000.0,
            quantum_efficiency: float = 0.2) -> CameraGeometry:
    """256 x 256 event camera, 55 um pitch, 1.5625 ns TDC bins."""
    return CameraGeometry(width=256, height=256, pitch=55.0, arm_split="columns",
                          time_quantum=1.5625, jitter_fwhm=jitter_fwhm,
                          dead_time=dead_time, quantum_efficiency=quantum_efficiency,
                          name="tpx3cam")


def spad_spc3(quantum_efficiency: float = 0.05) -> CameraGeometry:
    """64 x 32 SPAD frame camera, 150 um pitch."""
    return CameraGeometry(width=64, height=32, pitch=150.0, arm_split="columns",
                          time_quantum=1.0, jitter_fwhm=0.0, dead_time=0.0,
                          quantum_efficiency=quantum_efficiency, name="spad")


def tpx3cam_calibration(geom: Optional[CameraGeometry] = None) -> Calibration:
    return Calibration.for_geometry(geom or tpx3cam(), magnification=12.0, f_eff=100.0)


def spad_calibration(geom: Optional[CameraGeometry] = None) -> Calibration:
    return Calibration.for_geometry(geom or spad_spc3(), magnification=9.0, f_eff=75.0)


@dataclass
class DetectionStats:
    truth: int = 0
    efficiency_dropped: int = 0
    clipped: int = 0
    dead_time_dropped: int = 0
    kept: int = 0


@dataclass
class EventStream:
    """Columnar stream of :class:`PhotonEvent` records.

    ``pair_id`` is an optional truth tag carried by simulated streams
    (-1 for noise); it is never written to disk.
    """

    t: np.ndarray
    px: np.ndarray
    py: np.ndarray
    arm: np.ndarray
    width: int
    height: int
    time_quantum: float
    pair_id: Optional[np.ndarray] = None
    stats: Optional[DetectionStats] = None

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=np.int64)
        self.px = np.asarray(self.px, dtype=np.int32)
        self.py = np.asarray(self.py, dtype=np.int32)
        self.arm = np.asarray(self.arm, dtype=np.int8)
        n = len(self.t)
        if not (len(self.px) == len(self.py) == len(self.arm) == n):
            raise ValueError("column lengths differ")
        if self.pair_id is not None:
            self.pair_id = np.asarray(self.pair_id, dtype=np.int64)
            if len(self.pair_id) != n:
                raise ValueError("pair_id length differs")

    @classmethod
    def empty(cls, width: int, height: int, time_quantum: float) -> "EventStream":
        z = np.zeros(0, dtype=np.int64)
        return cls(z, z, z, z, width, height, time_quantum)

    @classmethod
    def from_events(cls, events: Iterable[PhotonEvent], width: int, height: int,
                    time_quantum: float) -> "EventStream":
        events = list(events)
        return cls(np.array([e.t for e in events], dtype=np.int64),
                   np.array([e.px for e in events], dtype=np.int32),
                   np.array([e.py for e in events], dtype=np.int32),
                   np.array([int(e.arm) for e in events], dtype=np.int8),
                   width, height, time_quantum)

    def __len__(self) -> int:
        return len(self.t)

    def __iter__(self) -> Iterator[PhotonEvent]:
        for t, px, py, arm in zip(self.t.tolist(), self.px.tolist(),
                                  self.py.tolist(), self.arm.tolist()):
            yield PhotonEvent(t, px, py, Arm(arm))

    def __eq__(self, other) -> bool:
        if not isinstance(other, EventStream):
            return NotImplemented
        return (self.width == other.width and self.height == other.height
                and self.time_quantum == other.time_quantum
                and np.array_equal(self.t, other.t) and np.array_equal(self.px, other.px)
                and np.array_equal(self.py, other.py) and np.array_equal(self.arm, other.arm))

    def is_sorted(self) -> bool:
        return bool(np.all(self.t[1:] >= self.t[:-1]))

    def take(self, index) -> "EventStream":
        return EventStream(self.t[index], self.px[index], self.py[index], self.arm[index],
                           self.width, self.height, self.time_quantum,
                           None if self.pair_id is None else self.pair_id[index])

    def sorted(self) -> "EventStream":
        return self.take(np.argsort(self.t, kind="stable"))

    def duration_ns(self) -> float:
        if len(self) == 0:
            return 0.0
        return float(self.t[-1] - self.t[0] + 1) * self.time_quantum


@dataclass(frozen=True)
class Frame:
    index: int
    hits_signal: frozenset
    hits_idler: frozenset
    exposure: float

    def __post_init__(self):
        if self.index < 0:
            raise ValueError("frame index must be non-negative")
        if self.exposure <= 0:
            raise ValueError("exposure must be positive")


@dataclass
class FrameSequence:
    """Columnar frame-camera data: one row per (frame, arm, pixel) hit.

    Rows are kept sorted by ``(frame, arm, py, px)`` and never repeat a pixel
    within one frame and arm.
    """

    frame: np.ndarray
    px: np.ndarray
    py: np.ndarray
    arm: np.ndarray
    n_frames: int
    exposure: float
    width: int
    height: int
    stats: Optional[DetectionStats] = None

    def __post_init__(self):
        if self.exposure <= 0:
            raise ValueError("exposure must be positive")
        self.frame = np.asarray(self.frame, dtype=np.int64)
        self.px = np.asarray(self.px, dtype=np.int32)
        self.py = np.asarray(self.py, dtype=np.int32)
        self.arm = np.asarray(self.arm, dtype=np.int8)
        if len(self.frame) and (self.frame.min() < 0 or self.frame.max() >= self.n_frames):
            raise ValueError("frame index out of range")
        key = np.stack([self.px, self.py, self.arm, self.frame]) if len(self.frame) else None
        if key is not None:
            order = np.lexsort(key)
            k = key[:, order]
            dup = np.zeros(len(order), dtype=bool)
            dup[1:] = np.all(k[:, 1:] == k[:, :-1], axis=0)
            order = order[~dup]
            self.frame, self.px = self.frame[order], self.px[order]
            self.py, self.arm = self.py[order], self.arm[order]

    @classmethod
    def from_frames(cls, frames: Iterable[Frame], width: int, height: int,
                    n_frames: Optional[int] = None) -> "FrameSequence":
        frames = list(frames)
        rows = []
        exposure = frames[0].exposure if frames else 1.0
        for fr in frames:
            rows += [(fr.index, px, py, 0) for px, py in fr.hits_signal]
            rows += [(fr.index, px, py, 1) for px, py in fr.hits_idler]
        arr = np.array(rows, dtype=np.int64).reshape(-1, 4)
        if n_frames is None:
            n_frames = max((fr.index for fr in frames), default=-1) + 1
        return cls(arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3], n_frames, exposure, width, height)

    def __len__(self) -> int:
        return self.n_frames

    @property
    def n_hits(self) -> int:
        return len(self.frame)

    def __iter__(self) -> Iterator[Frame]:
        bounds = np.searchsorted(self.frame, np.arange(self.n_frames + 1))
        for k in range(self.n_frames):
            sl = slice(bounds[k], bounds[k + 1])
            arm, px, py = self.arm[sl], self.px[sl].tolist(), self.py[sl].tolist()
            sig = frozenset((x, y) for x, y, a in zip(px, py, arm) if a == 0)
            idl = frozenset((x, y) for x, y, a in zip(px, py, arm) if a == 1)
            yield Frame(k, sig, idl, self.exposure)

    def __eq__(self, other) -> bool:
        if not isinstance(other, FrameSequence):
            return NotImplemented
        return (self.n_frames == other.n_frames and self.exposure == other.exposure
                and self.width == other.width and self.height == other.height
                and all(np.array_equal(a, b) for a, b in
                        [(self.frame, other.frame), (self.px, other.px),
                         (self.py, other.py), (self.arm, other.arm)]))


@dataclass(frozen=True)
class CoincidencePair:
    x1: float
    y1: float
    x2: float
    y2: float
    dt: float
    basis: Basis


@dataclass
class PairBatch:
    """Columnar batch of coincidence pairs sharing one basis.

    Index 1 refers to the signal-arm member, index 2 to the idler-arm member.
    ``signal_index``/``idler_index`` point back into the source stream when
    known; ``genuine`` marks pairs whose members share a truth pair id.
    """

    x1: np.ndarray
    y1: np.ndarray
    x2: np.ndarray
    y2: np.ndarray
    dt: np.ndarray
    basis: Basis
    signal_index: Optional[np.ndarray] = None
    idler_index: Optional[np.ndarray] = None
    genuine: Optional[np.ndarray] = None

    @classmethod
    def empty(cls, basis: Basis) -> "PairBatch":
        z = np.zeros(0)
        i = np.zeros(0, dtype=np.int64)
        return cls(z, z, z, z, z, Basis(basis), i, i)

    def __len__(self) -> int:
        return len(self.x1)

    def __iter__(self) -> Iterator[CoincidencePair]:
        for vals in zip(self.x1.tolist(), self.y1.tolist(), self.x2.tolist(),
                        self.y2.tolist(), self.dt.tolist()):
            yield CoincidencePair(*vals, self.basis)

    @classmethod
    def concat(cls, batches: list["PairBatch"], basis: Basis) -> "PairBatch":
        if not batches:
            return cls.empty(basis)

        def cat(name):
            cols = [getattr(b, name) for b in batches]
            if any(c is None for c in cols):
                return None
            return np.concatenate(cols)

        return cls(cat("x1"), cat("y1"), cat("x2"), cat("y2"), cat("dt"), Basis(basis),
                   cat("signal_index"), cat("idler_index"), cat("genuine"))

    def records(self) -> np.ndarray:
        """(n, 5) array of ``x1, y1, x2, y2, dt`` rows."""
        return np.column_stack([self.x1, self.y1, self.x2, self.y2, self.dt])


CAMERA_PRESETS = {"tpx3cam": (tpx3cam, tpx3cam_calibration), "spad": (spad_spc3, spad_calibration)}
