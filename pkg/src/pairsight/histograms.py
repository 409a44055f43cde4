"""Mergeable 2D histograms over pair coordinates."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import Axis, AxisKind
from .errors import ConfigError


@dataclass(frozen=True)
class BinSpec:
    """Regular 2D binning; ``origin_*`` is the centre of bin ``(0, 0)``."""

    width_u: float
    width_v: float
    n_u: int
    n_v: int
    origin_u: float
    origin_v: float

    def __post_init__(self):
        if not (self.width_u > 0 and self.width_v > 0):
            raise ConfigError("bin widths must be positive")
        if self.n_u <= 0 or self.n_v <= 0:
            raise ConfigError("bin counts must be positive")

    @classmethod
    def centered(cls, width_u: float, half_u: int, width_v: Optional[float] = None,
                 half_v: Optional[int] = None) -> "BinSpec":
        """``2*half+1`` bins per axis with the middle bin centred on zero."""
        width_v = width_u if width_v is None else width_v
        half_v = half_u if half_v is None else half_v
        return cls(width_u, width_v, 2 * half_u + 1, 2 * half_v + 1,
                   -half_u * width_u, -half_v * width_v)

    @classmethod
    def covering(cls, lo_u: float, hi_u: float, width_u: float,
                 lo_v: float, hi_v: float, width_v: float) -> "BinSpec":
        """Bins of the given widths whose centres start at ``lo`` and reach ``hi``."""
        n_u = int(np.floor((hi_u - lo_u) / width_u + 0.5)) + 1
        n_v = int(np.floor((hi_v - lo_v) / width_v + 0.5)) + 1
        return cls(width_u, width_v, n_u, n_v, lo_u, lo_v)

    @property
    def shape(self) -> tuple[int, int]:
        return self.n_u, self.n_v

    def centers_u(self) -> np.ndarray:
        return self.origin_u + self.width_u * np.arange(self.n_u)

    def centers_v(self) -> np.ndarray:
        return self.origin_v + self.width_v * np.arange(self.n_v)

    def index(self, u, v):
        """Flat bin index for each ``(u, v)``, or -1 when out of range."""
        iu = np.floor((np.asarray(u) - self.origin_u) / self.width_u + 0.5)
        iv = np.floor((np.asarray(v) - self.origin_v) / self.width_v + 0.5)
        ok = (iu >= 0) & (iu < self.n_u) & (iv >= 0) & (iv < self.n_v)
        flat = np.where(ok, iu * self.n_v + iv, -1)
        return flat.astype(np.int64)

    def bincount(self, u, v) -> tuple[np.ndarray, int]:
        flat = self.index(u, v)
        inside = flat >= 0
        counts = np.bincount(flat[inside], minlength=self.n_u * self.n_v)
        return counts.reshape(self.shape).astype(np.int64), int(flat.size - inside.sum())


class _Grid:
    spec: BinSpec

    @property
    def bin_width_u(self) -> float:
        return self.spec.width_u

    @property
    def bin_width_v(self) -> float:
        return self.spec.width_v

    @property
    def origin(self) -> tuple[float, float]:
        return self.spec.origin_u, self.spec.origin_v

    def centers(self) -> tuple[np.ndarray, np.ndarray]:
        return self.spec.centers_u(), self.spec.centers_v()


@dataclass
class ProjectionHist(_Grid):
    """Counts over minus- or sum-coordinates ``(u, v)``.

    ``total`` counts every accumulated pair, including those that fell outside
    the grid and were only tallied in ``overflow``.
    """

    axis_kind: AxisKind
    spec: BinSpec
    counts: np.ndarray
    overflow: int = 0

    def __post_init__(self):
        self.axis_kind = AxisKind(self.axis_kind)
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.counts.shape != self.spec.shape:
            raise ValueError(f"counts shape {self.counts.shape} != bin shape {self.spec.shape}")
        if np.any(self.counts < 0) or self.overflow < 0:
            raise ValueError("histogram counts must be non-negative")

    @classmethod
    def empty(cls, axis_kind: AxisKind, spec: BinSpec) -> "ProjectionHist":
        return cls(axis_kind, spec, np.zeros(spec.shape, dtype=np.int64))

    @property
    def total(self) -> int:
        return int(self.counts.sum()) + self.overflow

    @property
    def values(self) -> np.ndarray:
        return self.counts.astype(np.float64)

    def merge(self, other: "ProjectionHist") -> "ProjectionHist":
        if self.axis_kind != other.axis_kind or self.spec != other.spec:
            raise ConfigError("cannot merge histograms with different geometry")
        return ProjectionHist(self.axis_kind, self.spec, self.counts + other.counts,
                              self.overflow + other.overflow)

    __add__ = merge

    def __eq__(self, other) -> bool:
        if not isinstance(other, ProjectionHist):
            return NotImplemented
        return (self.axis_kind == other.axis_kind and self.spec == other.spec
                and self.overflow == other.overflow
                and np.array_equal(self.counts, other.counts))


@dataclass
class ProjectionGrid(_Grid):
    """Real-valued projection, e.g. raw counts minus scaled accidentals."""

    axis_kind: AxisKind
    spec: BinSpec
    values: np.ndarray

    def __post_init__(self):
        self.axis_kind = AxisKind(self.axis_kind)
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != self.spec.shape:
            raise ValueError("values shape does not match bin spec")

    @property
    def total(self) -> float:
        return float(self.values.sum())


@dataclass
class JointAxisHist:
    """Counts indexed by (photon-1 bin, photon-2 bin) along one transverse axis."""

    axis: Axis
    spec: BinSpec
    counts: np.ndarray
    overflow: int = 0

    def __post_init__(self):
        self.axis = Axis(self.axis)
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.counts.shape != self.spec.shape:
            raise ValueError("counts shape does not match bin spec")
        if np.any(self.counts < 0) or self.overflow < 0:
            raise ValueError("histogram counts must be non-negative")

    @classmethod
    def empty(cls, axis: Axis, spec: BinSpec) -> "JointAxisHist":
        return cls(axis, spec, np.zeros(spec.shape, dtype=np.int64))

    @property
    def bin_width(self) -> float:
        """Bin width along the conditioned (photon-2) coordinate."""
        return self.spec.width_v

    @property
    def total(self) -> int:
        return int(self.counts.sum()) + self.overflow

    def merge(self, other: "JointAxisHist") -> "JointAxisHist":
        if self.axis != other.axis or self.spec != other.spec:
            raise ConfigError("cannot merge histograms with different geometry")
        return JointAxisHist(self.axis, self.spec, self.counts + other.counts,
                             self.overflow + other.overflow)

    __add__ = merge
