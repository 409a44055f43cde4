"""Ground-truth photon-pair source: double-Gaussian two-photon state.

The state is parameterised by the position correlation width ``sigma_minus``
(std of x1 - x2 in the near field) and the momentum correlation width
``sigma_kplus`` (std of k1 + k2 in the far field).  Along each transverse
axis the near-field sum x1 + x2 has std ``1/sigma_kplus`` and the far-field
difference k1 - k2 has std ``1/sigma_minus``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import Arm, Basis
from .errors import ConfigError

NS_PER_S = 1e9


@dataclass(frozen=True)
class StrayProfile:
    """Spatial distribution of unpaired noise events.

    A fraction ``lost_partner_fraction`` of noise events follows the SPDC
    single-photon marginal (photons whose partner was lost); the remainder is
    uniform over the arm field of view ``fov = (xmin, xmax, ymin, ymax)``.
    """

    lost_partner_fraction: float = 0.0
    fov: Optional[tuple[float, float, float, float]] = None

    def __post_init__(self):
        if not 0.0 <= self.lost_partner_fraction <= 1.0:
            raise ConfigError("lost_partner_fraction must lie in [0, 1]")


@dataclass(frozen=True)
class DoubleGaussianState:
    sigma_minus: float  # um
    sigma_kplus: float  # rad/um
    pair_rate: float = 1e7  # pairs/s
    dark_rate_per_arm: float = 0.0  # events/s/arm
    stray_profile: StrayProfile = field(default_factory=StrayProfile)

    def __post_init__(self):
        if not (self.sigma_minus > 0 and self.sigma_kplus > 0):
            raise ConfigError("correlation widths must be positive")
        if self.pair_rate < 0 or self.dark_rate_per_arm < 0:
            raise ConfigError("rates must be non-negative")

    @property
    def epr_product(self) -> float:
        return self.sigma_minus * self.sigma_kplus

    def sum_std(self, basis: Basis) -> float:
        return 1.0 / self.sigma_kplus if Basis(basis) is Basis.POSITION else self.sigma_kplus

    def diff_std(self, basis: Basis) -> float:
        return self.sigma_minus if Basis(basis) is Basis.POSITION else 1.0 / self.sigma_minus

    def marginal_std(self, basis: Basis) -> float:
        """Std of one photon's coordinate along one axis."""
        return 0.5 * math.hypot(self.sum_std(basis), self.diff_std(basis))

    def conditional_std(self, basis: Basis) -> float:
        """Std of photon 2's coordinate given photon 1's, along one axis."""
        if Basis(basis) is Basis.POSITION:
            return 1.0 / math.sqrt(1.0 / self.sigma_minus ** 2 + self.sigma_kplus ** 2)
        return 1.0 / math.sqrt(1.0 / self.sigma_kplus ** 2 + self.sigma_minus ** 2)

    def entropy_sum(self) -> float:
        """h(x2|x1) + h(k2|k1) in nats for the ideal continuous state."""
        return math.log(2.0 * math.pi * math.e * self.conditional_std(Basis.POSITION)
                        * self.conditional_std(Basis.MOMENTUM))


@dataclass
class TruthStream:
    """Emitted photons before detection, sorted by emission time (ns).

    ``pair_id`` is shared by the two members of a pair and is -1 for noise.
    """

    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    arm: np.ndarray
    pair_id: np.ndarray
    basis: Basis
    duration: float  # s

    def __len__(self) -> int:
        return len(self.t)

    @property
    def is_noise(self) -> np.ndarray:
        return self.pair_id < 0


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def sample_pair_times(rate: float, duration: float, seed=None) -> np.ndarray:
    """Homogeneous Poisson arrival times (ns) on ``[0, duration)`` seconds."""
    if rate < 0:
        raise ConfigError("rate must be non-negative")
    if duration <= 0:
        raise ConfigError("duration must be positive")
    rng = _rng(seed)
    if rate == 0:
        return np.zeros(0)
    mean_gap = NS_PER_S / rate
    end = duration * NS_PER_S
    expected = rate * duration
    chunks = []
    last = 0.0
    while True:
        n = int(expected + 10.0 * math.sqrt(expected) + 16)
        times = last + np.cumsum(rng.exponential(mean_gap, n))
        if times[-1] >= end:
            chunks.append(times[: np.searchsorted(times, end, side="left")])
            break
        chunks.append(times)
        last = times[-1]
    return np.concatenate(chunks)


def sample_pair_coords(state: DoubleGaussianState, basis: Basis, n: int, seed=None) -> np.ndarray:
    """``(n, 4)`` array of ``x1, y1, x2, y2`` drawn from the pair state in ``basis``."""
    if n < 0:
        raise ValueError("n must be non-negative")
    rng = _rng(seed)
    s = rng.normal(0.0, state.sum_std(basis), size=(2, n))
    d = rng.normal(0.0, state.diff_std(basis), size=(2, n))
    out = np.empty((n, 4))
    out[:, 0] = 0.5 * (s[0] + d[0])
    out[:, 1] = 0.5 * (s[1] + d[1])
    out[:, 2] = 0.5 * (s[0] - d[0])
    out[:, 3] = 0.5 * (s[1] - d[1])
    return out


def _noise_coords(state: DoubleGaussianState, basis: Basis, n: int, rng, fov) -> tuple[np.ndarray, np.ndarray]:
    prof = state.stray_profile
    fov = prof.fov if fov is None else fov
    lost = rng.random(n) < prof.lost_partner_fraction
    x = np.empty(n)
    y = np.empty(n)
    n_lost = int(lost.sum())
    sd = state.marginal_std(basis)
    x[lost] = rng.normal(0.0, sd, n_lost)
    y[lost] = rng.normal(0.0, sd, n_lost)
    n_flat = n - n_lost
    if n_flat:
        if fov is None:
            raise ConfigError("uniform stray light needs a field of view")
        xmin, xmax, ymin, ymax = fov
        x[~lost] = rng.uniform(xmin, xmax, n_flat)
        y[~lost] = rng.uniform(ymin, ymax, n_flat)
    return x, y


def emit_truth_stream(state: DoubleGaussianState, basis: Basis, duration: float,
                      seed=None, fov=None) -> TruthStream:
    """Pairs plus per-arm Poissonian noise, merged into one time-sorted stream.

    ``fov`` overrides the stray profile's field of view for uniform noise.
    """
    basis = Basis(basis)
    ss = np.random.SeedSequence(seed) if not isinstance(seed, np.random.SeedSequence) else seed
    s_times, s_coords, s_noise_s, s_noise_i = ss.spawn(4)

    t_pair = sample_pair_times(state.pair_rate, duration, np.random.default_rng(s_times))
    n = len(t_pair)
    xy = sample_pair_coords(state, basis, n, np.random.default_rng(s_coords))
    ids = np.arange(n, dtype=np.int64)

    t_parts = [np.repeat(t_pair, 2)]
    x_parts = [np.column_stack([xy[:, 0], xy[:, 2]]).ravel()]
    y_parts = [np.column_stack([xy[:, 1], xy[:, 3]]).ravel()]
    arm_parts = [np.tile(np.array([Arm.SIGNAL, Arm.IDLER], dtype=np.int8), n)]
    id_parts = [np.repeat(ids, 2)]
    del xy

    for arm, child in ((Arm.SIGNAL, s_noise_s), (Arm.IDLER, s_noise_i)):
        rng = np.random.default_rng(child)
        if state.dark_rate_per_arm > 0:
            tn = sample_pair_times(state.dark_rate_per_arm, duration, rng)
        else:
            tn = np.zeros(0)
        xn, yn = _noise_coords(state, basis, len(tn), rng, fov)
        t_parts.append(tn)
        x_parts.append(xn)
        y_parts.append(yn)
        arm_parts.append(np.full(len(tn), arm, dtype=np.int8))
        id_parts.append(np.full(len(tn), -1, dtype=np.int64))

    if all(len(p) == 0 for p in t_parts[1:]):
        return TruthStream(t_parts[0], x_parts[0], y_parts[0], arm_parts[0], id_parts[0],
                           basis, duration)
    t = np.concatenate(t_parts)
    order = np.argsort(t, kind="stable")
    return TruthStream(t[order], np.concatenate(x_parts)[order], np.concatenate(y_parts)[order],
                       np.concatenate(arm_parts)[order], np.concatenate(id_parts)[order],
                       basis, duration)
