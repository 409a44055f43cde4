"""Correlation-width and conditional-entropy estimators on histograms."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .errors import ConfigError, DomainError, InsufficientDataError
from .histograms import JointAxisHist, ProjectionGrid, ProjectionHist

Grid = Union[ProjectionHist, ProjectionGrid]


class WidthMethod(str, enum.Enum):
    GAUSSIAN_FIT = "gaussian_fit"
    FORMAL_VARIANCE = "formal_variance"


@dataclass(frozen=True)
class WidthEstimate:
    value: float
    uncertainty: float
    method: WidthMethod
    axis: Optional[str] = None

    def __post_init__(self):
        if self.value < 0 or self.uncertainty < 0:
            raise ValueError("width and uncertainty must be non-negative")


@dataclass(frozen=True)
class GaussianFitResult:
    """Fitted ``A exp(-((u-u0)^2 + (v-v0)^2) / (2 width^2)) [+ offset]``.

    ``width_v`` is only set by the anisotropic model, in which case ``width``
    refers to the u axis.
    """

    amplitude: float
    center: tuple[float, float]
    width: float
    residual_rms: float
    converged: bool
    iterations: int
    offset: Optional[float] = None
    width_v: Optional[float] = None


@dataclass(frozen=True)
class FitOptions:
    offset: bool = False
    anisotropic: bool = False
    min_total: float = 100.0
    max_iter: int = 200
    rtol: float = 1e-8
    init: Optional[Sequence[float]] = None  # physical (A, u0, v0, width[, width_v][, offset])


def _moments(uu, vv, z):
    w = np.clip(z, 0.0, None)
    tot = w.sum()
    if tot <= 0:
        return 0.0, 0.0, 0.0, 0.0
    mu = float((w.sum(axis=1) * uu).sum() / tot)
    mv = float((w.sum(axis=0) * vv).sum() / tot)
    var_u = float((w.sum(axis=1) * (uu - mu) ** 2).sum() / tot)
    var_v = float((w.sum(axis=0) * (vv - mv) ** 2).sum() / tot)
    return mu, mv, var_u, var_v


class _Model:
    """Gaussian surface on a grid in units of the u bin width."""

    def __init__(self, uu, vv, anisotropic, offset):
        self.du_base = uu[:, None]
        self.dv_base = vv[None, :]
        self.aniso = anisotropic
        self.offset = offset

    def split(self, p):
        a, u0, v0, su = p[:4]
        k = 4
        sv = su
        if self.aniso:
            sv = p[k]
            k += 1
        c = p[k] if self.offset else 0.0
        return a, u0, v0, su, sv, c

    def evaluate(self, p, with_jac=True):
        a, u0, v0, su, sv, c = self.split(p)
        du = self.du_base - u0
        dv = self.dv_base - v0
        g = np.exp(-0.5 * (du ** 2 / su ** 2 + dv ** 2 / sv ** 2))
        f = a * g + c
        if not with_jac:
            return f, None
        ag = a * g
        cols = [g, ag * du / su ** 2, ag * dv / sv ** 2]
        if self.aniso:
            cols += [ag * du ** 2 / su ** 3, ag * dv ** 2 / sv ** 3]
        else:
            cols.append(ag * (du ** 2 + dv ** 2) / su ** 3)
        if self.offset:
            cols.append(np.ones_like(g))
        jac = np.stack([np.broadcast_to(col, g.shape).ravel() for col in cols], axis=1)
        return f, jac


def fit_gaussian_2d(hist: Grid, options: Optional[FitOptions] = None) -> GaussianFitResult:
    """Least-squares fit of an isotropic 2D Gaussian to a projection.

    The default model has no constant offset.  Starting values come from the
    histogram moments (centroid and second moment); refinement is a
    Levenberg-Marquardt damped Gauss-Newton iteration with analytic
    Jacobian, stopping when the largest relative parameter step drops below
    ``rtol`` or after ``max_iter`` iterations.

    Raises
    ------
    InsufficientDataError
        If the histogram holds fewer than ``min_total`` counts.
    """
    opt = options or FitOptions()
    z = np.asarray(hist.values, dtype=np.float64)
    if z.sum() < opt.min_total:
        raise InsufficientDataError(f"histogram total {z.sum():g} below fit floor {opt.min_total:g}")
    scale = hist.spec.width_u
    uu = hist.spec.centers_u() / scale
    vv = hist.spec.centers_v() / scale
    model = _Model(uu, vv, opt.anisotropic, opt.offset)
    y = z.ravel()

    if opt.init is not None:
        init = list(opt.init)
        p = np.array([init[0], init[1] / scale, init[2] / scale, init[3] / scale]
                     + ([init[4] / scale] if opt.anisotropic else [])
                     + ([init[-1]] if opt.offset else []), dtype=np.float64)
    else:
        mu, mv, var_u, var_v = _moments(uu, vv, z)
        su0 = max(math.sqrt(var_u), 0.5)
        sv0 = max(math.sqrt(var_v), 0.5)
        s0 = max(math.sqrt(0.5 * (var_u + var_v)), 0.5)
        total = float(np.clip(z, 0, None).sum())
        if opt.anisotropic:
            a0 = total / (2.0 * math.pi * su0 * sv0)
            p = [a0, mu, mv, su0, sv0]
        else:
            a0 = total / (2.0 * math.pi * s0 ** 2)
            p = [a0, mu, mv, s0]
        if opt.offset:
            p.append(0.0)
        p = np.array(p, dtype=np.float64)

    f, jac = model.evaluate(p)
    r = f.ravel() - y
    cost = float(r @ r)
    lam = 1e-3
    converged = False
    it = 0
    while it < opt.max_iter:
        it += 1
        jtj = jac.T @ jac
        grad = jac.T @ r
        diag = np.diag(jtj).copy()
        diag[diag <= 0] = 1.0
        while True:
            try:
                step = np.linalg.solve(jtj + lam * np.diag(diag), -grad)
            except np.linalg.LinAlgError:
                step = np.full_like(p, np.inf)
            trial = p + step
            rel = _relative_step(step, p, model)
            if np.all(np.isfinite(trial)):
                f_new, _ = model.evaluate(trial, with_jac=False)
                r_new = f_new.ravel() - y
                cost_new = float(r_new @ r_new)
            else:
                cost_new = math.inf
            if cost_new <= cost:
                p = trial
                lam = max(lam / 10.0, 1e-12)
                f, jac = model.evaluate(p)
                r = f.ravel() - y
                cost = float(r @ r)
                break
            lam *= 10.0
            if rel < opt.rtol or lam > 1e16:
                break
        if rel < opt.rtol:
            converged = True
            break
        if lam > 1e16:
            break

    a, u0, v0, su, sv, c = model.split(p)
    resid = math.sqrt(cost / y.size)
    return GaussianFitResult(
        amplitude=float(a), center=(float(u0 * scale), float(v0 * scale)),
        width=float(abs(su) * scale), residual_rms=resid, converged=converged and abs(su) > 0,
        iterations=it, offset=float(c) if opt.offset else None,
        width_v=float(abs(sv) * scale) if opt.anisotropic else None)


def _relative_step(step, p, model: _Model) -> float:
    a, u0, v0, su, sv, c = model.split(p)
    width = max(abs(su), abs(sv), 1e-300)
    denom = [max(abs(a), 1e-300), max(abs(u0), width), max(abs(v0), width), max(abs(su), 1e-300)]
    if model.aniso:
        denom.append(max(abs(sv), 1e-300))
    if model.offset:
        denom.append(max(abs(c), abs(a), 1e-300))
    return float(np.max(np.abs(step) / np.array(denom)))


def variance_width(hist: Grid, axis: str = "u") -> WidthEstimate:
    """Count-weighted standard deviation of bin centres along ``axis`` ('u' or 'v').

    Uses the full histogram support with no background exclusion.
    """
    z = np.asarray(hist.values, dtype=np.float64)
    n = z.sum()
    if n < 2:
        raise InsufficientDataError("variance width needs at least two counts")
    if axis == "u":
        w, c = z.sum(axis=1), hist.spec.centers_u()
    elif axis == "v":
        w, c = z.sum(axis=0), hist.spec.centers_v()
    else:
        raise ValueError("axis must be 'u' or 'v'")
    mean = (w * c).sum() / n
    var = max(float((w * (c - mean) ** 2).sum() / n), 0.0)
    sd = math.sqrt(var)
    return WidthEstimate(sd, sd / math.sqrt(2.0 * (n - 1)), WidthMethod.FORMAL_VARIANCE)


@dataclass(frozen=True)
class ExclusionRegion:
    """Disc of ``radius`` (physical units) around ``center`` left out of noise statistics."""

    center: tuple[float, float]
    radius: float

    def mask(self, hist: Grid) -> np.ndarray:
        u, v = hist.spec.centers_u(), hist.spec.centers_v()
        d2 = (u[:, None] - self.center[0]) ** 2 + (v[None, :] - self.center[1]) ** 2
        return d2 <= self.radius ** 2


def background_sigma(hist: Grid, exclusion: Union[ExclusionRegion, np.ndarray],
                     min_bins: int = 100) -> float:
    """Standard deviation of bin values outside the excluded peak region."""
    excluded = exclusion.mask(hist) if isinstance(exclusion, ExclusionRegion) else np.asarray(exclusion)
    outside = np.asarray(hist.values, dtype=np.float64)[~excluded]
    if outside.size < min_bins:
        raise ConfigError(f"only {outside.size} bins outside the exclusion region (need {min_bins})")
    return float(outside.std())


def width_uncertainty(delta: float, amplitude: float, sigma: float, scale: float = 1.0) -> float:
    """Uncertainty of a fitted Gaussian width from the background noise level.

    ``sqrt(e) * delta * sigma / amplitude``, obtained from the slope of the
    model at one width from the centre.  ``scale`` converts ``delta`` to
    physical units when it is given in bins.
    """
    if amplitude <= 0:
        raise DomainError("amplitude must be positive")
    return math.sqrt(math.e) * delta * sigma / amplitude * scale


def conditional_entropy(joint: JointAxisHist, miller_madow: bool = False) -> float:
    """Differential conditional entropy h(photon 2 | photon 1) in nats.

    Plug-in estimate of the discrete H(X2|X1) from normalised counts plus
    ``ln(bin_width)``.  Empty rows contribute nothing.
    """
    n = joint.counts.astype(np.float64)
    total = n.sum()
    if total < 1:
        raise InsufficientDataError("joint histogram is empty")
    rows = n.sum(axis=1)
    nz = n > 0
    p = n[nz] / total
    row_p = np.broadcast_to((rows / total)[:, None], n.shape)[nz]
    h = float(np.sum(p * np.log(row_p / p)))
    if miller_madow:
        h += (np.count_nonzero(n) - np.count_nonzero(rows)) / (2.0 * total)
    return h + math.log(joint.bin_width)


def _max_radius(hist: Grid, center, min_bins: int) -> float:
    u, v = hist.spec.centers_u(), hist.spec.centers_v()
    d = np.sqrt((u[:, None] - center[0]) ** 2 + (v[None, :] - center[1]) ** 2).ravel()
    if d.size < min_bins:
        return 0.0
    far = np.partition(d, d.size - min_bins)[d.size - min_bins]
    return float(np.nextafter(far, 0.0))


def gaussian_width(hist: Grid, options: Optional[FitOptions] = None, exclusion_factor: float = 3.0,
                   min_bins: int = 100, cap_radius: bool = False) -> tuple[WidthEstimate, GaussianFitResult]:
    """Fit width with its noise-based uncertainty.

    The background level is measured outside a disc of ``exclusion_factor``
    fitted widths around the fitted centre.  With ``cap_radius`` the disc
    shrinks when needed so that ``min_bins`` bins stay outside it; peak bins
    then leak into the noise estimate, which can only inflate the uncertainty.
    """
    fit = fit_gaussian_2d(hist, options)
    radius = max(exclusion_factor * fit.width, hist.spec.width_u)
    if cap_radius:
        radius = min(radius, _max_radius(hist, fit.center, min_bins))
    sigma = background_sigma(hist, ExclusionRegion(fit.center, radius), min_bins)
    unc = width_uncertainty(fit.width, fit.amplitude, sigma) if fit.amplitude > 0 else math.inf
    return WidthEstimate(fit.width, unc, WidthMethod.GAUSSIAN_FIT), fit
