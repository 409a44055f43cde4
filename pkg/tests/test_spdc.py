import math

import numpy as np
import pytest
from scipy import stats

from pairsight.core import Arm, Basis
from pairsight.errors import ConfigError
from pairsight.spdc import (DoubleGaussianState, StrayProfile, emit_truth_stream, sample_pair_coords,
                            sample_pair_times)


def wavefunction(x1, x2, sigma_minus, sigma_kplus):
    # |psi|^2 has std sigma_minus along x1 - x2 and 1/sigma_kplus along x1 + x2
    return (np.exp(-(x1 - x2) ** 2 / (4 * sigma_minus ** 2))
            * np.exp(-(x1 + x2) ** 2 * sigma_kplus ** 2 / 4))


def grid_moments(p, a1, a2):
    p = p / p.sum()
    s = a1[:, None] + a2[None, :]
    d = a1[:, None] - a2[None, :]
    var = lambda q: float((p * q ** 2).sum() - (p * q).sum() ** 2)
    return math.sqrt(var(s)), math.sqrt(var(d))


def grid_conditional_entropy(p, da):
    # h(a2|a1) of a sampled density on a fine grid with spacing da
    p = p / p.sum()
    row = p.sum(axis=1, keepdims=True)
    nz = p > 0
    return float(-(p[nz] * np.log((p / row)[nz])).sum() + math.log(da))


def test_conditional_std_by_quadrature():
    sm, sk = 10.0, 0.01
    x = np.linspace(-600, 600, 2401)
    p = wavefunction(x[:, None], x[None, :], sm, sk) ** 2
    state = DoubleGaussianState(sm, sk)
    i = np.searchsorted(x, 37.0)
    row = p[i] / p[i].sum()
    mean = (row * x).sum()
    sd = math.sqrt((row * (x - mean) ** 2).sum())
    assert sd == pytest.approx(state.conditional_std(Basis.POSITION), rel=1e-6)
    assert sd == pytest.approx(1 / math.sqrt(1 / sm ** 2 + sk ** 2), rel=1e-6)


def test_momentum_widths_by_fft():
    sm, sk = 10.0, 0.05
    n, dx = 2048, 0.5
    x = (np.arange(n) - n // 2) * dx
    psi = wavefunction(x[:, None], x[None, :], sm, sk)
    phi = np.fft.fftshift(np.fft.fft2(np.fft.ifftshift(psi)))
    k = np.fft.fftshift(np.fft.fftfreq(n, dx)) * 2 * math.pi
    p = np.abs(phi) ** 2
    s, d = grid_moments(p, k, k)
    state = DoubleGaussianState(sm, sk)
    assert s == pytest.approx(state.sum_std(Basis.MOMENTUM), rel=2e-3)
    assert d == pytest.approx(state.diff_std(Basis.MOMENTUM), rel=2e-3)


def test_entropy_sum_by_quadrature():
    state = DoubleGaussianState(10.0, 0.01)
    x = np.linspace(-700, 700, 3501)
    hx = grid_conditional_entropy(wavefunction(x[:, None], x[None, :], 10.0, 0.01) ** 2, x[1] - x[0])
    k = np.linspace(-0.7, 0.7, 3501)
    # momentum density: std 1/sigma_minus along k1 - k2 and sigma_kplus along k1 + k2
    pk = (np.exp(-(k[:, None] - k[None, :]) ** 2 * 10.0 ** 2 / 2)
          * np.exp(-(k[:, None] + k[None, :]) ** 2 / (2 * 0.01 ** 2)))
    hk = grid_conditional_entropy(pk, k[1] - k[0])
    assert hx + hk == pytest.approx(state.entropy_sum(), abs=1e-3)
    assert state.entropy_sum() == pytest.approx(0.525, abs=1e-3)


def test_state_accessors():
    s = DoubleGaussianState(12.0, 0.01)
    assert s.epr_product == pytest.approx(0.12)
    assert s.sum_std(Basis.POSITION) == pytest.approx(100.0)
    assert s.diff_std(Basis.MOMENTUM) == pytest.approx(1 / 12)
    assert s.marginal_std(Basis.POSITION) == pytest.approx(0.5 * math.hypot(100, 12))
    with pytest.raises(ConfigError):
        DoubleGaussianState(0.0, 0.01)
    with pytest.raises(ConfigError):
        DoubleGaussianState(1.0, 0.01, pair_rate=-1)
    with pytest.raises(ConfigError):
        StrayProfile(lost_partner_fraction=1.5)


@pytest.mark.parametrize("basis", list(Basis))
def test_sampled_pair_covariance(basis):
    s = DoubleGaussianState(12.0, 0.0108)
    xy = sample_pair_coords(s, basis, 200_000, seed=1)
    for a, b in ((0, 2), (1, 3)):
        assert np.std(xy[:, a] + xy[:, b]) == pytest.approx(s.sum_std(basis), rel=0.01)
        assert np.std(xy[:, a] - xy[:, b]) == pytest.approx(s.diff_std(basis), rel=0.01)
        assert np.std(xy[:, a]) == pytest.approx(s.marginal_std(basis), rel=0.01)
    # x and y are independent
    assert abs(np.corrcoef(xy[:, 0], xy[:, 1])[0, 1]) < 0.01


def test_pair_times_poisson():
    t = sample_pair_times(1e6, 0.1, seed=3)
    n = len(t)
    assert abs(n - 1e5) < 5 * math.sqrt(1e5)
    assert np.all(np.diff(t) > 0) and t[0] >= 0 and t[-1] < 0.1e9
    gaps = np.diff(t)
    assert stats.kstest(gaps, "expon", args=(0, 1e3)).pvalue > 1e-3


def test_pair_times_edge_cases():
    assert len(sample_pair_times(0.0, 1.0, seed=0)) == 0
    with pytest.raises(ConfigError):
        sample_pair_times(1.0, 0.0)
    a = sample_pair_times(1e5, 0.01, seed=7)
    assert np.array_equal(a, sample_pair_times(1e5, 0.01, seed=7))


def test_truth_stream_structure():
    s = DoubleGaussianState(12.0, 0.0108, pair_rate=1e6)
    tr = emit_truth_stream(s, Basis.POSITION, 0.001, seed=2)
    assert len(tr) % 2 == 0 and not tr.is_noise.any()
    assert np.all(np.diff(tr.t) >= 0)
    ids, counts = np.unique(tr.pair_id, return_counts=True)
    assert np.all(counts == 2)
    for pid in ids[:20]:
        m = tr.pair_id == pid
        assert sorted(tr.arm[m].tolist()) == [Arm.SIGNAL, Arm.IDLER]


def test_truth_stream_noise_mixture():
    fov = (-500.0, 500.0, -500.0, 500.0)
    s = DoubleGaussianState(12.0, 0.0108, pair_rate=0.0, dark_rate_per_arm=1e6,
                            stray_profile=StrayProfile(0.3))
    tr = emit_truth_stream(s, Basis.POSITION, 0.05, seed=4, fov=fov)
    assert tr.is_noise.all()
    n_sig = (tr.arm == Arm.SIGNAL).sum()
    assert abs(n_sig - 5e4) < 5 * math.sqrt(5e4)
    assert np.all(np.diff(tr.t) >= 0)
    # uniform part: density far from the centre is flat at 0.7 / area
    far = (np.abs(tr.x) > 300) & (np.abs(tr.x) < 500) & (np.abs(tr.y) < 500)
    expected = len(tr) * 0.7 * (400 * 1000) / (1000 * 1000)
    assert abs(far.sum() - expected) < 5 * math.sqrt(expected)


def test_uniform_noise_needs_fov():
    s = DoubleGaussianState(12.0, 0.0108, pair_rate=0.0, dark_rate_per_arm=1e4)
    with pytest.raises(ConfigError):
        emit_truth_stream(s, Basis.POSITION, 0.01, seed=0)


def test_truth_stream_deterministic():
    s = DoubleGaussianState(12.0, 0.0108, pair_rate=1e5, dark_rate_per_arm=1e4,
                            stray_profile=StrayProfile(1.0))
    a = emit_truth_stream(s, Basis.MOMENTUM, 0.01, seed=9)
    b = emit_truth_stream(s, Basis.MOMENTUM, 0.01, seed=9)
    assert np.array_equal(a.t, b.t) and np.array_equal(a.x, b.x)
