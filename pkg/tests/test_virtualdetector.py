"""Flux lines, arrival densities, and the lag-correlation distribution."""

import math

import numpy as np
import pytest

from tunnelclock.barrier import BarrierRegion, to_parabolic
from tunnelclock.errors import ConfigurationError, NumericalError
from tunnelclock.grid import build_grid
from tunnelclock.virtualdetector import (DetectorRecord, TunnelingDistribution,
                                         arrival_correlation,
                                         barrier_detectors, build_flux_line,
                                         line_flux, normalized_arrival,
                                         probability_current, refine_peak)


@pytest.fixture(scope="module")
def grid():
    return build_grid(160, 160, -8.0, 8.0, -8.0, 8.0)


def plane_wave(grid, k):
    xx, _ = grid.meshes()
    return np.exp(1j * k * xx)


# --- probability current ---


def test_plane_wave_current(grid):
    k = 1.0
    psi = plane_wave(grid, k)
    jx, jy = probability_current(psi, grid)
    inner = np.s_[5:-5, 5:-5]
    assert np.allclose(jx[inner], k, rtol=1e-4)
    assert np.allclose(jy[inner], 0.0, atol=1e-12)


def test_real_state_has_no_current(grid):
    xx, yy = grid.meshes()
    psi = np.exp(-(xx ** 2 + yy ** 2) / 4.0) * (1.0 + 0j)
    jx, jy = probability_current(psi, grid)
    assert np.allclose(jx, 0.0, atol=1e-14)
    assert np.allclose(jy, 0.0, atol=1e-14)


def test_gaussian_beam_current_profile(grid):
    # psi = g(r) e^{ikx}: j = k |psi|^2 x_hat pointwise
    k = 0.7
    xx, yy = grid.meshes()
    g = np.exp(-(xx ** 2 + yy ** 2) / 2.0)
    psi = g * np.exp(1j * k * xx)
    jx, jy = probability_current(psi, grid)
    inner = np.s_[5:-5, 5:-5]
    want = k * (g ** 2)
    assert np.allclose(jx[inner], want[inner], atol=2e-3 * k)
    assert np.allclose(jy[inner], 0.0, atol=1e-10)


def test_current_sums_channels(grid):
    k = 0.5
    psi = plane_wave(grid, k)
    j1, _ = probability_current(psi, grid)
    stack = np.stack([psi / math.sqrt(2.0), psi / math.sqrt(2.0)])
    j2, _ = probability_current(stack, grid)
    assert np.allclose(j1, j2, atol=1e-12)


# --- flux lines ---


def test_line_points_lie_on_parabola(grid):
    line = build_flux_line(grid, 3.0, 1.2)
    xi, _ = to_parabolic(line.points[:, 0], line.points[:, 1])
    assert np.allclose(xi, 3.0, rtol=1e-12)


def test_line_normals_unit_and_outward(grid):
    line = build_flux_line(grid, 3.0, 1.2)
    norms = np.linalg.norm(line.normals, axis=1)
    assert np.allclose(norms, 1.0, atol=1e-12)
    # outward along grad xi means positive x-component everywhere on the line
    assert np.all(line.normals[:, 0] > 0.0)


def test_line_weights_positive_trapezoid(grid):
    line = build_flux_line(grid, 3.0, 1.2)
    assert np.all(line.weights > 0.0)
    y = line.points[:, 1]
    step = y[1] - y[0]
    arc0 = math.sqrt(1.0 + (y[0] / 3.0) ** 2)
    assert line.weights[0] == pytest.approx(0.5 * arc0 * step, rel=1e-9)
    assert line.points.shape[0] % 2 == 1
    assert line.points.shape[0] >= 9


def test_line_flux_of_uniform_current(grid):
    # j = k x_hat: the flux is k times the projected width 2 sqrt(xi eta)
    k = 1.0
    psi = plane_wave(grid, k)
    for xi, eta_max in ((2.0, 1.0), (4.0, 0.8), (6.0, 1.5)):
        line = build_flux_line(grid, xi, eta_max)
        want = 2.0 * k * math.sqrt(xi * eta_max)
        got = line_flux(psi[None, :, :], grid, line)
        assert got == pytest.approx(want, rel=2e-4)


def test_line_flux_sign_flips_with_direction(grid):
    psi = plane_wave(grid, 1.0)
    line = build_flux_line(grid, 3.0, 1.0)
    fwd = line_flux(psi[None, :, :], grid, line)
    back = line_flux(np.conj(psi)[None, :, :], grid, line)
    assert back == pytest.approx(-fwd, rel=1e-12)


def test_line_requires_interior(grid):
    with pytest.raises(ConfigurationError):
        build_flux_line(grid, 15.9, 1.0)


def test_line_validation(grid):
    with pytest.raises(ConfigurationError):
        build_flux_line(grid, -1.0, 1.0)
    with pytest.raises(ConfigurationError):
        build_flux_line(grid, 1.0, 0.0)
    with pytest.raises(ConfigurationError):
        build_flux_line(build_grid(64, 1, -3.0, 3.0), 1.0, 1.0)


def test_barrier_detectors_sit_on_faces(grid):
    region = BarrierRegion(z=1.0, e0=1.1, e_shift=-2.15,
                           x_in=0.6, x_exit=2.4, eta0=1.0)
    entry, leave = barrier_detectors(grid, region)
    assert entry.xi == pytest.approx(region.xi_in)
    assert leave.xi == pytest.approx(region.xi_exit)


# --- peak refinement ---


def test_refine_peak_exact_for_parabola():
    x = np.linspace(0.0, 1.0, 5)
    y = 1.0 - (x - 0.3) ** 2
    px, py = refine_peak(x, y)
    assert px == pytest.approx(0.3, abs=1e-12)
    assert py == pytest.approx(1.0, abs=1e-12)


def test_refine_peak_boundary_falls_back():
    x = np.array([0.0, 1.0, 2.0])
    y = np.array([3.0, 2.0, 1.0])
    assert refine_peak(x, y) == (0.0, 3.0)


def test_refine_peak_flat_falls_back():
    x = np.array([0.0, 1.0, 2.0])
    y = np.array([1.0, 1.0, 1.0])
    assert refine_peak(x, y) == (0.0, 1.0)


def test_refine_peak_validation():
    with pytest.raises(ConfigurationError):
        refine_peak(np.array([1.0]), np.array([]))


# --- arrival densities and correlation ---


def test_normalized_arrival_unit_area():
    t = np.linspace(0.0, 10.0, 501)
    sig = np.sin(t)  # has negative stretches
    p = normalized_arrival(t, sig)
    assert np.all(p >= 0.0)
    assert float(np.trapezoid(p, t)) == pytest.approx(1.0, rel=1e-12)


def test_normalized_arrival_needs_positive_part():
    t = np.linspace(0.0, 1.0, 11)
    with pytest.raises(NumericalError):
        normalized_arrival(t, -np.ones_like(t))


def gaussian_record(lag, sigma=1.0, n=2001, t_max=40.0):
    t = np.linspace(0.0, t_max, n)
    d_in = np.exp(-((t - 12.0) ** 2) / (2 * sigma ** 2))
    d_exit = np.exp(-((t - 12.0 - lag) ** 2) / (2 * sigma ** 2))
    return DetectorRecord.from_signals(t, d_in, d_exit)


def test_record_densities_normalized():
    rec = gaussian_record(5.0)
    t = rec.times
    assert float(np.trapezoid(rec.p_in, t)) == pytest.approx(1.0, rel=1e-12)
    assert float(np.trapezoid(rec.p_exit, t)) == pytest.approx(1.0, rel=1e-12)


def test_record_peak_lag_recovers_shift():
    rec = gaussian_record(5.3)
    assert rec.peak_lag() == pytest.approx(5.3, abs=1e-3)


def test_record_mean_entry_time():
    rec = gaussian_record(2.0)
    assert rec.mean_entry_time() == pytest.approx(12.0, abs=1e-6)


def test_correlation_matches_direct_sum():
    rec = gaussian_record(3.0, sigma=0.8, n=201, t_max=30.0)
    dist = arrival_correlation(rec)
    dt = rec.times[1] - rec.times[0]
    n = rec.times.size
    raw = np.zeros(n)
    for m in range(n):
        raw[m] = np.sum(rec.p_in[:n - m] * rec.p_exit[m:]) * dt
    raw /= np.trapezoid(raw, dist.tau)
    assert np.allclose(dist.p, raw, atol=1e-12)


def test_correlation_no_negative_lags():
    dist = arrival_correlation(gaussian_record(4.0))
    assert dist.tau[0] == 0.0
    assert np.all(dist.tau >= 0.0)
    assert float(np.trapezoid(dist.p, dist.tau)) == pytest.approx(1.0, rel=1e-12)


def test_correlation_of_shifted_gaussians():
    # N(mu, s) against N(mu + L, s) correlates to N(L, s sqrt(2))
    lag, sigma = 6.0, 0.9
    dist = arrival_correlation(gaussian_record(lag, sigma=sigma))
    assert dist.peak() == pytest.approx(lag, abs=0.02)
    assert dist.mean() == pytest.approx(lag, abs=0.05)
    # second moment checks the width
    var = float(np.trapezoid((dist.tau - dist.mean()) ** 2 * dist.p, dist.tau))
    assert math.sqrt(var) == pytest.approx(sigma * math.sqrt(2.0), rel=0.05)


def test_correlation_requires_uniform_sampling():
    t = np.array([0.0, 1.0, 2.5, 3.0])
    ones = np.ones_like(t)
    rec = DetectorRecord(times=t, d_in=ones, d_exit=ones,
                         p_in=ones, p_exit=ones)
    with pytest.raises(ConfigurationError):
        arrival_correlation(rec)


def test_correlation_requires_samples():
    t = np.array([0.0, 1.0])
    ones = np.ones_like(t)
    rec = DetectorRecord(times=t, d_in=ones, d_exit=ones,
                         p_in=ones, p_exit=ones)
    with pytest.raises(ConfigurationError):
        arrival_correlation(rec)


def test_correlation_degenerate_overlap_raises():
    # entry only at the last sample, exit only at the first: no tau >= 0 mass
    t = np.linspace(0.0, 1.0, 11)
    p_in = np.zeros_like(t)
    p_exit = np.zeros_like(t)
    p_in[-1] = 1.0
    p_exit[0] = 1.0
    rec = DetectorRecord(times=t, d_in=p_in, d_exit=p_exit,
                         p_in=p_in, p_exit=p_exit)
    with pytest.raises(NumericalError):
        arrival_correlation(rec)


def test_distribution_csv(tmp_path):
    dist = TunnelingDistribution(tau=np.array([0.0, 1.0, 2.0]),
                                 p=np.array([0.25, 0.5, 0.25]))
    path = tmp_path / "ptau.csv"
    dist.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "tau,p_tau"
    assert len(lines) == 4


def test_record_csv(tmp_path):
    rec = gaussian_record(2.0, n=51, t_max=30.0)
    path = tmp_path / "detector.csv"
    rec.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,d_in,d_exit,p_in,p_exit"
    assert len(lines) == 52
