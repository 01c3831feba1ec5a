"""Barrier geometry: parabolic maps, orbital weight, region construction."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tunnelclock.barrier import (BarrierRegion, compute_barrier, from_parabolic,
                                 orbital_weight, rasterize_barrier,
                                 stark_shifted_energy, to_parabolic)
from tunnelclock.errors import (ConfigurationError, NoBarrierError,
                                NumericalError)
from tunnelclock.grid import (AtomParams, ComplexField, PulseParams,
                              absorber_mask, build_grid, coulomb_potential)


def test_parabolic_map_known_points():
    xi, eta = to_parabolic(1.0, 0.0)
    assert xi == pytest.approx(2.0) and eta == pytest.approx(0.0)
    xi, eta = to_parabolic(-1.0, 0.0)
    assert xi == pytest.approx(0.0) and eta == pytest.approx(2.0)
    xi, eta = to_parabolic(0.0, 2.0)
    assert xi == pytest.approx(2.0) and eta == pytest.approx(2.0)


@settings(max_examples=200, deadline=None)
@given(st.floats(-50, 50), st.floats(-50, 50))
def test_parabolic_roundtrip(x, y):
    xi, eta = to_parabolic(x, y)
    assert xi >= 0.0 and eta >= 0.0
    xb, yb = from_parabolic(xi, eta)
    r = np.hypot(x, y)
    assert xb == pytest.approx(x, abs=1e-9 * max(1.0, r))
    assert yb == pytest.approx(abs(y), abs=1e-6 * max(1.0, r))


def test_from_parabolic_rejects_negative():
    with pytest.raises(ConfigurationError):
        from_parabolic(-0.1, 1.0)


# dblquad of the exp(-2Zr) density over parabolic boxes
WEIGHT_ORACLE = [
    (1.0, 1.8, 3.0, 0.9, 0.02985392746252),
    (1.0, 0.0, 50.0, 50.0, 1.00000000000000),
    (2.0, 0.5, 1.5, 0.4, 0.13203470140545),
]


@pytest.mark.parametrize("z,a,b,h,expect", WEIGHT_ORACLE)
def test_orbital_weight_oracle(z, a, b, h, expect):
    assert orbital_weight(z, a, b, h) == pytest.approx(expect, rel=1e-10)


def test_orbital_weight_validation():
    with pytest.raises(ConfigurationError):
        orbital_weight(0.0, 0.0, 1.0, 1.0)
    with pytest.raises(ConfigurationError):
        orbital_weight(1.0, 2.0, 1.0, 1.0)
    with pytest.raises(ConfigurationError):
        orbital_weight(1.0, -0.5, 1.0, 1.0)


# quadratic roots via np.roots, inner boundary via brentq on the dblquad
# weight: (z, e0, e_shift, eta0_scale, budget) -> (xi_in, xi_exit, eta0)
CONSTRUCT_ORACLE = [
    (1.0, 1.1, -2.1495, 1.0, 0.01,
     2.373951237762, 3.368406808319, 0.964597813399),
    (1.0, 0.9, -2.1135, 1.0, 0.01,
     2.444772108828, 4.162843521297, 0.972778294679),
    (1.0, 1.4, -2.2060, 1.0, 0.01,
     2.153556650417, 2.602507391278, 0.952165066409),
    (1.0, 1.2, -2.1681, 0.5, 0.02,
     1.932125801294, 3.070743234093, 0.480225643810),
    (1.5, 0.9, -4.60, 1.0, 0.01,
     1.645301060363, 9.885011346431, 0.659380473396),
    (1.0, 0.05, -2.0, 1.0, 0.01,
     2.468803055698, 79.496835316263, 1.000000000000),
]


@pytest.mark.parametrize("z,e0,es,scale,budget,xi_in,xi_exit,eta0",
                         CONSTRUCT_ORACLE)
def test_compute_barrier_oracle(z, e0, es, scale, budget,
                                xi_in, xi_exit, eta0):
    region = compute_barrier(AtomParams(z=z), e0, es, scale, budget)
    assert region.xi_in == pytest.approx(xi_in, rel=1e-9, abs=1e-9)
    assert region.xi_exit == pytest.approx(xi_exit, rel=1e-11)
    assert region.eta0 == pytest.approx(eta0, rel=1e-11)
    assert region.p0_est <= budget * (1.0 + 1e-9)
    assert region.x_in == pytest.approx(0.5 * region.xi_in)
    assert region.width == pytest.approx(region.x_exit - region.x_in)


def test_region_stays_outside_the_orbital():
    # the inner edge saturates the orbital-weight budget
    region = compute_barrier(AtomParams(z=1.0), 1.1, -2.1495, p0_budget=0.01)
    w = orbital_weight(1.0, region.xi_in, region.xi_exit, region.eta0)
    assert w == pytest.approx(0.01, rel=1e-6)
    default = compute_barrier(AtomParams(z=1.0), 1.1, -2.1495)
    w = orbital_weight(1.0, default.xi_in, default.xi_exit, default.eta0)
    assert w == pytest.approx(0.10, rel=1e-6)


def test_no_barrier_when_discriminant_closes():
    atom = AtomParams(z=1.0)
    with pytest.raises(NoBarrierError):
        compute_barrier(atom, 2.0, -2.0)  # discriminant exactly zero
    with pytest.raises(NoBarrierError):
        compute_barrier(atom, 2.5, -2.0)
    # just below the closing field a region still exists
    region = compute_barrier(atom, 1.9, -2.0)
    assert region.width > 0.0


def test_compute_barrier_validation():
    atom = AtomParams(z=1.0)
    with pytest.raises(ConfigurationError):
        compute_barrier(atom, 0.0, -2.0)
    with pytest.raises(ConfigurationError):
        compute_barrier(atom, 1.0, 0.5)
    with pytest.raises(ConfigurationError):
        compute_barrier(atom, 1.0, -2.0, p0_budget=0.0)
    with pytest.raises(ConfigurationError):
        compute_barrier(atom, 1.0, -2.0, p0_budget=0.6)
    with pytest.raises(ConfigurationError):
        compute_barrier(atom, 1.0, -2.0, eta0_scale=0.0)


def test_width_shrinks_with_field():
    atom = AtomParams(z=1.0)
    widths = [compute_barrier(atom, e0, -2.15).width
              for e0 in np.linspace(0.5, 1.8, 12)]
    assert all(w1 > w2 for w1, w2 in zip(widths, widths[1:]))


def test_exit_scales_inversely_with_weak_field():
    atom = AtomParams(z=1.0)
    a = compute_barrier(atom, 0.02, -2.0)
    b = compute_barrier(atom, 0.01, -2.0)
    assert b.x_exit / a.x_exit == pytest.approx(2.0, rel=0.02)
    # the inner boundary is pinned by the orbital-weight budget
    assert b.x_in == pytest.approx(a.x_in, rel=1e-3)


def _region_mask_reference(grid, region, forbidden_only=False):
    xx, yy = grid.meshes()
    rr = np.hypot(xx, yy)
    xi, eta = rr + xx, rr - xx
    inside = (xi >= region.xi_in) & (xi <= region.xi_exit) & (eta <= region.eta0)
    if forbidden_only:
        inside &= (-region.z / rr - region.e0 * xx) > region.e_shift
    return inside


def test_rasterize_matches_direct_inequalities():
    g = build_grid(96, 96, -6.0, 6.0, -6.0, 6.0)
    region = compute_barrier(AtomParams(z=1.0), 1.1, -2.1495)
    mask, idx = rasterize_barrier(g, region)
    expect = _region_mask_reference(g, region)
    np.testing.assert_array_equal(mask.values, expect.astype(float))
    np.testing.assert_array_equal(idx, np.flatnonzero(expect))
    assert idx.size > 0


def test_rasterize_forbidden_only_is_a_subset():
    g = build_grid(96, 96, -6.0, 6.0, -6.0, 6.0)
    region = compute_barrier(AtomParams(z=1.0), 1.1, -2.1495)
    _, idx = rasterize_barrier(g, region)
    mask_f, idx_f = rasterize_barrier(g, region, forbidden_only=True)
    assert set(idx_f).issubset(set(idx))
    expect = _region_mask_reference(g, region, forbidden_only=True)
    np.testing.assert_array_equal(mask_f.values, expect.astype(float))


def test_rasterize_empty_region_raises():
    g = build_grid(24, 24, -6.0, 6.0, -6.0, 6.0)
    sliver = BarrierRegion(z=1.0, e0=1.1, e_shift=-2.15,
                           x_in=1.2, x_exit=1.201, eta0=1e-6)
    with pytest.raises(ConfigurationError):
        rasterize_barrier(g, sliver)


def test_rasterize_rejects_absorber_overlap():
    g = build_grid(96, 96, -6.0, 6.0, -6.0, 6.0)
    region = compute_barrier(AtomParams(z=1.0), 1.1, -2.1495)
    fat = absorber_mask(g, width=5.0, strength=2.0)  # ring reaches r = 1
    with pytest.raises(ConfigurationError):
        rasterize_barrier(g, region, absorber=fat)


def _dense_h(grid, vpot, efield=0.0):
    import scipy.sparse as sp
    c0, c1, c2 = -2.5, 4.0 / 3.0, -1.0 / 12.0

    def d4(n, h):
        a = 1.0 / (h * h)
        return sp.diags([c2 * a * np.ones(n - 2), c1 * a * np.ones(n - 1),
                         c0 * a * np.ones(n), c1 * a * np.ones(n - 1),
                         c2 * a * np.ones(n - 2)], [-2, -1, 0, 1, 2])

    lap = sp.kron(d4(grid.nx, grid.dx), sp.eye(grid.ny)) \
        + sp.kron(sp.eye(grid.nx), d4(grid.ny, grid.dy))
    diag = (vpot - efield * grid.x[:, None] * np.ones((1, grid.ny))).reshape(-1)
    return -0.5 * lap + sp.diags(diag)


@pytest.fixture(scope="module")
def stark_setup():
    g = build_grid(64, 64, -6.0, 6.0, -6.0, 6.0)
    atom = AtomParams(z=1.0)
    vpot = coulomb_potential(g, atom)
    xx, yy = g.meshes()
    psi = np.exp(-0.5 * (xx ** 2 + yy ** 2)).astype(np.complex128)
    field = ComplexField(g, psi).normalized()
    return g, atom, vpot, field


def test_stark_energy_matches_disk_rayleigh_quotient(stark_setup):
    g, atom, vpot, field = stark_setup
    pulse = PulseParams(e0=0.8, omega=0.2, t0=10.0)
    t = 7.0
    efield = pulse.e0 * np.exp(-0.5 * (pulse.omega * (t - pulse.t0)) ** 2)
    r_max = 3.0
    h = _dense_h(g, vpot.values, efield)
    psi = field.values.reshape(-1)
    hpsi = h @ psi
    disk = (g.radius() < r_max).reshape(-1)
    expect = float(np.sum((np.conj(psi) * hpsi)[disk]).real
                   / np.sum(np.abs(psi[disk]) ** 2))
    got = stark_shifted_energy(field, atom, pulse, t, r_max)
    assert got == pytest.approx(expect, rel=1e-10)
    # no pulse behaves as zero field
    zero = stark_shifted_energy(field, atom, None, 0.0, r_max)
    h0 = _dense_h(g, vpot.values, 0.0)
    expect0 = float(np.sum((np.conj(psi) * (h0 @ psi))[disk]).real
                    / np.sum(np.abs(psi[disk]) ** 2))
    assert zero == pytest.approx(expect0, rel=1e-10)


def test_stark_energy_rejects_empty_disk(stark_setup):
    g, atom, vpot, field = stark_setup
    with pytest.raises(NumericalError):
        stark_shifted_energy(field, atom, None, 0.0, 0.05)
