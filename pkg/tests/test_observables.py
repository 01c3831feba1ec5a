"""Readout chain: mask probability, dwell integral, partition, assembly."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tunnelclock.clock import (ClockParams, ClockVector, clock_state,
                               free_expectation_curve,
                               time_operator_expectation)
from tunnelclock.errors import ConfigurationError
from tunnelclock.grid import ComplexField, build_grid
from tunnelclock.observables import (StatePart, TimesReport, assemble_times,
                                     clock_read, dwell_time_from_series,
                                     mask_probability, ordering_warnings,
                                     split_bound_free, write_times_csv)
from tunnelclock.propagate import init_state

DT = 200.0


@pytest.fixture(scope="module")
def clock3():
    return ClockParams(n_levels=3, dt_clock=DT)


@pytest.fixture(scope="module")
def curve3(clock3):
    return free_expectation_curve(clock3, samples_per_dt=2000)


@pytest.fixture(scope="module")
def grid16():
    return build_grid(16, 16, -4.0, 4.0, -4.0, 4.0)


def f_of(curve, tau):
    return float(np.interp(tau, curve.t, curve.f))


def part_from(clock, amps, grid, profile=None, absorbed_vk=None):
    """StatePart with clock amplitudes `amps` on a unit-norm profile."""
    if profile is None:
        rng = np.random.default_rng(7)
        raw = rng.normal(size=grid.shape) + 1j * rng.normal(size=grid.shape)
        profile = ComplexField(grid, raw).normalized().values
    channels = np.asarray(amps, dtype=complex)[:, None, None] * profile
    weight = float(np.sum(np.abs(amps) ** 2))
    if absorbed_vk is None:
        absorbed_vk = np.zeros(clock.n_levels)
    return StatePart("test", weight, channels, np.asarray(absorbed_vk, float))


# --- clock_read ---


@pytest.mark.parametrize("k", [0, 1, 2])
def test_read_pointer_slot_k(clock3, grid16, k):
    part = part_from(clock3, clock_state(clock3, k).amplitudes, grid16)
    assert clock_read(clock3, part, grid16.darea) == pytest.approx(k * DT, abs=1e-9)


def test_read_equal_superposition_of_first_two_slots(clock3, grid16):
    amps = (clock_state(clock3, 0).amplitudes
            + clock_state(clock3, 1).amplitudes) / np.sqrt(2.0)
    part = part_from(clock3, amps, grid16)
    assert clock_read(clock3, part, grid16.darea) == pytest.approx(DT / 2, abs=1e-9)


def test_read_is_profile_independent(clock3, grid16):
    amps = clock_state(clock3, 1).amplitudes
    rng = np.random.default_rng(3)
    for _ in range(3):
        raw = rng.normal(size=grid16.shape) + 1j * rng.normal(size=grid16.shape)
        profile = ComplexField(grid16, raw).normalized().values
        part = part_from(clock3, amps, grid16, profile=profile)
        assert clock_read(clock3, part, grid16.darea) == pytest.approx(DT, abs=1e-9)


def test_read_counts_absorbed_ledger(clock3, grid16):
    # no surviving amplitude: the reading is carried by the frozen ledger
    channels = np.zeros((3,) + grid16.shape, dtype=complex)
    part = StatePart("gone", 1.0, channels, np.array([0.0, 0.0, 1.0]))
    assert clock_read(clock3, part, grid16.darea) == pytest.approx(2 * DT, abs=1e-12)


def test_read_mixes_grid_and_ledger_by_probability(clock3, grid16):
    part = part_from(clock3, 0.5 * clock_state(clock3, 0).amplitudes, grid16,
                     absorbed_vk=[0.0, 0.0, 0.75])
    # grid mass 0.25 reads 0, ledger mass 0.75 reads 2 dt
    expect = 0.75 * 2 * DT
    assert clock_read(clock3, part, grid16.darea) == pytest.approx(expect, abs=1e-9)


def test_read_empty_part_is_nan(clock3, grid16):
    channels = np.zeros((3,) + grid16.shape, dtype=complex)
    part = StatePart("empty", 0.0, channels, np.zeros(3))
    assert math.isnan(clock_read(clock3, part, grid16.darea))


def test_read_channel_count_mismatch_raises(clock3, grid16):
    channels = np.zeros((5,) + grid16.shape, dtype=complex)
    part = StatePart("bad", 0.0, channels, np.zeros(5))
    with pytest.raises(ConfigurationError):
        clock_read(clock3, part, grid16.darea)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.tuples(st.floats(-1, 1), st.floats(-1, 1)),
                min_size=3, max_size=3))
def test_read_matches_scalar_clock_expectation(pairs):
    # the field readout must agree with the bare N-level expectation
    clock = ClockParams(n_levels=3, dt_clock=DT)
    grid = build_grid(8, 8, -2.0, 2.0, -2.0, 2.0)
    amps = np.array([complex(re, im) for re, im in pairs])
    norm = np.sqrt(np.sum(np.abs(amps) ** 2))
    if norm < 1e-3:
        return
    amps = amps / norm
    part = part_from(clock, amps, grid)
    got = clock_read(clock, part, grid.darea)
    want = time_operator_expectation(ClockVector(clock, amps))
    assert got == pytest.approx(want, abs=1e-9)


# --- mask probability and dwell integral ---


def test_mask_probability_sums_selected_nodes(clock3, grid16):
    state = init_state(_gaussian(grid16), clock3, 0.0)
    idx = np.arange(40, 90, dtype=np.int64)
    dens = state.density().reshape(-1)
    want = float(np.sum(dens[idx])) * grid16.darea
    assert mask_probability(state, idx) == pytest.approx(want, rel=1e-12)


def test_mask_probability_all_nodes_is_total(clock3, grid16):
    state = init_state(_gaussian(grid16), clock3, 0.0)
    idx = np.arange(grid16.nx * grid16.ny, dtype=np.int64)
    assert mask_probability(state, idx) == pytest.approx(1.0, abs=1e-12)


def test_dwell_rectangle():
    t = np.linspace(0.0, 10.0, 101)
    occ = np.full_like(t, 0.3)
    assert dwell_time_from_series(t, occ) == pytest.approx(3.0, rel=1e-12)
    assert dwell_time_from_series(t, occ, baseline=0.1) == pytest.approx(
        2.0, rel=1e-12)


def test_dwell_series_baseline():
    t = np.linspace(0.0, 4.0, 81)
    occ = 0.5 + 0.1 * t
    base = 0.1 * t
    assert dwell_time_from_series(t, occ, baseline=base) == pytest.approx(
        2.0, rel=1e-12)


def test_dwell_validation():
    t = np.linspace(0.0, 1.0, 11)
    with pytest.raises(ConfigurationError):
        dwell_time_from_series(t, np.zeros(10))
    with pytest.raises(ConfigurationError):
        dwell_time_from_series(np.array([0.0]), np.array([1.0]))
    with pytest.raises(ConfigurationError):
        dwell_time_from_series(t, np.zeros(11), baseline=np.zeros(7))


# --- bound/free partition ---


def _gaussian(grid):
    xx, yy = grid.meshes()
    return ComplexField(grid, np.exp(-(xx ** 2 + yy ** 2))).normalized()


def test_split_weights_cover_total(clock3, grid16):
    state = init_state(_gaussian(grid16), clock3, 0.0)
    bound, free = split_bound_free(state, 1.5)
    assert bound.weight + free.weight == pytest.approx(
        state.total_probability(), abs=1e-12)
    assert bound.weight > 0.0 and free.weight > 0.0


def test_split_matches_disk_mass(clock3, grid16):
    state = init_state(_gaussian(grid16), clock3, 0.0)
    r_sep = 2.0
    bound, _ = split_bound_free(state, r_sep)
    disk = (grid16.radius() < r_sep).reshape(-1)
    dens = state.density().reshape(-1)
    want = float(np.sum(dens[disk])) * grid16.darea
    assert bound.weight == pytest.approx(want, rel=1e-12)


def test_split_absorbed_flux_counts_as_free(clock3, grid16):
    state = init_state(_gaussian(grid16), clock3, 0.0)
    state.absorbed_ch[:] = np.array([0.01, 0.02, 0.03])
    state.absorbed_vk[:] = np.array([0.035, 0.015, 0.01])
    bound, free = split_bound_free(state, 1.5)
    grid_free = free.weight - 0.06
    assert grid_free >= 0.0
    assert np.all(bound.absorbed_vk == 0.0)
    assert np.allclose(free.absorbed_vk, state.absorbed_vk)
    assert bound.weight + free.weight == pytest.approx(
        state.total_probability(), abs=1e-12)


def test_split_grows_with_radius(clock3, grid16):
    state = init_state(_gaussian(grid16), clock3, 0.0)
    weights = [split_bound_free(state, r)[0].weight
               for r in (0.5, 1.0, 2.0, 3.0)]
    assert all(b >= a for a, b in zip(weights, weights[1:]))


def test_split_requires_positive_radius(clock3, grid16):
    state = init_state(_gaussian(grid16), clock3, 0.0)
    with pytest.raises(ConfigurationError):
        split_bound_free(state, 0.0)


def test_partition_identity_of_raw_readings(clock3, grid16):
    # unconditional reading = probability-weighted mixture of the legs
    rng = np.random.default_rng(11)
    raw = rng.normal(size=(3,) + grid16.shape) * (1 + 0j)
    raw += 1j * rng.normal(size=(3,) + grid16.shape)
    state = init_state(_gaussian(grid16), clock3, 0.0)
    state.channels[:] = raw / 40.0
    state.absorbed_vk[:] = np.array([0.002, 0.001, 0.004])
    state.absorbed_ch[:] = np.array([0.004, 0.002, 0.001])
    bound, free = split_bound_free(state, 1.5)
    t_w, r_w = free.weight, bound.weight
    full = StatePart("all", state.total_probability(), state.channels,
                     state.absorbed_vk)
    lhs = clock_read(clock3, full, grid16.darea) * (t_w + r_w)
    rhs = (t_w * clock_read(clock3, free, grid16.darea)
           + r_w * clock_read(clock3, bound, grid16.darea))
    assert lhs == pytest.approx(rhs, rel=1e-12)


# --- assembly ---


def test_assemble_none_inverts_directly(curve3):
    taus = assemble_times(curve3, 80.0, 30.0, 110.0, 0.4, 0.6,
                          baseline_mode="none")
    for tau, raw in zip(taus, (80.0, 30.0, 110.0)):
        assert f_of(curve3, tau) == pytest.approx(raw, abs=1e-4)


def test_assemble_reference_attribution(curve3):
    t_w, r_w, base = 0.05, 0.95, 60.0
    raw_t, raw_r = 30.0, 110.0
    raw_d = (t_w * raw_t + r_w * raw_r) / (t_w + r_w)
    tau_d, tau_t, tau_r = assemble_times(curve3, raw_d, raw_t, raw_r, t_w, r_w,
                                         baseline_mode="reference",
                                         tau_tilde_base=base)
    assert f_of(curve3, tau_t) == pytest.approx(raw_t, abs=1e-4)
    assert f_of(curve3, tau_r) == pytest.approx(raw_r - base, abs=1e-4)
    shift_d = base * r_w / (t_w + r_w)
    assert f_of(curve3, tau_d) == pytest.approx(raw_d - shift_d, abs=1e-4)


def test_assemble_reference_preserves_identity(curve3):
    # the corrected raw readings still mix with weights T and R
    t_w, r_w, base = 0.3, 0.7, 40.0
    raw_t, raw_r = 55.0, 90.0
    raw_d = (t_w * raw_t + r_w * raw_r) / (t_w + r_w)
    tau_d, tau_t, tau_r = assemble_times(curve3, raw_d, raw_t, raw_r, t_w, r_w,
                                         baseline_mode="reference",
                                         tau_tilde_base=base)
    mix = (t_w * f_of(curve3, tau_t) + r_w * f_of(curve3, tau_r)) / (t_w + r_w)
    assert f_of(curve3, tau_d) == pytest.approx(mix, abs=1e-4)


def test_assemble_reference_clips_overshoot(curve3):
    # background reading larger than the leg's own: clamp at zero, not raise
    _, _, tau_r = assemble_times(curve3, 50.0, 50.0, 50.0, 0.5, 0.5,
                                 baseline_mode="reference",
                                 tau_tilde_base=80.0)
    assert 0.0 <= tau_r < 1e-4 * DT


def test_assemble_transmitted_leg_untouched(curve3):
    kw = dict(baseline_mode="reference", tau_tilde_base=70.0)
    _, tau_t, _ = assemble_times(curve3, 90.0, 25.0, 95.0, 0.1, 0.9, **kw)
    _, tau_t_none, _ = assemble_times(curve3, 90.0, 25.0, 95.0, 0.1, 0.9,
                                      baseline_mode="none")
    assert tau_t == pytest.approx(tau_t_none, abs=1e-9)


def test_assemble_nan_passthrough(curve3):
    tau_d, tau_t, tau_r = assemble_times(curve3, 80.0, math.nan, 80.0,
                                         0.0, 1.0, baseline_mode="none")
    assert math.isnan(tau_t)
    assert not math.isnan(tau_d) and not math.isnan(tau_r)


def test_assemble_validation(curve3):
    with pytest.raises(ConfigurationError):
        assemble_times(curve3, 1.0, 1.0, 1.0, 0.5, 0.5, baseline_mode="lint")
    with pytest.raises(ConfigurationError):
        assemble_times(curve3, 1.0, 1.0, 1.0, 0.0, 0.0)


# --- report and warnings ---


def _report(**kw):
    base = dict(e0=1.0, gamma=0.25, z=1.0, transmitted=0.02, reflected=0.98,
                tau_d_prime=5.0, tau_tilde_d=50.0, tau_tilde_t=40.0,
                tau_tilde_r=51.0, tau_d=5.2, tau_t=5.0, tau_r=6.0, tau_k=2.0)
    base.update(kw)
    return TimesReport(**base)


def test_warnings_clean_report():
    assert ordering_warnings(_report()) == []


def test_warnings_total_probability():
    msgs = ordering_warnings(_report(transmitted=0.10, reflected=0.80))
    assert any("deviates" in m for m in msgs)


def test_warnings_mixture_outside_legs():
    msgs = ordering_warnings(_report(tau_d=9.0))
    assert any("outside" in m for m in msgs)


def test_warnings_negative_time():
    msgs = ordering_warnings(_report(tau_t=-0.5, tau_d=3.0))
    assert any("negative" in m for m in msgs)


def test_times_csv_roundtrip(tmp_path):
    reports = [_report(), _report(e0=1.2, tau_tsub=1.5, tau_t_v=5.5)]
    path = tmp_path / "times.csv"
    write_times_csv(path, reports)
    lines = path.read_text().splitlines()
    assert lines[0] == ",".join(TimesReport.COLUMNS)
    assert len(lines) == 3
    got = [float(v) for v in lines[2].split(",")]
    want = list(reports[1].row_values())
    for g, w in zip(got, want):
        assert (math.isnan(g) and math.isnan(w)) or g == w
