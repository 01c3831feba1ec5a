"""Run orchestration: config files, the measurement pipeline, sweeps.

A single run is staged as

    ground state -> clock-free evolution to the pulse peak
                 -> Stark-shifted level and barrier geometry at the peak
                 -> zero-field clocked reference run (baseline readings)
                 -> clocked run from t = 0 with dwell and flux observers
                 -> times assembly and CSV output.

Configuration is a flat text file of "section.key = value" lines; every
key has a default, unknown keys are rejected, and the resolved mapping is
echoed next to the outputs so a run directory is self-describing.  All
stages are serial and deterministic: two runs from the same config produce
byte-identical CSV files.
"""

from __future__ import annotations

import logging
import math
import time as _wallclock
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .barrier import (BarrierRegion, compute_barrier, rasterize_barrier,
                      stark_shifted_energy)
from .checkpoint import read_checkpoint, write_checkpoint
from .clock import ClockParams, calibrate, free_expectation_curve
from .errors import (CheckpointError, ConfigurationError, NumericalError)
from .grid import (AtomParams, ComplexField, Grid2D, PulseParams,
                   absorber_mask, build_grid, coulomb_potential, keldysh_time,
                   total_potential, write_field_csv)
from .groundstate import solve_ground_state
from .observables import (StatePart, TimesReport, assemble_times, clock_read,
                          dwell_time_from_series, mask_probability,
                          ordering_warnings, split_bound_free, write_times_csv)
from .propagate import PropagatorConfig, evolve, init_state
from .virtualdetector import (DetectorRecord, arrival_correlation,
                              barrier_detectors, line_flux)

__all__ = [
    "RunConfig",
    "RunResult",
    "SweepResult",
    "TofResult",
    "run_single",
    "run_sweep",
    "run_time_of_flight",
]

log = logging.getLogger("tunnelclock")

# key -> (default, type); "floats" is a comma-separated list
_DEFAULTS = {
    "grid.nx": (512, "int"),
    "grid.ny": (512, "int"),
    "grid.x_min": (-24.0, "float"),
    "grid.x_max": (24.0, "float"),
    "grid.y_min": (-24.0, "float"),
    "grid.y_max": (24.0, "float"),
    "atom.z": (1.0, "float"),
    "field.e0": (0.0, "float"),
    "field.gamma": (0.25, "float"),
    "field.omega": (0.0, "float"),
    "window.span": (5.0, "float"),
    "window.span_post": (3.5, "float"),
    "clock.n_levels": (3, "int"),
    "clock.dt": (0.0, "float"),
    "clock.samples_per_dt": (10000, "int"),
    "prop.dt": (0.005, "float"),
    "prop.krylov_dim": (16, "int"),
    "prop.krylov_tol": (1e-10, "float"),
    "absorber.width": (4.0, "float"),
    "absorber.strength": (1.0, "float"),
    "barrier.eta0_scale": (0.7, "float"),
    "barrier.p0_budget": (0.10, "float"),
    "barrier.forbidden_only": (False, "bool"),
    "barrier.r_bound_init": (0.0, "float"),
    "barrier.max_iters": (8, "int"),
    "ground.dtau": (0.1, "float"),
    "ground.tol": (1e-8, "float"),
    "ground.max_iter": (3000, "int"),
    "ground.krylov_dim": (48, "int"),
    "observables.stride": (4, "int"),
    "observables.r_sep_scale": (2.0, "float"),
    "observables.baseline": ("none", "str"),
    "baseline.dt_factor": (5, "int"),
    "detector.enabled": (True, "bool"),
    "detector.spacing": (0.0, "float"),
    "detector.offset_in": (0.0, "float"),
    "detector.offset_out": (0.0, "float"),
    "output.potential": (False, "bool"),
    "run.checkpoint_at_peak": (False, "bool"),
    "run.resume_from": ("", "str"),
    "sweep.e0_values": ((0.9, 1.0, 1.1, 1.2, 1.3, 1.4), "floats"),
    "tof.k0": (2.0, "float"),
    "tof.length": (10.0, "float"),
    "tof.x_start": (-15.0, "float"),
    "tof.sigma": (3.0, "float"),
    "tof.nx": (2048, "int"),
    "tof.x_min": (-48.0, "float"),
    "tof.x_max": (72.0, "float"),
    "tof.clock_dt": (50.0, "float"),
    "tof.dt": (0.005, "float"),
}

_TRUE = {"true", "yes", "on", "1"}
_FALSE = {"false", "no", "off", "0"}


def _convert(key: str, raw, kind: str):
    if not isinstance(raw, str):
        return raw
    raw = raw.strip()
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "bool":
            low = raw.lower()
            if low in _TRUE:
                return True
            if low in _FALSE:
                return False
            raise ValueError(raw)
        if kind == "floats":
            parts = [p for p in raw.split(",") if p.strip()]
            if not parts:
                raise ValueError("empty list")
            return tuple(float(p) for p in parts)
        return raw
    except ValueError as exc:
        raise ConfigurationError(f"config key {key}: cannot parse {raw!r} as {kind}") from exc


class RunConfig:
    """Resolved flat configuration (defaults merged with file and overrides)."""

    def __init__(self, values: dict):
        self._values = dict(values)

    def __getitem__(self, key: str):
        return self._values[key]

    @classmethod
    def from_mapping(cls, mapping: dict | None = None) -> "RunConfig":
        values = {k: d for k, (d, _) in _DEFAULTS.items()}
        for key, raw in (mapping or {}).items():
            if key not in _DEFAULTS:
                raise ConfigurationError(f"unknown config key {key!r}")
            values[key] = _convert(key, raw, _DEFAULTS[key][1])
        return cls(values)

    @classmethod
    def from_file(cls, path, overrides: dict | None = None) -> "RunConfig":
        mapping = parse_config_text(Path(path).read_text(encoding="utf-8"))
        mapping.update(overrides or {})
        return cls.from_mapping(mapping)

    def replaced(self, **flat) -> "RunConfig":
        """New config with dotted keys passed as key__with__dots or via dict."""
        values = dict(self._values)
        for key, val in flat.items():
            key = key.replace("__", ".")
            if key not in _DEFAULTS:
                raise ConfigurationError(f"unknown config key {key!r}")
            values[key] = _convert(key, val, _DEFAULTS[key][1])
        return RunConfig(values)

    def echo(self) -> str:
        lines = []
        for key in sorted(self._values):
            val = self._values[key]
            if isinstance(val, tuple):
                val = ",".join("%.17g" % v for v in val)
            elif isinstance(val, bool):
                val = "true" if val else "false"
            elif isinstance(val, float):
                val = "%.17g" % val
            lines.append(f"{key} = {val}")
        return "\n".join(lines) + "\n"


def parse_config_text(text: str) -> dict:
    """Flat "section.key = value" lines; '#' starts a comment."""
    mapping = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigurationError(f"config line {lineno}: expected 'key = value'")
        key, raw = body.split("=", 1)
        key = key.strip()
        if "." not in key:
            raise ConfigurationError(f"config line {lineno}: key {key!r} has no section")
        if key in mapping:
            raise ConfigurationError(f"config line {lineno}: duplicate key {key!r}")
        mapping[key] = raw.strip()
    return mapping


@dataclass
class _Setup:
    grid: object
    atom: AtomParams
    pulse: PulseParams
    clock: ClockParams
    prop: PropagatorConfig
    absorber: object
    coulomb: object
    stride: int
    n_half: int
    n_total: int

    @property
    def t_peak(self) -> float:
        return self.n_half * self.prop.dt

    @property
    def t_end(self) -> float:
        return self.n_total * self.prop.dt


def _setup(cfg: RunConfig) -> _Setup:
    grid = build_grid(cfg["grid.nx"], cfg["grid.ny"],
                      cfg["grid.x_min"], cfg["grid.x_max"],
                      cfg["grid.y_min"], cfg["grid.y_max"])
    atom = AtomParams(z=cfg["atom.z"])
    e0 = cfg["field.e0"]
    if not (e0 > 0.0):
        raise ConfigurationError("field.e0 must be positive for a run")
    omega = cfg["field.omega"]
    if omega <= 0.0:
        gamma = cfg["field.gamma"]
        if gamma <= 0.0:
            raise ConfigurationError("need field.omega > 0 or field.gamma > 0")
        omega = gamma * e0 / (2.0 * atom.z)
    prop = PropagatorConfig(dt=cfg["prop.dt"], krylov_dim=cfg["prop.krylov_dim"],
                            krylov_tol=cfg["prop.krylov_tol"])
    stride = cfg["observables.stride"]
    if stride < 1:
        raise ConfigurationError("observables.stride must be >= 1")
    tau_env = math.sqrt(2.0) / omega
    span = cfg["window.span"]
    span_post = cfg["window.span_post"]
    if span <= 0.0 or span_post <= 0.0:
        raise ConfigurationError("window.span and window.span_post must be positive")
    # The window is asymmetric on purpose: a long rise keeps the turn-on
    # adiabatic (envelope e^-25 E0 at span 5), while the tail only needs to
    # outlast the ionization burst and the bound/free separation (e^-12 E0
    # at span_post 3.5).  Stretching the tail further just accumulates
    # zero-field clock phase on the bound part and inflates every
    # conditioned time with it.
    n_half = stride * max(1, math.ceil(span * tau_env / (prop.dt * stride)))
    n_post = stride * max(1, math.ceil(span_post * tau_env / (prop.dt * stride)))
    pulse = PulseParams(e0=e0, omega=omega, t0=n_half * prop.dt)
    dt_clock = cfg["clock.dt"]
    if dt_clock <= 0.0:
        dt_clock = 200.0 / (atom.z * atom.z)
    clock = ClockParams(n_levels=cfg["clock.n_levels"], dt_clock=dt_clock)
    absorber = absorber_mask(grid, cfg["absorber.width"], cfg["absorber.strength"])
    coulomb = coulomb_potential(grid, atom)
    return _Setup(grid=grid, atom=atom, pulse=pulse, clock=clock, prop=prop,
                  absorber=absorber, coulomb=coulomb, stride=stride,
                  n_half=n_half, n_total=n_half + n_post)


@dataclass
class RunResult:
    report: TimesReport
    region: BarrierRegion
    e_shift: float
    p0: float
    r_sep: float
    record: DetectorRecord | None
    distribution: object | None
    out_dir: Path
    paths: dict


@dataclass
class SweepResult:
    reports: list
    exponents: dict
    out_dir: Path


@dataclass
class TofResult:
    k0: float
    length: float
    measured: float
    expected: float


def _stark_fixed_point(field_t0, setup: _Setup, cfg: RunConfig):
    """Self-consistent (bound disk radius, Stark level, barrier) at the peak."""
    r_bound = cfg["barrier.r_bound_init"]
    if r_bound <= 0.0:
        r_bound = 4.0 / setup.atom.z
    e_shift = math.nan
    region = None
    for _ in range(max(1, cfg["barrier.max_iters"])):
        e_shift = stark_shifted_energy(field_t0, setup.atom, setup.pulse,
                                       setup.t_peak, r_bound)
        region = compute_barrier(setup.atom, setup.pulse.e0, e_shift,
                                 cfg["barrier.eta0_scale"],
                                 cfg["barrier.p0_budget"])
        r_new = cfg["observables.r_sep_scale"] * region.x_exit
        if abs(r_new - r_bound) <= 1e-9 * max(1.0, abs(r_bound)):
            return e_shift, region, r_new
        r_bound = r_new
    log.warning("bound-disk fixed point did not settle; using r = %.6g", r_bound)
    return e_shift, region, r_bound


def _check_line_clear(grid, absorber, line) -> None:
    vals = absorber.values
    for ix, iy in zip(line.ix, line.iy):
        if (vals[ix, iy] < 1.0 or vals[ix + 1, iy] < 1.0
                or vals[ix, iy + 1] < 1.0 or vals[ix + 1, iy + 1] < 1.0):
            raise ConfigurationError(
                "a detector line runs inside the absorber ring; "
                "enlarge the grid or narrow the absorber"
            )


@dataclass
class _Baseline:
    """Zero-field reference measurement: final reading and occupancy series."""

    tau_tilde: float
    times: np.ndarray
    occupancy: np.ndarray

    @classmethod
    def empty(cls) -> "_Baseline":
        return cls(0.0, np.zeros(0), np.zeros(0))


def _crop_grid(grid, half_x: float, half_y: float):
    """Smallest lattice-aligned subgrid covering [-half_x, half_x] x
    [-half_y, half_y].  Node coordinates are shared arrays of the parent's,
    so a region rasterizes to exactly the same nodes on both grids."""
    ix0 = max(0, int(np.searchsorted(grid.x, -half_x)) - 1)
    ix1 = min(grid.nx - 1, int(np.searchsorted(grid.x, half_x)) + 1)
    iy0 = max(0, int(np.searchsorted(grid.y, -half_y)) - 1)
    iy1 = min(grid.ny - 1, int(np.searchsorted(grid.y, half_y)) + 1)
    sub = Grid2D(nx=ix1 - ix0 + 1, ny=iy1 - iy0 + 1,
                 x=grid.x[ix0:ix1 + 1], y=grid.y[iy0:iy1 + 1],
                 dx=grid.dx, dy=grid.dy)
    return sub, (ix0, ix1, iy0, iy1)


def _reference_run(cfg: RunConfig, setup: _Setup, ground,
                   region: BarrierRegion):
    """Clocked zero-field run over the same window and region.

    Two properties of the zero-field problem keep this cheap.  Nothing
    escapes the atom, so the run lives on a lattice-aligned subgrid just
    large enough for the region plus the orbital tail (density outside
    falls below 1e-12).  And the Hamiltonian is static, so the step can be
    several times the driven run's, clamped so the Krylov order still
    converges within the configured cap.  Returns the final unconditional
    reading (subtracted from the driven run's raw readings) and the sampled
    region occupancy (the dwell-integral baseline, after scaling by the
    driven run's surviving bound norm)."""
    z = setup.atom.z
    half_x = max(region.x_exit, region.eta0 / 2.0, 7.0 / z) + 1.5
    half_y = max(math.sqrt(region.xi_exit * region.eta0), 7.0 / z) + 1.5
    sub, (ix0, ix1, iy0, iy1) = _crop_grid(setup.grid, half_x, half_y)
    field = ComplexField(sub, ground.field.values[ix0:ix1 + 1, iy0:iy1 + 1])
    coulomb = coulomb_potential(sub, setup.atom)
    _, mask_idx = rasterize_barrier(sub, region)

    # empirical convergence margin: order ~= |H| dt suffices, so keep
    # |H| dt under 0.8 of the cap
    h_norm = (8.0 / 3.0) * (1.0 / sub.dx ** 2
                            + (0.0 if sub.is_1d else 1.0 / sub.dy ** 2))
    h_norm += float(np.max(np.abs(coulomb.values)))
    dt_cap = 0.8 * setup.prop.krylov_dim / h_norm
    factor = max(1, cfg["baseline.dt_factor"])
    dt_ref = max(setup.prop.dt, min(factor * setup.prop.dt, dt_cap))
    n_steps = max(1, int(math.ceil(setup.t_end / dt_ref - 1e-9)))
    prop = PropagatorConfig(dt=setup.t_end / n_steps,
                            krylov_dim=setup.prop.krylov_dim,
                            krylov_tol=setup.prop.krylov_tol)
    log.info("zero-field reference run: %dx%d subgrid, %d steps of dt = %.4g",
             sub.nx, sub.ny, n_steps, prop.dt)
    state = init_state(field, setup.clock, 0.0)
    t_samples: list = []
    p_samples: list = []

    def obs(s, i, t):
        t_samples.append(t)
        p_samples.append(mask_probability(s, mask_idx))

    evolve(state, prop, n_steps, static_potential=coulomb, pulse=None,
           mask_idx=mask_idx, observers=[(1, obs)])
    reading = clock_read(setup.clock, _full_part(state), sub.darea)
    return _Baseline(reading, np.asarray(t_samples), np.asarray(p_samples))


def _full_part(state) -> StatePart:
    return StatePart("all", state.total_probability(), state.channels,
                     state.absorbed_vk)


def run_single(cfg: RunConfig, out_dir) -> RunResult:
    """One complete measurement at fixed field strength."""
    if cfg["run.resume_from"]:
        return _resume_run(cfg, out_dir)
    setup = _setup(cfg)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"config": out / "config_resolved.txt"}
    paths["config"].write_text(cfg.echo(), encoding="ascii")
    t_begin = _wallclock.perf_counter()
    log.info("run: E0 = %.4g, gamma = %.4g, grid %dx%d, window %.4g a.u. (%d steps)",
             setup.pulse.e0, setup.pulse.gamma(setup.atom.z), setup.grid.nx,
             setup.grid.ny, setup.t_end, setup.n_total)

    ground = solve_ground_state(
        setup.grid, setup.atom, dtau=cfg["ground.dtau"], tol=cfg["ground.tol"],
        max_iter=cfg["ground.max_iter"], krylov_dim=cfg["ground.krylov_dim"],
        krylov_tol=cfg["prop.krylov_tol"])
    paths["ground_log"] = out / "ground_log.csv"
    ground.to_csv(paths["ground_log"])
    log.info("ground state: E = %.8g after %d iterations (residual %.3g)",
             ground.energy, ground.iterations, ground.residual)

    # evolve without the clock up to the pulse peak to place the Stark level
    pre = init_state(ground.field, None, 0.0)
    evolve(pre, setup.prop, setup.n_half, static_potential=setup.coulomb,
           pulse=setup.pulse, absorber=setup.absorber)
    field_t0 = ComplexField(setup.grid, pre.channels[0])
    e_shift, region, r_sep = _stark_fixed_point(field_t0, setup, cfg)
    log.info("Stark level %.6g; barrier x in [%.4g, %.4g], eta0 = %.4g, r_sep = %.4g",
             e_shift, region.x_in, region.x_exit, region.eta0, r_sep)

    mask, mask_idx = rasterize_barrier(setup.grid, region, setup.absorber,
                                       cfg["barrier.forbidden_only"])
    gvals = ground.field.values.reshape(-1)[mask_idx]
    p0 = float(np.sum(gvals.real ** 2 + gvals.imag ** 2)) * setup.grid.darea

    lines = None
    if cfg["detector.enabled"]:
        spacing = cfg["detector.spacing"] or None
        lines = barrier_detectors(setup.grid, region, spacing,
                                  cfg["detector.offset_in"],
                                  cfg["detector.offset_out"])
        for ln in lines:
            _check_line_clear(setup.grid, setup.absorber, ln)

    curve = free_expectation_curve(setup.clock, cfg["clock.samples_per_dt"])
    paths["calibration"] = out / "calibration.csv"
    curve.to_csv(paths["calibration"])

    baseline_mode = cfg["observables.baseline"]
    if baseline_mode not in ("none", "reference"):
        raise ConfigurationError(f"unknown baseline mode {baseline_mode!r}")
    if baseline_mode == "reference":
        baseline = _reference_run(cfg, setup, ground, region)
        log.info("reference reading %.6g over %.4g a.u.",
                 baseline.tau_tilde, setup.t_end)
    else:
        baseline = _Baseline.empty()

    if cfg["output.potential"]:
        paths["potential"] = out / "potential_peak.csv"
        write_field_csv(total_potential(setup.grid, setup.atom, setup.pulse,
                                        setup.t_peak), paths["potential"])

    scalars = {
        "e_shift": e_shift, "x_in": region.x_in, "x_exit": region.x_exit,
        "eta0": region.eta0, "r_sep": r_sep, "p0": p0,
        "tau_tilde_base": baseline.tau_tilde,
    }
    state = init_state(ground.field, setup.clock, 0.0)
    acc = _Accumulators()
    result = _measure(cfg, setup, out, paths, state, mask_idx, lines, curve,
                      scalars, baseline, acc, start_step=0)
    log.info("run finished in %.1f s", _wallclock.perf_counter() - t_begin)
    return result


class _Accumulators:
    """Observer sample lists; preloaded from the sidecar when resuming."""

    _NAMES = ("dwell_t", "dwell_p", "det_t", "det_in", "det_exit",
              "log_t", "log_norm", "log_bound", "log_absorbed")

    def __init__(self):
        for name in self._NAMES:
            setattr(self, name, [])

    def arrays(self) -> dict:
        return {name: np.asarray(getattr(self, name), dtype=float)
                for name in self._NAMES}

    @classmethod
    def from_arrays(cls, data) -> "_Accumulators":
        acc = cls()
        for name in cls._NAMES:
            getattr(acc, name).extend(np.asarray(data[name], dtype=float).tolist())
        return acc


def _measure(cfg, setup: _Setup, out: Path, paths: dict, state, mask_idx,
             lines, curve, scalars: dict, baseline: _Baseline,
             acc: _Accumulators, start_step: int) -> RunResult:
    """Clocked propagation from start_step to the end plus all post-processing."""
    grid = setup.grid
    steps_left = setup.n_total - start_step
    if steps_left <= 0:
        raise ConfigurationError("nothing left to run after the checkpoint")
    resuming = start_step > 0
    radius = np.hypot(grid.x[:, None], grid.y[None, :]).reshape(-1)
    disk_idx = np.flatnonzero(radius < scalars["r_sep"]).astype(np.int64)

    # Samples are gated on the absolute step index so a resumed run lands on
    # exactly the same lattice as a straight-through one; the recorded time
    # is recomputed from that index for the same reason.  The sample at the
    # checkpoint step itself is already in the sidecar, hence the skip.
    def on_lattice(i, every):
        n = start_step + i
        return n % every == 0 or n == setup.n_total

    def abs_time(i):
        return (start_step + i) * setup.prop.dt

    def obs_dwell(s, i, t):
        if (resuming and i == 0) or not on_lattice(i, setup.stride):
            return
        acc.dwell_t.append(abs_time(i))
        acc.dwell_p.append(mask_probability(s, mask_idx))

    def obs_detector(s, i, t):
        if (resuming and i == 0) or not on_lattice(i, setup.stride):
            return
        acc.det_t.append(abs_time(i))
        acc.det_in.append(line_flux(s.channels, grid, lines[0]))
        acc.det_exit.append(line_flux(s.channels, grid, lines[1]))

    log_every = max(setup.stride * 50, 1)

    def obs_log(s, i, t):
        if (resuming and i == 0) or not on_lattice(i, log_every):
            return
        acc.log_t.append(abs_time(i))
        acc.log_norm.append(s.total_norm2())
        acc.log_bound.append(mask_probability(s, disk_idx))
        acc.log_absorbed.append(float(np.sum(s.absorbed_ch)))
        log.info("t = %8.3f  norm = %.6f  bound = %.6f  absorbed = %.3g",
                 t, acc.log_norm[-1], acc.log_bound[-1], acc.log_absorbed[-1])

    observers = [(1, obs_dwell)]
    if lines is not None:
        observers.append((1, obs_detector))
    observers.append((1, obs_log))

    if cfg["run.checkpoint_at_peak"] and start_step < setup.n_half:
        ck_path = out / "checkpoint.qctd"
        paths["checkpoint"] = ck_path

        def obs_checkpoint(s, i, t):
            if i + start_step != setup.n_half:
                return
            write_checkpoint(ck_path, s)
            data = acc.arrays()
            data.update(scalars)
            data["base_t"] = baseline.times
            data["base_p"] = baseline.occupancy
            data["n_half"] = setup.n_half
            data["n_total"] = setup.n_total
            np.savez(out / "checkpoint_observers.npz", **data)
            log.info("checkpoint written at t = %.4g", t)

        # runs after the sample observers so the sidecar includes step i
        observers.append((1, obs_checkpoint))

    evolve(state, setup.prop, steps_left, static_potential=setup.coulomb,
           pulse=setup.pulse, mask_idx=mask_idx, absorber=setup.absorber,
           observers=observers)

    return _postprocess(cfg, setup, out, paths, state, lines, curve,
                        scalars, baseline, acc)


def _postprocess(cfg, setup: _Setup, out: Path, paths: dict, state, lines,
                 curve, scalars: dict, baseline: _Baseline,
                 acc: _Accumulators) -> RunResult:
    grid = setup.grid
    dwell_t = np.asarray(acc.dwell_t)
    dwell_p = np.asarray(acc.dwell_p)
    p0 = scalars["p0"]
    if baseline.times.size >= 2:
        # zero-field occupancy resampled onto the dwell grid, drained at the
        # same rate as the measured bound norm so depletion is not counted
        # as negative dwell
        bound = np.asarray(acc.log_bound)
        survival = np.interp(dwell_t, np.asarray(acc.log_t), bound / bound[0])
        dwell_base = np.interp(dwell_t, baseline.times,
                               baseline.occupancy) * survival
    else:
        dwell_base = 0.0
    tau_d_prime = dwell_time_from_series(dwell_t, dwell_p, baseline=dwell_base)

    record = None
    dist = None
    if lines is not None:
        record = DetectorRecord.from_signals(acc.det_t, acc.det_in, acc.det_exit)
        dist = arrival_correlation(record)

    r_sep = scalars["r_sep"]
    bound, free = split_bound_free(state, r_sep)
    transmitted, reflected = free.weight, bound.weight
    tau_tilde_d = clock_read(setup.clock, _full_part(state), grid.darea)
    tau_tilde_t = clock_read(setup.clock, free, grid.darea)
    tau_tilde_r = clock_read(setup.clock, bound, grid.darea)
    total = transmitted + reflected
    mixture = (transmitted * tau_tilde_t + reflected * tau_tilde_r) / total
    identity_residual = abs(tau_tilde_d - mixture)

    tau_d, tau_t, tau_r = assemble_times(
        curve, tau_tilde_d, tau_tilde_t, tau_tilde_r, transmitted, reflected,
        baseline_mode=cfg["observables.baseline"],
        tau_tilde_base=scalars["tau_tilde_base"])

    report = TimesReport(
        e0=setup.pulse.e0, gamma=setup.pulse.gamma(setup.atom.z),
        z=setup.atom.z, transmitted=transmitted, reflected=reflected,
        tau_d_prime=tau_d_prime, tau_tilde_d=tau_tilde_d,
        tau_tilde_t=tau_tilde_t, tau_tilde_r=tau_tilde_r,
        tau_d=tau_d, tau_t=tau_t, tau_r=tau_r,
        tau_k=keldysh_time(setup.pulse.e0, setup.atom.z),
        identity_residual=identity_residual)
    if record is not None:
        report.tau_tsub = record.peak_lag()
        report.tau_t_v = dist.mean()
    report.warnings = ordering_warnings(report)
    if identity_residual > 1e-8 * setup.clock.dt_clock:
        report.warnings.append(
            f"partition identity residual {identity_residual:.3g}")
    for msg in report.warnings:
        log.warning("%s", msg)

    paths["times"] = out / "times.csv"
    report.to_csv(paths["times"])
    paths["dwell"] = out / "dwell.csv"
    with open(paths["dwell"], "w", encoding="ascii", newline="\n") as fh:
        fh.write("t,p_b\n")
        for t, p in zip(dwell_t, dwell_p):
            fh.write("%.17g,%.17g\n" % (t, p))
    paths["runlog"] = out / "runlog.csv"
    with open(paths["runlog"], "w", encoding="ascii", newline="\n") as fh:
        fh.write("t,norm,bound,absorbed\n")
        for row in zip(acc.log_t, acc.log_norm, acc.log_bound, acc.log_absorbed):
            fh.write(",".join("%.17g" % v for v in row) + "\n")
    if baseline.times.size:
        paths["baseline"] = out / "baseline.csv"
        with open(paths["baseline"], "w", encoding="ascii", newline="\n") as fh:
            fh.write("t,p_b0\n")
            for t, p in zip(baseline.times, baseline.occupancy):
                fh.write("%.17g,%.17g\n" % (t, p))
    if record is not None:
        paths["detector"] = out / "detector.csv"
        record.to_csv(paths["detector"])
        paths["ptau"] = out / "ptau.csv"
        dist.to_csv(paths["ptau"])

    region = BarrierRegion(z=setup.atom.z, e0=setup.pulse.e0,
                           e_shift=scalars["e_shift"], x_in=scalars["x_in"],
                           x_exit=scalars["x_exit"], eta0=scalars["eta0"])
    paths["summary"] = out / "summary.txt"
    _write_summary(paths["summary"], report, region, scalars)
    return RunResult(report=report, region=region, e_shift=scalars["e_shift"],
                     p0=p0, r_sep=r_sep, record=record, distribution=dist,
                     out_dir=out, paths=paths)


def _write_summary(path, report: TimesReport, region: BarrierRegion,
                   scalars: dict) -> None:
    lines = [
        "e0 = %.17g" % report.e0,
        "gamma = %.17g" % report.gamma,
        "z = %.17g" % report.z,
        "e_shift = %.17g" % region.e_shift,
        "x_in = %.17g" % region.x_in,
        "x_exit = %.17g" % region.x_exit,
        "eta0 = %.17g" % region.eta0,
        "r_sep = %.17g" % scalars["r_sep"],
        "p0 = %.17g" % scalars["p0"],
        "tau_tilde_base = %.17g" % scalars["tau_tilde_base"],
        "T = %.17g" % report.transmitted,
        "R = %.17g" % report.reflected,
        "identity_residual = %.17g" % report.identity_residual,
        "tau_d_prime = %.17g" % report.tau_d_prime,
        "tau_d = %.17g" % report.tau_d,
        "tau_t = %.17g" % report.tau_t,
        "tau_r = %.17g" % report.tau_r,
        "tau_k = %.17g" % report.tau_k,
        "tau_tsub = %.17g" % report.tau_tsub,
        "tau_t_v = %.17g" % report.tau_t_v,
    ]
    for msg in report.warnings:
        lines.append("warning = " + msg)
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def _resume_run(cfg: RunConfig, out_dir) -> RunResult:
    ck_path = Path(cfg["run.resume_from"])
    sidecar = ck_path.with_name(ck_path.stem + "_observers.npz")
    if not ck_path.exists():
        raise CheckpointError(f"checkpoint {ck_path} does not exist")
    if not sidecar.exists():
        raise CheckpointError(f"observer sidecar {sidecar} is missing")
    setup = _setup(cfg)
    state = read_checkpoint(ck_path, setup.clock)
    if not state.grid.matches(setup.grid):
        raise CheckpointError("checkpoint grid does not match the configuration")
    data = np.load(sidecar)
    scalars = {k: float(data[k]) for k in
               ("e_shift", "x_in", "x_exit", "eta0", "r_sep", "p0",
                "tau_tilde_base")}
    baseline = _Baseline(scalars["tau_tilde_base"],
                         np.asarray(data["base_t"], dtype=float),
                         np.asarray(data["base_p"], dtype=float))
    n_half = int(data["n_half"])
    n_total = int(data["n_total"])
    if n_total != setup.n_total or n_half != setup.n_half:
        raise CheckpointError(
            f"checkpoint window ({n_half}/{n_total} steps) does not match "
            f"the configuration ({setup.n_half}/{setup.n_total})"
        )
    start_step = int(round((state.time) / setup.prop.dt))
    if abs(start_step * setup.prop.dt - state.time) > 1e-9:
        raise CheckpointError("checkpoint time is not on the step lattice")
    acc = _Accumulators.from_arrays(data)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"config": out / "config_resolved.txt"}
    paths["config"].write_text(cfg.echo(), encoding="ascii")
    log.info("resuming at t = %.4g (step %d of %d)", state.time, start_step,
             setup.n_total)

    region = BarrierRegion(z=setup.atom.z, e0=setup.pulse.e0,
                           e_shift=scalars["e_shift"], x_in=scalars["x_in"],
                           x_exit=scalars["x_exit"], eta0=scalars["eta0"])
    _, mask_idx = rasterize_barrier(setup.grid, region, setup.absorber,
                                    cfg["barrier.forbidden_only"])
    lines = None
    if cfg["detector.enabled"]:
        spacing = cfg["detector.spacing"] or None
        lines = barrier_detectors(setup.grid, region, spacing,
                                  cfg["detector.offset_in"],
                                  cfg["detector.offset_out"])
        for ln in lines:
            _check_line_clear(setup.grid, setup.absorber, ln)
    curve = free_expectation_curve(setup.clock, cfg["clock.samples_per_dt"])
    return _measure(cfg, setup, out, paths, state, mask_idx, lines, curve,
                    scalars, baseline, acc, start_step=start_step)


def run_sweep(cfg: RunConfig, out_dir) -> SweepResult:
    """One run per field strength plus log-log power-law fits."""
    e0s = cfg["sweep.e0_values"]
    if len(e0s) < 2:
        raise ConfigurationError("sweep needs at least two field strengths")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    reports = []
    for e0 in e0s:
        sub = cfg.replaced(**{"field__e0": e0})
        res = run_single(sub, out / ("e0_%g" % e0))
        reports.append(res.report)
    write_times_csv(out / "times.csv", reports)

    exponents = {}
    rows = ["quantity,exponent,amplitude"]
    for name in ("tau_t", "tau_r", "tau_d"):
        pts = [(r.e0, getattr(r, name)) for r in reports
               if getattr(r, name) > 0.0 and math.isfinite(getattr(r, name))]
        if len(pts) >= 3:
            lx = np.log([p[0] for p in pts])
            ly = np.log([p[1] for p in pts])
            slope, intercept = np.polyfit(lx, ly, 1)
            exponents[name] = float(slope)
            rows.append("%s,%.17g,%.17g" % (name, slope, math.exp(intercept)))
            log.info("%s ~ E0^%.3f over %d points", name, slope, len(pts))
        else:
            exponents[name] = math.nan
            rows.append("%s,nan,nan" % name)
            log.warning("%s: too few positive values for a power-law fit", name)
    (out / "fit.csv").write_text("\n".join(rows) + "\n", encoding="ascii")
    return SweepResult(reports=reports, exponents=exponents, out_dir=out)


def run_time_of_flight(cfg: RunConfig, out_dir) -> TofResult:
    """Free 1D wavepacket crossing a clocked region: measured vs L/k0.

    Validates the whole clock readout chain on a problem with a known
    answer.  The packet starts left of the region [0, L], crosses it at
    group velocity k0, and the calibrated reading must match L/k0.
    """
    k0 = cfg["tof.k0"]
    length = cfg["tof.length"]
    x0 = cfg["tof.x_start"]
    sigma = cfg["tof.sigma"]
    if k0 <= 0.0 or length <= 0.0 or sigma <= 0.0:
        raise ConfigurationError("time of flight needs k0, length, sigma > 0")
    if x0 + 4.0 * sigma > 0.0:
        raise ConfigurationError("packet must start left of the clocked region")
    grid = build_grid(cfg["tof.nx"], 1, cfg["tof.x_min"], cfg["tof.x_max"])
    clock = ClockParams(n_levels=cfg["clock.n_levels"], dt_clock=cfg["tof.clock_dt"])
    prop = PropagatorConfig(dt=cfg["tof.dt"], krylov_dim=cfg["prop.krylov_dim"],
                            krylov_tol=cfg["prop.krylov_tol"])

    x = grid.x[:, None]
    packet = np.exp(-((x - x0) ** 2) / (4.0 * sigma * sigma) + 1j * k0 * x)
    field = ComplexField(grid, packet).normalized()
    state = init_state(field, clock, 0.0)
    mask_idx = np.nonzero((grid.x >= 0.0) & (grid.x <= length))[0].astype(np.int64)
    if mask_idx.size == 0:
        raise ConfigurationError("clocked region contains no grid node")

    t_end = (length - x0 + 4.0 * sigma + 12.0) / k0
    n_steps = int(math.ceil(t_end / prop.dt))
    log.info("time of flight: k0 = %.3g, L = %.3g, %d steps", k0, length, n_steps)
    evolve(state, prop, n_steps, mask_idx=mask_idx)

    dens = state.density()
    edge = max(8, grid.nx // 256)
    leak = float(np.sum(dens[:edge])) + float(np.sum(dens[-edge:]))
    leak *= grid.darea
    if leak > 1e-6:
        raise NumericalError(
            f"wavepacket reached the grid edge (probability {leak:.3g}); "
            "enlarge tof.x_min/x_max"
        )

    tau_tilde = clock_read(clock, _full_part(state), grid.darea)
    curve = free_expectation_curve(clock, cfg["clock.samples_per_dt"])
    measured = calibrate(curve, tau_tilde)
    expected = length / k0
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "tof.csv").write_text(
        "k0,length,measured,expected\n"
        + ",".join("%.17g" % v for v in (k0, length, measured, expected)) + "\n",
        encoding="ascii")
    log.info("time of flight: measured %.4g vs expected %.4g", measured, expected)
    return TofResult(k0=k0, length=length, measured=measured, expected=expected)
