"""Time propagation of the clock-coupled wavefunction.

The coupled Hamiltonian is block-diagonal in the clock levels: channel n
evolves under H_E(t) + n*omega_clock inside the coupling region.  One step
of size dt applies (symmetric splitting, 2nd order)

    exp(-i n omega dt/2 mask) . exp(-i H_E(t+dt/2) dt) . exp(-i n omega dt/2 mask)

followed by one multiplicative absorber application.  The spatial
exponential uses a Lanczos (Krylov) approximation with an a-posteriori
residual estimate; a vanishing recurrence coefficient means the Krylov
space closed and the step is exact in that subspace.

Probability removed by the absorber is booked per channel and per clock
pointer state, so clock readings taken at the end of a run still include
flux that left the box (its pointer content froze when it left the
coupling region, which lies far inside the absorber ring).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal

from . import _kernels
from .clock import ClockParams
from .errors import ConfigurationError, NumericalError
from .grid import ComplexField, Grid2D, ScalarField

__all__ = [
    "PropagatorConfig",
    "ClockedWaveFunction",
    "init_state",
    "krylov_step",
    "evolve",
]


@dataclass(frozen=True)
class PropagatorConfig:
    dt: float = 0.005
    krylov_dim: int = 16
    krylov_tol: float = 1e-10

    def __post_init__(self):
        if not (self.dt > 0.0):
            raise ConfigurationError(f"dt must be positive, got {self.dt}")
        if not (3 <= self.krylov_dim <= 64):
            raise ConfigurationError(f"krylov_dim must be in 3..64, got {self.krylov_dim}")
        if not (0.0 < self.krylov_tol < 1e-2):
            raise ConfigurationError(f"krylov_tol out of range: {self.krylov_tol}")


class ClockedWaveFunction:
    """N clock channels on one grid, plus the absorber ledgers."""

    def __init__(self, grid: Grid2D, clock: ClockParams | None,
                 channels: np.ndarray, time: float = 0.0):
        n_ch = 1 if clock is None else clock.n_levels
        channels = np.ascontiguousarray(channels, dtype=np.complex128)
        if channels.shape != (n_ch, grid.nx, grid.ny):
            raise ConfigurationError(
                f"channel array shape {channels.shape} != {(n_ch, grid.nx, grid.ny)}"
            )
        self.grid = grid
        self.clock = clock
        self.channels = channels
        self.time = float(time)
        self.absorbed_ch = np.zeros(n_ch)
        self.absorbed_vk = np.zeros(n_ch)

    @property
    def n_channels(self) -> int:
        return self.channels.shape[0]

    def channel_norm2(self) -> np.ndarray:
        """Integral of |psi_n|^2 per channel."""
        out = np.empty(self.n_channels)
        row = np.empty(self.grid.nx)
        for n in range(self.n_channels):
            _kernels.norm2_rows(self.channels[n], row)
            out[n] = np.sum(row) * self.grid.darea
        return out

    def total_norm2(self) -> float:
        return float(np.sum(self.channel_norm2()))

    def total_probability(self) -> float:
        """Norm on the grid plus everything the absorber removed."""
        return self.total_norm2() + float(np.sum(self.absorbed_ch))

    def density(self) -> np.ndarray:
        """Clock-traced probability density sum_n |psi_n|^2."""
        d = np.zeros(self.grid.shape)
        for n in range(self.n_channels):
            c = self.channels[n]
            d += c.real * c.real + c.imag * c.imag
        return d

    def pointer_fields(self) -> np.ndarray:
        """c_k(x, y) = sum_n <V_k|J_n> psi_n(x, y), shape (N, nx, ny)."""
        if self.clock is None:
            raise ConfigurationError("pointer decomposition needs a clock")
        w = self.clock.pointer_matrix()
        return np.tensordot(w, self.channels, axes=(1, 0))

    def copy(self) -> "ClockedWaveFunction":
        c = ClockedWaveFunction(self.grid, self.clock, self.channels.copy(), self.time)
        c.absorbed_ch = self.absorbed_ch.copy()
        c.absorbed_vk = self.absorbed_vk.copy()
        return c


def init_state(ground: ComplexField, clock: ClockParams | None,
               time: float = 0.0) -> ClockedWaveFunction:
    """Product state (ground wavefunction) x (pointer at V_0).

    V_0 has amplitude 1/sqrt(N) on every level, so each channel starts as
    the ground state scaled by 1/sqrt(N).  clock=None gives the single
    clock-free channel used for calibration-free evolution.
    """
    n_ch = 1 if clock is None else clock.n_levels
    ch = np.empty((n_ch, ground.grid.nx, ground.grid.ny), dtype=np.complex128)
    ch[:] = ground.values[None, :, :] / np.sqrt(n_ch)
    return ClockedWaveFunction(ground.grid, clock, ch, time)


class _KrylovWorkspace:
    def __init__(self, grid: Grid2D, m_max: int):
        self.basis = np.empty((m_max + 1, grid.nx, grid.ny), dtype=np.complex128)
        self.w = np.empty((grid.nx, grid.ny), dtype=np.complex128)
        self.row_c = np.empty(grid.nx, dtype=np.complex128)
        self.row_r = np.empty(grid.nx)
        self.alpha = np.empty(m_max)
        self.beta = np.empty(m_max + 1)


def _expm_e1(alpha, beta, m, z):
    """exp(z T_m) e_1 for the real symmetric tridiagonal T_m (z complex)."""
    if m == 1:
        return np.array([np.exp(z * alpha[0])])
    evals, evecs = eigh_tridiagonal(alpha[:m], beta[1:m])
    return evecs @ (np.exp(z * evals) * evecs[0, :])


def _krylov_apply(psi, vpot, x, efield, ax, ay, z, m_max, tol, ws, is_1d):
    """Advance psi (in place) by exp(z H) psi in the Krylov subspace.

    z = -i*dt gives real-time propagation, z = -dtau imaginary time.
    Returns (m_used, err_estimate, alpha_0, beta_1): the leading recurrence
    coefficients are the Rayleigh quotient and eigen-residual of the input
    vector, which the ground-state solver reads off for free.  The error
    estimate is the a-posteriori residual beta_{m+1} * |last component of
    exp(z T) e1| / ||exp(z T) e1||.
    """
    _kernels.norm2_rows(psi, ws.row_r)
    b0 = float(np.sqrt(np.sum(ws.row_r)))
    if b0 == 0.0:
        return 0, 0.0, 0.0, 0.0
    if not np.isfinite(b0):
        raise NumericalError("wavefunction norm is not finite")
    np.multiply(psi, 1.0 / b0, out=ws.basis[0])

    alpha, beta = ws.alpha, ws.beta
    beta[0] = 0.0
    m = m_max
    y = None
    est = np.inf
    for q in range(m_max):
        v = ws.basis[q]
        if is_1d:
            _kernels.apply_h_dot_1d(v, vpot, x, efield, ax, ws.w, ws.row_c)
        else:
            _kernels.apply_h_dot(v, vpot, x, efield, ax, ay, ws.w, ws.row_c)
        alpha[q] = float(np.sum(ws.row_c).real)
        vprev = ws.basis[q - 1] if q > 0 else ws.basis[0]
        _kernels.orth_norm(ws.w, v, vprev, alpha[q], beta[q] if q > 0 else 0.0, ws.row_r)
        beta[q + 1] = float(np.sqrt(np.sum(ws.row_r)))
        if not np.isfinite(alpha[q]) or not np.isfinite(beta[q + 1]):
            raise NumericalError("Lanczos recurrence produced a non-finite coefficient")
        if beta[q + 1] <= 1e-12 * max(1.0, abs(alpha[q])):
            # invariant subspace reached: the small exponential is exact
            m = q + 1
            y = _expm_e1(alpha, beta, m, z)
            est = 0.0
            break
        np.multiply(ws.w, 1.0 / beta[q + 1], out=ws.basis[q + 1])
        if q >= 2:
            y = _expm_e1(alpha, beta, q + 1, z)
            ynorm = float(np.linalg.norm(y))
            est = beta[q + 1] * abs(y[-1]) / max(ynorm, 1e-300)
            if est <= tol:
                m = q + 1
                break
    if y is None or len(y) != m:
        y = _expm_e1(alpha, beta, m, z)
    coeff = b0 * y
    flat = ws.basis[:m].reshape(m, -1)
    np.dot(coeff, flat, out=psi.reshape(-1))
    return m, float(est), float(alpha[0]), float(beta[1])


def krylov_step(field: ComplexField, potential: ScalarField, dt: float,
                cfg: PropagatorConfig, efield: float = 0.0) -> ComplexField:
    """Single Krylov exponential step for a bare (clock-free) field.

    Public entry used by tests and the ground-state solver; the production
    loop drives the same kernel through `evolve`.
    """
    g = field.grid
    ws = _KrylovWorkspace(g, cfg.krylov_dim)
    psi = field.values.copy()
    ax = 1.0 / (g.dx * g.dx)
    ay = 0.0 if g.is_1d else 1.0 / (g.dy * g.dy)
    _krylov_apply(psi, potential.values, g.x, efield, ax, ay, -1j * dt,
                  cfg.krylov_dim, cfg.krylov_tol, ws, g.is_1d)
    return ComplexField(g, psi)


def _ring_arrays(absorber: ScalarField | None):
    if absorber is None:
        return None, None
    m = absorber.values.reshape(-1)
    idx = np.nonzero(m < 1.0)[0].astype(np.int64)
    return idx, np.ascontiguousarray(m[idx])


def evolve(state: ClockedWaveFunction, cfg: PropagatorConfig, n_steps: int, *,
           static_potential: ScalarField | None = None,
           pulse=None,
           mask_idx: np.ndarray | None = None,
           absorber: ScalarField | None = None,
           observers=(),
           skip_spatial: bool = False) -> ClockedWaveFunction:
    """Advance the state by n_steps of cfg.dt, mutating it in place.

    static_potential: time-independent part of H_E (Coulomb etc.).
    pulse: PulseParams or None; the dipole term -x E(t) is evaluated at the
        step midpoint.
    mask_idx: flat indices of the clock coupling region (required when the
        state carries a clock and the coupling is on; pass an empty array
        to decouple the clock).
    observers: iterables of (stride, fn); fn(state, step_index, t) runs
        before the first step, every stride steps, and after the last step.
    skip_spatial: test hook that freezes H_E and leaves only the clock
        phases (used to check pointer cycling against the free clock).
    """
    from .grid import pulse_amplitude  # local import to avoid cycle at module load

    g = state.grid
    dt = cfg.dt
    t0 = state.time
    vpot = np.zeros(g.shape) if static_potential is None else static_potential.values
    ax = 1.0 / (g.dx * g.dx)
    ay = 0.0 if g.is_1d else 1.0 / (g.dy * g.dy)
    ws = _KrylovWorkspace(g, cfg.krylov_dim)

    clock = state.clock
    phases = None
    if clock is not None:
        if mask_idx is None:
            raise ConfigurationError("clocked evolution needs mask_idx (may be empty)")
        mask_idx = np.ascontiguousarray(mask_idx, dtype=np.int64)
        half = np.exp(-1j * clock.level_indices * clock.omega * 0.5 * dt)
        phases = [complex(p) for p in half]

    ring_idx, ring_mask = _ring_arrays(absorber)
    pointer_mat = clock.pointer_matrix() if clock is not None else None
    flat_channels = state.channels.reshape(state.n_channels, -1)

    def notify(i):
        state.time = t0 + i * dt
        for stride, fn in observers:
            if i % stride == 0 or i == n_steps:
                fn(state, i, state.time)

    notify(0)
    z_step = -1j * dt
    for i in range(n_steps):
        t_mid = t0 + (i + 0.5) * dt
        efield = float(pulse_amplitude(pulse, t_mid)) if pulse is not None else 0.0
        if phases is not None and mask_idx.size:
            for n in range(state.n_channels):
                if phases[n] != 1.0 + 0.0j:
                    _kernels.masked_phase(flat_channels[n], mask_idx, phases[n])
        if not skip_spatial:
            for n in range(state.n_channels):
                _, est, _, _ = _krylov_apply(state.channels[n], vpot, g.x, efield,
                                             ax, ay, z_step, cfg.krylov_dim,
                                             cfg.krylov_tol, ws, g.is_1d)
                if est > 100.0 * cfg.krylov_tol:
                    raise NumericalError(
                        f"Krylov step did not converge at t={t_mid:.6g} "
                        f"(estimate {est:.3g}); raise krylov_dim or lower dt"
                    )
        if phases is not None and mask_idx.size:
            for n in range(state.n_channels):
                if phases[n] != 1.0 + 0.0j:
                    _kernels.masked_phase(flat_channels[n], mask_idx, phases[n])
        if ring_idx is not None and ring_idx.size:
            if pointer_mat is not None:
                _kernels.absorb(flat_channels, ring_idx, ring_mask, pointer_mat,
                                g.darea, state.absorbed_ch, state.absorbed_vk)
            else:
                _kernels.absorb_plain(flat_channels, ring_idx, ring_mask,
                                      g.darea, state.absorbed_ch)
        if (i + 1) % 500 == 0 and not np.all(np.isfinite(state.channels[0][:: max(1, g.nx // 8)])):
            raise NumericalError(f"non-finite wavefunction at step {i + 1}")
        notify(i + 1)
    return state
