"""Discrete N-level quantum clock: states, free evolution, calibration.

The clock lives on N = 2j+1 angular-momentum levels |J_n>, n = -j..j.  Its
pointer basis is the discrete Fourier transform of the levels,

    |V_k> = (1/sqrt(N)) * sum_n exp(-2*pi*i*k*n/N) |J_n>,   k = 0..N-1,

and free evolution multiplies the |J_n> amplitude by exp(-i*n*omega*t) with
omega = 2*pi/(N*dt_clock).  After one period dt_clock the pointer advances by
exactly one position, V_k -> V_(k+1 mod N).  The clock-time operator is
T_hat = sum_k dt_clock * k * |V_k><V_k|; reading it on an evolved state and
inverting the tabulated expectation curve recovers elapsed time to a small
fraction of dt_clock.

All amplitudes are ordered by n = -j..j (index 0 holds n = -j).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CalibrationRangeError, ConfigurationError

__all__ = [
    "ClockParams",
    "ClockVector",
    "CalibrationCurve",
    "clock_state",
    "evolve_free",
    "time_operator_expectation",
    "pointer_weights",
    "free_expectation_curve",
    "calibrate",
]


@dataclass(frozen=True)
class ClockParams:
    """Number of levels (odd, >= 3) and pointer resolution dt_clock."""

    n_levels: int
    dt_clock: float

    def __post_init__(self):
        if self.n_levels < 3 or self.n_levels % 2 == 0:
            raise ConfigurationError(
                f"clock needs an odd number of levels >= 3, got {self.n_levels}"
            )
        if not (self.dt_clock > 0.0) or not np.isfinite(self.dt_clock):
            raise ConfigurationError(f"dt_clock must be positive, got {self.dt_clock}")

    @property
    def j(self) -> int:
        return (self.n_levels - 1) // 2

    @property
    def omega(self) -> float:
        """Level spacing frequency, omega = 2*pi/(N*dt_clock)."""
        return 2.0 * np.pi / (self.n_levels * self.dt_clock)

    @property
    def level_indices(self) -> np.ndarray:
        """n = -j..j in amplitude storage order."""
        return np.arange(-self.j, self.j + 1)

    def pointer_matrix(self) -> np.ndarray:
        """W[k, n_idx] = exp(+2*pi*i*k*n/N)/sqrt(N); row k projects onto V_k."""
        k = np.arange(self.n_levels)[:, None]
        n = self.level_indices[None, :]
        return np.exp(2j * np.pi * k * n / self.n_levels) / np.sqrt(self.n_levels)


@dataclass(frozen=True)
class ClockVector:
    """Normalized clock state as |J_n> amplitudes."""

    params: ClockParams
    amplitudes: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.amplitudes, dtype=np.complex128)
        if a.shape != (self.params.n_levels,):
            raise ConfigurationError(
                f"expected {self.params.n_levels} amplitudes, got shape {a.shape}"
            )
        object.__setattr__(self, "amplitudes", a)

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.amplitudes) ** 2)))


def clock_state(params: ClockParams, k: int) -> ClockVector:
    """Pointer state |V_k> expressed in the level basis."""
    if not (0 <= k < params.n_levels):
        raise ConfigurationError(f"pointer index {k} outside 0..{params.n_levels - 1}")
    n = params.level_indices
    amps = np.exp(-2j * np.pi * k * n / params.n_levels) / np.sqrt(params.n_levels)
    return ClockVector(params, amps)


def evolve_free(state: ClockVector, t: float) -> ClockVector:
    """Free clock evolution: amplitude at level n picks up exp(-i*n*omega*t)."""
    n = state.params.level_indices
    return ClockVector(state.params, state.amplitudes * np.exp(-1j * n * state.params.omega * t))


def pointer_weights(state: ClockVector) -> np.ndarray:
    """|<V_k|state>|^2 for k = 0..N-1."""
    w = state.params.pointer_matrix() @ state.amplitudes
    return np.abs(w) ** 2


def time_operator_expectation(state: ClockVector) -> float:
    """<T_hat> = dt_clock * sum_k k * |<V_k|state>|^2 (per unit norm)."""
    p = pointer_weights(state)
    total = float(np.sum(p))
    if total <= 0.0:
        raise ConfigurationError("cannot read the clock on a zero-norm state")
    k = np.arange(state.params.n_levels)
    return float(state.params.dt_clock * np.dot(k, p) / total)


def _curve_values(params: ClockParams, t: np.ndarray) -> np.ndarray:
    """f(t) = <T_hat> of V_0 evolved freely for time t, vectorized."""
    n = params.level_indices
    # amplitude of V_k after evolving V_0: (1/N) sum_n exp(i*n*(2*pi*k/N - omega*t))
    phases = np.exp(-1j * np.outer(t, n * params.omega)) / params.n_levels
    k = np.arange(params.n_levels)
    expikn = np.exp(2j * np.pi * np.outer(k, n) / params.n_levels)
    amp = phases @ expikn.T  # shape (t, k)
    return params.dt_clock * (np.abs(amp) ** 2 @ k)


@dataclass(frozen=True)
class CalibrationCurve:
    """Tabulated f(t) on [0, N*dt_clock] with its invertible initial branch.

    f is periodic with period N*dt_clock and satisfies f(n*dt_clock) =
    dt_clock*(n mod N) exactly; in between it oscillates, so only the
    longest strictly increasing branch starting at t=0 is used for
    inversion.
    """

    params: ClockParams
    t: np.ndarray
    f: np.ndarray
    monotone_hi: float

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write("t,f_t\n")
            for ti, fi in zip(self.t, self.f):
                fh.write(f"{ti:.17g},{fi:.17g}\n")


def free_expectation_curve(params: ClockParams, samples_per_dt: int = 10_000) -> CalibrationCurve:
    """Tabulate f(t) over one full revolution and locate the monotone branch."""
    if samples_per_dt < 10 * params.n_levels:
        raise ConfigurationError("calibration table too coarse")
    m = samples_per_dt * params.n_levels
    t = np.linspace(0.0, params.n_levels * params.dt_clock, m + 1)
    f = _curve_values(params, t)
    df = np.diff(f)
    rising = np.nonzero(df <= 0.0)[0]
    hi_idx = int(rising[0]) if rising.size else m
    return CalibrationCurve(params, t, f, monotone_hi=float(t[hi_idx]))


def calibrate(curve: CalibrationCurve, tau_tilde: float) -> float:
    """Invert the calibration curve: find t with f(t) = tau_tilde.

    Bisection on the monotone branch, refined to 1e-8 * dt_clock.  Raw
    readings a hair below zero (observable noise) are clamped; anything
    outside the invertible branch raises CalibrationRangeError.
    """
    dtc = curve.params.dt_clock
    if tau_tilde < 0.0:
        if tau_tilde > -1e-9 * dtc:
            tau_tilde = 0.0
        else:
            raise CalibrationRangeError(f"clock reading {tau_tilde} is negative")
    hi = curve.monotone_hi
    f_hi = float(_curve_values(curve.params, np.array([hi]))[0])
    if tau_tilde > f_hi:
        raise CalibrationRangeError(
            f"clock reading {tau_tilde} exceeds f({hi}) = {f_hi}; "
            "the elapsed time left the invertible branch"
        )
    lo, up = 0.0, hi
    while up - lo > 1e-8 * dtc:
        mid = 0.5 * (lo + up)
        if float(_curve_values(curve.params, np.array([mid]))[0]) < tau_tilde:
            lo = mid
        else:
            up = mid
    return 0.5 * (lo + up)
