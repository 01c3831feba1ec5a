"""Time observables: dwell integral, bound/free split, clock readout.

The dwell time is the time-integrated excess probability inside the
barrier region.  The clock times come from projecting the final clocked
state onto the pointer basis; the transmitted/reflected split partitions
the plane into a bound disk and its complement, with flux removed by the
absorber counted as transmitted (it left through the outer ring and its
pointer content was frozen at absorption time).

Raw pointer readings tau~ include the contribution of probability that
sits inside the barrier region without ever ionizing.  That background is
not a constant that can be modelled from the initial occupancy alone (the
core and the region exchange amplitude coherently even at zero field), so
it is measured: a zero-field run with the same clock and region yields a
reference reading tau~0, and assemble_times subtracts it from the raw
readings before inverting the calibration curve.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .clock import CalibrationCurve, ClockParams, calibrate
from .errors import ConfigurationError
from .propagate import ClockedWaveFunction

__all__ = [
    "StatePart",
    "TimesReport",
    "mask_probability",
    "dwell_time_from_series",
    "split_bound_free",
    "clock_read",
    "assemble_times",
    "ordering_warnings",
]


def mask_probability(state: ClockedWaveFunction, mask_idx: np.ndarray) -> float:
    """Probability currently inside the node set mask_idx, summed over channels."""
    flat = state.channels.reshape(state.channels.shape[0], -1)
    sub = flat[:, mask_idx]
    return float(np.sum(sub.real ** 2 + sub.imag ** 2)) * state.grid.darea


def dwell_time_from_series(times: np.ndarray, occupancy: np.ndarray,
                           baseline=0.0) -> float:
    """Trapezoid integral of (occupancy(t) - baseline) over the run window.

    baseline may be a scalar or a series sampled on the same times (the
    zero-field region occupancy scaled by the surviving bound norm)."""
    times = np.asarray(times, dtype=float)
    occupancy = np.asarray(occupancy, dtype=float)
    if times.shape != occupancy.shape or times.size < 2:
        raise ConfigurationError("dwell series needs matching t/occupancy arrays")
    baseline = np.asarray(baseline, dtype=float)
    if baseline.ndim not in (0, 1) or (baseline.ndim == 1
                                       and baseline.shape != times.shape):
        raise ConfigurationError("baseline must be scalar or match the series")
    return float(np.trapezoid(occupancy - baseline, times))


@dataclass
class StatePart:
    """One leg of the bound/free partition with its share of absorbed flux."""

    label: str
    weight: float
    channels: np.ndarray
    absorbed_vk: np.ndarray


def split_bound_free(state: ClockedWaveFunction, r_sep: float):
    """Partition the final state at the separation radius.

    Returns (bound, free) parts.  weight(bound) = R, weight(free) = T with
    T + R equal to the total probability including absorbed flux.  The
    absorbed pointer ledger is attached to the free part.
    """
    if r_sep <= 0.0:
        raise ConfigurationError("separation radius must be positive")
    g = state.grid
    disk = (g.radius() < r_sep).reshape(-1)
    n_ch = state.channels.shape[0]
    flat = state.channels.reshape(n_ch, -1)
    bound_ch = np.where(disk[None, :], flat, 0.0).reshape(state.channels.shape)
    free_ch = np.where(disk[None, :], 0.0, flat).reshape(state.channels.shape)
    r_weight = float(np.sum(bound_ch.real ** 2 + bound_ch.imag ** 2)) * g.darea
    t_weight = float(np.sum(free_ch.real ** 2 + free_ch.imag ** 2)) * g.darea
    t_weight += float(np.sum(state.absorbed_ch))
    bound = StatePart("bound", r_weight, bound_ch,
                      np.zeros_like(state.absorbed_vk))
    free = StatePart("free", t_weight, free_ch, state.absorbed_vk.copy())
    return bound, free


def clock_read(clock: ClockParams, part: StatePart, darea: float) -> float:
    """Raw pointer expectation tau~ of one part, absorbed ledger included.

    Normalizes within the part, so the reading is conditional on ending up
    in that leg.  Returns nan for an (numerically) empty part.
    """
    if part.channels.shape[0] != clock.n_levels:
        raise ConfigurationError("part/channel count does not match the clock")
    w = clock.pointer_matrix()
    c = np.tensordot(w, part.channels, axes=1)
    c = c.reshape(clock.n_levels, -1)
    probs = np.sum(c.real ** 2 + c.imag ** 2, axis=1) * darea
    probs = probs + part.absorbed_vk
    total = float(np.sum(probs))
    if total < 1e-14:
        return math.nan
    k = np.arange(clock.n_levels, dtype=float)
    return clock.dt_clock * float(np.dot(k, probs)) / total


@dataclass
class TimesReport:
    """One row of the times table; nan marks quantities that were not measured."""

    e0: float
    gamma: float
    z: float
    transmitted: float
    reflected: float
    tau_d_prime: float
    tau_tilde_d: float
    tau_tilde_t: float
    tau_tilde_r: float
    tau_d: float
    tau_t: float
    tau_r: float
    tau_k: float
    tau_tsub: float = math.nan
    tau_t_v: float = math.nan
    identity_residual: float = math.nan
    warnings: list = field(default_factory=list)

    COLUMNS = ("e0", "gamma", "z", "T", "R", "tau_d_prime", "tau_tilde_d",
               "tau_tilde_t", "tau_tilde_r", "tau_d", "tau_t", "tau_r",
               "tau_k", "tau_tsub", "tau_t_v")

    def row_values(self):
        return (self.e0, self.gamma, self.z, self.transmitted, self.reflected,
                self.tau_d_prime, self.tau_tilde_d, self.tau_tilde_t,
                self.tau_tilde_r, self.tau_d, self.tau_t, self.tau_r,
                self.tau_k, self.tau_tsub, self.tau_t_v)

    def csv_row(self) -> str:
        return ",".join("%.17g" % v for v in self.row_values())

    @classmethod
    def csv_header(cls) -> str:
        return ",".join(cls.COLUMNS)

    def to_csv(self, path) -> None:
        write_times_csv(path, [self])


def write_times_csv(path, reports) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(TimesReport.csv_header() + "\n")
        for rep in reports:
            fh.write(rep.csv_row() + "\n")


def assemble_times(curve: CalibrationCurve,
                   tau_tilde_d: float, tau_tilde_t: float, tau_tilde_r: float,
                   transmitted: float, reflected: float, *,
                   baseline_mode: str = "reference",
                   tau_tilde_base: float = 0.0):
    """Calibrated (tau_d, tau_t, tau_r) from raw pointer readings.

    baseline_mode:
      "none"       tau = f^-1(tau~) as measured.  The readings then include
                   the pointer rotation picked up by probability that stayed
                   in the region without ever ionizing.
      "reference"  subtract the zero-field reading tau~_base before
                   inverting.  That background never transmits, and it
                   drains at the same rate as the bound state it lives on,
                   so the reflected leg carries tau~_base per unit of
                   surviving probability and the unconditional leg its
                   R-weighted share:

                       tau~_d -> tau~_d - tau~_base * R / (T + R)
                       tau~_r -> tau~_r - tau~_base
                       tau~_t untouched

                   which preserves the partition identity
                   tau~_d = T tau~_t + R tau~_r for the corrected readings.
    """
    if baseline_mode not in ("none", "reference"):
        raise ConfigurationError(f"unknown baseline mode {baseline_mode!r}")
    if transmitted + reflected <= 0.0:
        raise ConfigurationError("empty state: T + R must be positive")
    shifts = {"d": 0.0, "t": 0.0, "r": 0.0}
    if baseline_mode == "reference":
        shifts["r"] = tau_tilde_base
        shifts["d"] = tau_tilde_base * reflected / (transmitted + reflected)
    out = []
    for key, raw in (("d", tau_tilde_d), ("t", tau_tilde_t), ("r", tau_tilde_r)):
        if math.isnan(raw):
            out.append(math.nan)
            continue
        out.append(calibrate(curve, max(raw - shifts[key], 0.0)))
    return tuple(out)


def ordering_warnings(report: TimesReport) -> list:
    """Consistency checks on the assembled times; returns warning strings."""
    out = []
    total = report.transmitted + report.reflected
    if abs(total - 1.0) > 1e-3:
        out.append(f"T + R = {total:.6f} deviates from 1")
    finite = [v for v in (report.tau_t, report.tau_r) if not math.isnan(v)]
    if len(finite) == 2 and not math.isnan(report.tau_d):
        lo, hi = min(finite), max(finite)
        slack = 0.02 * max(abs(lo), abs(hi), 1e-12)
        if not (lo - slack <= report.tau_d <= hi + slack):
            out.append(
                f"tau_d = {report.tau_d:.4g} outside [{lo:.4g}, {hi:.4g}]"
            )
    if not math.isnan(report.tau_t) and report.tau_t < 0.0:
        out.append(f"negative transmitted time {report.tau_t:.4g}")
    if not math.isnan(report.tau_r) and report.tau_r < 0.0:
        out.append(f"negative reflected time {report.tau_r:.4g}")
    return out
