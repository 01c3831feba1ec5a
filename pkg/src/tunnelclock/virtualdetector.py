"""Virtual detectors: probability flux through the barrier faces.

Two detector lines follow the parabolas xi = xi_in and xi = xi_exit across
the barrier box.  The normal flux integrated along each line gives entry
and exit signals d_in(t), d_exit(t); their positive parts, normalized to
unit area, are arrival-time densities p_in, p_exit.  The tunneling-time
distribution is the lag correlation

    p(tau) ~ integral dt p_in(t) * p_exit(t + tau),   tau >= 0,

normalized on the half-line.  Its mean is the detector tunneling time and
the lag between the two signal maxima (parabolically refined) is the
peak-to-peak estimate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .barrier import BarrierRegion
from .errors import ConfigurationError, NumericalError
from .grid import Grid2D

__all__ = [
    "FluxLine",
    "DetectorRecord",
    "TunnelingDistribution",
    "probability_current",
    "build_flux_line",
    "barrier_detectors",
    "line_flux",
    "normalized_arrival",
    "arrival_correlation",
    "refine_peak",
]

# Margin (in cells) a flux line must keep from the grid edge so the
# fourth-order current stencil never reaches outside.
_EDGE_CELLS = 3


def probability_current(channels: np.ndarray, grid: Grid2D):
    """Full-grid current density (jx, jy) summed over clock channels.

    Fourth-order central differences with Dirichlet (zero) values outside
    the grid, matching the propagator's kinetic stencil.  Diagnostic and
    test use; the per-step detector readout works on small boxes instead.
    """
    if channels.ndim == 2:
        channels = channels[None, :, :]
    if grid.is_1d:
        raise ConfigurationError("probability current needs a 2D grid")
    jx = np.zeros(grid.shape)
    jy = np.zeros(grid.shape)
    pad = np.zeros((grid.nx + 4, grid.ny + 4), dtype=np.complex128)
    for psi in channels:
        pad[2:-2, 2:-2] = psi
        dx_psi = (-pad[4:, 2:-2] + 8.0 * pad[3:-1, 2:-2]
                  - 8.0 * pad[1:-3, 2:-2] + pad[:-4, 2:-2]) / (12.0 * grid.dx)
        dy_psi = (-pad[2:-2, 4:] + 8.0 * pad[2:-2, 3:-1]
                  - 8.0 * pad[2:-2, 1:-3] + pad[2:-2, :-4]) / (12.0 * grid.dy)
        jx += (np.conj(psi) * dx_psi).imag
        jy += (np.conj(psi) * dy_psi).imag
    return jx, jy


@dataclass(frozen=True)
class FluxLine:
    """Sampled parabola xi = const with quadrature and interpolation tables."""

    xi: float
    points: np.ndarray      # (M, 2) sample coordinates
    normals: np.ndarray     # (M, 2) unit normals along grad xi
    weights: np.ndarray     # (M,) trapezoid arc-length weights
    ix: np.ndarray          # (M,) lower-left cell index, x
    iy: np.ndarray          # (M,) lower-left cell index, y
    fx: np.ndarray          # (M,) fractional offsets
    fy: np.ndarray
    box: tuple              # (i0, i1, j0, j1) slice bounds for the current


def build_flux_line(grid: Grid2D, xi: float, eta_max: float,
                    spacing: float | None = None) -> FluxLine:
    """Detector line xi = const covering 0 <= eta <= eta_max.

    The line is parametrized by y in [-y_half, y_half] with
    y_half = sqrt(xi * eta_max); x(y) = xi/2 - y^2/(2 xi).
    """
    if grid.is_1d:
        raise ConfigurationError("flux lines need a 2D grid")
    if xi <= 0.0 or eta_max <= 0.0:
        raise ConfigurationError("flux line needs xi > 0 and eta_max > 0")
    if spacing is None:
        spacing = 0.5 * min(grid.dx, grid.dy)
    y_half = math.sqrt(xi * eta_max)
    m = max(int(math.ceil(2.0 * y_half / spacing)) + 1, 9)
    if m % 2 == 0:
        m += 1
    y = np.linspace(-y_half, y_half, m)
    x = 0.5 * xi - y * y / (2.0 * xi)
    r = np.sqrt(x * x + y * y)
    grad = np.stack([x / r + 1.0, y / r], axis=1)
    normals = grad / np.linalg.norm(grad, axis=1, keepdims=True)
    dy = y[1] - y[0]
    arc = np.sqrt(1.0 + (y / xi) ** 2) * dy
    weights = arc.copy()
    weights[0] *= 0.5
    weights[-1] *= 0.5

    lo_x = grid.x[0] + _EDGE_CELLS * grid.dx
    hi_x = grid.x[-1] - _EDGE_CELLS * grid.dx
    lo_y = grid.y[0] + _EDGE_CELLS * grid.dy
    hi_y = grid.y[-1] - _EDGE_CELLS * grid.dy
    if x.min() < lo_x or x.max() > hi_x or y.min() < lo_y or y.max() > hi_y:
        raise ConfigurationError(
            f"flux line xi = {xi:.4g} leaves the grid interior; "
            "enlarge the grid or shrink the detector span"
        )

    sx = (x - grid.x[0]) / grid.dx
    sy = (y - grid.y[0]) / grid.dy
    ix = np.floor(sx).astype(np.int64)
    iy = np.floor(sy).astype(np.int64)
    fx = sx - ix
    fy = sy - iy
    i0 = int(ix.min()) - 1
    i1 = int(ix.max()) + 3
    j0 = int(iy.min()) - 1
    j1 = int(iy.max()) + 3
    return FluxLine(xi=float(xi), points=np.stack([x, y], axis=1),
                    normals=normals, weights=weights,
                    ix=ix, iy=iy, fx=fx, fy=fy, box=(i0, i1, j0, j1))


def barrier_detectors(grid: Grid2D, region: BarrierRegion,
                      spacing: float | None = None,
                      offset_in: float = 0.0, offset_out: float = 0.0):
    """(entry, exit) flux lines on the inner and outer barrier faces.

    The offsets displace a line's on-axis crossing by the given amount in x
    (positive moves away from the core), decoupling where crossings are
    counted from where the clock runs.
    """
    xi_entry = region.xi_in + 2.0 * offset_in
    xi_exit = region.xi_exit + 2.0 * offset_out
    if xi_entry <= 0.0 or xi_exit <= xi_entry:
        raise ConfigurationError(
            "detector offsets must keep 0 < xi_entry < xi_exit"
        )
    entry = build_flux_line(grid, xi_entry, region.eta0, spacing)
    leave = build_flux_line(grid, xi_exit, region.eta0, spacing)
    return entry, leave


def _box_current(channels: np.ndarray, grid: Grid2D, box):
    i0, i1, j0, j1 = box
    jx = np.zeros((i1 - i0, j1 - j0))
    jy = np.zeros((i1 - i0, j1 - j0))
    cdx = 1.0 / (12.0 * grid.dx)
    cdy = 1.0 / (12.0 * grid.dy)
    for psi in channels:
        sub = psi[i0:i1, j0:j1]
        dxp = (-psi[i0 + 2:i1 + 2, j0:j1] + 8.0 * psi[i0 + 1:i1 + 1, j0:j1]
               - 8.0 * psi[i0 - 1:i1 - 1, j0:j1] + psi[i0 - 2:i1 - 2, j0:j1]) * cdx
        dyp = (-psi[i0:i1, j0 + 2:j1 + 2] + 8.0 * psi[i0:i1, j0 + 1:j1 + 1]
               - 8.0 * psi[i0:i1, j0 - 1:j1 - 1] + psi[i0:i1, j0 - 2:j1 - 2]) * cdy
        jx += (np.conj(sub) * dxp).imag
        jy += (np.conj(sub) * dyp).imag
    return jx, jy


def line_flux(channels: np.ndarray, grid: Grid2D, line: FluxLine) -> float:
    """Normal probability flux through the line, positive pointing outward."""
    i0, _, j0, _ = line.box
    jx, jy = _box_current(channels, grid, line.box)
    ax = line.ix - i0
    ay = line.iy - j0
    w00 = (1.0 - line.fx) * (1.0 - line.fy)
    w10 = line.fx * (1.0 - line.fy)
    w01 = (1.0 - line.fx) * line.fy
    w11 = line.fx * line.fy

    def gather(arr):
        return (w00 * arr[ax, ay] + w10 * arr[ax + 1, ay]
                + w01 * arr[ax, ay + 1] + w11 * arr[ax + 1, ay + 1])

    normal = gather(jx) * line.normals[:, 0] + gather(jy) * line.normals[:, 1]
    return float(np.dot(normal, line.weights))


def refine_peak(x: np.ndarray, y: np.ndarray):
    """Peak location by a three-point parabola through the discrete maximum.

    Falls back to the grid node when the maximum sits on the boundary or
    the curvature vanishes.  Returns (x_peak, y_peak).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size != y.size or x.size == 0:
        raise ConfigurationError("refine_peak needs matching non-empty arrays")
    k = int(np.argmax(y))
    if k == 0 or k == y.size - 1:
        return float(x[k]), float(y[k])
    y0, y1, y2 = y[k - 1], y[k], y[k + 1]
    denom = y0 - 2.0 * y1 + y2
    if denom >= 0.0:
        return float(x[k]), float(y[k])
    shift = 0.5 * (y0 - y2) / denom
    h = x[k + 1] - x[k]
    return float(x[k] + shift * h), float(y1 - 0.25 * (y0 - y2) * shift)


def normalized_arrival(times: np.ndarray, signal: np.ndarray) -> np.ndarray:
    """Positive part of the flux signal, normalized to unit time integral."""
    times = np.asarray(times, dtype=float)
    clipped = np.clip(np.asarray(signal, dtype=float), 0.0, None)
    area = float(np.trapezoid(clipped, times))
    if area <= 0.0:
        raise NumericalError("flux signal has no positive part to normalize")
    return clipped / area


@dataclass
class DetectorRecord:
    """Entry/exit flux signals of one run and their arrival densities."""

    times: np.ndarray
    d_in: np.ndarray
    d_exit: np.ndarray
    p_in: np.ndarray
    p_exit: np.ndarray

    @classmethod
    def from_signals(cls, times, d_in, d_exit):
        times = np.asarray(times, dtype=float)
        d_in = np.asarray(d_in, dtype=float)
        d_exit = np.asarray(d_exit, dtype=float)
        return cls(times=times, d_in=d_in, d_exit=d_exit,
                   p_in=normalized_arrival(times, d_in),
                   p_exit=normalized_arrival(times, d_exit))

    def peak_time_in(self) -> float:
        return refine_peak(self.times, self.d_in)[0]

    def peak_time_exit(self) -> float:
        return refine_peak(self.times, self.d_exit)[0]

    def peak_lag(self) -> float:
        """Exit-minus-entry lag of the refined signal maxima."""
        return self.peak_time_exit() - self.peak_time_in()

    def mean_entry_time(self) -> float:
        return float(np.trapezoid(self.times * self.p_in, self.times))

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            fh.write("t,d_in,d_exit,p_in,p_exit\n")
            for row in zip(self.times, self.d_in, self.d_exit,
                           self.p_in, self.p_exit):
                fh.write(",".join("%.17g" % v for v in row) + "\n")


@dataclass
class TunnelingDistribution:
    """Arrival-lag density p(tau) on tau >= 0."""

    tau: np.ndarray
    p: np.ndarray

    def peak(self) -> float:
        return refine_peak(self.tau, self.p)[0]

    def mean(self) -> float:
        return float(np.trapezoid(self.tau * self.p, self.tau))

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            fh.write("tau,p_tau\n")
            for row in zip(self.tau, self.p):
                fh.write(",".join("%.17g" % v for v in row) + "\n")


def arrival_correlation(record: DetectorRecord) -> TunnelingDistribution:
    """Lag correlation of the entry and exit arrival densities.

    C[m] = sum_i p_in[i] * p_exit[i + m] * dt for m >= 0 only; negative
    lags (exit before entry) are excluded by construction.  The result is
    normalized to unit integral over tau.
    """
    t = record.times
    if t.size < 3:
        raise ConfigurationError("arrival correlation needs at least 3 samples")
    dt = float(t[1] - t[0])
    if not np.allclose(np.diff(t), dt, rtol=1e-9, atol=1e-12):
        raise ConfigurationError("detector samples must be uniform in time")
    n = t.size
    c = np.correlate(record.p_exit, record.p_in, mode="full")[n - 1:] * dt
    tau = np.arange(n, dtype=float) * dt
    area = float(np.trapezoid(c, tau))
    if area <= 0.0:
        raise NumericalError("degenerate arrival correlation")
    return TunnelingDistribution(tau=tau, p=c / area)
