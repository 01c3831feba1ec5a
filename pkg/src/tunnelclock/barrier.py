"""Tunneling-barrier geometry in parabolic coordinates.

With xi = r + x and eta = r - x the 2D problem -del^2/2 - Z/r - E0*x
separates exactly: substituting psi = phi(u) chi(v) with u = sqrt(xi),
v = sqrt(eta) splits the stationary equation at energy E into

    -phi''/2 - E u^2 phi - (E0/2) u^4 phi = Z1 phi   (escape channel)
    -chi''/2 - E v^2 chi + (E0/2) v^4 chi = Z2 chi   (confined channel)

with Z1 + Z2 = 2Z; the zero-field ground state splits symmetrically,
Z1 = Z2 = Z.  Ionization proceeds along xi while eta stays bounded, so
the classically forbidden region is bracketed by the turning parabolas
of the escape channel, the roots of

    (E0/2) xi^2 + E_shift xi + Z = 0.

The region survives up to E0 = E_shift^2 / (2Z), well above the field
where the naive on-axis cut -Z/x - E0 x = E_shift would already be
over the barrier; the transverse flux channel keeps a forbidden shell
around the axis saddle.

The escape-channel turning parabola at small xi, however, lies inside
the initial orbital: for the 2D ground state exp(-2Zr) roughly a third
of the probability sits beyond that root at typical tunneling fields.
A clock coupled there reads orbital statics, not barrier transit, and
a static-occupancy baseline cannot subtract a contribution of that
size without drowning the transit signal.  The inner boundary of the
measurement region is therefore pushed out to the smallest xi whose
enclosed zero-field orbital weight stays within p0_budget: the region
keeps the outer part of the forbidden channel, through which every
escaping trajectory must pass, while staying disjoint (up to the
budget) from the orbital it drains.  The transverse cap eta0 follows
the confined-channel ground width 2 / sqrt(2 |E_shift|) (harmonic
frequency sqrt(2 |E|) about eta = 0), scaled by eta0_scale.  The
measurement region is then the parabolic box
xi_in <= xi <= xi_exit, 0 <= eta <= eta0, mirror symmetric in y,
with xi = 2x on the axis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import ConfigurationError, NoBarrierError, NumericalError
from .grid import (AtomParams, ComplexField, Grid2D, PulseParams, ScalarField,
                   coulomb_potential, pulse_amplitude)

__all__ = [
    "ParabolicPoint",
    "BarrierRegion",
    "to_parabolic",
    "from_parabolic",
    "orbital_weight",
    "stark_shifted_energy",
    "compute_barrier",
    "rasterize_barrier",
]


@dataclass(frozen=True)
class ParabolicPoint:
    xi: float
    eta: float


def to_parabolic(x, y):
    """(x, y) -> (xi, eta) = (r + x, r - x); both coordinates are >= 0.

    The clamp keeps the contract when r underflows for subnormal inputs.
    """
    r = np.sqrt(np.asarray(x) ** 2 + np.asarray(y) ** 2)
    return np.maximum(r + x, 0.0), np.maximum(r - x, 0.0)


def from_parabolic(xi, eta):
    """(xi, eta) -> (x, |y|): the inverse map on the upper half plane."""
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    if np.any(xi < 0) or np.any(eta < 0):
        raise ConfigurationError("parabolic coordinates must be non-negative")
    return 0.5 * (xi - eta), np.sqrt(xi * eta)


@dataclass(frozen=True)
class BarrierRegion:
    z: float
    e0: float
    e_shift: float
    x_in: float
    x_exit: float
    eta0: float
    p0_est: float = 0.0

    @property
    def xi_in(self) -> float:
        return 2.0 * self.x_in

    @property
    def xi_exit(self) -> float:
        return 2.0 * self.x_exit

    @property
    def width(self) -> float:
        return self.x_exit - self.x_in


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(48)


def _gauss_moments(z: float, lo: float, hi: float):
    """(int g, int s^2 g) over [lo, hi] for g(s) = exp(-2 Z s^2)."""
    if hi <= lo:
        return 0.0, 0.0
    mid = 0.5 * (hi + lo)
    half = 0.5 * (hi - lo)
    s = mid + half * _GL_NODES
    g = np.exp(-2.0 * z * s * s) * (half * _GL_WEIGHTS)
    return float(np.sum(g)), float(np.sum(s * s * g))


def orbital_weight(z: float, xi_lo: float, xi_hi: float, eta0: float) -> float:
    """Probability of the exp(-2Zr) ground orbital inside a parabolic box.

    Box: xi_lo <= xi <= xi_hi, 0 <= eta <= eta0, both signs of y.  With
    u = sqrt(xi), v = sqrt(eta) the area element is 4 (u^2 + v^2) du dv
    and the normalized density (8 Z^2 / pi) exp(-4Zr) factorizes, so

        W = (16 Z^2 / pi) (I2_u I0_v + I0_u I2_v),
        Ik = integral of s^k exp(-2 Z s^2) over the mapped interval,

    evaluated by fixed-order Gauss-Legendre quadrature (the integrand is
    entire, so 48 nodes reach machine precision on these intervals).
    """
    if z <= 0.0:
        raise ConfigurationError("orbital_weight needs a positive charge")
    if xi_lo < 0.0 or xi_hi < xi_lo or eta0 < 0.0:
        raise ConfigurationError("parabolic box bounds must be ordered and non-negative")
    a0u, a2u = _gauss_moments(z, np.sqrt(xi_lo), np.sqrt(xi_hi))
    a0v, a2v = _gauss_moments(z, 0.0, np.sqrt(eta0))
    return (16.0 * z * z / np.pi) * (a2u * a0v + a0u * a2v)


def compute_barrier(atom: AtomParams, e0: float, e_shift: float,
                    eta0_scale: float = 0.7,
                    p0_budget: float = 0.10) -> BarrierRegion:
    """Measurement region of the peak-field barrier for a level at e_shift.

    The outer boundary xi_exit is the large root of
    (e0/2) xi^2 + e_shift xi + Z = 0, the classical turning condition of
    the separated escape channel (see module docstring).  The inner
    boundary starts at the small root and is pushed outward until the
    zero-field orbital weight inside the box is at most p0_budget, so the
    clock coupling region stays essentially disjoint from the initial
    orbital.  Raises NoBarrierError when the discriminant
    e_shift^2 - 2*e0*Z is not positive (over-the-barrier regime).
    """
    if not (e0 > 0.0):
        raise ConfigurationError("compute_barrier needs a positive field")
    if e_shift >= 0.0:
        raise ConfigurationError("the tunneling level must be bound (E < 0)")
    if not (0.0 < p0_budget < 0.5):
        raise ConfigurationError("p0_budget must lie in (0, 0.5)")
    if not (eta0_scale > 0.0):
        raise ConfigurationError("eta0_scale must be positive")
    disc = e_shift * e_shift - 2.0 * e0 * atom.z
    if disc <= 0.0:
        raise NoBarrierError(
            f"no barrier at E0 = {e0:.6g}, E_shift = {e_shift:.6g}: "
            f"discriminant {disc:.6g} <= 0 (over-the-barrier regime)"
        )
    s = np.sqrt(disc)
    xi_chan = (-e_shift - s) / e0
    xi_exit = (-e_shift + s) / e0
    eta0 = eta0_scale * 2.0 / np.sqrt(2.0 * abs(e_shift))
    xi_in = xi_chan
    if orbital_weight(atom.z, xi_in, xi_exit, eta0) > p0_budget:
        lo, hi = xi_chan, xi_exit
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            if orbital_weight(atom.z, mid, xi_exit, eta0) > p0_budget:
                lo = mid
            else:
                hi = mid
        xi_in = hi
    if xi_exit - xi_in < 1e-6:
        raise NoBarrierError(
            f"barrier region degenerates at E0 = {e0:.6g}: the orbital-weight "
            f"budget {p0_budget:.3g} leaves no room inside the forbidden channel"
        )
    p0_est = orbital_weight(atom.z, xi_in, xi_exit, eta0)
    return BarrierRegion(z=atom.z, e0=e0, e_shift=e_shift,
                         x_in=0.5 * xi_in, x_exit=0.5 * xi_exit,
                         eta0=eta0, p0_est=p0_est)


def stark_shifted_energy(field: ComplexField, atom: AtomParams,
                         pulse: PulseParams | None, t: float,
                         r_max: float) -> float:
    """Energy expectation of H_E(t) over the bound disk r < r_max.

    The full-grid H_E psi is restricted to the disk in both numerator and
    denominator, so the departing flux outside does not pollute the bound
    level estimate.  Errors out when less than half the norm is still
    inside the disk (no meaningful bound level).
    """
    g = field.grid
    if g.is_1d:
        raise ConfigurationError("Stark shift needs the 2D Coulomb problem")
    vpot = coulomb_potential(g, atom).values
    efield = float(pulse_amplitude(pulse, t)) if pulse is not None else 0.0
    out = np.empty_like(field.values)
    row = np.empty(g.nx, dtype=np.complex128)
    _kernels.apply_h_dot(field.values, vpot, g.x, efield,
                         1.0 / g.dx ** 2, 1.0 / g.dy ** 2, out, row)
    disk = g.radius() < r_max
    psi = field.values
    den = float(np.sum((psi.real ** 2 + psi.imag ** 2)[disk])) * g.darea
    total = field.norm2()
    if total <= 0.0 or den < 0.5 * total:
        raise NumericalError(
            f"bound disk r < {r_max:.4g} holds {den:.4g} of {total:.4g} norm; "
            "cannot define a bound-level energy"
        )
    num = float(np.sum((np.conj(psi) * out)[disk].real)) * g.darea
    return num / den


def rasterize_barrier(grid: Grid2D, region: BarrierRegion,
                      absorber: ScalarField | None = None,
                      forbidden_only: bool = False):
    """Nodes inside the tunneling region.

    The region is the parabolic box xi_in <= xi <= xi_exit, eta <= eta0.
    In the separated escape channel the whole xi interval is classically
    forbidden, so no further restriction is needed; with forbidden_only
    the box is additionally cut to the on-axis forbidden set
    -Z/r - E0 x > E_shift of the peak-field potential (a diagnostic
    option: above the on-axis suppression field that cut removes the
    open channel strip around the axis and would make the region change
    character in the middle of a field sweep).

    Returns (mask ScalarField of 0/1, flat int64 indices).  Raises if the
    grid is too coarse to place any node inside the region or if the region
    touches the absorber ring (clock coupling inside the absorber would
    corrupt the pointer bookkeeping).
    """
    xx, yy = grid.meshes()
    xi, eta = to_parabolic(xx, yy)
    inside = (xi >= region.xi_in) & (xi <= region.xi_exit) & (eta <= region.eta0)
    if forbidden_only:
        rr = np.sqrt(xx * xx + yy * yy)
        with np.errstate(divide="ignore"):
            u_peak = -region.z / rr - region.e0 * xx
        inside &= u_peak > region.e_shift
    idx = np.nonzero(inside.reshape(-1))[0].astype(np.int64)
    if idx.size == 0:
        raise ConfigurationError(
            f"barrier region ({region.x_in:.4g}..{region.x_exit:.4g} a.u. wide) "
            "contains no grid node; refine the grid"
        )
    if absorber is not None:
        ring = absorber.values.reshape(-1) < 1.0
        if np.any(ring[idx]):
            raise ConfigurationError("barrier region overlaps the absorber ring")
    return ScalarField(grid, inside.astype(np.float64)), idx
