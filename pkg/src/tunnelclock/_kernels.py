"""JIT kernels for the hot loops.

Everything here is written to be bit-reproducible for any thread count:
kernels either write each output element exactly once or reduce in a fixed
row order (row partials are finished off with numpy's pairwise sum by the
caller).  fastmath stays off so the operation order is the one written.

Stencil: 4th-order central finite differences for the Laplacian,
coefficients (-1/12, 4/3, -5/2, 4/3, -1/12)/h^2 per axis, Dirichlet
(wavefunction treated as zero) outside the grid.
"""

import numpy as np
from numba import njit

C0 = -5.0 / 2.0
C1 = 4.0 / 3.0
C2 = -1.0 / 12.0


@njit(cache=True, fastmath=False)
def apply_h_dot(psi, vpot, x, efield, ax, ay, out, row_dot):
    """out = H psi with H = -(1/2) lap + (vpot - efield*x); also row-wise
    partials of <psi|out> so the caller can form the Lanczos alpha."""
    nx, ny = psi.shape
    for i in range(2, nx - 2):
        s = 0.0 + 0.0j
        for j in range(2, ny - 2):
            lap = (C0 * (ax + ay)) * psi[i, j] \
                + C1 * ax * (psi[i - 1, j] + psi[i + 1, j]) \
                + C2 * ax * (psi[i - 2, j] + psi[i + 2, j]) \
                + C1 * ay * (psi[i, j - 1] + psi[i, j + 1]) \
                + C2 * ay * (psi[i, j - 2] + psi[i, j + 2])
            o = -0.5 * lap + (vpot[i, j] - efield * x[i]) * psi[i, j]
            out[i, j] = o
            s += np.conj(psi[i, j]) * o
        row_dot[i] = s
    for i in range(nx):
        edge_row = i < 2 or i >= nx - 2
        if edge_row:
            s = 0.0 + 0.0j
        else:
            s = row_dot[i]
        for j in range(ny):
            if edge_row or j < 2 or j >= ny - 2:
                lap = (C0 * (ax + ay)) * psi[i, j]
                if i >= 1:
                    lap += C1 * ax * psi[i - 1, j]
                if i >= 2:
                    lap += C2 * ax * psi[i - 2, j]
                if i + 1 < nx:
                    lap += C1 * ax * psi[i + 1, j]
                if i + 2 < nx:
                    lap += C2 * ax * psi[i + 2, j]
                if j >= 1:
                    lap += C1 * ay * psi[i, j - 1]
                if j >= 2:
                    lap += C2 * ay * psi[i, j - 2]
                if j + 1 < ny:
                    lap += C1 * ay * psi[i, j + 1]
                if j + 2 < ny:
                    lap += C2 * ay * psi[i, j + 2]
                o = -0.5 * lap + (vpot[i, j] - efield * x[i]) * psi[i, j]
                out[i, j] = o
                s += np.conj(psi[i, j]) * o
        row_dot[i] = s


@njit(cache=True, fastmath=False)
def apply_h_dot_1d(psi, vpot, x, efield, ax, out, row_dot):
    """1D variant (ny == 1): no transverse derivative."""
    nx = psi.shape[0]
    for i in range(nx):
        lap = C0 * ax * psi[i, 0]
        if i >= 1:
            lap += C1 * ax * psi[i - 1, 0]
        if i >= 2:
            lap += C2 * ax * psi[i - 2, 0]
        if i + 1 < nx:
            lap += C1 * ax * psi[i + 1, 0]
        if i + 2 < nx:
            lap += C2 * ax * psi[i + 2, 0]
        o = -0.5 * lap + (vpot[i, 0] - efield * x[i]) * psi[i, 0]
        out[i, 0] = o
        row_dot[i] = np.conj(psi[i, 0]) * o


@njit(cache=True, fastmath=False)
def orth_norm(w, v, vprev, a, b, row_norm):
    """w -= a*v + b*vprev (a, b real); row-wise partials of ||w||^2."""
    nx, ny = w.shape
    for i in range(nx):
        s = 0.0
        for j in range(ny):
            t = w[i, j] - a * v[i, j] - b * vprev[i, j]
            w[i, j] = t
            s += t.real * t.real + t.imag * t.imag
        row_norm[i] = s


@njit(cache=True, fastmath=False)
def assemble(basis, coeff, m, out):
    """out = sum_{q<m} coeff[q] * basis[q]."""
    nx, ny = out.shape
    for i in range(nx):
        for j in range(ny):
            s = 0.0 + 0.0j
            for q in range(m):
                s += coeff[q] * basis[q, i, j]
            out[i, j] = s


@njit(cache=True, fastmath=False)
def norm2_rows(psi, row_norm):
    nx, ny = psi.shape
    for i in range(nx):
        s = 0.0
        for j in range(ny):
            t = psi[i, j]
            s += t.real * t.real + t.imag * t.imag
        row_norm[i] = s


@njit(cache=True, fastmath=False)
def scale_inplace(psi, s):
    nx, ny = psi.shape
    for i in range(nx):
        for j in range(ny):
            psi[i, j] = psi[i, j] * s


@njit(cache=True, fastmath=False)
def absorb(channels, ring_idx, ring_mask, pointer_mat, darea,
           absorbed_ch, absorbed_vk):
    """Apply the absorber on the ring and book what it removed.

    channels: (N, nx*ny) flattened channel wavefunctions, scaled in place by
    ring_mask at ring_idx.  The removed probability is accumulated per
    channel (absorbed_ch) and per pointer state (absorbed_vk), the latter
    through pointer_mat[k, n] = <V_k|J_n> applied at each ring node before
    the mask acts.  Both views of the removed mass sum to the same total.
    """
    nch = channels.shape[0]
    npts = ring_idx.shape[0]
    for p in range(npts):
        idx = ring_idx[p]
        m = ring_mask[p]
        loss = (1.0 - m * m) * darea
        for k in range(nch):
            ck = 0.0 + 0.0j
            for n in range(nch):
                ck += pointer_mat[k, n] * channels[n, idx]
            absorbed_vk[k] += loss * (ck.real * ck.real + ck.imag * ck.imag)
        for n in range(nch):
            t = channels[n, idx]
            absorbed_ch[n] += loss * (t.real * t.real + t.imag * t.imag)
            channels[n, idx] = t * m


@njit(cache=True, fastmath=False)
def absorb_plain(channels, ring_idx, ring_mask, darea, absorbed_ch):
    """Absorber without pointer bookkeeping (clock-free propagation)."""
    nch = channels.shape[0]
    npts = ring_idx.shape[0]
    for p in range(npts):
        idx = ring_idx[p]
        m = ring_mask[p]
        loss = (1.0 - m * m) * darea
        for n in range(nch):
            t = channels[n, idx]
            absorbed_ch[n] += loss * (t.real * t.real + t.imag * t.imag)
            channels[n, idx] = t * m


@njit(cache=True, fastmath=False)
def masked_phase(channel_flat, idx, phase):
    for p in range(idx.shape[0]):
        channel_flat[idx[p]] = channel_flat[idx[p]] * phase
