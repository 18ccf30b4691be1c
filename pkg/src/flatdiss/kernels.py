"""Hot loops for Liouvillian assembly and matrix-free Lindblad action.

Every jump channel handled here is rank one, ``O = |a><r|``, with at most two
nonzero entries in each factor.  Channels are packed into flat arrays:

    cidx, cval : (K, 2) support and coefficients of the column ``a``
    ridx, rval : (K, 2) support and coefficients of the row ``<r|``
    rates      : (K,)   channel rates
    anorm2     : (K,)   ``<a|a>``, so that ``O^dag O = anorm2 * |r*><r|``

Unused slots carry a zero coefficient.  Each kernel has a numba version and a
pure-numpy version with identical semantics.  Set ``FLATDISS_DISABLE_NUMBA=1``
to force the numpy path.
"""

import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

HAVE_NUMBA = numba is not None
USE_NUMBA = HAVE_NUMBA and os.environ.get("FLATDISS_DISABLE_NUMBA", "0").lower() not in (
    "1",
    "true",
    "yes",
    "on",
)


def backend():
    """Name of the backend used by the dispatching kernels."""
    return "numba" if USE_NUMBA else "numpy"


def liouvillian_nnz_bound(n, n_h, n_channels):
    return 2 * n_h * n + n_channels * (16 + 8 * n)


# --------------------------------------------------------------------------
# numpy implementations


def assemble_coo_numpy(n, h_rows, h_cols, h_vals, cidx, cval, ridx, rval, rates, anorm2):
    """COO triplets of the column-stacked Liouvillian (duplicates not summed)."""
    k = np.arange(n)
    rows, cols, vals = [], [], []
    h_vals = np.asarray(h_vals, dtype=np.complex128)
    if h_vals.size:
        # H rho: out[i, k] += -1j H[i, x] rho[x, k]
        rows.append((k[None, :] * n + h_rows[:, None]).ravel())
        cols.append((k[None, :] * n + h_cols[:, None]).ravel())
        vals.append(np.repeat(-1j * h_vals, n))
        # rho H: out[i, k] += 1j rho[i, y] H[y, k]  with (y, k) = (h_rows, h_cols)
        rows.append((h_cols[:, None] * n + k[None, :]).ravel())
        cols.append((h_rows[:, None] * n + k[None, :]).ravel())
        vals.append(np.repeat(1j * h_vals, n))
    if rates.size:
        g = rates
        half = 0.5 * rates * anorm2
        # O rho O^dag: out[i, k] += g a_i conj(a_k) r_x conj(r_y) rho[x, y]
        ai = cidx[:, :, None, None, None]
        ak = cidx[:, None, :, None, None]
        rx = ridx[:, None, None, :, None]
        ry = ridx[:, None, None, None, :]
        coef = (
            g[:, None, None, None, None]
            * cval[:, :, None, None, None]
            * np.conj(cval)[:, None, :, None, None]
            * rval[:, None, None, :, None]
            * np.conj(rval)[:, None, None, None, :]
        )
        shape = coef.shape
        rows.append(np.broadcast_to(ak * n + ai, shape).ravel())
        cols.append(np.broadcast_to(ry * n + rx, shape).ravel())
        vals.append(coef.ravel())
        # -1/2 O^dag O rho: out[i, k] -= half conj(r_i) r_x rho[x, k]
        coef = -half[:, None, None] * np.conj(rval)[:, :, None] * rval[:, None, :]
        ri = ridx[:, :, None, None]
        rxx = ridx[:, None, :, None]
        kk = k[None, None, None, :]
        shape = (len(rates), 2, 2, n)
        rows.append(np.broadcast_to(kk * n + ri, shape).ravel())
        cols.append(np.broadcast_to(kk * n + rxx, shape).ravel())
        vals.append(np.broadcast_to(coef[..., None], shape).ravel())
        # -1/2 rho O^dag O: out[i, k] -= half rho[i, y] conj(r_y) r_k
        coef = -half[:, None, None] * np.conj(rval)[:, :, None] * rval[:, None, :]
        yy = ridx[:, :, None, None]
        kr = ridx[:, None, :, None]
        ii = k[None, None, None, :]
        rows.append(np.broadcast_to(kr * n + ii, shape).ravel())
        cols.append(np.broadcast_to(yy * n + ii, shape).ravel())
        vals.append(np.broadcast_to(coef[..., None], shape).ravel())
    if not rows:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty.copy(), np.zeros(0, dtype=np.complex128)
    return (
        np.concatenate(rows).astype(np.int64),
        np.concatenate(cols).astype(np.int64),
        np.concatenate(vals).astype(np.complex128),
    )


def lindblad_action_numpy(rho, h_indptr, h_indices, h_data, cidx, cval, ridx, rval, rates, anorm2):
    """Right-hand side of the master equation for an N x N matrix ``rho``."""
    n = rho.shape[0]
    h_rows = np.repeat(np.arange(n), np.diff(h_indptr))
    out = np.zeros((n, n), dtype=np.complex128)
    if h_data.size:
        # H rho - rho H via explicit CSR entries
        hr = np.zeros((n, n), dtype=np.complex128)
        np.add.at(hr, h_rows, h_data[:, None] * rho[h_indices, :])
        rh = np.zeros((n, n), dtype=np.complex128)
        np.add.at(rh.T, h_indices, h_data[:, None] * rho[:, h_rows].T)
        out += -1j * (hr - rh)
    if rates.size:
        sub = rho[ridx[:, :, None], ridx[:, None, :]]
        c = np.einsum("ks,kst,kt->k", rval, sub, np.conj(rval))
        jump = (rates * c)[:, None, None] * cval[:, :, None] * np.conj(cval)[:, None, :]
        np.add.at(out, (cidx[:, :, None], cidx[:, None, :]), jump)
        half = 0.5 * rates * anorm2
        rr = np.einsum("ks,ksn->kn", rval, rho[ridx])
        np.add.at(out, ridx, -half[:, None, None] * np.conj(rval)[:, :, None] * rr[:, None, :])
        cc = np.einsum("nkt,kt->kn", rho[:, ridx], np.conj(rval))
        upd = -half[:, None, None] * cc[:, :, None] * rval[:, None, :]  # (K, N, 2)
        np.add.at(out.T, ridx, np.transpose(upd, (0, 2, 1)))
    return out


# --------------------------------------------------------------------------
# numba implementations

if HAVE_NUMBA:

    @numba.njit(cache=True, nogil=True)
    def assemble_coo_numba(n, h_rows, h_cols, h_vals, cidx, cval, ridx, rval, rates, anorm2):
        n_h = h_vals.shape[0]
        n_c = rates.shape[0]
        total = 2 * n_h * n + n_c * (16 + 8 * n)
        rows = np.empty(total, dtype=np.int64)
        cols = np.empty(total, dtype=np.int64)
        vals = np.empty(total, dtype=np.complex128)
        p = 0
        for e in range(n_h):
            i = h_rows[e]
            x = h_cols[e]
            hv = h_vals[e]
            for k in range(n):
                rows[p] = k * n + i
                cols[p] = k * n + x
                vals[p] = -1j * hv
                p += 1
        for e in range(n_h):
            y = h_rows[e]
            k = h_cols[e]
            hv = h_vals[e]
            for i in range(n):
                rows[p] = k * n + i
                cols[p] = y * n + i
                vals[p] = 1j * hv
                p += 1
        for c in range(n_c):
            g = rates[c]
            half = 0.5 * rates[c] * anorm2[c]
            for s in range(2):
                for t in range(2):
                    at = g * cval[c, s] * np.conj(cval[c, t])
                    for u in range(2):
                        for w in range(2):
                            rows[p] = cidx[c, t] * n + cidx[c, s]
                            cols[p] = ridx[c, w] * n + ridx[c, u]
                            vals[p] = at * rval[c, u] * np.conj(rval[c, w])
                            p += 1
            for s in range(2):
                for t in range(2):
                    coef = -half * np.conj(rval[c, s]) * rval[c, t]
                    ri = ridx[c, s]
                    rx = ridx[c, t]
                    for k in range(n):
                        rows[p] = k * n + ri
                        cols[p] = k * n + rx
                        vals[p] = coef
                        p += 1
                    # rho O^dag O with y = ridx[c, s], k = ridx[c, t]
                    for i in range(n):
                        rows[p] = rx * n + i
                        cols[p] = ri * n + i
                        vals[p] = coef
                        p += 1
        return rows, cols, vals

    @numba.njit(cache=True, nogil=True)
    def lindblad_action_numba(rho, h_indptr, h_indices, h_data, cidx, cval, ridx, rval, rates, anorm2):
        n = rho.shape[0]
        out = np.zeros((n, n), dtype=np.complex128)
        for y in range(n):
            for e in range(h_indptr[y], h_indptr[y + 1]):
                x = h_indices[e]
                hv = h_data[e]
                # (H rho)[y, :] += H[y, x] rho[x, :];  (rho H)[:, x] += rho[:, y] H[y, x]
                for k in range(n):
                    out[y, k] += -1j * hv * rho[x, k]
                    out[k, x] += 1j * rho[k, y] * hv
        rr = np.empty(n, dtype=np.complex128)
        cc = np.empty(n, dtype=np.complex128)
        for c in range(rates.shape[0]):
            g = rates[c]
            half = 0.5 * rates[c] * anorm2[c]
            amp = 0.0j
            for s in range(2):
                for t in range(2):
                    amp += rval[c, s] * rho[ridx[c, s], ridx[c, t]] * np.conj(rval[c, t])
            for s in range(2):
                for t in range(2):
                    out[cidx[c, s], cidx[c, t]] += g * amp * cval[c, s] * np.conj(cval[c, t])
            for k in range(n):
                rr[k] = rval[c, 0] * rho[ridx[c, 0], k] + rval[c, 1] * rho[ridx[c, 1], k]
                cc[k] = rho[k, ridx[c, 0]] * np.conj(rval[c, 0]) + rho[k, ridx[c, 1]] * np.conj(rval[c, 1])
            for s in range(2):
                a = half * np.conj(rval[c, s])
                b = half * rval[c, s]
                r_s = ridx[c, s]
                for k in range(n):
                    out[r_s, k] -= a * rr[k]
                    out[k, r_s] -= cc[k] * b
        return out

else:  # pragma: no cover
    assemble_coo_numba = None
    lindblad_action_numba = None


def assemble_coo(*args):
    if USE_NUMBA:
        return assemble_coo_numba(*args)
    return assemble_coo_numpy(*args)


def lindblad_action(*args):
    if USE_NUMBA:
        return lindblad_action_numba(*args)
    return lindblad_action_numpy(*args)
