# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels for the extended forward/backward passes.

Same contract as metapinn._slowcore: matrix products go through BLAS dgemm
and the per-point activation/adjoint chains are fused single loops instead
of chains of NumPy temporaries.  Streams stay in separate contiguous
buffers; stacking them into one tall matrix costs more in cache misses
than it saves in BLAS call count at these widths.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport cos, sin, tanh
from scipy.linalg.cython_blas cimport dgemm

cnp.import_array()

ACT_TANH = 0
ACT_COS = 1

BACKEND_NAME = "compiled"


cdef void _mm_nt(double[:, ::1] z, double[:, ::1] w, double[:, ::1] out) noexcept nogil:
    # out (n, dout) = z (n, din) @ w.T, w stored (dout, din), all row-major.
    cdef int m = w.shape[0]
    cdef int n = z.shape[0]
    cdef int k = w.shape[1]
    cdef double one = 1.0, zero = 0.0
    if n == 0 or m == 0 or k == 0:
        return
    dgemm("T", "N", &m, &n, &k, &one, &w[0, 0], &k, &z[0, 0], &k, &zero, &out[0, 0], &m)


cdef void _mm_nn(double[:, ::1] a, double[:, ::1] w, double[:, ::1] out) noexcept nogil:
    # out (n, din) = a (n, dout) @ w (dout, din), row-major.
    cdef int m = w.shape[1]
    cdef int n = a.shape[0]
    cdef int k = w.shape[0]
    cdef double one = 1.0, zero = 0.0
    if n == 0 or m == 0 or k == 0:
        return
    dgemm("N", "N", &m, &n, &k, &one, &w[0, 0], &m, &a[0, 0], &k, &zero, &out[0, 0], &m)


cdef void _mm_tn_acc(double[:, ::1] a, double[:, ::1] z, double[:, ::1] out) noexcept nogil:
    # out (dout, din) += a.T (dout, n) @ z (n, din), row-major.
    cdef int m = z.shape[1]
    cdef int n = a.shape[1]
    cdef int k = a.shape[0]
    cdef double one = 1.0
    if n == 0 or m == 0 or k == 0:
        return
    dgemm("N", "T", &m, &n, &k, &one, &z[0, 0], &m, &a[0, 0], &n, &one, &out[0, 0], &m)


cdef void _add_bias(double[:, ::1] a, double[::1] b) noexcept nogil:
    cdef Py_ssize_t i, j
    for i in range(a.shape[0]):
        for j in range(a.shape[1]):
            a[i, j] += b[j]


cdef void _act_fused(double[:, ::1] a, int act,
                     double[:, ::1] px, double[:, ::1] qx,
                     double[:, ::1] pt, double[:, ::1] qt,
                     double[:, ::1] z2, double[:, ::1] zx2, double[:, ::1] zxx2,
                     double[:, ::1] zt2, double[:, ::1] ztt2,
                     double[:, ::1] s1, double[:, ::1] s2, double[:, ::1] s3) noexcept nogil:
    # Push all five streams through the activation, stashing sigma', sigma'',
    # sigma''' for the backward pass.
    cdef Py_ssize_t i, j
    cdef double v, d0, d1, d2, d3, pxi, pti
    for i in range(a.shape[0]):
        for j in range(a.shape[1]):
            v = a[i, j]
            if act == 0:
                d0 = tanh(v)
                d1 = 1.0 - d0 * d0
                d2 = -2.0 * d0 * d1
                d3 = d1 * (6.0 * d0 * d0 - 2.0)
            else:
                d0 = cos(v)
                d1 = -sin(v)
                d2 = -d0
                d3 = -d1
            pxi = px[i, j]
            pti = pt[i, j]
            z2[i, j] = d0
            zx2[i, j] = d1 * pxi
            zxx2[i, j] = d2 * pxi * pxi + d1 * qx[i, j]
            zt2[i, j] = d1 * pti
            ztt2[i, j] = d2 * pti * pti + d1 * qt[i, j]
            s1[i, j] = d1
            s2[i, j] = d2
            s3[i, j] = d3


cdef void _adjoint_fused(double[:, ::1] za, double[:, ::1] pxa, double[:, ::1] qxa,
                         double[:, ::1] pta, double[:, ::1] qta,
                         double[:, ::1] s1, double[:, ::1] s2, double[:, ::1] s3,
                         double[:, ::1] px, double[:, ::1] qx,
                         double[:, ::1] pt, double[:, ::1] qt,
                         double[:, ::1] aa, double[:, ::1] pxb, double[:, ::1] qxb,
                         double[:, ::1] ptb, double[:, ::1] qtb) noexcept nogil:
    # Adjoints of the pre-activation streams from those of the post-activation
    # streams (reverse of _act_fused).
    cdef Py_ssize_t i, j
    cdef double c1, c2, c3, pxi, pti, qxi, qti
    for i in range(za.shape[0]):
        for j in range(za.shape[1]):
            c1 = s1[i, j]
            c2 = s2[i, j]
            c3 = s3[i, j]
            pxi = px[i, j]
            pti = pt[i, j]
            qxi = qx[i, j]
            qti = qt[i, j]
            aa[i, j] = (za[i, j] * c1
                        + pxa[i, j] * c2 * pxi
                        + qxa[i, j] * (c3 * pxi * pxi + c2 * qxi)
                        + pta[i, j] * c2 * pti
                        + qta[i, j] * (c3 * pti * pti + c2 * qti))
            pxb[i, j] = pxa[i, j] * c1 + 2.0 * qxa[i, j] * c2 * pxi
            qxb[i, j] = qxa[i, j] * c1
            ptb[i, j] = pta[i, j] * c1 + 2.0 * qta[i, j] * c2 * pti
            qtb[i, j] = qta[i, j] * c1


def ext_forward(list weights, list biases, int act, points, bint keep=False):
    """Batched extended forward pass; see metapinn._slowcore.ext_forward."""
    z = np.ascontiguousarray(points, dtype=np.float64)
    cdef Py_ssize_t n = z.shape[0]
    cdef int L = len(weights)
    cdef int k
    cdef Py_ssize_t dout
    zx = np.zeros_like(z)
    zx[:, 0] = 1.0
    zt = np.zeros_like(z)
    zt[:, 1] = 1.0
    zxx = np.zeros_like(z)
    ztt = np.zeros_like(z)
    stash = [] if keep else None
    for k in range(L):
        w = np.ascontiguousarray(weights[k], dtype=np.float64)
        b = np.ascontiguousarray(biases[k], dtype=np.float64)
        dout = w.shape[0]
        a = np.empty((n, dout))
        px = np.empty((n, dout))
        qx = np.empty((n, dout))
        pt = np.empty((n, dout))
        qt = np.empty((n, dout))
        _mm_nt(z, w, a)
        _add_bias(a, b)
        _mm_nt(zx, w, px)
        _mm_nt(zxx, w, qx)
        _mm_nt(zt, w, pt)
        _mm_nt(ztt, w, qt)
        if k == L - 1:
            out = np.column_stack([a[:, 0], px[:, 0], pt[:, 0], qx[:, 0], qt[:, 0]])
            if keep:
                stash.append((z, zx, zxx, zt, ztt))
            return out, stash
        z2 = np.empty((n, dout))
        zx2 = np.empty((n, dout))
        zxx2 = np.empty((n, dout))
        zt2 = np.empty((n, dout))
        ztt2 = np.empty((n, dout))
        s1 = np.empty((n, dout))
        s2 = np.empty((n, dout))
        s3 = np.empty((n, dout))
        _act_fused(a, act, px, qx, pt, qt, z2, zx2, zxx2, zt2, ztt2, s1, s2, s3)
        if keep:
            stash.append((z, zx, zxx, zt, ztt, s1, s2, s3, px, qx, pt, qt))
        z, zx, zxx, zt, ztt = z2, zx2, zxx2, zt2, ztt2
    raise ValueError("network needs at least one layer")


def ext_backward(list weights, list stash, seeds):
    """Reverse accumulation; see metapinn._slowcore.ext_backward."""
    seeds = np.ascontiguousarray(seeds, dtype=np.float64)
    cdef int last = len(weights) - 1
    cdef int k
    cdef Py_ssize_t n = seeds.shape[0]
    dws = [None] * len(weights)
    dbs = [None] * len(weights)
    za = np.ascontiguousarray(seeds[:, 0:1])
    pxa = np.ascontiguousarray(seeds[:, 1:2])
    pta = np.ascontiguousarray(seeds[:, 2:3])
    qxa = np.ascontiguousarray(seeds[:, 3:4])
    qta = np.ascontiguousarray(seeds[:, 4:5])
    for k in range(last, -1, -1):
        w = np.ascontiguousarray(weights[k], dtype=np.float64)
        if k == last:
            z, zx, zxx, zt, ztt = stash[k]
            aa, pxb, qxb, ptb, qtb = za, pxa, qxa, pta, qta
        else:
            z, zx, zxx, zt, ztt, s1, s2, s3, px, qx, pt, qt = stash[k]
            dout = w.shape[0]
            aa = np.empty((n, dout))
            pxb = np.empty((n, dout))
            qxb = np.empty((n, dout))
            ptb = np.empty((n, dout))
            qtb = np.empty((n, dout))
            _adjoint_fused(za, pxa, qxa, pta, qta, s1, s2, s3, px, qx, pt, qt,
                           aa, pxb, qxb, ptb, qtb)
        dw = np.zeros_like(w)
        _mm_tn_acc(aa, z, dw)
        _mm_tn_acc(pxb, zx, dw)
        _mm_tn_acc(qxb, zxx, dw)
        _mm_tn_acc(ptb, zt, dw)
        _mm_tn_acc(qtb, ztt, dw)
        dws[k] = dw
        dbs[k] = np.asarray(aa).sum(axis=0)
        if k > 0:
            din = w.shape[1]
            za_n = np.empty((n, din))
            pxa_n = np.empty((n, din))
            qxa_n = np.empty((n, din))
            pta_n = np.empty((n, din))
            qta_n = np.empty((n, din))
            _mm_nn(aa, w, za_n)
            _mm_nn(pxb, w, pxa_n)
            _mm_nn(qxb, w, qxa_n)
            _mm_nn(ptb, w, pta_n)
            _mm_nn(qtb, w, qta_n)
            za, pxa, qxa, pta, qta = za_n, pxa_n, qxa_n, pta_n, qta_n
    return dws, dbs
