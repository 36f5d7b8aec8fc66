# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled true-state ensemble kernel.

Propagates a chunk of true-state trajectories over the full grid and adds
their weighted feature moments into per-step accumulators.  Semantics match
``qsmooth._kernel_py.propagate_chunk``; see that module for the argument
layout.  Steps form the outer loop so that per-step sums stay in registers;
within a step, trajectories are summed in chunk order.
"""

import numpy as np

from libc.math cimport exp, log, log2, sqrt

DEF NF = 6
DEF ACC = 27

cdef double PURE_THRESHOLD = 1.0 - 1e-6
cdef double TRACE_FLOOR = 1e-300


cdef inline void _accumulate(double* sums, double w, double* v) noexcept nogil:
    cdef int i, j, m
    cdef double w2 = w * w
    cdef double wv
    for i in range(NF):
        sums[i] += w * v[i]
    m = NF
    for i in range(NF):
        wv = w2 * v[i]
        for j in range(i, NF):
            sums[m] += wv * v[j]
            m += 1


cdef inline void _observe(double a, double d, double br, double bi, double logtr,
                          double lf, double e00, double e11, double er, double ei,
                          double den, const double* c, double* sums, double* diag) noexcept nogil:
    cdef double v[NF]
    cdef double g, r, l1, l2, h, w_f, w_s, tre, lam_min
    g = a * a + d * d + 2.0 * (br * br + bi * bi)
    if g > PURE_THRESHOLD:
        h = 0.0
    else:
        r = 2.0 * g - 1.0
        r = sqrt(r) if r > 0.0 else 0.0
        if r > 1.0:
            r = 1.0
        l1 = 0.5 * (1.0 + r)
        l2 = 0.5 * (1.0 - r)
        h = l1 * log2(l1)
        if l2 > 0.0:
            h += l2 * log2(l2)
    v[0] = 1.0
    v[1] = 2.0 * br - c[1]
    v[2] = -2.0 * bi - c[2]
    v[3] = a - d - c[3]
    v[4] = g - c[4]
    v[5] = h - c[5]
    if g < diag[0]:
        diag[0] = g
    lam_min = 0.5 * (a + d) - sqrt(0.25 * (a - d) * (a - d) + br * br + bi * bi)
    if lam_min < diag[1]:
        diag[1] = lam_min
    w_f = exp(logtr - lf)
    tre = a * e00 + d * e11 + 2.0 * (br * er + bi * ei)
    w_s = w_f * tre / den
    _accumulate(sums, w_f, v)
    _accumulate(sums + ACC, w_s, v)


def propagate_chunk(const double complex[:, :, :, ::1] kraus,
                    const unsigned char[:, ::1] dn,
                    const double[::1] logtr_f,
                    const double[:, ::1] effect,
                    const double[::1] den,
                    const double[:, ::1] shift,
                    double[:, :, ::1] acc,
                    long long[::1] dead,
                    double[::1] diag):
    cdef Py_ssize_t n_traj = dn.shape[0]
    cdef Py_ssize_t n_steps = dn.shape[1]
    cdef Py_ssize_t c, k, i
    cdef double t, na, nd, lf, e00, e11, er, ei, dk
    cdef double complex p, q, r, s, b, bc, t00, t01, t10, t11, nb
    cdef double dg[2]
    cdef double sums[2 * ACC]
    cdef long long n_dead = 0
    cdef int j
    if (kraus.shape[0] != n_steps or acc.shape[0] != n_steps + 1 or acc.shape[2] != ACC
            or shift.shape[0] != n_steps + 1 or shift.shape[1] != NF):
        raise ValueError("inconsistent step counts")

    a_arr = np.ones(n_traj)
    d_arr = np.zeros(n_traj)
    br_arr = np.zeros(n_traj)
    bi_arr = np.zeros(n_traj)
    lt_arr = np.zeros(n_traj)
    alive_arr = np.ones(n_traj, dtype=np.uint8)
    cdef double[::1] a = a_arr
    cdef double[::1] d = d_arr
    cdef double[::1] br = br_arr
    cdef double[::1] bi = bi_arr
    cdef double[::1] logtr = lt_arr
    cdef unsigned char[::1] alive = alive_arr

    dg[0] = diag[0]
    dg[1] = diag[1]
    with nogil:
        for k in range(n_steps + 1):
            for i in range(2 * ACC):
                sums[i] = 0.0
            lf = logtr_f[k]
            e00 = effect[k, 0]
            e11 = effect[k, 1]
            er = effect[k, 2]
            ei = effect[k, 3]
            dk = den[k]
            for c in range(n_traj):
                if not alive[c]:
                    continue
                if k > 0:
                    j = dn[c, k - 1]
                    p = kraus[k - 1, j, 0, 0]
                    q = kraus[k - 1, j, 0, 1]
                    r = kraus[k - 1, j, 1, 0]
                    s = kraus[k - 1, j, 1, 1]
                    b = br[c] + 1j * bi[c]
                    bc = b.conjugate()
                    # T = K rho, rho = [[a, b], [conj(b), d]]; rho' = T K^dagger
                    t00 = p * a[c] + q * bc
                    t01 = p * b + q * d[c]
                    t10 = r * a[c] + s * bc
                    t11 = r * b + s * d[c]
                    na = (t00 * p.conjugate() + t01 * q.conjugate()).real
                    nd = (t10 * r.conjugate() + t11 * s.conjugate()).real
                    nb = t00 * r.conjugate() + t01 * s.conjugate()
                    t = na + nd
                    if not t > TRACE_FLOOR:
                        alive[c] = 0
                        n_dead += 1
                        continue
                    logtr[c] += log(t)
                    a[c] = na / t
                    d[c] = nd / t
                    br[c] = nb.real / t
                    bi[c] = nb.imag / t
                _observe(a[c], d[c], br[c], bi[c], logtr[c], lf, e00, e11, er, ei, dk, &shift[k, 0], sums, dg)
            dead[k] += n_dead
            for i in range(ACC):
                acc[k, 0, i] += sums[i]
                acc[k, 1, i] += sums[ACC + i]
    diag[0] = dg[0]
    diag[1] = dg[1]
