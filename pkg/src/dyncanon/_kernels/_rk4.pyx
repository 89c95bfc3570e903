# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled fixed-step RK4 kernel for the (Pi, S, u) GBDT system.

Same contract as ``_rk4_py.rk4_trajectory``; matrices are tiny, so plain
loops beat BLAS dispatch overhead by a wide margin.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()

ctypedef double complex cplx


cdef inline cplx conj(cplx z) noexcept nogil:
    return z.real - 1j * z.imag


cdef int _chol(const cplx[:, ::1] S, cplx[:, ::1] L, int n) noexcept nogil:
    # L L^* = (S + S^*)/2; returns 0 or -1 if not positive definite
    cdef int i, j, k
    cdef cplx acc
    cdef double d
    for j in range(n):
        d = S[j, j].real
        for k in range(j):
            d -= L[j, k].real * L[j, k].real + L[j, k].imag * L[j, k].imag
        if not d > 0.0:
            return -1
        d = sqrt(d)
        L[j, j] = d
        for i in range(j + 1, n):
            acc = 0.5 * (S[i, j] + conj(S[j, i]))
            for k in range(j):
                acc -= L[i, k] * conj(L[j, k])
            L[i, j] = acc / d
        for i in range(j):
            L[i, j] = 0.0
    return 0


cdef void _chol_solve(cplx[:, ::1] L, const cplx[:, ::1] B, cplx[:, ::1] X,
                      int n, int m) noexcept nogil:
    cdef int i, k, c
    cdef cplx acc
    for c in range(m):
        for i in range(n):
            acc = B[i, c]
            for k in range(i):
                acc -= L[i, k] * X[k, c]
            X[i, c] = acc / L[i, i].real
        for i in range(n - 1, -1, -1):
            acc = X[i, c]
            for k in range(i + 1, n):
                acc -= conj(L[k, i]) * X[k, c]
            X[i, c] = acc / L[i, i].real


cdef class _Work:
    cdef cplx[:, ::1] PjH, L, X, P, q
    def __init__(self, int n, int m):
        self.PjH = np.empty((n, m), dtype=complex)
        self.L = np.empty((n, n), dtype=complex)
        self.X = np.empty((n, m), dtype=complex)
        self.P = np.empty((m, m), dtype=complex)
        self.q = np.empty((m, m), dtype=complex)


cdef int _rhs(const cplx[:, ::1] A, const double[::1] jd,
              const cplx[:, ::1] Pi, const cplx[:, ::1] S, const cplx[:, ::1] U,
              const cplx[:, ::1] H,
              cplx[:, ::1] dPi, cplx[:, ::1] dS, cplx[:, ::1] dU,
              _Work w, int n, int m) noexcept nogil:
    cdef int a, b, c
    cdef cplx acc
    # PjH = Pi j H
    for a in range(n):
        for b in range(m):
            acc = 0.0
            for c in range(m):
                acc += Pi[a, c] * jd[c] * H[c, b]
            w.PjH[a, b] = acc
    # dPi = -i A PjH
    for a in range(n):
        for b in range(m):
            acc = 0.0
            for c in range(n):
                acc += A[a, c] * w.PjH[c, b]
            dPi[a, b] = -1j * acc
    # dS = PjH j Pi^*
    for a in range(n):
        for b in range(n):
            acc = 0.0
            for c in range(m):
                acc += w.PjH[a, c] * jd[c] * conj(Pi[b, c])
            dS[a, b] = acc
    if _chol(S, w.L, n) != 0:
        return -1
    _chol_solve(w.L, Pi, w.X, n, m)
    # P = Pi^* S^{-1} Pi
    for a in range(m):
        for b in range(m):
            acc = 0.0
            for c in range(n):
                acc += conj(Pi[c, a]) * w.X[c, b]
            w.P[a, b] = acc
    # q = (jPj) H - (jHj) P
    for a in range(m):
        for b in range(m):
            acc = 0.0
            for c in range(m):
                acc += jd[a] * w.P[a, c] * jd[c] * H[c, b] - jd[a] * H[a, c] * jd[c] * w.P[c, b]
            w.q[a, b] = acc
    for a in range(m):
        for b in range(m):
            acc = 0.0
            for c in range(m):
                acc += w.q[a, c] * U[c, b]
            dU[a, b] = -acc
    return 0


cdef void _axpy(cplx[:, ::1] out, const cplx[:, ::1] x, cplx alpha,
                const cplx[:, ::1] y) noexcept nogil:
    cdef Py_ssize_t i, j
    for i in range(out.shape[0]):
        for j in range(out.shape[1]):
            out[i, j] = x[i, j] + alpha * y[i, j]


cdef void _combine(cplx[:, ::1] out, double h6, const cplx[:, ::1] k1, const cplx[:, ::1] k2,
                   const cplx[:, ::1] k3, const cplx[:, ::1] k4) noexcept nogil:
    cdef Py_ssize_t i, j
    for i in range(out.shape[0]):
        for j in range(out.shape[1]):
            out[i, j] = out[i, j] + h6 * (k1[i, j] + 2.0 * k2[i, j] + 2.0 * k3[i, j] + k4[i, j])


def rk4_trajectory(A, Pi0, S0, jd, Hs, double h, int nsteps):
    """See ``_rk4_py.rk4_trajectory``."""
    cdef const cplx[:, ::1] A_ = np.ascontiguousarray(A, dtype=complex)
    cdef const double[::1] jd_ = np.ascontiguousarray(jd, dtype=float)
    cdef const cplx[:, :, ::1] Hs_ = np.ascontiguousarray(Hs, dtype=complex)
    Pi0 = np.ascontiguousarray(Pi0, dtype=complex)
    cdef int n = Pi0.shape[0]
    cdef int m = Pi0.shape[1]
    if Hs_.shape[0] != 2 * nsteps + 1:
        raise ValueError("Hs must hold 2*nsteps+1 half-step samples")

    PiT = np.full((nsteps + 1, n, m), np.nan, dtype=complex)
    ST = np.full((nsteps + 1, n, n), np.nan, dtype=complex)
    UT = np.full((nsteps + 1, m, m), np.nan, dtype=complex)
    PiT[0] = Pi0
    ST[0] = S0
    UT[0] = np.eye(m)
    cdef cplx[:, :, ::1] PiT_ = PiT
    cdef cplx[:, :, ::1] ST_ = ST
    cdef cplx[:, :, ::1] UT_ = UT

    cdef cplx[:, ::1] p = PiT[0].copy()
    cdef cplx[:, ::1] s = ST[0].copy()
    cdef cplx[:, ::1] u = UT[0].copy()
    cdef cplx[:, ::1] tp = np.empty((n, m), dtype=complex)
    cdef cplx[:, ::1] ts = np.empty((n, n), dtype=complex)
    cdef cplx[:, ::1] tu = np.empty((m, m), dtype=complex)
    kP = [np.empty((n, m), dtype=complex) for _ in range(4)]
    kS = [np.empty((n, n), dtype=complex) for _ in range(4)]
    kU = [np.empty((m, m), dtype=complex) for _ in range(4)]
    cdef cplx[:, ::1] kP1 = kP[0], kP2 = kP[1], kP3 = kP[2], kP4 = kP[3]
    cdef cplx[:, ::1] kS1 = kS[0], kS2 = kS[1], kS3 = kS[2], kS4 = kS[3]
    cdef cplx[:, ::1] kU1 = kU[0], kU2 = kU[1], kU3 = kU[2], kU4 = kU[3]
    cdef _Work w = _Work(n, m)
    cdef int k, fail = -1
    cdef double h6 = h / 6.0
    cdef cplx hh = 0.5 * h, hf = h

    with nogil:
        for k in range(nsteps):
            if _rhs(A_, jd_, p, s, u, Hs_[2 * k], kP1, kS1, kU1, w, n, m) != 0:
                fail = k
                break
            _axpy(tp, p, hh, kP1); _axpy(ts, s, hh, kS1); _axpy(tu, u, hh, kU1)
            if _rhs(A_, jd_, tp, ts, tu, Hs_[2 * k + 1], kP2, kS2, kU2, w, n, m) != 0:
                fail = k
                break
            _axpy(tp, p, hh, kP2); _axpy(ts, s, hh, kS2); _axpy(tu, u, hh, kU2)
            if _rhs(A_, jd_, tp, ts, tu, Hs_[2 * k + 1], kP3, kS3, kU3, w, n, m) != 0:
                fail = k
                break
            _axpy(tp, p, hf, kP3); _axpy(ts, s, hf, kS3); _axpy(tu, u, hf, kU3)
            if _rhs(A_, jd_, tp, ts, tu, Hs_[2 * k + 2], kP4, kS4, kU4, w, n, m) != 0:
                fail = k
                break
            _combine(p, h6, kP1, kP2, kP3, kP4)
            _combine(s, h6, kS1, kS2, kS3, kS4)
            _combine(u, h6, kU1, kU2, kU3, kU4)
            if _chol(s, w.L, n) != 0:
                fail = k + 1
                break
            PiT_[k + 1, :, :] = p
            ST_[k + 1, :, :] = s
            UT_[k + 1, :, :] = u
    return PiT, ST, UT, fail
