# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled classical RK4 stepping of a linear vector field ``ds/dt = M s``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport isfinite

cnp.import_array()


cdef inline void _matvec(const double[:, ::1] M, const double* s, double* out, Py_ssize_t d) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef double acc
    for i in range(d):
        acc = 0.0
        for j in range(d):
            acc = acc + M[i, j] * s[j]
        out[i] = acc


def rk4_linear(const double[:, ::1] M, const double[::1] s0, double h, Py_ssize_t nsteps):
    """Return the ``(nsteps + 1, d)`` array of RK4 iterates starting at ``s0``.

    Raises ``FloatingPointError`` with the failing step index on a non-finite state.
    """
    cdef Py_ssize_t d = s0.shape[0]
    if M.shape[0] != d or M.shape[1] != d:
        raise ValueError("matrix and state dimensions differ")
    out_arr = np.empty((nsteps + 1, d), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    work_arr = np.empty((5, d), dtype=np.float64)
    cdef double[:, ::1] work = work_arr
    cdef double* k1 = &work[0, 0]
    cdef double* k2 = &work[1, 0]
    cdef double* k3 = &work[2, 0]
    cdef double* k4 = &work[3, 0]
    cdef double* tmp = &work[4, 0]
    cdef double half = 0.5 * h
    cdef double sixth = h / 6.0
    cdef Py_ssize_t k, i
    cdef int bad = -1
    for i in range(d):
        out[0, i] = s0[i]
    with nogil:
        for k in range(nsteps):
            _matvec(M, &out[k, 0], k1, d)
            for i in range(d):
                tmp[i] = out[k, i] + half * k1[i]
            _matvec(M, tmp, k2, d)
            for i in range(d):
                tmp[i] = out[k, i] + half * k2[i]
            _matvec(M, tmp, k3, d)
            for i in range(d):
                tmp[i] = out[k, i] + h * k3[i]
            _matvec(M, tmp, k4, d)
            for i in range(d):
                out[k + 1, i] = out[k, i] + sixth * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
                if not isfinite(out[k + 1, i]):
                    bad = <int>(k + 1)
            if bad >= 0:
                break
    if bad >= 0:
        raise FloatingPointError(f"non-finite state at step {bad}")
    return out_arr
