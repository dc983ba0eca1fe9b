# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled residual kernel; same contract as ``_fallback.residual_batch``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, isfinite, INFINITY

cnp.import_array()


def residual_batch(k_rel, rational, offset, weights):
    cdef const double[::1] ks = np.ascontiguousarray(k_rel, dtype=np.float64)
    cdef const double[:, ::1] co = np.ascontiguousarray(rational, dtype=np.float64)
    cdef const double[::1] y = np.ascontiguousarray(offset, dtype=np.float64)
    cdef const double[::1] w = np.ascontiguousarray(weights, dtype=np.float64)
    cdef Py_ssize_t m = ks.shape[0], n = y.shape[0], a, i
    if co.shape[0] != 4 or co.shape[1] != n or w.shape[0] != n:
        raise ValueError("coefficient, offset and weight shapes disagree")
    out = np.empty(m, dtype=np.float64)
    cdef double[::1] q = out
    cdef const double* e1 = &co[0, 0]
    cdef const double* e2 = &co[1, 0]
    cdef const double* d1 = &co[2, 0]
    cdef const double* d2 = &co[3, 0]
    cdef double c, den, r, acc
    cdef bint bad
    with nogil:
        for a in range(m):
            c = 1.0 - ks[a]
            acc = 0.0
            bad = False
            for i in range(n):
                den = 1.0 + c * (d1[i] + c * d2[i])
                if fabs(den) < 1e-300:
                    bad = True
                    break
                r = y[i] + c * (e1[i] + c * e2[i]) / den
                acc += w[i] * r * r
            if bad or not isfinite(acc):
                q[a] = INFINITY
            else:
                q[a] = acc
    return out
