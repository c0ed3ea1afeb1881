# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled E-step sweep. Mirrors ``_sweep_py.estep_sweep`` exactly."""

from libc.math cimport exp

import numpy as np


def estep_sweep(const Py_ssize_t[::1] indptr, const Py_ssize_t[::1] indices,
                const double[::1] data, const double[::1] d,
                double[:, ::1] mu,
                const double[:, ::1] c_r, const double[:, ::1] c_b,
                const double[:, ::1] c_q, const double[:, ::1] c_s,
                const double[::1] log_prior, bint use_q):
    cdef Py_ssize_t n = mu.shape[0]
    cdef Py_ssize_t K = mu.shape[1]
    cdef Py_ssize_t i, j, p, k, l
    cdef double a, m, di, acc, mx, tot, new
    cdef double[::1] dmu = np.zeros(K)
    cdef double[::1] r = np.empty(K)
    cdef double[::1] b = np.empty(K)
    cdef double[::1] q = np.zeros(K)
    cdef double[::1] s = np.empty(K)
    cdef double[::1] logit = np.empty(K)

    for i in range(n):
        for k in range(K):
            dmu[k] += d[i] * mu[i, k]

    for i in range(n):
        for k in range(K):
            r[k] = 0.0
            b[k] = 0.0
            q[k] = 0.0
        for p in range(indptr[i], indptr[i + 1]):
            j = indices[p]
            a = data[p]
            for k in range(K):
                m = mu[j, k]
                r[k] += a * m
                b[k] += m
                if use_q:
                    q[k] += a * a * m
        di = d[i]
        for k in range(K):
            s[k] = di * (dmu[k] - di * mu[i, k])
        mx = -1e308
        for k in range(K):
            acc = log_prior[k]
            for l in range(K):
                acc += r[l] * c_r[k, l] + b[l] * c_b[k, l] + q[l] * c_q[k, l] + s[l] * c_s[k, l]
            logit[k] = acc
            if acc > mx:
                mx = acc
        tot = 0.0
        for k in range(K):
            logit[k] = exp(logit[k] - mx)
            tot += logit[k]
        for k in range(K):
            new = logit[k] / tot
            dmu[k] += di * (new - mu[i, k])
            mu[i, k] = new
