# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels; same contracts as ``_pykernels``."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def pair_traces(const double complex[:, :, :, ::1] Q, const double complex[:, :, :, ::1] R):
    cdef Py_ssize_t L = Q.shape[0], K = Q.shape[1], N = Q.shape[2]
    cdef Py_ssize_t l, i, k, a, b
    cdef double acc
    out = np.empty((L, K, K), dtype=np.float64)
    cdef double[:, :, ::1] o = out
    for l in range(L):
        for i in range(K):
            for k in range(K):
                acc = 0.0
                for a in range(N):
                    for b in range(N):
                        acc += (Q[l, i, a, b].real * R[l, k, b, a].real
                                - Q[l, i, a, b].imag * R[l, k, b, a].imag)
                o[l, i, k] = acc
    return out


def accumulate_inner(const double complex[:, :, :, ::1] G,
                     const double complex[:, :, :, ::1] c,
                     const double[::1] mu,
                     double complex[:, :, ::1] ds,
                     double[:, :, ::1] coh,
                     double[:, :, ::1] ups1):
    cdef Py_ssize_t B = G.shape[0], L = G.shape[1], K = G.shape[2], M = c.shape[3]
    cdef Py_ssize_t b, l, k, i, m
    cdef double complex s, x, g
    with nogil:
        for b in range(B):
            for k in range(K):
                for l in range(L):
                    g = G[b, l, k, k]
                    for m in range(M):
                        ds[k, l, m] = ds[k, l, m] + c[b, l, k, m] * g
                for i in range(K):
                    for m in range(M):
                        s = 0
                        for l in range(L):
                            s = s + c[b, l, k, m] * G[b, l, k, i]
                        coh[k, i, m] += s.real * s.real + s.imag * s.imag
                    for l in range(L):
                        g = G[b, l, k, i]
                        ups1[k, i, l] += mu[l] * (g.real * g.real + g.imag * g.imag)
