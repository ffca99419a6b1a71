# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels. Signatures match ``kdmeta._kernels_py``."""

import numpy as np
from libc.math cimport sqrt, fabs

cdef int SQUARINGS = 3


cdef inline double abs2(double complex z) nogil:
    return z.real * z.real + z.imag * z.imag


def sgcs_columns(const double complex[:, :, ::1] w, const double complex[:, :, ::1] w_hat):
    cdef Py_ssize_t bsz = w.shape[0], n = w.shape[1], nsb = w.shape[2]
    cdef Py_ssize_t b, i, l
    cdef double complex inner
    cdef double nw, nh
    out = np.empty((bsz, nsb), dtype=np.float64)
    cdef double[:, ::1] o = out
    with nogil:
        for b in range(bsz):
            for l in range(nsb):
                inner = 0
                nw = 0.0
                nh = 0.0
                for i in range(n):
                    inner = inner + w[b, i, l].conjugate() * w_hat[b, i, l]
                    nw = nw + abs2(w[b, i, l])
                    nh = nh + abs2(w_hat[b, i, l])
                o[b, l] = abs2(inner) / (nw * nh)
    return out


def sgcs_grad(const double complex[:, :, ::1] w, const double complex[:, :, ::1] w_hat):
    cdef Py_ssize_t bsz = w.shape[0], n = w.shape[1], nsb = w.shape[2]
    cdef Py_ssize_t b, i, l
    cdef double complex inner
    cdef double nw, nh, c2, acc, scale
    vals = np.empty(bsz, dtype=np.float64)
    grad = np.empty((bsz, n, nsb), dtype=np.complex128)
    cdef double[::1] v = vals
    cdef double complex[:, :, ::1] g = grad
    with nogil:
        for b in range(bsz):
            acc = 0.0
            for l in range(nsb):
                inner = 0
                nw = 0.0
                nh = 0.0
                for i in range(n):
                    inner = inner + w[b, i, l].conjugate() * w_hat[b, i, l]
                    nw = nw + abs2(w[b, i, l])
                    nh = nh + abs2(w_hat[b, i, l])
                c2 = abs2(inner)
                acc = acc + c2 / (nw * nh)
                scale = 2.0 / (nsb * nw * nh)
                for i in range(n):
                    g[b, i, l] = scale * (inner * w[b, i, l] - (c2 / nh) * w_hat[b, i, l])
            v[b] = acc / nsb
    return vals, grad


cdef void _matmul(double complex[:, ::1] a, double complex[:, ::1] b,
                  double complex[:, ::1] out, Py_ssize_t n) nogil:
    cdef Py_ssize_t i, j, k
    cdef double complex s
    for i in range(n):
        for j in range(n):
            s = 0
            for k in range(n):
                s = s + a[i, k] * b[k, j]
            out[i, j] = s


def principal_eigh(const double complex[:, :, ::1] a, double tol, long maxiter):
    cdef Py_ssize_t bsz = a.shape[0], n = a.shape[1]
    cdef Py_ssize_t b, i, j, start, s
    cdef long it
    cdef double tr, best, nrm, lam, r
    cdef double complex acc

    vecs = np.zeros((bsz, n), dtype=np.complex128)
    vals = np.zeros(bsz, dtype=np.float64)
    iters = np.zeros(bsz, dtype=np.int64)
    cdef double complex[:, ::1] V = vecs
    cdef double[::1] L = vals
    cdef long long[::1] I = iters

    m_arr = np.empty((n, n), dtype=np.complex128)
    t_arr = np.empty((n, n), dtype=np.complex128)
    x_arr = np.empty(n, dtype=np.complex128)
    y_arr = np.empty(n, dtype=np.complex128)
    cdef double complex[:, ::1] M = m_arr
    cdef double complex[:, ::1] T = t_arr
    cdef double complex[::1] x = x_arr
    cdef double complex[::1] y = y_arr

    with nogil:
        for b in range(bsz):
            tr = 0.0
            best = -1.0
            start = 0
            for i in range(n):
                tr = tr + a[b, i, i].real
                if a[b, i, i].real > best:
                    best = a[b, i, i].real
                    start = i
            if tr <= 0.0:
                V[b, 0] = 1.0
                continue
            for i in range(n):
                for j in range(n):
                    M[i, j] = a[b, i, j] / tr
            for s in range(SQUARINGS):
                _matmul(M, M, T, n)
                tr = 0.0
                for i in range(n):
                    tr = tr + T[i, i].real
                for i in range(n):
                    for j in range(n):
                        M[i, j] = T[i, j] / tr
            nrm = 0.0
            for i in range(n):
                x[i] = a[b, i, start]
                nrm = nrm + abs2(x[i])
            nrm = sqrt(nrm)
            for i in range(n):
                x[i] = x[i] / nrm

            I[b] = -1
            for it in range(1, maxiter + 1):
                lam = 0.0
                for i in range(n):
                    acc = 0
                    for j in range(n):
                        acc = acc + a[b, i, j] * x[j]
                    y[i] = acc
                    lam = lam + (x[i].conjugate() * acc).real
                r = 0.0
                for i in range(n):
                    r = r + abs2(y[i] - lam * x[i])
                r = sqrt(r)
                L[b] = lam
                if r <= tol * fabs(lam):
                    I[b] = it
                    break
                nrm = 0.0
                for i in range(n):
                    acc = 0
                    for j in range(n):
                        acc = acc + M[i, j] * x[j]
                    y[i] = acc
                    nrm = nrm + abs2(acc)
                nrm = sqrt(nrm)
                for i in range(n):
                    x[i] = y[i] / nrm
            for i in range(n):
                V[b, i] = x[i]
    return vecs, vals, iters


def mgs(x, double reorth_tol=1e-10):
    q_arr = np.array(x, dtype=np.complex128, order="F", copy=True)
    cdef double complex[::1, :] q = q_arr
    cdef Py_ssize_t n = q.shape[0], k = q.shape[1]
    cdef Py_ssize_t i, j, r, p
    cdef double complex proj
    cdef double nrm, resid, min_pivot = np.inf
    cdef double complex dot
    for p in range(2):
        for j in range(k):
            for i in range(j):
                proj = 0
                for r in range(n):
                    proj = proj + q[r, i].conjugate() * q[r, j]
                for r in range(n):
                    q[r, j] = q[r, j] - proj * q[r, i]
            nrm = 0.0
            for r in range(n):
                nrm = nrm + abs2(q[r, j])
            nrm = sqrt(nrm)
            if p == 0 and nrm < min_pivot:
                min_pivot = nrm
            if nrm < 1e-300:
                return np.ascontiguousarray(q_arr), 0.0
            for r in range(n):
                q[r, j] = q[r, j] / nrm
        resid = 0.0
        for i in range(k):
            for j in range(k):
                dot = 0
                for r in range(n):
                    dot = dot + q[r, i].conjugate() * q[r, j]
                if i == j:
                    dot = dot - 1.0
                if sqrt(abs2(dot)) > resid:
                    resid = sqrt(abs2(dot))
        if resid <= reorth_tol:
            break
    return np.ascontiguousarray(q_arr), min_pivot
