# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled versions of the hot kernels in ``_pykernels``; same signatures."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sin, cos, fabs

cnp.import_array()

cdef double SERIES_SPREAD = 0.5
cdef int SERIES_TERMS = 24


cdef inline double complex expi(double theta) nogil:
    return cos(theta) + 1j * sin(theta)


cdef inline double sinc_half(double h) nogil:
    # sin(h)/h
    if fabs(h) < 1e-4:
        return 1.0 - h * h / 6.0
    return sin(h) / h


cdef inline double complex dd2(double ta, double tb) nogil:
    return expi(0.5 * (ta + tb)) * sinc_half(0.5 * (tb - ta))


cdef double complex dd3(double t0, double t1, double t2) nogil:
    cdef double lo = t0, mid = t1, hi = t2, tmp
    if lo > mid:
        tmp = lo; lo = mid; mid = tmp
    if mid > hi:
        tmp = mid; mid = hi; hi = tmp
    if lo > mid:
        tmp = lo; lo = mid; mid = tmp
    if hi - lo >= SERIES_SPREAD:
        return (dd2(mid, hi) - dd2(lo, mid)) / (1j * (hi - lo))
    cdef double complex x = 1j * (mid - lo)
    cdef double complex y = 1j * (hi - lo)
    cdef double complex total = 0, hn = 1, xp = 1
    cdef double fact = 2.0
    cdef int n
    for n in range(SERIES_TERMS):
        total = total + hn / fact
        fact = fact * (n + 3)
        xp = xp * x
        hn = hn * y + xp
    return expi(lo) * total


cdef inline double complex seg_integral(double mu, double w, double a, double b) nogil:
    cdef double length = b - a
    cdef double p = mu + w
    cdef double q = w - mu
    return (length * dd2(p * a, p * b) - length * dd2(q * a, q * b)) / 2j


cdef inline double complex tri(double nu, double lam, double a, double length) nogil:
    return expi((nu + lam) * a) * length * length * dd3(0.0, (nu + lam) * length, nu * length)


cdef inline double seg_triangle(double mu, double w, double a, double b) nogil:
    cdef double length = b - a
    cdef double p = mu + w
    cdef double q = w - mu
    cdef double complex total = (tri(p, -q, a, length) - tri(p, -p, a, length)
                                 - tri(q, -q, a, length) + tri(q, -p, a, length))
    return (-0.25 * total).imag


def interval_integrals(double mu, omegas, starts, ends):
    cdef double[::1] w = np.ascontiguousarray(omegas, dtype=np.float64)
    cdef double[::1] a = np.ascontiguousarray(starts, dtype=np.float64)
    cdef double[::1] b = np.ascontiguousarray(ends, dtype=np.float64)
    cdef Py_ssize_t nk = w.shape[0], ns = a.shape[0], k, s
    out = np.empty((nk, ns), dtype=np.complex128)
    cdef double complex[:, ::1] o = out
    with nogil:
        for k in range(nk):
            for s in range(ns):
                o[k, s] = seg_integral(mu, w[k], a[s], b[s])
    return out


def triangle_integrals(double mu, omegas, starts, ends):
    cdef double[::1] w = np.ascontiguousarray(omegas, dtype=np.float64)
    cdef double[::1] a = np.ascontiguousarray(starts, dtype=np.float64)
    cdef double[::1] b = np.ascontiguousarray(ends, dtype=np.float64)
    cdef Py_ssize_t nk = w.shape[0], ns = a.shape[0], k, s
    out = np.empty((nk, ns), dtype=np.float64)
    cdef double[:, ::1] o = out
    with nogil:
        for k in range(nk):
            for s in range(ns):
                o[k, s] = seg_triangle(mu, w[k], a[s], b[s])
    return out


def mode_kernels(double mu, omegas, bounds):
    cdef double[::1] w = np.ascontiguousarray(omegas, dtype=np.float64)
    cdef double[::1] bd = np.ascontiguousarray(bounds, dtype=np.float64)
    cdef Py_ssize_t nk = w.shape[0], ns = bd.shape[0] - 1, k, s, r
    c_arr = np.empty((nk, ns), dtype=np.complex128)
    g_arr = np.zeros((nk, ns, ns), dtype=np.float64)
    cdef double complex[:, ::1] c = c_arr
    cdef double[:, :, ::1] g = g_arr
    with nogil:
        for k in range(nk):
            for s in range(ns):
                c[k, s] = seg_integral(mu, w[k], bd[s], bd[s + 1])
            for s in range(ns):
                g[k, s, s] = seg_triangle(mu, w[k], bd[s], bd[s + 1])
                for r in range(s + 1, ns):
                    # Im(conj(c_s) c_r)
                    g[k, s, r] = c[k, s].real * c[k, r].imag - c[k, s].imag * c[k, r].real
    return c_arr, g_arr


def penalty_objective(x, amat, kmat, p_idx, q_idx, targets,
                      double w_alpha, double w_chi, double w_power):
    cdef double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef double complex[:, :, ::1] A = np.ascontiguousarray(amat, dtype=np.complex128)
    cdef double[:, :, ::1] K = np.ascontiguousarray(kmat, dtype=np.float64)
    cdef cnp.int64_t[::1] pi = np.ascontiguousarray(p_idx, dtype=np.int64)
    cdef cnp.int64_t[::1] qi = np.ascontiguousarray(q_idx, dtype=np.int64)
    cdef double[::1] tg = np.ascontiguousarray(targets, dtype=np.float64)
    cdef Py_ssize_t npair = A.shape[0], nrow = A.shape[1], ns = A.shape[2]
    cdef Py_ssize_t nt = K.shape[0]
    cdef Py_ssize_t P, r, s, t, a, b, op, oq
    grad_arr = np.zeros(npair * ns, dtype=np.float64)
    cdef double[::1] grad = grad_arr
    kq_arr = np.empty(ns, dtype=np.float64)
    kp_arr = np.empty(ns, dtype=np.float64)
    cdef double[::1] kq = kq_arr
    cdef double[::1] kp = kp_arr
    cdef double value = 0.0, chi, resid, coef, acc, xs
    cdef double complex alpha
    with nogil:
        for P in range(npair):
            for r in range(nrow):
                alpha = 0
                for s in range(ns):
                    alpha = alpha + A[P, r, s] * xv[P * ns + s]
                value += w_alpha * (alpha.real * alpha.real + alpha.imag * alpha.imag)
                for s in range(ns):
                    # 2 Re(conj(A) alpha)
                    grad[P * ns + s] += 2.0 * w_alpha * (
                        A[P, r, s].real * alpha.real + A[P, r, s].imag * alpha.imag)
        for t in range(nt):
            op = pi[t] * ns
            oq = qi[t] * ns
            for a in range(ns):
                kq[a] = 0.0
                kp[a] = 0.0
            for a in range(ns):
                acc = 0.0
                for b in range(ns):
                    acc = acc + K[t, a, b] * xv[oq + b]
                kq[a] = acc
                xs = xv[op + a]
                for b in range(ns):
                    kp[b] += K[t, a, b] * xs
            chi = 0.0
            for a in range(ns):
                chi = chi + xv[op + a] * kq[a]
            resid = chi - tg[t]
            value += w_chi * resid * resid
            coef = 2.0 * w_chi * resid
            for a in range(ns):
                grad[op + a] += coef * kq[a]
                grad[oq + a] += coef * kp[a]
        for s in range(npair * ns):
            value += w_power * xv[s] * xv[s]
            grad[s] += 2.0 * w_power * xv[s]
    return value, grad_arr
