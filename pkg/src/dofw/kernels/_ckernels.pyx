# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled round kernels. Mirrors ``_pykernels`` call for call."""

from libc.math cimport fabs, INFINITY
from libc.stdlib cimport qsort, malloc, free

import numpy as np

KIND_SIMPLEX = 0
KIND_L1 = 1
KIND_BOX = 2

BACKEND = "cython"

cdef double _FEASIBLE_RTOL = 1e-12


cdef void _simplex_threshold(const double* y, const double* s_asc, Py_ssize_t d, double radius,
                             double* out) noexcept nogil:
    # s_asc holds y sorted ascending; out may alias y
    cdef Py_ssize_t k, rho = 0
    cdef double s = 0.0, mn = INFINITY, css = 0.0, theta, css_rho = 0.0, u
    for k in range(d):
        s += y[k]
        if y[k] < mn:
            mn = y[k]
    if mn >= 0.0 and fabs(s - radius) <= _FEASIBLE_RTOL * radius:
        for k in range(d):
            out[k] = y[k]
        return
    for k in range(d):
        u = s_asc[d - 1 - k]
        css += u
        if u * (k + 1) > css - radius:
            rho = k
            css_rho = css
    theta = (css_rho - radius) / (rho + 1.0)
    for k in range(d):
        out[k] = y[k] - theta if y[k] > theta else 0.0


cdef void _project_rows(const double[:, ::1] Y, const double[:, ::1] S, int kind, double radius,
                        const double[::1] lo, const double[::1] hi,
                        double[:, ::1] out, double* work) noexcept nogil:
    # S: rows of Y (kind 0) or |Y| (kind 1) sorted ascending, unused for boxes.
    # work holds 2 * d doubles; out may alias Y
    cdef Py_ssize_t n = Y.shape[0], d = Y.shape[1]
    cdef Py_ssize_t i, k
    cdef double s
    cdef double* ycopy = work
    cdef double* absbuf = work + d
    for i in range(n):
        if kind == 0:
            _simplex_threshold(&Y[i, 0], &S[i, 0], d, radius, &out[i, 0])
        elif kind == 1:
            s = 0.0
            for k in range(d):
                ycopy[k] = Y[i, k]
                absbuf[k] = fabs(Y[i, k])
                s += absbuf[k]
            if s <= radius * (1.0 + _FEASIBLE_RTOL):
                for k in range(d):
                    out[i, k] = ycopy[k]
            else:
                _simplex_threshold(absbuf, &S[i, 0], d, radius, &out[i, 0])
                for k in range(d):
                    if ycopy[k] < 0.0:
                        out[i, k] = -out[i, k]
                    elif ycopy[k] == 0.0:
                        out[i, k] = 0.0
        else:
            for k in range(d):
                if Y[i, k] < lo[k]:
                    out[i, k] = lo[k]
                elif Y[i, k] > hi[k]:
                    out[i, k] = hi[k]
                else:
                    out[i, k] = Y[i, k]


cdef void _lmo_rows(const double[:, ::1] G, int kind, double radius,
                    const double[::1] lo, const double[::1] hi,
                    double[:, ::1] out) noexcept nogil:
    cdef Py_ssize_t n = G.shape[0], d = G.shape[1]
    cdef Py_ssize_t i, k, best
    cdef double bv, a
    for i in range(n):
        if kind == 2:
            for k in range(d):
                out[i, k] = hi[k] if G[i, k] < 0.0 else lo[k]
            continue
        for k in range(d):
            out[i, k] = 0.0
        best = 0
        if kind == 0:
            bv = G[i, 0]
            for k in range(1, d):
                if G[i, k] < bv:
                    bv = G[i, k]
                    best = k
            out[i, best] = radius
        else:
            bv = fabs(G[i, 0])
            for k in range(1, d):
                a = fabs(G[i, k])
                if a > bv:
                    bv = a
                    best = k
            out[i, best] = -radius if G[i, best] >= 0.0 else radius


cdef void _mix(const double[:, ::1] A, const double[:, ::1] X,
               double[:, ::1] out) noexcept nogil:
    # skips zero weights, so sparse gossip matrices cost O(nnz * d)
    cdef Py_ssize_t n = A.shape[0], d = X.shape[1]
    cdef Py_ssize_t i, j, k
    cdef double a
    for i in range(n):
        for k in range(d):
            out[i, k] = 0.0
        for j in range(n):
            a = A[i, j]
            if a != 0.0:
                for k in range(d):
                    out[i, k] += a * X[j, k]


cdef void _ridge_grad(const double[:, ::1] F, const double[::1] l, double lam,
                      const double[:, ::1] X, double[:, ::1] out) noexcept nogil:
    cdef Py_ssize_t n = F.shape[0], d = F.shape[1]
    cdef Py_ssize_t i, k
    cdef double r, two_lam = 2.0 * lam
    for i in range(n):
        r = 0.0
        for k in range(d):
            r += F[i, k] * X[i, k]
        r -= l[i]
        for k in range(d):
            out[i, k] = F[i, k] * r + two_lam * X[i, k]


def _sorted_rows(Y, int kind):
    # numpy's vectorized sort beats any branchy in-kernel sort at these sizes
    if kind == 2:
        return Y
    return np.sort(np.abs(Y) if kind == 1 else Y, axis=1)


def project_rows(const double[:, ::1] Y, int kind, double radius,
                 const double[::1] lo, const double[::1] hi, double[:, ::1] out):
    cdef Py_ssize_t d = Y.shape[1]
    cdef const double[:, ::1] S = _sorted_rows(np.asarray(Y), kind)
    cdef double* work = <double*>malloc(2 * (d + 1) * sizeof(double))
    if work == NULL:
        raise MemoryError()
    try:
        with nogil:
            _project_rows(Y, S, kind, radius, lo, hi, out, work)
    finally:
        free(work)
    return out.base


def lmo_rows(const double[:, ::1] G, int kind, double radius,
             const double[::1] lo, const double[::1] hi, double[:, ::1] out):
    with nogil:
        _lmo_rows(G, kind, radius, lo, hi, out)
    return out.base


def mix(const double[:, ::1] A, const double[:, ::1] X, double[:, ::1] out):
    with nogil:
        _mix(A, X, out)
    return out.base


def ridge_grad(const double[:, ::1] F, const double[::1] l, double lam,
               const double[:, ::1] X, double[:, ::1] out):
    with nogil:
        _ridge_grad(F, l, lam, X, out)
    return out.base


def dofw_round(const double[:, ::1] A, const double[:, ::1] X,
               const double[:, ::1] F, const double[::1] l, double lam,
               gh_prev, g_prev, bint first, double alpha,
               int kind, double radius, const double[::1] lo, const double[::1] hi,
               double[:, ::1] x_hat, double[:, ::1] g, double[:, ::1] gbar,
               double[:, ::1] ghat, double[:, ::1] v, double[:, ::1] x_next):
    cdef Py_ssize_t n = X.shape[0], d = X.shape[1]
    cdef Py_ssize_t i, k
    cdef const double[:, ::1] ghp
    cdef const double[:, ::1] gp
    if not first:
        ghp = gh_prev
        gp = g_prev
    with nogil:
        _mix(A, X, x_hat)
        _ridge_grad(F, l, lam, x_hat, g)
        if first:
            for i in range(n):
                for k in range(d):
                    gbar[i, k] = g[i, k]
        else:
            for i in range(n):
                for k in range(d):
                    gbar[i, k] = (ghp[i, k] + g[i, k]) - gp[i, k]
        _mix(A, gbar, ghat)
        _lmo_rows(ghat, kind, radius, lo, hi, v)
        for i in range(n):
            for k in range(d):
                x_next[i, k] = alpha * (v[i, k] - x_hat[i, k]) + x_hat[i, k]


def dogd_round(const double[:, ::1] A, const double[:, ::1] X,
               const double[:, ::1] F, const double[::1] l, double lam,
               double alpha, bint local,
               int kind, double radius, const double[::1] lo, const double[::1] hi,
               double[:, ::1] x_hat, double[:, ::1] g, double[:, ::1] x_next):
    cdef Py_ssize_t n = X.shape[0], d = X.shape[1]
    cdef Py_ssize_t i, k
    cdef const double[:, ::1] S
    cdef double* work = <double*>malloc(2 * (d + 1) * sizeof(double))
    if work == NULL:
        raise MemoryError()
    try:
        with nogil:
            _mix(A, X, x_hat)
            if local:
                _ridge_grad(F, l, lam, X, g)
            else:
                _ridge_grad(F, l, lam, x_hat, g)
            # x_next doubles as the pre-projection buffer
            for i in range(n):
                for k in range(d):
                    x_next[i, k] = x_hat[i, k] - alpha * g[i, k]
        S = _sorted_rows(x_next.base, kind)
        with nogil:
            _project_rows(x_next, S, kind, radius, lo, hi, x_next, work)
    finally:
        free(work)


# ---- exact max of an indefinite 2-D quadratic over a point hull ----

cdef struct Pt:
    double u
    double w


cdef int _cmp_pt(const void* a, const void* b) noexcept nogil:
    cdef const Pt* p = <const Pt*>a
    cdef const Pt* q = <const Pt*>b
    if p.u < q.u:
        return -1
    if p.u > q.u:
        return 1
    if p.w < q.w:
        return -1
    if p.w > q.w:
        return 1
    return 0


cdef inline double _cross(Pt o, Pt a, Pt b) noexcept nogil:
    return (a.u - o.u) * (b.w - o.w) - (a.w - o.w) * (b.u - o.u)


cdef inline double _habs(double u, double w, double lu, double lw) noexcept nogil:
    return fabs(0.5 * (u - lu) * (u - lu) - 0.5 * (w - lw) * (w - lw))


cdef double _seg(Pt p0, Pt p1, double lu, double lw) noexcept nogil:
    cdef double best = _habs(p0.u, p0.w, lu, lw)
    cdef double h1 = _habs(p1.u, p1.w, lu, lw)
    cdef double du = p1.u - p0.u, dw = p1.w - p0.w
    cdef double den = du * du - dw * dw
    cdef double s, hs
    if h1 > best:
        best = h1
    if den != 0.0:
        s = -(du * (p0.u - lu) - dw * (p0.w - lw)) / den
        if s > 0.0 and s < 1.0:
            hs = _habs(p0.u + s * du, p0.w + s * dw, lu, lw)
            if hs > best:
                best = hs
    return best


def max_abs_quad_diff(const double[:, ::1] U, const double[:, ::1] W,
                      const double[::1] lu, const double[::1] lw, double[::1] out):
    """Exact max of |0.5 (u - lu)^2 - 0.5 (w - lw)^2| over conv{(U_k, W_k)} per row.

    Builds the 2-D hull (monotone chain) and scans its edges; an indefinite
    quadratic has no interior maximum.
    """
    cdef Py_ssize_t N = U.shape[0], m = U.shape[1]
    cdef Py_ssize_t r, k, h, lower
    cdef double best, val
    cdef Pt* pts = <Pt*>malloc(m * sizeof(Pt))
    cdef Pt* hull = <Pt*>malloc((2 * m + 1) * sizeof(Pt))
    if pts == NULL or hull == NULL:
        free(pts)
        free(hull)
        raise MemoryError()
    try:
        with nogil:
            for r in range(N):
                for k in range(m):
                    pts[k].u = U[r, k]
                    pts[k].w = W[r, k]
                qsort(pts, m, sizeof(Pt), _cmp_pt)
                h = 0
                for k in range(m):
                    while h >= 2 and _cross(hull[h - 2], hull[h - 1], pts[k]) <= 0.0:
                        h -= 1
                    hull[h] = pts[k]
                    h += 1
                lower = h + 1
                k = m - 2
                while k >= 0:
                    while h >= lower and _cross(hull[h - 2], hull[h - 1], pts[k]) <= 0.0:
                        h -= 1
                    hull[h] = pts[k]
                    h += 1
                    k -= 1
                # hull[h-1] repeats hull[0] when m > 1
                best = _habs(hull[0].u, hull[0].w, lu[r], lw[r])
                for k in range(h - 1):
                    val = _seg(hull[k], hull[k + 1], lu[r], lw[r])
                    if val > best:
                        best = val
                out[r] = best
    finally:
        free(pts)
        free(hull)
    return out.base
