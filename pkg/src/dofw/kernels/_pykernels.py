"""Numpy implementation of the round kernels.

Same signatures and semantics as the compiled ``_ckernels`` module. Output
arrays are preallocated by the caller and written in place. Set kinds are
passed as integer codes with their parameters (``radius`` for the simplex and
the l1 ball, ``lo``/``hi`` for the box).
"""

import numpy as np

KIND_SIMPLEX = 0
KIND_L1 = 1
KIND_BOX = 2

BACKEND = "python"

# feasible inputs within this relative slack are returned unchanged, which
# makes projection exactly idempotent
_FEASIBLE_RTOL = 1e-12


def _simplex_project_batch(Y, radius, out):
    """Row-wise simplex projection of Y into out (out may alias Y)."""
    n, d = Y.shape
    keep = (Y.min(axis=1) >= 0.0) & (np.abs(Y.sum(axis=1) - radius) <= _FEASIBLE_RTOL * radius)
    U = np.sort(Y, axis=1)[:, ::-1]
    css = np.cumsum(U, axis=1)
    k = np.arange(1, d + 1)
    cond = U * k > css - radius
    rho = d - 1 - np.argmax(cond[:, ::-1], axis=1)
    theta = (css[np.arange(n), rho] - radius) / (rho + 1.0)
    proj = np.maximum(Y - theta[:, None], 0.0)
    out[...] = np.where(keep[:, None], Y, proj)


def project_rows(Y, kind, radius, lo, hi, out):
    if kind == KIND_SIMPLEX:
        _simplex_project_batch(Y, radius, out)
    elif kind == KIND_L1:
        Y = np.array(Y)  # out may alias Y
        A = np.abs(Y)
        inside = A.sum(axis=1) <= radius * (1.0 + _FEASIBLE_RTOL)
        _simplex_project_batch(A, radius, out)
        out *= np.sign(Y)
        out[inside] = Y[inside]
    elif kind == KIND_BOX:
        np.clip(Y, lo, hi, out=out)
    else:
        raise ValueError(f"unknown set kind code {kind}")
    return out


def lmo_rows(G, kind, radius, lo, hi, out):
    out[...] = 0.0
    rows = np.arange(G.shape[0])
    if kind == KIND_SIMPLEX:
        out[rows, np.argmin(G, axis=1)] = radius
    elif kind == KIND_L1:
        k = np.argmax(np.abs(G), axis=1)
        gk = G[rows, k]
        out[rows, k] = np.where(gk >= 0.0, -radius, radius)
    elif kind == KIND_BOX:
        out[...] = np.where(G < 0.0, hi, lo)
    else:
        raise ValueError(f"unknown set kind code {kind}")
    return out


def mix(A, X, out):
    np.matmul(A, X, out=out)
    return out


def ridge_grad(F, l, lam, X, out):
    r = np.einsum("ij,ij->i", F, X) - l
    np.multiply(F, r[:, None], out=out)
    out += (2.0 * lam) * X
    return out


def dofw_round(A, X, F, l, lam, gh_prev, g_prev, first, alpha,
               kind, radius, lo, hi, x_hat, g, gbar, ghat, v, x_next):
    mix(A, X, x_hat)
    ridge_grad(F, l, lam, x_hat, g)
    if first:
        gbar[...] = g
    else:
        np.add(gh_prev, g, out=gbar)
        gbar -= g_prev
    mix(A, gbar, ghat)
    lmo_rows(ghat, kind, radius, lo, hi, v)
    np.subtract(v, x_hat, out=x_next)
    x_next *= alpha
    x_next += x_hat


def dogd_round(A, X, F, l, lam, alpha, local, kind, radius, lo, hi,
               x_hat, g, x_next):
    mix(A, X, x_hat)
    ridge_grad(F, l, lam, X if local else x_hat, g)
    y = x_hat - alpha * g
    project_rows(y, kind, radius, lo, hi, x_next)


def _segment_max(u0, w0, u1, w1, lu, lw):
    """Max of |0.5 (u - lu)^2 - 0.5 (w - lw)^2| along segments, elementwise."""
    h0 = 0.5 * (u0 - lu) ** 2 - 0.5 * (w0 - lw) ** 2
    h1 = 0.5 * (u1 - lu) ** 2 - 0.5 * (w1 - lw) ** 2
    best = np.maximum(np.abs(h0), np.abs(h1))
    du = u1 - u0
    dw = w1 - w0
    den = du * du - dw * dw
    with np.errstate(divide="ignore", invalid="ignore"):
        s = -(du * (u0 - lu) - dw * (w0 - lw)) / den
    inside = (den != 0.0) & (s > 0.0) & (s < 1.0)
    s = np.where(inside, s, 0.0)
    hs = 0.5 * (u0 + s * du - lu) ** 2 - 0.5 * (w0 + s * dw - lw) ** 2
    return np.where(inside, np.maximum(best, np.abs(hs)), best)


def max_abs_quad_diff(U, W, lu, lw, out, chunk=256):
    """Exact max of |0.5 (u - lu)^2 - 0.5 (w - lw)^2| over conv{(U_k, W_k)}.

    One problem per row. The Hessian diag(1, -1) is indefinite, so the
    maximum sits on the boundary of the point hull; every boundary edge is a
    segment between two of the points, so scanning all pairs is exact.
    """
    N, m = U.shape
    iu, ju = np.triu_indices(m, k=1)
    for start in range(0, N, chunk):
        sl = slice(start, min(N, start + chunk))
        u, w = U[sl], W[sl]
        a = lu[sl, None]
        b = lw[sl, None]
        best = np.abs(0.5 * (u - a) ** 2 - 0.5 * (w - b) ** 2).max(axis=1)
        if m > 1:
            seg = _segment_max(u[:, iu], w[:, iu], u[:, ju], w[:, ju], a, b)
            best = np.maximum(best, seg.max(axis=1))
        out[sl] = best
    return out
