"""Sparse kernels for the time loop.

Two interchangeable implementations are provided: compiled loops over CSR
arrays (numba) and scipy/numpy equivalents.  :data:`JIT_ENABLED` selects the
default; both are always importable so they can be compared.
"""

from __future__ import annotations

import numpy as np
from scipy.special import comb

from ._jit import JIT_ENABLED, njit


class SolverError(RuntimeError):
    pass


@njit(cache=True)
def csr_matvec_nb(indptr, indices, data, x, out):
    n = indptr.shape[0] - 1
    for i in range(n):
        s = 0.0
        for k in range(indptr[i], indptr[i + 1]):
            s += data[k] * x[indices[k]]
        out[i] = s
    return out


def csr_matvec_np(mat, x):
    return mat @ x


#: Rounding allowance on a computed right-hand side, in units of |A||x|.
NOISE = 4.0 * np.finfo(float).eps


@njit(cache=True)
def rhs_with_floor_nb(indptr, indices, data, x, out):
    """``out = A x``; returns ``NOISE * |(|A| |x|)|``, the rounding level of ``out``."""
    n = indptr.shape[0] - 1
    scale = 0.0
    for i in range(n):
        s = 0.0
        a = 0.0
        for k in range(indptr[i], indptr[i + 1]):
            v = data[k] * x[indices[k]]
            s += v
            a += abs(v)
        out[i] = s
        scale += a * a
    return NOISE * np.sqrt(scale)


def rhs_with_floor_np(mat, abs_mat, x):
    return mat @ x, NOISE * float(np.linalg.norm(abs_mat @ np.abs(x)))


@njit(cache=True)
def pcg_nb(indptr, indices, data, inv_diag, b, x, tol, maxiter, r, z, p, q, atol=0.0):
    """Jacobi-preconditioned CG, warm-started from ``x``; returns iterations or -1.

    Stops once ``|r| <= max(tol |b|, atol)``.
    """
    n = b.shape[0]
    bnorm = 0.0
    for i in range(n):
        bnorm += b[i] * b[i]
    bnorm = np.sqrt(bnorm)
    stop = max(tol * bnorm, atol)
    if bnorm == 0.0:
        for i in range(n):
            x[i] = 0.0
        return 0
    csr_matvec_nb(indptr, indices, data, x, q)
    rr = 0.0
    rz = 0.0
    for i in range(n):
        r[i] = b[i] - q[i]
        z[i] = inv_diag[i] * r[i]
        p[i] = z[i]
        rr += r[i] * r[i]
        rz += r[i] * z[i]
    if np.sqrt(rr) <= stop:
        return 0
    for it in range(1, maxiter + 1):
        csr_matvec_nb(indptr, indices, data, p, q)
        pq = 0.0
        for i in range(n):
            pq += p[i] * q[i]
        alpha = rz / pq
        rr = 0.0
        for i in range(n):
            x[i] += alpha * p[i]
            r[i] -= alpha * q[i]
            rr += r[i] * r[i]
        if np.sqrt(rr) <= stop:
            return it
        rz_new = 0.0
        for i in range(n):
            z[i] = inv_diag[i] * r[i]
            rz_new += r[i] * z[i]
        beta = rz_new / rz
        rz = rz_new
        for i in range(n):
            p[i] = z[i] + beta * p[i]
    return -1


def pcg_np(mat, inv_diag, b, x, tol, maxiter, atol=0.0):
    """Numpy twin of :func:`pcg_nb`; updates ``x`` in place."""
    bnorm = np.linalg.norm(b)
    stop = max(tol * bnorm, atol)
    if bnorm == 0.0:
        x[:] = 0.0
        return 0
    r = b - mat @ x
    if np.linalg.norm(r) <= stop:
        return 0
    z = inv_diag * r
    p = z.copy()
    rz = r @ z
    for it in range(1, maxiter + 1):
        q = mat @ p
        alpha = rz / (p @ q)
        x += alpha * p
        r -= alpha * q
        if np.linalg.norm(r) <= stop:
            return it
        z = inv_diag * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    return -1


@njit(cache=True)
def _model_terms(code, H, t):
    if code == 0:
        return H * np.tanh(H * t), (H / np.cosh(H * t)) ** 2
    return 1.0, np.exp(-2.0 * t)


#: Depth of the solution history used to extrapolate CG starting guesses.
HISTORY = 6


@njit(cache=True)
def _extrapolation_weights(order):
    # polynomial extrapolation through order + 1 equally spaced samples
    w = np.zeros(HISTORY)
    binom = 1.0
    for j in range(order + 1):
        binom = binom * (order + 1 - j) / (j + 1)
        w[j] = binom if j % 2 == 0 else -binom
    return w


@njit(cache=True)
def advance_nb(
    m_ptr, m_idx, m_val, a_ptr, a_idx, a_val, inv_diag,
    U, D, Z, n_hist, n0, n_steps, t0, dt, code, H, tol, maxiter,
):
    """Advance ``n_steps`` of the two-level scheme in increment form.

    ``U`` holds the current level and ``D`` the last increment; both are
    updated in place.  ``Z`` has shape ``(HISTORY, n)`` and keeps the last
    mass solves, newest first; their polynomial extrapolation is the CG
    starting guess, which cuts the iteration count to a handful.

    Returns ``(cg_iterations, n_hist)``; ``cg_iterations`` is ``-1 - step``
    on CG failure.
    """
    n = U.shape[0]
    rhs = np.empty(n)
    x = np.empty(n)
    r = np.empty(n)
    z = np.empty(n)
    p = np.empty(n)
    q = np.empty(n)
    total = 0
    for s in range(n_steps):
        t = t0 + (n0 + s) * dt
        h, inv_a2 = _model_terms(code, H, t)
        c = 1.5 * h * dt
        floor = rhs_with_floor_nb(a_ptr, a_idx, a_val, U, rhs)
        w = _extrapolation_weights(min(n_hist, HISTORY) - 1)
        for i in range(n):
            acc = 0.0
            for j in range(HISTORY):
                acc += w[j] * Z[j, i]
            x[i] = acc
        it = pcg_nb(m_ptr, m_idx, m_val, inv_diag, rhs, x, tol, maxiter, r, z, p, q, floor)
        if it < 0:
            return -1 - s, n_hist
        total += it
        n_hist += 1
        k = dt * dt * inv_a2
        for i in range(n):
            for j in range(HISTORY - 1, 0, -1):
                Z[j, i] = Z[j - 1, i]
            Z[0, i] = x[i]
            D[i] = ((1.0 - c) * D[i] - k * x[i]) / (1.0 + c)
            U[i] += D[i]
    return total, n_hist


def advance_np(M, A, abs_A, inv_diag, U, D, Z, n_hist, n0, n_steps, t0, dt, model, tol, maxiter):
    """Numpy twin of :func:`advance_nb` that also accepts custom models.

    ``abs_A`` holds the entrywise absolute values of ``A``.
    """
    total = 0
    for s in range(n_steps):
        t = t0 + (n0 + s) * dt
        h = float(model.hubble(t))
        a = float(model.a(t))
        c = 1.5 * h * dt
        w = _extrapolation_weights_np(min(n_hist, HISTORY) - 1)
        x = w @ Z
        rhs, floor = rhs_with_floor_np(A, abs_A, U)
        it = pcg_np(M, inv_diag, rhs, x, tol, maxiter, floor)
        if it < 0:
            return -1 - s, n_hist
        total += it
        n_hist += 1
        Z[1:] = Z[:-1].copy()
        Z[0] = x
        D *= (1.0 - c) / (1.0 + c)
        D -= (dt * dt / (a * a) / (1.0 + c)) * x
        U += D
    return total, n_hist


def _extrapolation_weights_np(order):
    w = np.zeros(HISTORY)
    if order >= 0:
        j = np.arange(order + 1)
        w[: order + 1] = (-1.0) ** j * comb(order + 1, j + 1)
    return w


__all__ = [
    "HISTORY",
    "JIT_ENABLED",
    "SolverError",
    "advance_nb",
    "advance_np",
    "csr_matvec_nb",
    "csr_matvec_np",
    "pcg_nb",
    "pcg_np",
    "rhs_with_floor_nb",
    "rhs_with_floor_np",
]
