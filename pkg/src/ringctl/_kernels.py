"""Hot numerical kernels: Krylov exponentials, pulse chains, ODE stepping.

Every function here is written in a numba-compatible numpy subset and is
JIT-compiled at import time unless numba is unavailable or disabled by
setting ``RINGCTL_DISABLE_NUMBA=1`` (the standard ``NUMBA_DISABLE_JIT=1``
works too, through numba itself). The pure-numpy fallback is the same
source; ``benchmarks/bench_kernels.py`` compares the two paths.

Kernels return status codes instead of raising so that both paths behave
identically; wrappers in :mod:`ringctl.propagate` translate failures into
exceptions.
"""

from __future__ import annotations

import os

import numpy as np

STATUS_OK = 0
STATUS_EXPMV_STALLED = 1
STATUS_EXPMV_BUDGET = 2
STATUS_STEP_BUDGET = 3

_MAX_SUBSTEPS = 100_000


def _numba_requested() -> bool:
    flag = os.environ.get("RINGCTL_DISABLE_NUMBA", "").strip().lower()
    return flag not in ("1", "true", "yes")


NUMBA_ENABLED = False
if _numba_requested():
    try:
        import numba

        NUMBA_ENABLED = True
    except ImportError:  # pragma: no cover - numba is a declared dependency
        NUMBA_ENABLED = False

if NUMBA_ENABLED:
    def _jit(fn):
        return numba.njit(cache=True)(fn)
else:
    def _jit(fn):
        return fn


@_jit
def expmv_dense(h, v, theta, tol, max_m):
    """w = exp(-1j*theta*h) @ v for Hermitian h, Lanczos with substepping.

    The Krylov subspace per substep is capped at ``max_m``; whenever the
    a-posteriori error estimate for the remaining interval exceeds ``tol``
    the substep is halved (the basis is reused, only the small exponential
    is recomputed). Happy breakdown makes the projection exact.
    """
    d = v.shape[0]
    w = v.astype(np.complex128).copy()
    if theta == 0.0:
        return w, STATUS_OK
    m_cap = max_m if max_m < d else d
    remaining = theta
    n_sub = 0
    while True:
        beta = np.sqrt(np.vdot(w, w).real)
        if beta == 0.0:
            return w, STATUS_OK
        basis = np.empty((m_cap, d), dtype=np.complex128)
        diag = np.empty(m_cap)
        off = np.empty(m_cap)
        basis[0] = w / beta
        m = m_cap
        exact = False
        for jj in range(m_cap):
            u = h @ basis[jj]
            a = np.vdot(basis[jj], u).real
            diag[jj] = a
            u = u - a * basis[jj]
            if jj > 0:
                u = u - off[jj - 1] * basis[jj - 1]
            for ii in range(jj + 1):  # full reorthogonalization
                u = u - np.vdot(basis[ii], u) * basis[ii]
            b = np.sqrt(np.vdot(u, u).real)
            off[jj] = b
            if b < 1e-13:
                m = jj + 1
                exact = True
                break
            if jj + 1 < m_cap:
                basis[jj + 1] = u / b

        tri = np.zeros((m, m))
        for ii in range(m):
            tri[ii, ii] = diag[ii]
            if ii + 1 < m:
                tri[ii, ii + 1] = off[ii]
                tri[ii + 1, ii] = off[ii]
        lam, vecs = np.linalg.eigh(tri)
        vecs_c = vecs.astype(np.complex128)
        first_row = vecs_c[0].copy()

        tau = remaining
        while True:
            y = vecs_c @ (np.exp(-1j * tau * lam) * first_row)
            if exact:
                break
            err = beta * off[m - 1] * abs(tau) * np.abs(y[m - 1])
            if err <= tol:
                break
            tau *= 0.5
            if abs(tau) < 1e-300:
                return w, STATUS_EXPMV_STALLED
        w = beta * (basis[:m].T @ y)
        n_sub += 1
        remaining -= tau
        if remaining == 0.0 or abs(remaining) < 1e-15 * abs(theta):
            return w, STATUS_OK
        if n_sub > _MAX_SUBSTEPS:
            return w, STATUS_EXPMV_BUDGET


@_jit
def nmr_evolve_dense(hzz, hx, hy, alphas, phis, xis, psi0, tol, max_m):
    """Propagate through an alternating rotation / Ising-phase pulse chain.

    Applies ``U_xy(alpha_1, phi_1)`` first, then ``U_zz(xi_j)`` and
    ``U_xy(alpha_{j+1}, phi_{j+1})`` for each interaction pulse, all in the
    reduced representation (``hzz`` is the diagonal there).
    """
    psi = psi0.astype(np.complex128).copy()
    m_pulses = xis.shape[0]
    for jj in range(m_pulses + 1):
        if alphas[jj] != 0.0:
            a = np.cos(phis[jj]) * hx + np.sin(phis[jj]) * hy
            psi, status = expmv_dense(a, psi, alphas[jj], tol, max_m)
            if status != STATUS_OK:
                return psi, status
        if jj < m_pulses:
            psi = psi * np.exp(-1j * xis[jj] * hzz)
    nrm = np.sqrt(np.vdot(psi, psi).real)
    if nrm > 0.0:
        psi = psi / nrm
    return psi, STATUS_OK


@_jit
def sine_field(coeffs, t, horizon):
    """b_0 + sum_m b_m sin(m pi t / T); inactive coefficients are zeroed."""
    w = np.pi * t / horizon
    value = coeffs[0]
    for m in range(1, coeffs.shape[0]):
        value += coeffs[m] * np.sin(m * w)
    return value


@_jit
def _schrodinger_rhs(t, psi, hzz, hx, hy, cx, cy, horizon):
    bx = sine_field(cx, t, horizon)
    by = sine_field(cy, t, horizon)
    return -1j * (hzz * psi + bx * (hx @ psi) + by * (hy @ psi))


# Tsitouras 5(4) embedded pair.
_TS_C = np.array([0.0, 0.161, 0.327, 0.9, 0.9800255409045097, 1.0, 1.0])
_TS_A = np.array([
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.161, 0.0, 0.0, 0.0, 0.0, 0.0],
    [-0.008480655492356989, 0.335480655492357, 0.0, 0.0, 0.0, 0.0],
    [2.8971530571054935, -6.359448489975075, 4.3622954328695815, 0.0, 0.0, 0.0],
    [5.325864828439257, -11.748883564062828, 7.4955393428898365,
     -0.09249506636175525, 0.0, 0.0],
    [5.86145544294642, -12.92096931784711, 8.159367898576159,
     -0.071584973281401, -0.028269050394068383, 0.0],
])
_TS_B = np.array([0.09646076681806523, 0.01, 0.4798896504144996,
                  1.379008574103742, -3.290069515436081, 2.324710524099774])
_TS_E = np.array([-0.00178001105222577714, -0.0008164344596567469,
                  0.007880878010261995, -0.1447110071732629,
                  0.5823571654525552, -0.45808210592918697,
                  0.015151515151515152])


@_jit
def cw_evolve_dense(psi0, hzz, hx, hy, cx, cy, horizon, rel_tol, abs_tol, max_steps):
    """Integrate the driven Schrodinger equation over [0, T] with Tsit5.

    PI step-size control, safety factor 0.9. Returns the raw (un-normalized)
    final state plus step statistics so callers can monitor norm drift.
    """
    t = 0.0
    psi = psi0.astype(np.complex128).copy()
    dim = psi.shape[0]
    k1 = _schrodinger_rhs(t, psi, hzz, hx, hy, cx, cy, horizon)
    d0 = np.sqrt(np.vdot(psi, psi).real)
    d1 = np.sqrt(np.vdot(k1, k1).real)
    h = 1e-6 if d1 < 1e-12 else 0.01 * d0 / d1
    if h > horizon:
        h = horizon
    err_prev = 1.0
    naccept = 0
    nreject = 0
    while t < horizon:
        if t + h > horizon:
            h = horizon - t
        k2 = _schrodinger_rhs(t + _TS_C[1] * h, psi + h * (_TS_A[1, 0] * k1),
                              hzz, hx, hy, cx, cy, horizon)
        k3 = _schrodinger_rhs(t + _TS_C[2] * h,
                              psi + h * (_TS_A[2, 0] * k1 + _TS_A[2, 1] * k2),
                              hzz, hx, hy, cx, cy, horizon)
        k4 = _schrodinger_rhs(t + _TS_C[3] * h,
                              psi + h * (_TS_A[3, 0] * k1 + _TS_A[3, 1] * k2
                                         + _TS_A[3, 2] * k3),
                              hzz, hx, hy, cx, cy, horizon)
        k5 = _schrodinger_rhs(t + _TS_C[4] * h,
                              psi + h * (_TS_A[4, 0] * k1 + _TS_A[4, 1] * k2
                                         + _TS_A[4, 2] * k3 + _TS_A[4, 3] * k4),
                              hzz, hx, hy, cx, cy, horizon)
        k6 = _schrodinger_rhs(t + h,
                              psi + h * (_TS_A[5, 0] * k1 + _TS_A[5, 1] * k2
                                         + _TS_A[5, 2] * k3 + _TS_A[5, 3] * k4
                                         + _TS_A[5, 4] * k5),
                              hzz, hx, hy, cx, cy, horizon)
        psi_new = psi + h * (_TS_B[0] * k1 + _TS_B[1] * k2 + _TS_B[2] * k3
                             + _TS_B[3] * k4 + _TS_B[4] * k5 + _TS_B[5] * k6)
        k7 = _schrodinger_rhs(t + h, psi_new, hzz, hx, hy, cx, cy, horizon)
        err_vec = h * (_TS_E[0] * k1 + _TS_E[1] * k2 + _TS_E[2] * k3
                       + _TS_E[3] * k4 + _TS_E[4] * k5 + _TS_E[5] * k6
                       + _TS_E[6] * k7)
        acc = 0.0
        for i in range(dim):
            mag = abs(psi[i])
            mag_new = abs(psi_new[i])
            scale = abs_tol + rel_tol * (mag if mag > mag_new else mag_new)
            ratio = abs(err_vec[i]) / scale
            acc += ratio * ratio
        err = np.sqrt(acc / dim)
        if err <= 1.0:
            t += h
            psi = psi_new
            k1 = k7
            naccept += 1
            if err > 0.0:
                fac = 0.9 * err ** (-0.14) * err_prev**0.08
            else:
                fac = 5.0
            if fac > 5.0:
                fac = 5.0
            if fac < 0.2:
                fac = 0.2
            h *= fac
            err_prev = err if err > 1e-10 else 1e-10
        else:
            nreject += 1
            fac = 0.9 * err ** (-0.2)
            if fac < 0.1:
                fac = 0.1
            h *= fac
        if naccept + nreject >= max_steps:
            return psi, t, naccept, nreject, STATUS_STEP_BUDGET
    return psi, t, naccept, nreject, STATUS_OK
