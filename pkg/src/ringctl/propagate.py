"""State-propagation engines.

Four routes are provided:

* :func:`expmv` - Krylov (Lanczos) action of ``exp(-i theta H)`` on a
  vector, with adaptive time substepping.
* :func:`apply_uxy` / :func:`apply_uzz` - the exact pulse operators of the
  instantaneous-pulse scheme. In the full representation ``U_xy`` is the
  tensor product of per-qubit rotations (closed form); in the reduced
  representation it goes through :func:`expmv`.
* :func:`evolve_cw` - adaptive Tsitouras 5(4) integration of the driven
  Schrodinger equation, with final-state renormalization.
* :func:`dense_oracle` - the same protocols evaluated on the full 2^N
  space with scipy's Pade exponential and DOP853 integrator. This is an
  intentionally independent reference path; keep it free of the kernels
  used above.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.integrate import solve_ivp

from . import _kernels
from ._kernels import STATUS_OK, STATUS_STEP_BUDGET
from .errors import CapacityError, DomainError, IntegrationError, KrylovError
from .model import RingModel
from .symmetry import MAX_DENSE_ORACLE


@dataclass(frozen=True)
class KrylovConfig:
    """Tolerance and subspace cap for Krylov exponentials."""

    tolerance: float = 1e-12
    max_subspace: int = 30

    def __post_init__(self):
        if self.tolerance <= 0:
            raise DomainError("Krylov tolerance must be positive")
        if self.max_subspace < 2:
            raise DomainError("Krylov subspace must allow at least 2 vectors")


@dataclass(frozen=True)
class IntegratorConfig:
    """Tolerances and step budget for the adaptive 5(4) integrator."""

    abs_tol: float = 1e-10
    rel_tol: float = 1e-10
    max_steps: int = 1_000_000

    def __post_init__(self):
        if self.abs_tol <= 0 or self.rel_tol <= 0:
            raise DomainError("integrator tolerances must be positive")


DEFAULT_KRYLOV = KrylovConfig()
DEFAULT_INTEGRATOR = IntegratorConfig()


# ---------------------------------------------------------------------------
# Krylov exponential
# ---------------------------------------------------------------------------

def _expmv_matvec(matvec, v, theta, tol, max_m):
    """Lanczos expmv against a matrix-free Hermitian action.

    Python twin of the dense kernel, used for sparse reduced operators.
    """
    d = v.shape[0]
    w = v.astype(np.complex128).copy()
    if theta == 0.0:
        return w
    m_cap = min(max_m, d)
    remaining = theta
    n_sub = 0
    while True:
        beta = np.linalg.norm(w)
        if beta == 0.0:
            return w
        basis = np.empty((m_cap, d), dtype=np.complex128)
        diag = np.empty(m_cap)
        off = np.empty(m_cap)
        basis[0] = w / beta
        m = m_cap
        exact = False
        for jj in range(m_cap):
            u = np.asarray(matvec(basis[jj])).ravel()
            a = np.vdot(basis[jj], u).real
            diag[jj] = a
            u = u - a * basis[jj]
            if jj > 0:
                u = u - off[jj - 1] * basis[jj - 1]
            u = u - (basis[: jj + 1].conj() @ u) @ basis[: jj + 1]
            b = np.linalg.norm(u)
            off[jj] = b
            if b < 1e-13:
                m = jj + 1
                exact = True
                break
            if jj + 1 < m_cap:
                basis[jj + 1] = u / b
        tri = np.diag(diag[:m]) + np.diag(off[: m - 1], 1) + np.diag(off[: m - 1], -1)
        lam, vecs = np.linalg.eigh(tri)
        tau = remaining
        while True:
            y = vecs @ (np.exp(-1j * tau * lam) * vecs[0])
            if exact:
                break
            err = beta * off[m - 1] * abs(tau) * abs(y[m - 1])
            if err <= tol:
                break
            tau *= 0.5
            if abs(tau) < 1e-300:
                raise KrylovError("expmv substep underflow")
        w = beta * (basis[:m].T @ y)
        n_sub += 1
        remaining -= tau
        if remaining == 0.0 or abs(remaining) < 1e-15 * abs(theta):
            return w
        if n_sub > 100_000:
            raise KrylovError("expmv exceeded the substep budget")


def expmv(h, v, theta: float, cfg: KrylovConfig = DEFAULT_KRYLOV) -> np.ndarray:
    """exp(-i theta h) applied to ``v``; output rescaled to the input norm.

    ``h`` may be a dense Hermitian array, a sparse matrix, or a callable
    matrix-vector product.
    """
    v = np.asarray(v, dtype=np.complex128)
    if isinstance(h, np.ndarray):
        if h.shape != (v.shape[0], v.shape[0]):
            raise DomainError(f"operator shape {h.shape} does not fit vector {v.shape}")
        w, status = _kernels.expmv_dense(
            np.ascontiguousarray(h, dtype=np.complex128),
            v, float(theta), cfg.tolerance, cfg.max_subspace,
        )
        if status != STATUS_OK:
            raise KrylovError(f"expmv failed with status {status}")
    elif sp.issparse(h):
        w = _expmv_matvec(lambda x: h @ x, v, float(theta), cfg.tolerance, cfg.max_subspace)
    elif callable(h):
        w = _expmv_matvec(h, v, float(theta), cfg.tolerance, cfg.max_subspace)
    else:
        raise DomainError(f"unsupported operator type {type(h)!r}")
    in_norm = np.linalg.norm(v)
    out_norm = np.linalg.norm(w)
    if out_norm > 0:
        w *= in_norm / out_norm
    return w


# ---------------------------------------------------------------------------
# Exact pulse operators
# ---------------------------------------------------------------------------

def _uxy_full_closed_form(v: np.ndarray, alpha: float, phi: float, n: int) -> np.ndarray:
    """Tensor product of identical per-qubit rotations about an xy-plane axis.

    Single-qubit factor: cos(a) 1 - i sin(a) (cos(phi) sx + sin(phi) sy).
    """
    c = np.cos(alpha)
    s = np.sin(alpha)
    r01 = -1j * s * np.exp(-1j * phi)
    r10 = -1j * s * np.exp(1j * phi)
    psi = v.astype(np.complex128).reshape((2,) * n)
    for site in range(n):
        # little-endian: site bit is axis n-1-site of the C-ordered reshape
        axis = n - 1 - site
        lo = np.take(psi, 0, axis=axis)
        hi = np.take(psi, 1, axis=axis)
        new_lo = c * lo + r01 * hi
        new_hi = r10 * lo + c * hi
        psi = np.stack([new_lo, new_hi], axis=axis)
    return psi.reshape(-1)


def apply_uxy(
    v: np.ndarray,
    alpha: float,
    phi: float,
    model: RingModel,
    cfg: KrylovConfig = DEFAULT_KRYLOV,
) -> np.ndarray:
    """Global rotation pulse exp[-i alpha (Hx cos(phi) + Hy sin(phi))] |v>.

    Dispatches on the vector length: reduced coordinates go through the
    Krylov exponential, full-space vectors use the closed per-qubit form.
    """
    v = np.asarray(v, dtype=np.complex128)
    if v.shape == (model.dim,):
        if alpha == 0.0:
            return v.copy()
        op = np.cos(phi) * model.hx_red + np.sin(phi) * model.hy_red
        return expmv(op, v, alpha, cfg)
    if v.shape == (1 << model.n,):
        return _uxy_full_closed_form(v, alpha, phi, model.n)
    raise DomainError(f"vector of length {v.shape[0]} fits neither representation")


def apply_uzz(v: np.ndarray, xi: float, model: RingModel) -> np.ndarray:
    """Ising interaction pulse exp(-i xi H_zz) |v> (diagonal in both reps)."""
    if xi < 0:
        raise DomainError("interaction durations must be non-negative")
    v = np.asarray(v, dtype=np.complex128)
    if v.shape == (model.dim,):
        return v * np.exp(-1j * xi * model.hzz_red)
    if v.shape == (1 << model.n,):
        return v * np.exp(-1j * xi * model.hzz_diagonal_full())
    raise DomainError(f"vector of length {v.shape[0]} fits neither representation")


# ---------------------------------------------------------------------------
# Continuous-wave evolution
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class IntegrationResult:
    """Raw integrator output; ``state`` is already renormalized."""

    state: np.ndarray
    raw_norm: float
    t_reached: float
    steps_accepted: int
    steps_rejected: int

    @property
    def norm_drift(self) -> float:
        return abs(self.raw_norm - 1.0)


def _cw_operators(v: np.ndarray, model: RingModel):
    if v.shape == (model.dim,):
        if model.reduced_dense:
            return model.hzz_red, model.hx_red, model.hy_red
        return None
    if v.shape == (1 << model.n,):
        return model.dense_full_controls()
    raise DomainError(f"vector of length {v.shape[0]} fits neither representation")


def integrate_schrodinger(
    v0: np.ndarray,
    pulse,
    model: RingModel,
    cfg: IntegratorConfig = DEFAULT_INTEGRATOR,
) -> IntegrationResult:
    """Drive ``v0`` with a sine-basis pulse from t=0 to t=T (adaptive 5(4))."""
    if pulse.duration <= 0:
        raise DomainError("pulse horizon must be positive")
    v0 = np.asarray(v0, dtype=np.complex128)
    cx = pulse.masked_coeffs("x")
    cy = pulse.masked_coeffs("y")
    ops = _cw_operators(v0, model)
    if ops is not None:
        hzz, hx, hy = ops
        psi, t_reached, nacc, nrej, status = _kernels.cw_evolve_dense(
            v0, hzz, hx, hy, cx, cy, float(pulse.duration),
            cfg.rel_tol, cfg.abs_tol, cfg.max_steps,
        )
    else:
        psi, t_reached, nacc, nrej, status = _tsit5_matvec(
            v0, model.hzz_red, model.hx_red, model.hy_red, cx, cy,
            float(pulse.duration), cfg.rel_tol, cfg.abs_tol, cfg.max_steps,
        )
    if status == STATUS_STEP_BUDGET:
        raise IntegrationError(
            f"integration exhausted {cfg.max_steps} steps at t={t_reached:.6f}",
            t_reached=t_reached,
        )
    raw_norm = float(np.linalg.norm(psi))
    return IntegrationResult(
        state=psi / raw_norm,
        raw_norm=raw_norm,
        t_reached=t_reached,
        steps_accepted=nacc,
        steps_rejected=nrej,
    )


def evolve_cw(
    v0: np.ndarray,
    pulse,
    model: RingModel,
    cfg: IntegratorConfig = DEFAULT_INTEGRATOR,
) -> np.ndarray:
    """Final renormalized state after continuous-wave evolution."""
    return integrate_schrodinger(v0, pulse, model, cfg).state


def _tsit5_matvec(psi0, hzz, hx, hy, cx, cy, horizon, rel_tol, abs_tol, max_steps):
    """Python Tsit5 for sparse reduced operators (large rings)."""
    A = _kernels._TS_A
    B = _kernels._TS_B
    C = _kernels._TS_C
    E = _kernels._TS_E

    def rhs(t, y):
        bx = _kernels.sine_field(cx, t, horizon)
        by = _kernels.sine_field(cy, t, horizon)
        return -1j * (hzz * y + bx * (hx @ y) + by * (hy @ y))

    t = 0.0
    psi = psi0.astype(np.complex128).copy()
    k = [None] * 7
    k[0] = rhs(t, psi)
    d1 = np.linalg.norm(k[0])
    h = 1e-6 if d1 < 1e-12 else 0.01 * np.linalg.norm(psi) / d1
    h = min(h, horizon)
    err_prev = 1.0
    nacc = nrej = 0
    while t < horizon:
        h = min(h, horizon - t)
        for stage in range(1, 6):
            acc = psi + h * sum(A[stage, jj] * k[jj] for jj in range(stage))
            k[stage] = rhs(t + C[stage] * h, acc)
        psi_new = psi + h * sum(B[jj] * k[jj] for jj in range(6))
        k[6] = rhs(t + h, psi_new)
        err_vec = h * sum(E[jj] * k[jj] for jj in range(7))
        scale = abs_tol + rel_tol * np.maximum(np.abs(psi), np.abs(psi_new))
        err = float(np.sqrt(np.mean(np.abs(err_vec / scale) ** 2)))
        if err <= 1.0:
            t += h
            psi = psi_new
            k[0] = k[6]
            nacc += 1
            fac = 5.0 if err == 0.0 else min(5.0, max(0.2, 0.9 * err**-0.14 * err_prev**0.08))
            h *= fac
            err_prev = max(err, 1e-10)
        else:
            nrej += 1
            h *= max(0.1, 0.9 * err**-0.2)
        if nacc + nrej >= max_steps:
            return psi, t, nacc, nrej, STATUS_STEP_BUDGET
    return psi, t, nacc, nrej, STATUS_OK


# ---------------------------------------------------------------------------
# Dense full-space oracle
# ---------------------------------------------------------------------------

def dense_oracle(protocol, model: RingModel, v0: np.ndarray | None = None) -> np.ndarray:
    """Reference full-space evaluation of a protocol from |00...0>.

    Pulse-sequence rotations use scipy's dense Pade exponential and the
    continuous case uses DOP853 at tight tolerance, so this path shares no
    numerics with the production reduced-space route.
    """
    if model.n > MAX_DENSE_ORACLE:
        raise CapacityError(f"dense oracle capped at {MAX_DENSE_ORACLE} qubits")
    hzz, hx, hy = model.dense_full_controls()
    psi = model.initial_state_full() if v0 is None else np.asarray(v0, dtype=np.complex128)

    if hasattr(protocol, "xis"):  # pulse sequence
        for jj in range(protocol.M + 1):
            gen = np.cos(protocol.phis[jj]) * hx + np.sin(protocol.phis[jj]) * hy
            psi = sla.expm(-1j * protocol.alphas[jj] * gen) @ psi
            if jj < protocol.M:
                psi = np.exp(-1j * protocol.xis[jj] * hzz) * psi
        return psi

    if hasattr(protocol, "coeffs_x"):  # sine pulse
        cx = protocol.masked_coeffs("x")
        cy = protocol.masked_coeffs("y")
        horizon = float(protocol.duration)

        def rhs(t, y):
            bx = _kernels.sine_field(cx, t, horizon)
            by = _kernels.sine_field(cy, t, horizon)
            return -1j * (hzz * y + bx * (hx @ y) + by * (hy @ y))

        sol = solve_ivp(
            rhs, (0.0, horizon), psi, method="DOP853", rtol=1e-12, atol=1e-13
        )
        if not sol.success:
            raise IntegrationError(f"oracle integration failed: {sol.message}")
        psi = sol.y[:, -1]
        return psi / np.linalg.norm(psi)

    raise DomainError(f"unknown protocol type {type(protocol)!r}")
