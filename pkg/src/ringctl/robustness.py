"""Error-sensitivity analysis of optimized protocols.

Coherent control errors are modeled parameter-by-parameter: relative for
rotation strengths, interaction durations, and sine coefficients, absolute
for axis phases. Sweeping the error amplitude over a symmetric grid yields
infidelity curves (1D) or surfaces (2D); the robustness score of a protocol
is the sum over parameters of the trapezoid integrals of its 1D curves,
and the most robust realization is the score argmin.
"""

from __future__ import annotations

from dataclasses import dataclass, replace as dc_replace

import numpy as np

from .cw import SinePulse, field_value  # noqa: F401  (re-export convenience)
from .errors import DomainError, IntegrationError
from .model import RingModel, TargetState, fidelity
from .nmr import NmrSequence, simulate_sequence
from .propagate import DEFAULT_INTEGRATOR, IntegratorConfig, evolve_cw

Protocol = NmrSequence | SinePulse


def eps_grid(half_width: float = 0.05, points: int = 101) -> np.ndarray:
    """Symmetric error grid containing zero."""
    if half_width <= 0 or points < 3 or points % 2 == 0:
        raise DomainError("grid needs positive width and an odd point count >= 3")
    return np.linspace(-half_width, half_width, points)


@dataclass(frozen=True)
class PerturbationSpec:
    """One swept parameter and its error grid."""

    param_id: str
    grid: np.ndarray

    def __post_init__(self):
        if not np.any(self.grid == 0.0):
            raise DomainError("error grid must contain eps = 0")


def parameter_ids(protocol: Protocol) -> list[str]:
    """Perturbable parameter names, 1-based for sequences, active-only for pulses."""
    if isinstance(protocol, NmrSequence):
        m = protocol.M
        return (
            [f"alpha_{j}" for j in range(1, m + 2)]
            + [f"phi_{j}" for j in range(1, m + 2)]
            + [f"xi_{j}" for j in range(1, m + 1)]
        )
    if isinstance(protocol, SinePulse):
        return protocol.active_labels()
    raise DomainError(f"unknown protocol type {type(protocol)!r}")


def perturb(protocol: Protocol, param_id: str, eps: float) -> Protocol:
    """Protocol with exactly one parameter perturbed.

    Relative error for alpha/xi/b parameters, absolute for phi. Perturbed
    values are deliberately not re-wrapped into the optimization boxes;
    physical errors may leave them. A negative interaction duration is
    rejected as unphysical.
    """
    if isinstance(protocol, NmrSequence):
        kind, _, idx_s = param_id.partition("_")
        try:
            idx = int(idx_s) - 1
        except ValueError:
            raise DomainError(f"malformed parameter id {param_id!r}") from None
        if kind == "alpha" and 0 <= idx <= protocol.M:
            alphas = protocol.alphas.copy()
            alphas[idx] *= 1.0 + eps
            return NmrSequence(alphas, protocol.phis.copy(), protocol.xis.copy())
        if kind == "phi" and 0 <= idx <= protocol.M:
            phis = protocol.phis.copy()
            phis[idx] += eps
            return NmrSequence(protocol.alphas.copy(), phis, protocol.xis.copy())
        if kind == "xi" and 0 <= idx < protocol.M:
            xis = protocol.xis.copy()
            xis[idx] *= 1.0 + eps
            if xis[idx] < 0:
                raise DomainError("perturbed interaction duration became negative")
            return NmrSequence(protocol.alphas.copy(), protocol.phis.copy(), xis)
        raise DomainError(f"unknown parameter {param_id!r} for this sequence")
    if isinstance(protocol, SinePulse):
        axis_kind, _, idx_s = param_id.partition("_")
        try:
            m = int(idx_s)
        except ValueError:
            raise DomainError(f"malformed parameter id {param_id!r}") from None
        out = protocol.copy()
        if axis_kind == "bx" and 0 <= m <= protocol.M and protocol.active_x[m]:
            out.coeffs_x[m] *= 1.0 + eps
            return out
        if axis_kind == "by" and 0 <= m <= protocol.M and protocol.active_y[m]:
            out.coeffs_y[m] *= 1.0 + eps
            return out
        raise DomainError(f"unknown or inactive parameter {param_id!r} for this pulse")
    raise DomainError(f"unknown protocol type {type(protocol)!r}")


def _infidelity(
    protocol: Protocol,
    target: TargetState,
    model: RingModel,
    integrator: IntegratorConfig,
) -> float:
    if isinstance(protocol, NmrSequence):
        psi = simulate_sequence(protocol, model)
    else:
        psi = evolve_cw(model.initial_state_reduced(), protocol, model, integrator)
    return 1.0 - fidelity(psi, target.reduced)


@dataclass(eq=False)
class SweepResult:
    """Infidelity curve or surface over an error grid."""

    params: tuple[str, ...]
    grids: tuple[np.ndarray, ...]
    infidelity: np.ndarray
    baseline: float
    failures: list[tuple] | None = None

    def score(self) -> float:
        if len(self.params) != 1:
            raise DomainError("score is defined for 1D sweeps")
        return float(np.trapezoid(self.infidelity, self.grids[0]))


def sweep_1d(
    protocol: Protocol,
    target: TargetState,
    model: RingModel,
    param_id: str,
    grid: np.ndarray | None = None,
    integrator: IntegratorConfig = DEFAULT_INTEGRATOR,
) -> SweepResult:
    """Infidelity versus a single-parameter error.

    Per-point propagation failures are recorded as NaN and the sweep
    continues.
    """
    grid = eps_grid() if grid is None else np.asarray(grid, dtype=np.float64)
    spec = PerturbationSpec(param_id, grid)
    values = np.empty(len(grid))
    failures = []
    baseline = _infidelity(protocol, target, model, integrator)
    for i, eps in enumerate(spec.grid):
        if eps == 0.0:
            values[i] = baseline
            continue
        try:
            values[i] = _infidelity(perturb(protocol, param_id, eps), target, model, integrator)
        except IntegrationError as exc:
            values[i] = np.nan
            failures.append((i, str(exc)))
    return SweepResult(
        params=(param_id,),
        grids=(grid,),
        infidelity=values,
        baseline=baseline,
        failures=failures or None,
    )


def sweep_2d(
    protocol: Protocol,
    target: TargetState,
    model: RingModel,
    param_a: str,
    param_b: str,
    grid: np.ndarray | None = None,
    integrator: IntegratorConfig = DEFAULT_INTEGRATOR,
) -> SweepResult:
    """Infidelity surface over simultaneous errors on two parameters."""
    if param_a == param_b:
        raise DomainError("2D sweeps need two distinct parameters")
    grid = eps_grid(points=41) if grid is None else np.asarray(grid, dtype=np.float64)
    PerturbationSpec(param_a, grid)
    values = np.empty((len(grid), len(grid)))
    failures = []
    baseline = _infidelity(protocol, target, model, integrator)
    for ia, ea in enumerate(grid):
        pa = protocol if ea == 0.0 else perturb(protocol, param_a, ea)
        for ib, eb in enumerate(grid):
            if ea == 0.0 and eb == 0.0:
                values[ia, ib] = baseline
                continue
            try:
                pab = pa if eb == 0.0 else perturb(pa, param_b, eb)
                values[ia, ib] = _infidelity(pab, target, model, integrator)
            except IntegrationError as exc:
                values[ia, ib] = np.nan
                failures.append(((ia, ib), str(exc)))
    return SweepResult(
        params=(param_a, param_b),
        grids=(grid, grid),
        infidelity=values,
        baseline=baseline,
        failures=failures or None,
    )


def robustness_score(
    protocol: Protocol,
    target: TargetState,
    model: RingModel,
    grid: np.ndarray | None = None,
    integrator: IntegratorConfig = DEFAULT_INTEGRATOR,
) -> float:
    """Sum over parameters of the integrated 1D infidelity curves."""
    grid = eps_grid() if grid is None else np.asarray(grid, dtype=np.float64)
    return sum(
        sweep_1d(protocol, target, model, pid, grid, integrator).score()
        for pid in parameter_ids(protocol)
    )


def select_most_robust(
    candidates: list[Protocol],
    target: TargetState,
    model: RingModel,
    grid: np.ndarray | None = None,
    integrator: IntegratorConfig = DEFAULT_INTEGRATOR,
) -> Protocol:
    """Score argmin; ties broken by lower baseline infidelity."""
    if not candidates:
        raise DomainError("need at least one candidate protocol")
    scored = [
        (
            robustness_score(p, target, model, grid, integrator),
            _infidelity(p, target, model, integrator),
            i,
        )
        for i, p in enumerate(candidates)
    ]
    scored.sort()
    return candidates[scored[0][2]]


def pearson_matrix(realizations) -> np.ndarray:
    """Pearson correlation of optimal parameters across realizations.

    Rows are realizations, columns parameters. Zero-variance parameters
    yield NaN rows/columns (undefined rather than spuriously correlated).
    """
    data = np.asarray(realizations, dtype=np.float64)
    if data.ndim != 2 or data.shape[0] < 3:
        raise DomainError("need at least 3 realizations of equal parameter count")
    n_params = data.shape[1]
    centered = data - data.mean(axis=0)
    std = centered.std(axis=0)
    rho = np.full((n_params, n_params), np.nan)
    defined = std > 0
    cov = centered.T @ centered / data.shape[0]
    for i in range(n_params):
        for j in range(n_params):
            if defined[i] and defined[j]:
                rho[i, j] = cov[i, j] / (std[i] * std[j])
    for i in range(n_params):
        if defined[i]:
            rho[i, i] = 1.0
    return rho
