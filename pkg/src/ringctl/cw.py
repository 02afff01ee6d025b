"""Continuous-wave state preparation with sine-basis pulses.

Each control field is a truncated sine series over a fixed horizon,

    B(t) = b_0 + sum_{m=1..M} b_m sin(m pi t / T),

independently for the x and y axes. The loss is the preparation infidelity
plus penalty terms that activate when a field leaves [0, 2pi) anywhere on a
dense time grid. The search is an informed multistart around the
raise-and-fall seed B(t) = sin(pi t / T), and optimized pulses can be
simplified by iteratively dropping the smallest-magnitude coefficient and
re-optimizing until the fidelity threshold becomes unreachable.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .errors import DomainError
from .model import RingModel, TargetState, fidelity
from .nmr import finite_diff_gradient
from .propagate import DEFAULT_INTEGRATOR, IntegratorConfig, evolve_cw

TWO_PI = 2.0 * np.pi


@dataclass(eq=False)
class SinePulse:
    """Sine-series coefficients per axis, with a removal mask."""

    duration: float
    coeffs_x: np.ndarray
    coeffs_y: np.ndarray
    active_x: np.ndarray | None = None
    active_y: np.ndarray | None = None

    def __post_init__(self):
        self.coeffs_x = np.asarray(self.coeffs_x, dtype=np.float64).reshape(-1)
        self.coeffs_y = np.asarray(self.coeffs_y, dtype=np.float64).reshape(-1)
        if self.coeffs_x.shape != self.coeffs_y.shape:
            raise DomainError("x and y coefficient arrays must have equal length")
        if self.duration <= 0:
            raise DomainError("pulse horizon must be positive")
        if self.active_x is None:
            self.active_x = np.ones(len(self.coeffs_x), dtype=bool)
        if self.active_y is None:
            self.active_y = np.ones(len(self.coeffs_y), dtype=bool)
        self.active_x = np.asarray(self.active_x, dtype=bool).reshape(-1)
        self.active_y = np.asarray(self.active_y, dtype=bool).reshape(-1)
        if self.active_x.shape != self.coeffs_x.shape or self.active_y.shape != self.coeffs_y.shape:
            raise DomainError("active masks must match the coefficient arrays")

    @property
    def M(self) -> int:
        return len(self.coeffs_x) - 1

    @property
    def active_count(self) -> int:
        return int(self.active_x.sum() + self.active_y.sum())

    def masked_coeffs(self, axis: str) -> np.ndarray:
        if axis == "x":
            return np.where(self.active_x, self.coeffs_x, 0.0)
        if axis == "y":
            return np.where(self.active_y, self.coeffs_y, 0.0)
        raise DomainError(f"unknown axis {axis!r}")

    def copy(self) -> "SinePulse":
        return SinePulse(
            self.duration,
            self.coeffs_x.copy(),
            self.coeffs_y.copy(),
            self.active_x.copy(),
            self.active_y.copy(),
        )

    def pack_active(self) -> np.ndarray:
        return np.concatenate(
            [self.coeffs_x[self.active_x], self.coeffs_y[self.active_y]]
        )

    def with_active(self, params: np.ndarray) -> "SinePulse":
        out = self.copy()
        nx = int(self.active_x.sum())
        out.coeffs_x[self.active_x] = params[:nx]
        out.coeffs_y[self.active_y] = params[nx:]
        return out

    def active_labels(self) -> list[str]:
        labels = [f"bx_{m}" for m in range(self.M + 1) if self.active_x[m]]
        labels += [f"by_{m}" for m in range(self.M + 1) if self.active_y[m]]
        return labels


def field_value(pulse: SinePulse, axis: str, t) -> np.ndarray | float:
    """Evaluate the truncated series with the active mask at time(s) t."""
    t_arr = np.asarray(t, dtype=np.float64)
    if np.any(t_arr < 0) or np.any(t_arr > pulse.duration):
        raise DomainError("time outside [0, T]")
    coeffs = pulse.masked_coeffs(axis)
    harmonics = np.arange(1, pulse.M + 1)
    value = coeffs[0] + np.sin(
        np.multiply.outer(t_arr, harmonics) * np.pi / pulse.duration
    ) @ coeffs[1:]
    return float(value) if np.isscalar(t) else value


def seed_pulse(m: int, duration: float = 4.0) -> SinePulse:
    """Raise-and-fall seed: first harmonic at unit amplitude on both axes."""
    coeffs = np.zeros(m + 1)
    if m >= 1:
        coeffs[1] = 1.0
    return SinePulse(duration, coeffs.copy(), coeffs.copy())


@dataclass
class CwOptConfig:
    """Budgets and knobs for the informed multistart and simplification."""

    field_lo: float = 0.0
    field_hi: float = TWO_PI
    n_seed_samples: int = 200
    seed_noise_sigma: float = 0.2
    n_local_searches: int = 10
    max_iters: int = 200
    fidelity_threshold: float = 0.99
    removal_attempts: int = 5
    rng_seed: int = 0
    penalty_grid: int = 1024
    fd_step: float = 1e-6
    threads: int = 1

    def __post_init__(self):
        if self.field_lo >= self.field_hi:
            raise DomainError("field_lo must be below field_hi")
        if not 0 < self.fidelity_threshold <= 1:
            raise DomainError("fidelity threshold must be in (0, 1]")


# ---------------------------------------------------------------------------
# Loss
# ---------------------------------------------------------------------------

def _field_extrema(pulse: SinePulse, axis: str, n_grid: int):
    grid = np.linspace(0.0, pulse.duration, n_grid)
    values = field_value(pulse, axis, grid)
    return float(values.min()), float(values.max())


def cw_loss(
    pulse: SinePulse,
    target: TargetState,
    model: RingModel,
    cfg: CwOptConfig | None = None,
    integrator: IntegratorConfig = DEFAULT_INTEGRATOR,
) -> float:
    """Infidelity plus out-of-range field penalties.

    A field maximum above the upper bound adds the maximum itself; a
    minimum below zero adds its magnitude. Boundary contact (Heaviside at
    zero) incurs no penalty, matching the half-open field interval.
    """
    cfg = cfg or CwOptConfig()
    psi = evolve_cw(model.initial_state_reduced(), pulse, model, integrator)
    loss = max(0.0, 1.0 - fidelity(psi, target.reduced))
    for axis in ("x", "y"):
        lo, hi = _field_extrema(pulse, axis, cfg.penalty_grid)
        if hi > cfg.field_hi:
            loss += hi
        if lo < cfg.field_lo:
            loss += cfg.field_lo - lo
    return loss


# ---------------------------------------------------------------------------
# Informed multistart
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class CwResult:
    pulse: SinePulse
    loss: float
    n_iterations: int
    converged: bool
    message: str = ""


def local_optimize_pulse(
    pulse0: SinePulse,
    target: TargetState,
    model: RingModel,
    cfg: CwOptConfig | None = None,
    integrator: IntegratorConfig = DEFAULT_INTEGRATOR,
) -> CwResult:
    """Quasi-Newton refinement over the active coefficients of one pulse."""
    cfg = cfg or CwOptConfig()
    best = {"x": pulse0.pack_active().copy(), "f": cw_loss(pulse0, target, model, cfg, integrator)}

    def objective(x):
        f = cw_loss(pulse0.with_active(x), target, model, cfg, integrator)
        if f < best["f"]:
            best["f"] = f
            best["x"] = x.copy()
        return f

    def gradient(x):
        return finite_diff_gradient(objective, x, cfg.fd_step)

    res = minimize(
        objective,
        pulse0.pack_active(),
        method="L-BFGS-B",
        jac=gradient,
        options={"maxiter": cfg.max_iters, "ftol": 1e-16, "gtol": 1e-12},
    )
    return CwResult(
        pulse=pulse0.with_active(best["x"]),
        loss=best["f"],
        n_iterations=int(res.nit),
        converged=bool(res.success),
        message=str(res.message),
    )


def _cw_task(args):
    pulse, target, model, cfg, integrator = args
    return local_optimize_pulse(pulse, target, model, cfg, integrator)


def informed_multistart(
    target: TargetState,
    m: int,
    model: RingModel,
    cfg: CwOptConfig | None = None,
    integrator: IntegratorConfig = DEFAULT_INTEGRATOR,
    duration: float = 4.0,
) -> list[CwResult]:
    """Gaussian cloud around the raise-and-fall seed, refined locally.

    Deterministic given ``rng_seed``; results are sorted by loss with the
    sample index breaking ties.
    """
    cfg = cfg or CwOptConfig()
    rng = np.random.default_rng(cfg.rng_seed)
    seed = seed_pulse(m, duration)
    starts = []
    for _ in range(cfg.n_seed_samples):
        noise_x = rng.normal(0.0, cfg.seed_noise_sigma, size=m + 1)
        noise_y = rng.normal(0.0, cfg.seed_noise_sigma, size=m + 1)
        starts.append(
            SinePulse(duration, seed.coeffs_x + noise_x, seed.coeffs_y + noise_y)
        )
    losses = np.array([cw_loss(p, target, model, cfg, integrator) for p in starts])
    order = np.argsort(losses, kind="stable")[: cfg.n_local_searches]

    tasks = [(starts[i], target, model, cfg, integrator) for i in order]
    if cfg.threads > 1:
        with ProcessPoolExecutor(max_workers=cfg.threads) as pool:
            results = list(pool.map(_cw_task, tasks, chunksize=1))
    else:
        results = [_cw_task(t) for t in tasks]
    results.sort(key=lambda r: r.loss)
    return results


# ---------------------------------------------------------------------------
# Iterative component removal
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class SimplifyStep:
    removed: str
    loss: float
    accepted: bool
    active_after: int


@dataclass(eq=False)
class SimplifyResult:
    pulse: SinePulse
    loss: float
    m_tilde: int
    history: list[SimplifyStep] = field(default_factory=list)


def _removal_candidates(pulse: SinePulse) -> list[tuple[str, int]]:
    """Active components ordered by |coefficient|, x before y, low m first."""
    entries = []
    for m in range(pulse.M + 1):
        if pulse.active_x[m]:
            entries.append((abs(pulse.coeffs_x[m]), 0, m, ("x", m)))
        if pulse.active_y[m]:
            entries.append((abs(pulse.coeffs_y[m]), 1, m, ("y", m)))
    entries.sort(key=lambda e: (e[0], e[1], e[2]))
    return [e[3] for e in entries]


def simplify_pulse(
    pulse0: SinePulse,
    target: TargetState,
    model: RingModel,
    cfg: CwOptConfig | None = None,
    integrator: IntegratorConfig = DEFAULT_INTEGRATOR,
) -> SimplifyResult:
    """Drop least-significant sine components while the threshold holds.

    Candidates are tried smallest |b| first; a failed removal is reverted
    and the next-larger component attempted, stopping after
    ``removal_attempts`` consecutive failures (or when one component is
    left). The returned pulse is the last successful one.
    """
    cfg = cfg or CwOptConfig()
    max_loss = 1.0 - cfg.fidelity_threshold
    current = pulse0.copy()
    current_loss = cw_loss(current, target, model, cfg, integrator)
    if current_loss > max_loss:
        raise DomainError(
            f"initial pulse misses the threshold: loss {current_loss:.3e} > {max_loss:.3e}"
        )
    history: list[SimplifyStep] = []
    failures = 0
    while current.active_count > 1 and failures < cfg.removal_attempts:
        candidates = _removal_candidates(current)
        if failures >= len(candidates):
            break
        axis, m = candidates[failures]
        trial = current.copy()
        if axis == "x":
            trial.active_x[m] = False
        else:
            trial.active_y[m] = False
        refined = local_optimize_pulse(trial, target, model, cfg, integrator)
        if refined.loss <= max_loss:
            current = refined.pulse
            current_loss = refined.loss
            failures = 0
            accepted = True
        else:
            accepted = False
            failures += 1
        history.append(
            SimplifyStep(
                removed=f"b{axis}_{m}",
                loss=refined.loss,
                accepted=accepted,
                active_after=current.active_count,
            )
        )
    return SimplifyResult(
        pulse=current, loss=current_loss, m_tilde=current.active_count, history=history
    )
