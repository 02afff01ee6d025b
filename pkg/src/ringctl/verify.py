"""Self-check suite behind ``ringctl verify``.

Each check returns a named pass/fail with a measured figure. The orbit
counting here is a deliberately naive set-partition over strings, kept
independent of the vectorized production enumerator so the two paths can
cross-validate each other.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .cw import SinePulse
from .model import RingModel, dicke_state, fidelity, w_state
from .nmr import NmrSequence, sample_box, simulate_sequence
from .propagate import apply_uzz, dense_oracle, evolve_cw, expmv
from .symmetry import (
    ParityOperator,
    apply_group_element,
    enumerate_orbits,
    get_basis,
    group_permutation_matrices,
    index_to_string,
)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def brute_force_orbits(n: int) -> list[frozenset[str]]:
    """Partition all n-bit strings under the 2n group elements, the slow way."""
    remaining = {format(i, f"0{n}b") for i in range(1 << n)}
    orbits = []
    while remaining:
        start = min(remaining)
        members = set()
        for s in range(n):
            for reflected in (False, True):
                members.add(apply_group_element(start, s, reflected))
        # close under repeated application (already closed for a group, but
        # the naive oracle should not assume that)
        frontier = set(members)
        while frontier:
            new = set()
            for b in frontier:
                for s in range(n):
                    for reflected in (False, True):
                        img = apply_group_element(b, s, reflected)
                        if img not in members:
                            new.add(img)
            members |= new
            frontier = new
        orbits.append(frozenset(members))
        remaining -= members
    return orbits


def brute_force_orbit_count(n: int) -> int:
    return len(brute_force_orbits(n))


def _random_sequence(rng: np.random.Generator, m: int, n: int) -> NmrSequence:
    return NmrSequence.from_vector(sample_box(rng, m, n, 1)[0], m)


def run_verification(n: int, seed: int = 0) -> list[CheckResult]:
    """Run every invariant applicable at ring size ``n``."""
    rng = np.random.default_rng(seed)
    checks: list[CheckResult] = []

    def record(name, passed, detail):
        checks.append(CheckResult(name, bool(passed), detail))

    # --- orbit structure -------------------------------------------------
    orbits = enumerate_orbits(n)
    brute = brute_force_orbits(n)
    same_count = len(orbits) == len(brute)
    same_partition = {frozenset(o.member_strings()) for o in orbits} == set(brute)
    record(
        "orbit-partition",
        same_count and same_partition,
        f"{len(orbits)} orbits (brute force: {len(brute)})",
    )
    covered = sorted(m for o in orbits for m in o.members)
    record("orbit-cover", covered == list(range(1 << n)), "orbits partition the basis")
    uniform = all(
        len({b.count('1') for b in o.member_strings()}) == 1 for o in orbits
    )
    record("orbit-uniform-weight", uniform, "members share Hamming weight")

    basis = get_basis(n)
    gram = (basis.projector.T @ basis.projector).toarray()
    err = float(np.abs(gram - np.eye(basis.dim)).max())
    record("projector-orthonormal", err < 1e-12, f"max |P^T P - 1| = {err:.2e}")

    model = RingModel(n)

    # --- operator symmetry (exact, n <= 8) -------------------------------
    if n <= 8:
        hx = model.hx_full().toarray()
        hy = model.hy_full().toarray()
        hzz = np.diag(model.hzz_diagonal_full())
        worst = 0.0
        for g, _label in group_permutation_matrices(n):
            gd = g.toarray()
            for op in (hx, hy, hzz):
                worst = max(worst, float(np.abs(gd @ op @ gd.T - op).max()))
        record("group-invariance", worst == 0.0, f"max |G O G^T - O| = {worst:.2e}")

    diag = model.hzz_red
    expect = np.array([o.hzz_value(model.j) for o in basis.orbits])
    record(
        "reduced-hzz-diagonal",
        np.array_equal(diag, expect),
        "diagonal equals J(N - 2 domain walls)",
    )

    # --- parity commutators (n <= 6) -------------------------------------
    if n <= 6:
        xp = ParityOperator("x", n).matrix().toarray()
        yp = ParityOperator("y", n).matrix().toarray()
        hx = model.hx_full().toarray()
        hy = model.hy_full().toarray()
        hzz = np.diag(model.hzz_diagonal_full())
        worst = max(
            float(np.abs(hzz @ xp - xp @ hzz).max()),
            float(np.abs(hx @ xp - xp @ hx).max()),
            float(np.abs(hzz @ yp - yp @ hzz).max()),
            float(np.abs(hy @ yp - yp @ hy).max()),
        )
        record("parity-commutators", worst < 1e-12, f"max commutator entry {worst:.2e}")
        invol = max(
            float(np.abs(xp @ xp - np.eye(1 << n)).max()),
            float(np.abs(yp @ yp - np.eye(1 << n)).max()),
        )
        record("parity-involution", invol < 1e-12, f"max |P^2 - 1| = {invol:.2e}")

    # --- Dicke mirror ------------------------------------------------------
    mirror_ok = True
    for k in range(n + 1):
        xp_red = ParityOperator("x", n).reduced(basis)
        lhs = xp_red @ dicke_state(n, k, basis).reduced
        rhs = dicke_state(n, n - k, basis).reduced
        if not np.array_equal(lhs, rhs):
            mirror_ok = False
    record("dicke-mirror", mirror_ok, "X_P D(N,k) = D(N,N-k) bitwise")

    # --- propagation cross-checks (n <= dense-oracle cap) -----------------
    if n <= 8:
        worst = 0.0
        for _ in range(3):
            seq = _random_sequence(rng, 4, n)
            psi_red = simulate_sequence(seq, model)
            psi_full = dense_oracle(seq, model)
            worst = max(worst, 1.0 - fidelity(basis.lift(psi_red), psi_full))
        record("nmr-reduced-vs-oracle", worst < 1e-9, f"worst infidelity gap {worst:.2e}")

        pulse = SinePulse(4.0, rng.normal(0, 0.4, 6), rng.normal(0, 0.4, 6))
        psi_red = evolve_cw(model.initial_state_reduced(), pulse, model)
        psi_full = dense_oracle(pulse, model)
        gap = 1.0 - fidelity(basis.lift(psi_red), psi_full)
        record("cw-reduced-vs-oracle", gap < 1e-9, f"infidelity gap {gap:.2e}")

        # evolution never leaves the symmetric subspace
        outside = psi_full - basis.projector @ (basis.projector.T @ psi_full)
        leak = float(np.linalg.norm(outside))
        record("symmetric-subspace", leak < 1e-10, f"component outside subspace {leak:.2e}")

    # --- expmv vs dense exponential ---------------------------------------
    d = min(64, 4 * basis.dim)
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    h = (a + a.conj().T) / 2
    v = rng.normal(size=d) + 1j * rng.normal(size=d)
    v /= np.linalg.norm(v)
    gap = float(np.linalg.norm(expmv(h, v, 1.7) - sla.expm(-1.7j * h) @ v))
    record("expmv-vs-expm", gap < 1e-11, f"krylov vs pade gap {gap:.2e}")

    # --- interaction-pulse periodicity ------------------------------------
    v = rng.normal(size=basis.dim) + 1j * rng.normal(size=basis.dim)
    v /= np.linalg.norm(v)
    period = np.pi if n < 3 else np.pi / 2
    f = fidelity(apply_uzz(v, 0.3, model), apply_uzz(v, 0.3 + period, model))
    record("uzz-periodicity", abs(f - 1) < 1e-12, f"period {period:.4f}, fidelity {f:.15f}")

    # W state reduced form: single coordinate on the weight-1 orbit
    w = w_state(n, basis).reduced
    ids = basis.weight_orbit_ids(1)
    single = len(ids) == 1 and abs(w[ids[0]] - 1.0) < 1e-14 if n >= 2 else True
    record("w-state-reduced", single, "unit amplitude on the weight-1 orbit")

    return checks
