"""Ring Hamiltonians, target states, fidelity, and unit conversion.

The ring of N qubits carries a nearest-neighbor Ising coupling with
periodic wraparound plus two global transverse control sums,

    H_zz = J sum_n sigma^z_n sigma^z_{n+1},   H_x = sum_n sigma^x_n,
    H_y = sum_n sigma^y_n.

Control amplitudes live in the pulse protocols, not here. Everything is
expressed in units of the coupling J (times in 1/J); physical units enter
only through :func:`rydberg_coupling` and the CLI reporting mode.

For N = 2 the two wraparound bonds coincide, so the literal sum gives
H_zz = 2 J sigma^z sigma^z; the factor 2 is kept deliberately.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .errors import CapacityError, DomainError
from .symmetry import (
    MAX_DENSE_ORACLE,
    MAX_FULL_QUBITS,
    MAX_REDUCED_QUBITS,
    SymmetryBasis,
    build_reduced_basis,
    get_basis,
)

# Reduced operators denser than this are kept sparse.
_DENSE_DIM_LIMIT = 2048


def _domain_wall_counts(n: int) -> np.ndarray:
    """Cyclic domain-wall count for every little-endian basis index."""
    idx = np.arange(1 << n, dtype=np.uint32)
    mask = (1 << n) - 1
    rotated = ((idx >> 1) | (idx << (n - 1))) & mask
    return np.bitwise_count(idx ^ rotated).astype(np.int64)


@lru_cache(maxsize=None)
def _reduced_controls(n: int):
    """Reduced H_x and H_y built by accumulating flips orbit-by-orbit."""
    basis = build_reduced_basis(n)
    d = basis.dim
    oid = basis.orbit_index.astype(np.int64)
    states = np.arange(1 << n, dtype=np.int64)
    inv_sqrt = 1.0 / np.sqrt(basis.orbit_sizes())
    w = inv_sqrt[oid]

    rows, cols, vx, vy = [], [], [], []
    for site in range(n):
        flipped = states ^ (1 << site)
        bit = (states >> site) & 1
        amp = w * w[flipped]
        rows.append(oid[flipped])
        cols.append(oid)
        vx.append(amp)
        vy.append(1j * (1 - 2 * bit) * amp)
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    hx = sp.coo_matrix((np.concatenate(vx), (rows, cols)), shape=(d, d)).tocsr()
    hy = sp.coo_matrix((np.concatenate(vy), (rows, cols)), shape=(d, d)).tocsr()
    if d <= _DENSE_DIM_LIMIT:
        hx = hx.toarray().astype(np.complex128)
        hy = hy.toarray().astype(np.complex128)
        hx = (hx + hx.conj().T) / 2.0
        hy = (hy + hy.conj().T) / 2.0
    return basis, hx, hy


@lru_cache(maxsize=None)
def _full_controls(n: int):
    """Full-space H_x, H_y as sparse matrices (little-endian indexing)."""
    if n > MAX_FULL_QUBITS:
        raise CapacityError(f"full-space operators capped at {MAX_FULL_QUBITS} qubits")
    states = np.arange(1 << n, dtype=np.int64)
    rows, cols, vy = [], [], []
    for site in range(n):
        flipped = states ^ (1 << site)
        bit = (states >> site) & 1
        rows.append(flipped)
        cols.append(states)
        vy.append(1j * (1 - 2 * bit) * np.ones(1 << n))
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    dim = 1 << n
    hx = sp.coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(dim, dim)).tocsr()
    hy = sp.coo_matrix((np.concatenate(vy), (rows, cols)), shape=(dim, dim)).tocsr()
    return hx, hy


class RingModel:
    """Immutable bundle of ring operators in reduced and full representation.

    Parameters
    ----------
    n : int
        Number of qubits on the ring.
    j : float
        Ising coupling strength (the internal unit; default 1).
    """

    def __init__(self, n: int, j: float = 1.0):
        if not 1 <= n <= MAX_REDUCED_QUBITS:
            raise CapacityError(f"n={n} outside supported range [1, {MAX_REDUCED_QUBITS}]")
        self.n = int(n)
        self.j = float(j)
        self.basis, self.hx_red, self.hy_red = _reduced_controls(n)
        self.hzz_red = self.basis.hzz_diagonal(self.j)
        self._dense_full = None

    @property
    def dim(self) -> int:
        return self.basis.dim

    @property
    def reduced_dense(self) -> bool:
        return isinstance(self.hx_red, np.ndarray)

    def initial_state_reduced(self) -> np.ndarray:
        """|00...0> in reduced coordinates (the weight-0 orbit)."""
        psi = np.zeros(self.dim, dtype=np.complex128)
        psi[0] = 1.0
        return psi

    def initial_state_full(self) -> np.ndarray:
        psi = np.zeros(1 << self.n, dtype=np.complex128)
        psi[0] = 1.0
        return psi

    def hzz_diagonal_full(self) -> np.ndarray:
        if self.n > MAX_FULL_QUBITS:
            raise CapacityError(f"full-space operators capped at {MAX_FULL_QUBITS} qubits")
        return self.j * (self.n - 2 * _domain_wall_counts(self.n)).astype(np.float64)

    def hx_full(self) -> sp.csr_matrix:
        return _full_controls(self.n)[0]

    def hy_full(self) -> sp.csr_matrix:
        return _full_controls(self.n)[1]

    def hzz_full(self) -> sp.csr_matrix:
        return sp.diags(self.hzz_diagonal_full()).tocsr()

    def dense_full_controls(self):
        """Dense full-space (hzz_diag, hx, hy) for oracle-scale rings."""
        if self.n > MAX_DENSE_ORACLE:
            raise CapacityError(f"dense full-space path capped at {MAX_DENSE_ORACLE} qubits")
        if self._dense_full is None:
            self._dense_full = (
                self.hzz_diagonal_full(),
                self.hx_full().toarray().astype(np.complex128),
                self.hy_full().toarray().astype(np.complex128),
            )
        return self._dense_full

    def __repr__(self):
        return f"RingModel(n={self.n}, j={self.j}, dim={self.dim})"


# ---------------------------------------------------------------------------
# Target states
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class TargetState:
    """A W or Dicke target with reduced coordinates (and full on demand)."""

    kind: str  # "w" or "dicke"
    n: int
    k: int
    basis: SymmetryBasis = field(repr=False)
    reduced: np.ndarray = field(repr=False)

    def full(self) -> np.ndarray:
        return self.basis.lift(self.reduced).astype(np.complex128)

    @property
    def label(self) -> str:
        return f"W_{self.n}" if self.kind == "w" else f"D({self.n},{self.k})"


def dicke_state(n: int, k: int, basis: SymmetryBasis | None = None) -> TargetState:
    """Equal-weight superposition of all weight-k strings of n bits.

    In reduced coordinates the amplitude on orbit ``o`` of weight ``k`` is
    ``sqrt(|o| / C(n, k))`` and zero elsewhere.
    """
    if basis is None:
        basis = get_basis(n) if n <= MAX_FULL_QUBITS else build_reduced_basis(n)
    if basis.n != n:
        raise DomainError("basis does not match n")
    if not 0 <= k <= n:
        raise DomainError(f"excitation number k={k} outside [0, {n}]")
    total = math.comb(n, k)
    reduced = np.zeros(basis.dim, dtype=np.complex128)
    for oid in basis.weight_orbit_ids(k):
        reduced[oid] = math.sqrt(basis.orbits[oid].size / total)
    return TargetState(kind="dicke", n=n, k=k, basis=basis, reduced=reduced)


def w_state(n: int, basis: SymmetryBasis | None = None) -> TargetState:
    """The W state, i.e. the single-excitation Dicke state."""
    if n < 1:
        raise DomainError("w_state needs at least one qubit")
    target = dicke_state(n, 1, basis)
    return TargetState(kind="w", n=n, k=1, basis=target.basis, reduced=target.reduced)


def fidelity(a: np.ndarray, b: np.ndarray) -> float:
    """|<a|b>|^2 for two same-representation state vectors.

    The overlap is accumulated with exactly-rounded summation so the result
    is independent of coordinate ordering; permutation identities (such as
    the Dicke mirror property) then hold bit-for-bit.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise DomainError(f"shape mismatch {a.shape} vs {b.shape}")
    prod = np.conj(a) * b
    re = math.fsum(prod.real.tolist())
    im = math.fsum(prod.imag.tolist())
    return re * re + im * im


def rydberg_coupling(c6: float, r: float) -> float:
    """Van-der-Waals coupling J = C6 / R^6 (rad/us for C6 in rad um^6/us)."""
    if r <= 0:
        raise DomainError("interatomic distance must be positive")
    return c6 / r**6
