"""Dihedral-symmetry machinery for a ring of qubits.

The symmetry group of an N-site ring is the dihedral group with 2N
elements: N cyclic shifts and N reflected shifts. Grouping the 2^N
computational basis states into orbits of this action (binary bracelets)
and forming the equal-amplitude superposition over each orbit yields an
orthonormal basis of the symmetric subspace, of dimension O(2^N / N).
All ring operators used in this package commute with the group action
and can therefore be represented on that subspace.

Conventions
-----------
* Bit strings are written ``a_1 a_2 ... a_N`` (site 1 first). A cyclic
  shift by ``s`` moves the first ``s`` symbols to the end; a reflected
  shift additionally reverses the string.
* State-vector indexing is little-endian: site 1 is the least
  significant bit, so string ``a_1...a_N`` sits at index
  ``sum_n a_n 2^(n-1)``.
* Orbit representatives are the lexicographically smallest member
  string; orbits are ordered by (Hamming weight, representative).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .errors import CapacityError, DomainError

MAX_FULL_QUBITS = 14     # anything of size 2^N (projector, full operators)
MAX_REDUCED_QUBITS = 18  # reduced-space-only paths
MAX_DENSE_ORACLE = 10    # dense 2^N x 2^N reference propagation

PARITY_KINDS = ("x", "y", "z")


# ---------------------------------------------------------------------------
# Group action on bit strings
# ---------------------------------------------------------------------------

def apply_group_element(bits: str, shift: int, reflected: bool = False) -> str:
    """Act with one dihedral-group element on a bit string.

    ``shift`` selects the cyclic shift ``a_1...a_N -> a_{s+1}...a_N a_1...a_s``;
    with ``reflected=True`` the shifted string is additionally reversed.

    Raises
    ------
    DomainError
        If ``shift`` is outside ``[0, N)`` or ``bits`` is not binary.
    """
    n = len(bits)
    if n == 0 or any(c not in "01" for c in bits):
        raise DomainError(f"not a bit string: {bits!r}")
    if not 0 <= shift < n:
        raise DomainError(f"shift {shift} out of range for {n} sites")
    rotated = bits[shift:] + bits[:shift]
    return rotated[::-1] if reflected else rotated


def string_to_index(bits: str) -> int:
    """Little-endian basis index of a bit string (site 1 = LSB)."""
    return int(bits[::-1], 2)


def index_to_string(index: int, n: int) -> str:
    """Inverse of :func:`string_to_index`."""
    return format(index, f"0{n}b")[::-1]


def hamming_weight(bits: str) -> int:
    return bits.count("1")


def domain_walls(bits: str) -> int:
    """Number of unequal adjacent pairs around the ring (cyclic)."""
    n = len(bits)
    return sum(bits[i] != bits[(i + 1) % n] for i in range(n))


def _bit_reverse(values: np.ndarray, n: int) -> np.ndarray:
    out = np.zeros_like(values)
    for i in range(n):
        out = (out << 1) | ((values >> i) & 1)
    return out


def _rotate_left(values: np.ndarray, s: int, n: int) -> np.ndarray:
    if s == 0:
        return values
    mask = (1 << n) - 1
    return ((values << s) & mask) | (values >> (n - s))


# ---------------------------------------------------------------------------
# Orbits and the symmetrized basis
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Orbit:
    """One dihedral orbit of computational basis states.

    ``members`` holds the little-endian basis indices (ascending);
    ``representative`` is the lexicographically smallest member string.
    """

    n: int
    representative: str
    members: tuple[int, ...]

    @property
    def size(self) -> int:
        return len(self.members)

    @property
    def weight(self) -> int:
        return hamming_weight(self.representative)

    @property
    def domain_walls(self) -> int:
        return domain_walls(self.representative)

    def hzz_value(self, j: float = 1.0) -> float:
        """Diagonal value of the Ising coupling on this orbit."""
        return j * (self.n - 2 * self.domain_walls)

    def member_strings(self) -> tuple[str, ...]:
        return tuple(index_to_string(m, self.n) for m in self.members)


def _orbit_tables(n: int) -> tuple[list[Orbit], np.ndarray]:
    """Enumerate orbits and the per-index orbit-id lookup, vectorized."""
    # Work in big-endian encoding, where string order equals integer order.
    states = np.arange(1 << n, dtype=np.uint32)
    reflected = _bit_reverse(states, n)
    canon = states.copy()
    for s in range(n):
        np.minimum(canon, _rotate_left(states, s, n), out=canon)
        np.minimum(canon, _rotate_left(reflected, s, n), out=canon)

    reps = np.unique(canon)
    weights = np.array([int(r).bit_count() for r in reps])
    order = np.lexsort((reps, weights))
    reps = reps[order]

    rank = np.zeros(1 << n, dtype=np.uint32)
    rank[reps] = np.arange(len(reps), dtype=np.uint32)
    orbit_index_bigend = rank[canon]
    # Re-key by little-endian index. The orbit partition is identical in
    # either encoding because every orbit is closed under string reversal.
    orbit_index = np.empty(1 << n, dtype=np.uint32)
    orbit_index[_bit_reverse(states, n)] = orbit_index_bigend

    members: list[list[int]] = [[] for _ in reps]
    for idx, oid in enumerate(orbit_index):
        members[oid].append(idx)
    orbits = [
        Orbit(n=n, representative=format(int(rep), f"0{n}b"), members=tuple(m))
        for rep, m in zip(reps, members)
    ]
    return orbits, orbit_index


def enumerate_orbits(n: int) -> list[Orbit]:
    """All dihedral orbits of N-bit strings, sorted by (weight, representative).

    Raises
    ------
    CapacityError
        If ``n`` is outside ``[1, MAX_FULL_QUBITS]``.
    """
    if not 1 <= n <= MAX_FULL_QUBITS:
        raise CapacityError(f"n={n} outside supported range [1, {MAX_FULL_QUBITS}]")
    return _orbit_tables(n)[0]


@dataclass(frozen=True, eq=False)
class SymmetryBasis:
    """Orbit list plus the projector onto the symmetric subspace.

    ``projector`` is the sparse 2^N x d matrix whose column for orbit ``o``
    carries ``1/sqrt(|o|)`` at each member index. It is ``None`` for
    reduced-only bases (N > MAX_FULL_QUBITS).
    """

    n: int
    orbits: tuple[Orbit, ...]
    projector: sp.csc_matrix | None
    orbit_index: np.ndarray  # little-endian basis index -> orbit id

    @property
    def dim(self) -> int:
        return len(self.orbits)

    @property
    def full_dim(self) -> int:
        return 1 << self.n

    def orbit_sizes(self) -> np.ndarray:
        return np.array([o.size for o in self.orbits], dtype=np.float64)

    def hzz_diagonal(self, j: float = 1.0) -> np.ndarray:
        return np.array([o.hzz_value(j) for o in self.orbits])

    def weight_orbit_ids(self, k: int) -> list[int]:
        return [i for i, o in enumerate(self.orbits) if o.weight == k]

    def complement_map(self) -> np.ndarray:
        """Orbit permutation induced by flipping every bit."""
        mask = self.full_dim - 1
        return np.array(
            [self.orbit_index[o.members[0] ^ mask] for o in self.orbits],
            dtype=np.int64,
        )

    def lift(self, reduced: np.ndarray) -> np.ndarray:
        """Map reduced coordinates to the full 2^N space."""
        if self.projector is None:
            raise CapacityError("basis was built reduced-only; no projector available")
        if reduced.shape != (self.dim,):
            raise DomainError(f"expected reduced vector of length {self.dim}")
        return self.projector @ reduced

    def project(self, full: np.ndarray) -> np.ndarray:
        """Map a full-space vector to reduced coordinates (adjoint of lift)."""
        if self.projector is None:
            raise CapacityError("basis was built reduced-only; no projector available")
        if full.shape != (self.full_dim,):
            raise DomainError(f"expected full vector of length {self.full_dim}")
        return self.projector.T @ full

    def projector_dense(self) -> np.ndarray:
        if self.projector is None:
            raise CapacityError("basis was built reduced-only; no projector available")
        return self.projector.toarray()


def build_projector(n: int) -> SymmetryBasis:
    """Build the symmetrized basis and its projector for ``n`` qubits."""
    orbits = enumerate_orbits(n)
    _, orbit_index = _orbit_tables(n)
    data, rows, cols = [], [], []
    for oid, orbit in enumerate(orbits):
        amp = 1.0 / np.sqrt(orbit.size)
        for m in orbit.members:
            rows.append(m)
            cols.append(oid)
            data.append(amp)
    projector = sp.csc_matrix(
        (data, (rows, cols)), shape=(1 << n, len(orbits)), dtype=np.float64
    )
    return SymmetryBasis(
        n=n, orbits=tuple(orbits), projector=projector, orbit_index=orbit_index
    )


def build_reduced_basis(n: int) -> SymmetryBasis:
    """Orbit tables without the 2^N x d projector, for large rings."""
    if not 1 <= n <= MAX_REDUCED_QUBITS:
        raise CapacityError(f"n={n} outside supported range [1, {MAX_REDUCED_QUBITS}]")
    if n <= MAX_FULL_QUBITS:
        return get_basis(n)
    orbits, orbit_index = _orbit_tables(n)
    return SymmetryBasis(
        n=n, orbits=tuple(orbits), projector=None, orbit_index=orbit_index
    )


@lru_cache(maxsize=None)
def get_basis(n: int) -> SymmetryBasis:
    """Cached :func:`build_projector` (bases are immutable)."""
    return build_projector(n)


# ---------------------------------------------------------------------------
# Operator reduction
# ---------------------------------------------------------------------------

def reduce_operator(op, basis: SymmetryBasis) -> np.ndarray:
    """Represent a full-space operator on the symmetric subspace.

    ``op`` may be a dense array, a sparse matrix, or a callable computing
    matrix-vector products. The operator must be Hermitian and commute with
    the dihedral action; commutation is spot-checked on one random vector.

    Returns the dense d x d matrix ``P^dag op P``.
    """
    if basis.projector is None:
        raise CapacityError("reduce_operator needs a basis with a projector")
    full_dim, d = basis.full_dim, basis.dim
    if callable(op):
        matvec = op
    else:
        if op.shape != (full_dim, full_dim):
            raise DomainError(
                f"operator shape {op.shape} does not match 2^{basis.n} full space"
            )
        matvec = lambda v: op @ v  # noqa: E731

    pt = basis.projector.T.tocsr()
    out = np.empty((d, d), dtype=np.complex128)
    for q in range(d):
        col = basis.projector.getcol(q).toarray().ravel().astype(np.complex128)
        h_col = np.asarray(matvec(col)).ravel()
        if h_col.shape != (full_dim,):
            raise DomainError("operator action returned a wrong-sized vector")
        out[:, q] = pt @ h_col

    # Spot check: op must map the symmetric subspace into itself.
    rng = np.random.default_rng(1234)
    z = rng.normal(size=d) + 1j * rng.normal(size=d)
    lifted = basis.projector @ (z / np.linalg.norm(z))
    h_lifted = np.asarray(matvec(lifted)).ravel()
    outside = h_lifted - basis.projector @ (pt @ h_lifted)
    scale = max(np.linalg.norm(h_lifted), 1.0)
    if np.linalg.norm(outside) > 1e-8 * scale:
        raise DomainError("operator does not preserve the symmetric subspace")
    return (out + out.conj().T) / 2.0


# ---------------------------------------------------------------------------
# Parity operators (verification only)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ParityOperator:
    """Parity operator: the tensor product of one Pauli over all sites."""

    kind: str  # "x", "y" or "z"
    n: int

    def __post_init__(self):
        if self.kind not in PARITY_KINDS:
            raise DomainError(f"unknown parity kind {self.kind!r}")
        if not 1 <= self.n <= MAX_FULL_QUBITS:
            raise CapacityError(f"n={self.n} outside [1, {MAX_FULL_QUBITS}]")

    def apply(self, state: np.ndarray) -> np.ndarray:
        """Apply to a full-space vector (matrix-free)."""
        dim = 1 << self.n
        if state.shape != (dim,):
            raise DomainError(f"expected full vector of length {dim}")
        idx = np.arange(dim)
        weights = np.bitwise_count(idx)
        if self.kind == "z":
            return np.where(weights % 2, -1.0, 1.0) * state
        flipped = idx ^ (dim - 1)
        out = np.empty(dim, dtype=np.complex128)
        out[flipped] = state[idx]
        if self.kind == "y":
            # sigma_y |b> = i(-1)^b |1-b>, so the product picks up
            # i^N (-1)^(weight of the input string).
            phase = (1j**self.n) * np.where(weights % 2, -1.0, 1.0)
            out[flipped] *= phase
        return out

    def matrix(self) -> sp.csr_matrix:
        dim = 1 << self.n
        eye = np.eye(dim, dtype=np.complex128)
        cols = [self.apply(eye[:, i]) for i in range(dim)]
        return sp.csr_matrix(np.stack(cols, axis=1))

    def reduced(self, basis: SymmetryBasis) -> np.ndarray:
        """Representation on the symmetric subspace (d x d)."""
        if basis.n != self.n:
            raise DomainError("basis size does not match operator")
        d = basis.dim
        comp = basis.complement_map()
        out = np.zeros((d, d), dtype=np.complex128)
        for q, orbit in enumerate(basis.orbits):
            if self.kind == "z":
                out[q, q] = (-1.0) ** orbit.weight
            elif self.kind == "x":
                out[comp[q], q] = 1.0
            else:
                out[comp[q], q] = (1j**self.n) * (-1.0) ** orbit.weight
        return out


def parity_restricted_basis(
    vectors, kind: str, sign: int, n: int, basis: SymmetryBasis | None = None
) -> list[np.ndarray]:
    """Spanning set of the +-1 parity eigensubspace restricted to span(vectors).

    Each input vector ``v`` is mapped to the normalized ``(1 + sign*O_P) v``;
    zero results are dropped and duplicates (equal up to global phase) are
    removed. Vectors may live in the full space or, with ``basis`` given, in
    the symmetrized basis.
    """
    if kind not in ("x", "y"):
        raise DomainError("restricted bases are defined for x- and y-parity")
    if sign not in (+1, -1):
        raise DomainError("sign must be +1 or -1")
    op = ParityOperator(kind, n)
    reduced_op = op.reduced(basis) if basis is not None else None

    out: list[np.ndarray] = []
    for v in vectors:
        v = np.asarray(v, dtype=np.complex128)
        if v.shape == (1 << n,):
            w = v + sign * op.apply(v)
        elif basis is not None and v.shape == (basis.dim,):
            w = v + sign * reduced_op @ v
        else:
            raise DomainError(f"vector of length {v.shape} fits neither representation")
        norm = np.linalg.norm(w)
        if norm < 1e-12:
            continue
        w /= norm
        if any(abs(np.vdot(u, w)) > 1.0 - 1e-10 for u in out):
            continue
        out.append(w)
    return out


def group_permutation_matrices(n: int):
    """All 2N group elements as sparse permutations of the full space."""
    dim = 1 << n
    rows = np.arange(dim)
    for reflected in (False, True):
        for s in range(n):
            perm = np.array(
                [
                    string_to_index(
                        apply_group_element(index_to_string(i, n), s, reflected)
                    )
                    for i in range(dim)
                ]
            )
            yield sp.csr_matrix(
                (np.ones(dim), (perm, rows)), shape=(dim, dim)
            ), (s, reflected)
