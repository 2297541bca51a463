"""Occupation-number bases, sparse second-quantized operators, and states.

Bases are enumerated deterministically (by total particle number, then
lexicographically in the occupation vector) so operator matrices are
bit-reproducible across runs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb

import numpy as np
import scipy.sparse as sp

from .couplings import HOPPING, INTERACTION, CouplingMatrix
from .lattice import Lattice, Region, fatten

__all__ = [
    "FockBasis",
    "SparseOperator",
    "QuantumState",
    "build_basis",
    "number_operator",
    "hopping_operator",
    "interaction_operator",
    "interaction_operator_q",
    "hamiltonian",
    "restrict_hamiltonian",
    "mott_state",
    "shell_state",
    "state_to_json",
    "state_from_json",
]

DEFAULT_DIMENSION_CAP = 200_000


class DimensionCapError(ValueError):
    """Fock dimension exceeds the configured hard cap."""


def _occupations_fixed_n(n_sites: int, n: int):
    """All occupation vectors of n_sites sites with total n, lexicographic."""
    if n_sites == 1:
        yield (n,)
        return
    for first in range(n + 1):
        for rest in _occupations_fixed_n(n_sites - 1, n - first):
            yield (first,) + rest


def fixed_n_dimension(n_sites: int, n: int) -> int:
    return comb(n + n_sites - 1, n)


def truncated_dimension(n_sites: int, n_max: int) -> int:
    return sum(comb(n + n_sites - 1, n) for n in range(n_max + 1))


@dataclass(frozen=True)
class FockBasis:
    """Bosonic occupation-number basis on a lattice.

    `sector` is ("fixed_n", N) for the N-particle sector or
    ("truncated", N0) for the direct sum of all sectors with n <= N0.
    """

    lattice: Lattice
    sector: tuple[str, int]
    states: np.ndarray = field(repr=False)  # (dim, n_sites) uint16
    index: dict = field(repr=False)
    totals: np.ndarray = field(repr=False)  # total particle number per state

    @property
    def dim(self) -> int:
        return self.states.shape[0]

    @property
    def n_sites(self) -> int:
        return len(self.lattice)

    def state_index(self, occupation) -> int:
        return self.index[tuple(int(v) for v in occupation)]

    def max_total(self) -> int:
        return int(self.totals.max()) if self.dim else 0

    def sector_mask(self, predicate) -> np.ndarray:
        """Boolean mask over basis states from a predicate on total n."""
        return np.array([predicate(int(t)) for t in self.totals])


def build_basis(
    lattice: Lattice,
    sector: tuple[str, int],
    dimension_cap: int = DEFAULT_DIMENSION_CAP,
) -> FockBasis:
    kind, n = sector
    if n < 0:
        raise ValueError("particle number must be nonnegative")
    L = len(lattice)
    if kind == "fixed_n":
        dim = fixed_n_dimension(L, n)
        totals = [n]
    elif kind == "truncated":
        dim = truncated_dimension(L, n)
        totals = list(range(n + 1))
    else:
        raise ValueError(f"unknown sector kind {kind!r}")
    if dim > dimension_cap:
        raise DimensionCapError(
            f"Fock dimension {dim} exceeds cap {dimension_cap}; "
            "raise dimension_cap explicitly if this is intended"
        )
    rows = []
    for ntot in totals:
        rows.extend(_occupations_fixed_n(L, ntot))
    states = np.array(rows, dtype=np.uint16)
    states.setflags(write=False)
    index = {tuple(int(v) for v in row): k for k, row in enumerate(rows)}
    tot = states.sum(axis=1).astype(np.int64)
    tot.setflags(write=False)
    return FockBasis(lattice, (kind, n), states, index, tot)


@dataclass(frozen=True)
class SparseOperator:
    """Sparse operator on a Fock basis (CSR storage)."""

    basis: FockBasis
    matrix: sp.csr_matrix
    hermitian: bool = False

    def __post_init__(self):
        m = sp.csr_matrix(self.matrix)
        if m.shape != (self.basis.dim, self.basis.dim):
            raise ValueError("matrix shape does not match basis dimension")
        m.sum_duplicates()
        if self.hermitian:
            dev = abs(m - m.getH())
            if dev.nnz and dev.max() > 1e-14:
                raise ValueError("operator flagged hermitian is not")
        object.__setattr__(self, "matrix", m)

    def apply(self, state: "QuantumState") -> "QuantumState":
        self._check_basis(state.basis)
        return QuantumState(self.basis, self.matrix @ state.amplitudes)

    def expectation(self, state: "QuantumState") -> complex:
        self._check_basis(state.basis)
        v = state.amplitudes
        return complex(np.vdot(v, self.matrix @ v))

    def dagger(self) -> "SparseOperator":
        return SparseOperator(self.basis, self.matrix.getH().tocsr(), self.hermitian)

    def is_diagonal(self) -> bool:
        coo = self.matrix.tocoo()
        return bool(np.all(coo.row == coo.col))

    def diagonal(self) -> np.ndarray:
        return self.matrix.diagonal()

    def _check_basis(self, other: FockBasis):
        if other is not self.basis and other.index != self.basis.index:
            raise ValueError("operator and state live on different bases")

    def __add__(self, other: "SparseOperator") -> "SparseOperator":
        self._check_basis(other.basis)
        return SparseOperator(
            self.basis, self.matrix + other.matrix, self.hermitian and other.hermitian
        )

    def __sub__(self, other: "SparseOperator") -> "SparseOperator":
        self._check_basis(other.basis)
        return SparseOperator(self.basis, self.matrix - other.matrix, False)

    def __matmul__(self, other: "SparseOperator") -> "SparseOperator":
        self._check_basis(other.basis)
        return SparseOperator(self.basis, self.matrix @ other.matrix, False)


def diagonal_operator(basis: FockBasis, diag: np.ndarray) -> SparseOperator:
    diag = np.asarray(diag)
    herm = bool(np.isrealobj(diag) or np.allclose(diag.imag, 0))
    return SparseOperator(basis, sp.diags(diag).tocsr(), hermitian=herm)


def diagonal_power(op: SparseOperator, p: float) -> SparseOperator:
    """A^p for a diagonal operator with nonnegative diagonal."""
    if not op.is_diagonal():
        raise ValueError("diagonal_power needs a diagonal operator")
    d = op.diagonal().real
    if (d < -1e-12).any():
        raise ValueError("diagonal must be nonnegative")
    return diagonal_operator(op.basis, np.clip(d, 0.0, None) ** p)


@dataclass(frozen=True)
class QuantumState:
    """Complex amplitude vector over a Fock basis."""

    basis: FockBasis
    amplitudes: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.amplitudes, dtype=complex)
        if v.shape != (self.basis.dim,):
            raise ValueError("amplitude vector has wrong length")
        if not np.all(np.isfinite(v)):
            raise ValueError("non-finite amplitudes")
        object.__setattr__(self, "amplitudes", v)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self) -> "QuantumState":
        n = self.norm()
        if n == 0:
            raise ValueError("cannot normalize the zero vector")
        return QuantumState(self.basis, self.amplitudes / n)

    def inner(self, other: "QuantumState") -> complex:
        return complex(np.vdot(self.amplitudes, other.amplitudes))


def basis_vector(basis: FockBasis, occupation) -> QuantumState:
    v = np.zeros(basis.dim, dtype=complex)
    v[basis.state_index(occupation)] = 1.0
    return QuantumState(basis, v)


def state_to_json(state: QuantumState) -> list:
    """Nonzero amplitudes as [occupation-vector, re, im] triples."""
    out = []
    for k in np.nonzero(state.amplitudes)[0]:
        a = state.amplitudes[k]
        out.append([[int(v) for v in state.basis.states[k]], float(a.real), float(a.imag)])
    return out


def state_from_json(basis: FockBasis, triples) -> QuantumState:
    v = np.zeros(basis.dim, dtype=complex)
    for occ, re, im in triples:
        v[basis.state_index(occ)] = complex(re, im)
    return QuantumState(basis, v)


def number_operator(basis: FockBasis, X: Region) -> SparseOperator:
    """N_X = sum over x in X of n_x (diagonal)."""
    idx = X.indices()
    if len(idx) == 0:
        diag = np.zeros(basis.dim)
    else:
        diag = basis.states[:, idx].sum(axis=1).astype(float)
    return diagonal_operator(basis, diag)


def site_number_operator(basis: FockBasis, x: int) -> SparseOperator:
    return diagonal_operator(basis, basis.states[:, x].astype(float))


def hopping_operator(basis: FockBasis, J: CouplingMatrix) -> SparseOperator:
    """sum_{x,y} J_xy a_x^* a_y with sqrt(n) matrix elements.

    Conserves total particle number, so it is block diagonal over the
    fixed-n sectors of a truncated basis.
    """
    if J.kind != HOPPING:
        raise ValueError("need a hopping matrix")
    Jm = J.entries
    xs, ys = np.nonzero(np.abs(Jm) > 0)
    rows, cols, vals = [], [], []
    states = basis.states
    index = basis.index
    for k in range(basis.dim):
        occ = states[k]
        for x, y in zip(xs, ys):
            ny = occ[y]
            if ny == 0:
                continue
            if x == y:
                rows.append(k)
                cols.append(k)
                vals.append(Jm[x, y] * ny)
                continue
            new = occ.astype(np.int64).copy()
            new[y] -= 1
            new[x] += 1
            j = index.get(tuple(int(v) for v in new))
            if j is None:
                continue
            amp = Jm[x, y] * np.sqrt(float(occ[x] + 1)) * np.sqrt(float(ny))
            rows.append(j)
            cols.append(k)
            vals.append(amp)
    m = sp.csr_matrix(
        (np.array(vals, dtype=complex), (rows, cols)), shape=(basis.dim, basis.dim)
    )
    return SparseOperator(basis, m, hermitian=True)


def interaction_operator(basis: FockBasis, V: CouplingMatrix) -> SparseOperator:
    """Normal-ordered density-density interaction (diagonal).

    Entry at occupation n: (1/2) sum_{x != y} V_xy n_x n_y
    + (1/2) sum_x V_xx n_x (n_x - 1).
    """
    if V.kind != INTERACTION:
        raise ValueError("need an interaction matrix")
    Vm = V.entries
    n = basis.states.astype(float)
    off = Vm - np.diag(np.diag(Vm))
    diag_terms = 0.5 * np.einsum("ki,ij,kj->k", n, off, n)
    onsite = 0.5 * (n * (n - 1.0)) @ np.diag(Vm)
    return diagonal_operator(basis, diag_terms + onsite)


def interaction_operator_q(
    basis: FockBasis, V_q: CouplingMatrix, q: int
) -> SparseOperator:
    """Generalized diagonal term (1/2) sum_{x,y} V_xy n_x^{q/2} n_y^{q/2}."""
    if q < 1:
        raise ValueError("q must be a positive integer")
    if V_q.kind != INTERACTION:
        raise ValueError("need an interaction matrix")
    nq = basis.states.astype(float) ** (q / 2.0)
    diag = 0.5 * np.einsum("ki,ij,kj->k", nq, V_q.entries, nq)
    return diagonal_operator(basis, diag)


def hamiltonian(
    basis: FockBasis,
    J: CouplingMatrix | None = None,
    V: CouplingMatrix | None = None,
    V_qs: list[tuple[CouplingMatrix, int]] | None = None,
) -> SparseOperator:
    """Assemble the Bose-Hubbard Hamiltonian from couplings."""
    m = sp.csr_matrix((basis.dim, basis.dim), dtype=complex)
    if J is not None:
        m = m + hopping_operator(basis, J).matrix
    if V is not None:
        m = m + interaction_operator(basis, V).matrix.astype(complex)
    for Vq, q in V_qs or []:
        m = m + interaction_operator_q(basis, Vq, q).matrix.astype(complex)
    return SparseOperator(basis, m, hermitian=True)


def restrict_hamiltonian(
    J: CouplingMatrix | None,
    V: CouplingMatrix | None,
    S: Region,
    basis: FockBasis,
) -> SparseOperator:
    """H_S: Hamiltonian with couplings zeroed outside S x S, on the full basis."""
    if len(S) == 0:
        raise ValueError("S must be nonempty")
    idx = S.indices()
    Jm = J.masked(idx) if J is not None else None
    Vm = V.masked(idx) if V is not None else None
    return hamiltonian(basis, Jm, Vm)


def mott_state(basis: FockBasis, filling: int = 1) -> QuantumState:
    """Product state with `filling` bosons on every site."""
    if filling < 1:
        raise ValueError("filling must be a positive integer")
    total = filling * basis.n_sites
    kind, n = basis.sector
    if kind == "fixed_n" and n != total:
        raise ValueError(f"sector holds {n} particles, Mott state needs {total}")
    if kind == "truncated" and n < total:
        raise ValueError(f"truncation {n} below Mott total {total}")
    return basis_vector(basis, (filling,) * basis.n_sites)


def shell_state(
    basis: FockBasis, X: Region, xi: float, occupations
) -> QuantumState:
    """Product Fock state whose shell X_{2 xi} \\ X is particle-free.

    `occupations` is the full occupation vector; placing any particle in
    the shell is an error.
    """
    occ = np.asarray(occupations, dtype=np.int64)
    if occ.shape != (basis.n_sites,):
        raise ValueError("occupation vector has wrong length")
    shell = fatten(X, 2.0 * xi).difference(X)
    shell_idx = shell.indices()
    if len(shell_idx) and occ[shell_idx].sum() > 0:
        raise ValueError("prescribed occupations populate the particle-free shell")
    return basis_vector(basis, occ)
