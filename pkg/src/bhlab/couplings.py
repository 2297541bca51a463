"""Long-range coupling matrices and their decay moments.

The generator uses the weight (1 + |x-y|)^(-alpha), so that the decay
constant sup |M_xy| (1 + |x-y|)^alpha recovers the amplitude exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lattice import Lattice

__all__ = [
    "CouplingMatrix",
    "power_law_couplings",
    "kappa",
    "kappa_nu",
    "decay_constant",
]

HOPPING = "hopping"
INTERACTION = "interaction"


@dataclass(frozen=True)
class CouplingMatrix:
    """Dense |Lambda| x |Lambda| coupling matrix tied to a lattice.

    Hopping matrices are Hermitian (complex allowed); interaction matrices
    are real symmetric.
    """

    parent: Lattice
    kind: str
    entries: np.ndarray
    alpha_hint: float | None = None

    def __post_init__(self):
        n = len(self.parent)
        m = np.asarray(self.entries)
        if m.shape != (n, n):
            raise ValueError(f"entries must be {n}x{n}")
        if self.kind == HOPPING:
            m = np.asarray(m, dtype=complex)
            if not np.allclose(m, m.conj().T, atol=1e-12):
                raise ValueError("hopping matrix must be Hermitian")
        elif self.kind == INTERACTION:
            m = np.asarray(m, dtype=float)
            if not np.allclose(m, m.T, atol=1e-12):
                raise ValueError("interaction matrix must be symmetric")
        else:
            raise ValueError(f"unknown kind {self.kind!r}")
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "entries", m)

    def masked(self, site_indices) -> "CouplingMatrix":
        """Couplings zeroed outside S x S for a site index set S."""
        keep = np.zeros(len(self.parent), dtype=bool)
        keep[np.asarray(list(site_indices), dtype=int)] = True
        m = self.entries * np.outer(keep, keep)
        return CouplingMatrix(self.parent, self.kind, m, self.alpha_hint)


def power_law_couplings(
    lattice: Lattice,
    kind: str,
    alpha: float,
    amplitude: float,
    range_cap: float | None = None,
    onsite: float = 0.0,
) -> CouplingMatrix:
    """Couplings amplitude * (1 + |x-y|)^(-alpha) off the diagonal.

    `range_cap` zeroes entries with |x-y| > range_cap (finite-range mode).
    `onsite` sets the diagonal for interaction matrices (Hubbard U);
    hopping diagonals stay zero.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    dist = lattice.distance_matrix()
    m = amplitude * (1.0 + dist) ** (-alpha)
    np.fill_diagonal(m, 0.0)
    if range_cap is not None:
        m[dist > range_cap + 1e-12] = 0.0
    if kind == INTERACTION and onsite != 0.0:
        np.fill_diagonal(m, onsite)
    return CouplingMatrix(lattice, kind, m, alpha_hint=alpha)


def kappa(J: CouplingMatrix) -> float:
    """First moment of the hopping matrix: sup_x sum_y |J_xy| |x-y|."""
    if J.kind != HOPPING:
        raise ValueError("kappa is defined for hopping matrices")
    dist = J.parent.distance_matrix()
    return float((np.abs(J.entries) * dist).sum(axis=1).max())


def kappa_nu(
    J: CouplingMatrix,
    V: CouplingMatrix | None = None,
    nu: float = 0,
) -> float:
    """sup_x sum_y (|J_xy| + |V_xy|) |x-y|^(nu+1).

    `nu` may be any nonnegative real; with V absent and nu = epsilon this
    is the hopping-only moment used in the remainder functionals.
    """
    if nu < 0:
        raise ValueError("nu must be nonnegative")
    if V is not None and not np.array_equal(V.parent.coords, J.parent.coords):
        raise ValueError("J and V live on different lattices")
    dist = J.parent.distance_matrix()
    w = np.abs(J.entries)
    if V is not None:
        w = w + np.abs(V.entries)
    with np.errstate(divide="ignore"):
        powd = np.where(dist > 0, dist ** (nu + 1.0), 0.0)
    return float((w * powd).sum(axis=1).max())


def decay_constant(M: CouplingMatrix, alpha: float) -> float:
    """sup over pairs of |M_xy| (1 + |x-y|)^alpha."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    dist = M.parent.distance_matrix()
    return float((np.abs(M.entries) * (1.0 + dist) ** alpha).max())
