"""Finite lattice geometry: sites, distances, balls, fattened sets, annuli.

Sites are integer points in Z^d, so all pairwise squared distances are
integers and region membership tests can be done in exact arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product

import numpy as np

__all__ = [
    "Lattice",
    "Region",
    "chain",
    "grid",
    "ball",
    "fatten",
    "annulus",
    "region_distance",
]


class EmptyRegionError(ValueError):
    """Raised when an operation needs a nonempty region."""


@dataclass(frozen=True)
class Lattice:
    """Finite set of integer sites in Z^d with the Euclidean metric.

    Sites are stored in lexicographic order so that every operator matrix
    built on top of the lattice has a reproducible layout.
    """

    dimension: int
    coords: np.ndarray  # shape (n_sites, dimension), dtype int64

    def __post_init__(self):
        c = np.asarray(self.coords, dtype=np.int64)
        if c.ndim != 2 or c.shape[1] != self.dimension:
            raise ValueError(f"coords must have shape (n, {self.dimension})")
        order = np.lexsort(c.T[::-1])
        c = c[order]
        if len(np.unique(c, axis=0)) != len(c):
            raise ValueError("duplicate sites")
        c.setflags(write=False)
        object.__setattr__(self, "coords", c)

    def __len__(self) -> int:
        return self.coords.shape[0]

    def norms(self) -> np.ndarray:
        """Euclidean distance of every site from the origin."""
        return np.sqrt((self.coords.astype(float) ** 2).sum(axis=1))

    def sq_dist(self, i: int, j: int) -> int:
        d = self.coords[i] - self.coords[j]
        return int((d * d).sum())

    def dist(self, i: int, j: int) -> float:
        return float(np.sqrt(self.sq_dist(i, j)))

    def distance_matrix(self) -> np.ndarray:
        """|x - y| for all site pairs, shape (n, n)."""
        diff = self.coords[:, None, :] - self.coords[None, :, :]
        return np.sqrt((diff.astype(float) ** 2).sum(axis=2))

    def full_region(self) -> "Region":
        return Region(self, frozenset(range(len(self))))

    def diameter(self) -> float:
        if len(self) < 2:
            return 0.0
        return float(self.distance_matrix().max())


def chain(length: int, origin: int = 0) -> Lattice:
    """1D chain of `length` sites starting at `origin`."""
    if length < 1:
        raise ValueError("length must be >= 1")
    return Lattice(1, np.arange(origin, origin + length, dtype=np.int64)[:, None])


def centered_chain(length: int) -> Lattice:
    """1D chain roughly centered on the origin (sites -(L//2) .. L-1-L//2)."""
    lo = -(length // 2)
    return chain(length, origin=lo)


def grid(shape: tuple[int, ...], origin: tuple[int, ...] | None = None) -> Lattice:
    """Axis-aligned box in Z^d with the given side lengths."""
    d = len(shape)
    if origin is None:
        origin = (0,) * d
    pts = np.array(
        [tuple(o + i for o, i in zip(origin, idx)) for idx in product(*(range(s) for s in shape))],
        dtype=np.int64,
    )
    return Lattice(d, pts)


@dataclass(frozen=True)
class Region:
    """Subset of lattice sites, stored as a frozen set of site indices."""

    parent: Lattice
    members: frozenset[int] = field(default_factory=frozenset)

    def __post_init__(self):
        m = frozenset(int(i) for i in self.members)
        n = len(self.parent)
        if any(i < 0 or i >= n for i in m):
            raise ValueError("member index out of range")
        object.__setattr__(self, "members", m)

    def __len__(self) -> int:
        return len(self.members)

    def __contains__(self, i: int) -> bool:
        return i in self.members

    def indices(self) -> np.ndarray:
        """Members as a sorted integer array."""
        return np.array(sorted(self.members), dtype=np.int64)

    def complement(self) -> "Region":
        return Region(self.parent, frozenset(range(len(self.parent))) - self.members)

    def union(self, other: "Region") -> "Region":
        self._check_same_lattice(other)
        return Region(self.parent, self.members | other.members)

    def difference(self, other: "Region") -> "Region":
        self._check_same_lattice(other)
        return Region(self.parent, self.members - other.members)

    def issubset(self, other: "Region") -> bool:
        self._check_same_lattice(other)
        return self.members <= other.members

    def diameter(self) -> float:
        idx = self.indices()
        if len(idx) < 2:
            return 0.0
        c = self.parent.coords[idx].astype(float)
        diff = c[:, None, :] - c[None, :, :]
        return float(np.sqrt((diff**2).sum(axis=2)).max())

    def _check_same_lattice(self, other: "Region"):
        if self.parent is not other.parent and not np.array_equal(
            self.parent.coords, other.parent.coords
        ):
            raise ValueError("regions live on different lattices")


def region(lattice: Lattice, members) -> Region:
    return Region(lattice, frozenset(members))


def ball(lattice: Lattice, center, radius: float) -> Region:
    """All sites within Euclidean distance `radius` of `center`.

    The center may be any point in R^d, not necessarily a site.  For
    integer centers and radii the membership test is exact (compared as
    squared integers).
    """
    if radius < 0:
        raise ValueError("radius must be nonnegative")
    center = np.atleast_1d(np.asarray(center, dtype=float))
    if center.shape != (lattice.dimension,):
        raise ValueError(f"center must have {lattice.dimension} components")
    if float(radius).is_integer() and np.all(center == np.round(center)):
        ic = center.astype(np.int64)
        diff = lattice.coords - ic
        sq = (diff * diff).sum(axis=1)
        mask = sq <= int(radius) ** 2
    else:
        diff = lattice.coords.astype(float) - center
        sq = (diff**2).sum(axis=1)
        mask = sq <= float(radius) ** 2 + 1e-12
    return Region(lattice, frozenset(np.nonzero(mask)[0].tolist()))


def origin_ball(lattice: Lattice, radius: float) -> Region:
    """Ball around the coordinate origin."""
    return ball(lattice, np.zeros(lattice.dimension), radius)


def _dist_to_region(lattice: Lattice, X: Region) -> np.ndarray:
    """d_X(x) for every site x, as a float array."""
    if len(X) == 0:
        raise EmptyRegionError("distance to the empty region is undefined")
    xs = lattice.coords[X.indices()].astype(float)
    diff = lattice.coords[:, None, :].astype(float) - xs[None, :, :]
    return np.sqrt((diff**2).sum(axis=2)).min(axis=1)


def fatten(X: Region, xi: float) -> Region:
    """X_xi, all sites within distance xi of X.  Monotone in xi; xi=0 gives X."""
    if xi < 0:
        raise ValueError("xi must be nonnegative")
    lat = X.parent
    d = _dist_to_region(lat, X)
    mask = d <= float(xi) + 1e-12
    return Region(lat, frozenset(np.nonzero(mask)[0].tolist()))


def annulus(X: Region, xi: float, gamma1: float, gamma2: float) -> tuple[Region, Region]:
    """Inner and outer annular regions around the boundary at distance xi.

    outer = X_{(1+gamma2) xi} \\ X_{(1-gamma2) xi}, inner analogous with
    gamma1; inner is always contained in outer.
    """
    if not (0.0 <= gamma1 < gamma2 <= 1.0):
        raise ValueError("need 0 <= gamma1 < gamma2 <= 1")
    if xi <= 0:
        raise ValueError("xi must be positive")

    def _ann(g):
        big = fatten(X, (1 + g) * xi)
        small = fatten(X, (1 - g) * xi)
        return big.difference(small)

    return _ann(gamma1), _ann(gamma2)


def region_distance(X: Region, Y: Region) -> float:
    """min over pairs (x, y) in X x Y of the Euclidean distance."""
    if len(X) == 0 or len(Y) == 0:
        raise EmptyRegionError("distance between empty regions is undefined")
    X._check_same_lattice(Y)
    lat = X.parent
    a = lat.coords[X.indices()].astype(float)
    b = lat.coords[Y.indices()].astype(float)
    diff = a[:, None, :] - b[None, :, :]
    return float(np.sqrt((diff**2).sum(axis=2)).min())
