import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bhlab.lattice import (
    EmptyRegionError,
    Region,
    annulus,
    ball,
    centered_chain,
    chain,
    fatten,
    grid,
    region,
    region_distance,
)


def brute_ball(lat, center, radius):
    center = np.asarray(center, dtype=float)
    out = set()
    for i, c in enumerate(lat.coords):
        if np.linalg.norm(c - center) <= radius + 1e-12:
            out.add(i)
    return out


class TestBall:
    def test_chain_radius_two(self):
        lat = chain(10)
        assert ball(lat, [0], 2).members == {0, 1, 2}

    def test_radius_zero_singleton(self):
        lat = chain(10)
        assert ball(lat, [4], 0).members == {4}

    def test_2d_small_balls(self):
        lat = grid((5, 5))
        # radius 1.5 also catches the diagonal neighbours at distance sqrt(2)
        got = ball(lat, (2, 2), 1.5).members
        assert got == brute_ball(lat, (2, 2), 1.5)
        assert len(got) == 9
        # the 5-site plus-shape needs a radius below sqrt(2)
        plus = ball(lat, (2, 2), 1.2).members
        assert plus == brute_ball(lat, (2, 2), 1.2)
        assert len(plus) == 5

    def test_negative_radius_rejected(self):
        with pytest.raises(ValueError):
            ball(chain(3), [0], -1)

    def test_empty_allowed(self):
        assert len(ball(chain(3), [100], 1)) == 0


class TestFatten:
    def test_chain_interior(self):
        lat = chain(10)
        assert fatten(region(lat, [3]), 1).members == {2, 3, 4}

    def test_saturation(self):
        lat = chain(6)
        full = lat.full_region()
        assert fatten(full, 3.7).members == full.members

    def test_fractional_radius(self):
        lat = chain(10)
        assert fatten(region(lat, [0]), 2.5).members == {0, 1, 2}

    def test_zero_is_identity(self):
        lat = grid((3, 3))
        X = region(lat, [0, 4])
        assert fatten(X, 0).members == X.members

    def test_empty_region_errors(self):
        with pytest.raises(EmptyRegionError):
            fatten(region(chain(4), []), 1.0)

    def test_agrees_with_ball_on_singletons(self):
        lat = grid((4, 4))
        for i in (0, 5, 10):
            for r in (0.0, 1.0, 1.5, 2.0):
                got = fatten(region(lat, [i]), r).members
                want = ball(lat, lat.coords[i], r).members
                assert got == want


@settings(max_examples=60, deadline=None)
@given(
    seeds=st.sets(st.integers(min_value=0, max_value=9), min_size=1),
    xi1=st.floats(min_value=0, max_value=5, allow_nan=False),
    xi2=st.floats(min_value=0, max_value=5, allow_nan=False),
)
def test_fatten_monotone(seeds, xi1, xi2):
    lat = chain(10)
    X = region(lat, seeds)
    lo, hi = sorted((xi1, xi2))
    assert fatten(X, lo).issubset(fatten(X, hi))


@settings(max_examples=40, deadline=None)
@given(
    a=st.sets(st.integers(min_value=0, max_value=11), min_size=1),
    b=st.sets(st.integers(min_value=0, max_value=11), min_size=1),
    c=st.sets(st.integers(min_value=0, max_value=11), min_size=1),
)
def test_region_distance_triangle(a, b, c):
    lat = chain(12)
    X, Y, Z = region(lat, a), region(lat, b), region(lat, c)
    assert region_distance(X, Z) <= (
        region_distance(X, Y) + Y.diameter() + region_distance(Y, Z) + 1e-12
    )


class TestAnnulus:
    def test_gamma_one_outer(self):
        lat = chain(10)
        X = region(lat, [4])
        inner, outer = annulus(X, 3.0, 0.5, 1.0)
        # outer = X_6 \ X_0: all sites with 0 < d(x, X) <= 6
        assert outer.members == {i for i in range(10) if 0 < abs(i - 4) <= 6}

    def test_equal_gammas_forbidden(self):
        with pytest.raises(ValueError):
            annulus(region(chain(10), [4]), 3.0, 0.5, 0.5)

    def test_two_site_core(self):
        lat = chain(10)
        X = region(lat, [4, 5])
        inner, _ = annulus(X, 2.0, 0.5, 1.0)
        want = fatten(X, 3.0).difference(fatten(X, 1.0))
        assert inner.members == want.members

    def test_inner_subset_of_outer(self):
        lat = chain(12)
        X = region(lat, [5, 6])
        inner, outer = annulus(X, 3.0, 0.3, 0.9)
        assert inner.issubset(outer)


class TestRegionDistance:
    def test_chain_endpoints(self):
        lat = chain(10)
        assert region_distance(region(lat, [0]), region(lat, [5])) == 5.0

    def test_overlap_zero(self):
        lat = chain(10)
        assert region_distance(region(lat, [1, 2]), region(lat, [2, 3])) == 0.0

    def test_pairwise_min(self):
        lat = chain(10)
        assert region_distance(region(lat, [0, 1]), region(lat, [7, 9])) == 6.0

    def test_empty_errors(self):
        lat = chain(4)
        with pytest.raises(EmptyRegionError):
            region_distance(region(lat, []), region(lat, [0]))


class TestLatticeBasics:
    def test_deterministic_ordering(self):
        a = grid((3, 2))
        b = grid((3, 2))
        assert np.array_equal(a.coords, b.coords)

    def test_duplicate_sites_rejected(self):
        from bhlab.lattice import Lattice

        with pytest.raises(ValueError):
            Lattice(1, np.array([[0], [0]]))

    def test_centered_chain_contains_origin(self):
        lat = centered_chain(9)
        assert lat.coords.min() == -4 and lat.coords.max() == 4

    def test_complement_involution(self):
        lat = chain(8)
        X = region(lat, [0, 3, 5])
        assert X.complement().complement().members == X.members

    def test_min_separation(self):
        lat = grid((3, 3))
        d = lat.distance_matrix()
        off = d[~np.eye(len(lat), dtype=bool)]
        assert off.min() >= 1.0
