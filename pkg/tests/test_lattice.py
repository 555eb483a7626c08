import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from localgibbs.lattice import (
    Lattice,
    Region,
    ball,
    boundary_distance,
    displacement_ordered_ball,
    graph_distance,
)


def test_ring_antipodal_distance():
    lat = Lattice([12])
    assert graph_distance(lat, 0, 6) == 6


def test_2d_periodic_wraparound():
    lat = Lattice([3, 3])
    assert graph_distance(lat, lat.site((0, 0)), lat.site((2, 2))) == 2


def test_distance_identity():
    lat = Lattice([5, 4], periodic=[True, False])
    for a in lat.sites():
        assert graph_distance(lat, a, a) == 0


def test_ball_radius_zero_and_one():
    lat = Lattice([8])
    assert ball(lat, 3, 0).sites == (3,)
    assert ball(lat, 0, 1).sites == (0, 1, 7)
    open2d = Lattice([5, 5], periodic=False)
    center = open2d.site((2, 2))
    assert len(ball(open2d, center, 1)) == 5  # von Neumann neighborhood


def test_ball_monotone_and_saturating():
    lat = Lattice([4, 3], periodic=[True, False])
    for a in (0, 5, 11):
        sizes = [len(ball(lat, a, r)) for r in range(lat.diameter + 2)]
        assert sizes == sorted(sizes)
        assert sizes[lat.diameter] == lat.n_sites


def test_boundary_distance_examples():
    lat = Lattice([8], periodic=False)
    assert boundary_distance(lat, Region([0])) == 1
    # enumerate distances to both exterior ends: min(5, 4)
    assert boundary_distance(lat, Region([4])) == 4
    assert boundary_distance(Lattice([8]), Region([3])) == math.inf


def test_boundary_distance_errors():
    lat = Lattice([4], periodic=False)
    with pytest.raises(ValueError):
        boundary_distance(lat, Region([]))


def test_boundary_distance_vs_ball():
    # smallest r such that the ball reaches a site adjacent to the exterior
    # equals boundary_distance - 1
    lat = Lattice([9], periodic=False)
    exterior_adjacent = {0, 8}
    for a in lat.sites():
        d = boundary_distance(lat, Region([a]))
        smallest = next(
            r for r in range(lat.diameter + 1)
            if exterior_adjacent & set(ball(lat, a, r).sites)
        )
        assert smallest == d - 1


@settings(max_examples=30, deadline=None)
@given(
    extents=st.lists(st.integers(2, 4), min_size=1, max_size=3),
    periodic=st.booleans(),
)
def test_metric_properties_exhaustive(extents, periodic):
    lat = Lattice(extents, periodic)
    if lat.n_sites > 36:
        return
    n = lat.n_sites
    d = np.array([[graph_distance(lat, a, b) for b in range(n)] for a in range(n)])
    assert np.array_equal(d, d.T)
    assert np.all(np.diag(d) == 0)
    for c in range(n):  # triangle inequality by exhaustion
        assert np.all(d <= d[:, [c]] + d[[c], :])


def test_region_canonical_order():
    r = Region([5, 1, 3, 1])
    assert r.sites == (1, 3, 5)
    assert r.index(3) == 1
    assert 3 in r and 2 not in r


def test_displacement_ordering_translation_covariant():
    lat = Lattice([8])
    for a in lat.sites():
        disp = displacement_ordered_ball(lat, a, 1)
        assert disp == ((a - 1) % 8, a, (a + 1) % 8)


def test_site_index_round_trip():
    lat = Lattice([3, 4, 2], periodic=False)
    for a in lat.sites():
        assert lat.site(lat.coords(a)) == a
    with pytest.raises(ValueError):
        graph_distance(lat, 0, lat.n_sites)
