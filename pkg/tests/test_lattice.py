"""Lattice construction, chamfer distance fields, smoothed weights."""

import heapq

import numpy as np
import pytest

from magspec import build_lattice, distance_to_set, smooth_distance
from magspec.errors import EmptyMaskError, InvalidSpecError

TWO_PI = 2 * np.pi


def test_torus_counts_and_spacing():
    lat = build_lattice("torus", TWO_PI, TWO_PI, 64, 64)
    assert lat.n_sites == 4096
    assert lat.spacing_x == pytest.approx(TWO_PI / 64)
    assert lat.n_edges == 2 * 4096
    assert lat.n_plaquettes == 4096


def test_rectangle_interior_sites():
    lat = build_lattice("rectangle_dirichlet", 1.0, 1.0, 4, 4)
    assert lat.n_sites == 9
    # every interior site has at most 4 in-domain neighbors; count edges
    degree = np.zeros(lat.n_sites)
    np.add.at(degree, lat.edge_src, 1)
    np.add.at(degree, lat.edge_dst, 1)
    assert degree.max() <= 4
    # center of the domain is the coordinate origin
    assert np.allclose(lat.positions.mean(axis=0), 0.0)


def test_invalid_specs_rejected():
    with pytest.raises(InvalidSpecError):
        build_lattice("torus", 1.0, 1.0, 0, 8)
    with pytest.raises(InvalidSpecError):
        build_lattice("torus", -1.0, 1.0, 8, 8)
    with pytest.raises(InvalidSpecError):
        build_lattice("klein_bottle", 1.0, 1.0, 8, 8)


def test_distance_single_source_neighbors():
    lat = build_lattice("torus", 1.0, 1.0, 10, 10)
    h = lat.spacing_x
    mask = np.zeros(lat.n_sites, dtype=bool)
    center = lat.site_index(5, 5)
    mask[center] = True
    d = distance_to_set(lat, mask).values
    assert d[center] == 0.0
    assert d[lat.site_index(6, 5)] == pytest.approx(h)
    assert d[lat.site_index(6, 6)] == pytest.approx(h * np.sqrt(2))
    assert d[lat.site_index(7, 5)] == pytest.approx(2 * h)


def test_distance_empty_mask_rejected():
    lat = build_lattice("torus", 1.0, 1.0, 8, 8)
    with pytest.raises(EmptyMaskError):
        distance_to_set(lat, np.zeros(lat.n_sites, dtype=bool))


def test_distance_symmetric_between_singletons():
    lat = build_lattice("rectangle_dirichlet", 1.0, 1.0, 12, 12)
    i, j = lat.site_index(2, 3), lat.site_index(8, 6)
    for a, bb in [(i, j), (j, i)]:
        mask = np.zeros(lat.n_sites, dtype=bool)
        mask[a] = True
        if a == i:
            d_ij = distance_to_set(lat, mask).values[bb]
        else:
            d_ji = distance_to_set(lat, mask).values[bb]
    assert d_ij == pytest.approx(d_ji)


def _brute_dijkstra(lat, mask):
    """Reference multi-source Dijkstra over the same 8-neighbor graph."""
    snx, sny = lat.site_nx, lat.site_ny
    hx, hy = lat.spacing_x, lat.spacing_y
    hd = np.hypot(hx, hy)
    steps = [(1, 0, hx), (-1, 0, hx), (0, 1, hy), (0, -1, hy),
             (1, 1, hd), (1, -1, hd), (-1, 1, hd), (-1, -1, hd)]
    dist = np.full(lat.n_sites, np.inf)
    heap = []
    for s in np.flatnonzero(mask):
        dist[s] = 0.0
        heapq.heappush(heap, (0.0, int(s)))
    while heap:
        d0, i = heapq.heappop(heap)
        if d0 > dist[i]:
            continue
        ix, iy = i % snx, i // snx
        for dx, dy, w in steps:
            jx, jy = ix + dx, iy + dy
            if lat.is_torus:
                jx %= snx
                jy %= sny
            elif not (0 <= jx < snx and 0 <= jy < sny):
                continue
            j = jy * snx + jx
            if d0 + w < dist[j]:
                dist[j] = d0 + w
                heapq.heappush(heap, (d0 + w, j))
    return dist


@pytest.mark.parametrize("kind", ["torus", "rectangle_dirichlet"])
def test_distance_matches_brute_force(kind):
    rng = np.random.default_rng(3)
    lat = build_lattice(kind, 2.0, 1.5, 18, 14)
    for _ in range(3):
        mask = rng.random(lat.n_sites) < 0.05
        if not mask.any():
            mask[0] = True
        got = distance_to_set(lat, mask).values
        ref = _brute_dijkstra(lat, mask)
        assert np.allclose(got, ref, atol=1e-12)


def test_distance_lipschitz_along_edges():
    lat = build_lattice("torus", 3.0, 3.0, 24, 24)
    mask = np.zeros(lat.n_sites, dtype=bool)
    mask[[0, 301]] = True
    d = distance_to_set(lat, mask).values
    lengths = np.where(lat.edge_axis == 0, lat.spacing_x, lat.spacing_y)
    jump = np.abs(d[lat.edge_src] - d[lat.edge_dst])
    assert np.all(jump <= 1.08 * lengths + 1e-12)


def test_smooth_distance_radius_rule_and_bound():
    # p = 16, h = 1/64: rho = 1/8 and |phi - d| <= 1/8 sitewise
    lat = build_lattice("torus", 1.0, 1.0, 64, 64)
    mask = np.zeros(lat.n_sites, dtype=bool)
    mask[lat.site_index(32, 32)] = True
    d = distance_to_set(lat, mask)
    w = smooth_distance(d, 16)
    assert w.smoothing_radius == pytest.approx(1 / 8)
    assert not w.degraded
    assert np.abs(w.values - d.values).max() <= 1 / 8 + 1e-12
    assert w.values.min() >= d.values.min() - 1e-12
    assert w.values.max() <= d.values.max() + 1e-12


def test_smooth_distance_flat_region_unchanged():
    lat = build_lattice("torus", 1.0, 1.0, 32, 32)
    mask = np.zeros(lat.n_sites, dtype=bool)
    mask[lat.site_index(0, 0)] = True
    d = distance_to_set(lat, mask)
    w = smooth_distance(d, 64)  # rho = 1/16, well resolved at h = 1/32
    assert not w.degraded
    # far from the source the cone is locally linear; at the antipode the
    # field is flat enough that smoothing moves it by far less than rho
    far = d.values > 0.4
    assert np.abs(w.values[far] - d.values[far]).max() < w.smoothing_radius


def test_smooth_distance_gradient_bound_on_cone():
    lat = build_lattice("rectangle_dirichlet", 2.0, 2.0, 64, 64)
    mask = np.zeros(lat.n_sites, dtype=bool)
    center = np.argmin(np.hypot(*lat.positions.T))
    mask[center] = True
    d = distance_to_set(lat, mask)
    w = smooth_distance(d, 25)
    lengths = np.where(lat.edge_axis == 0, lat.spacing_x, lat.spacing_y)
    jump = np.abs(w.values[lat.edge_src] - w.values[lat.edge_dst])
    assert np.all(jump <= 1.2 * lengths + 1e-12)


def test_smooth_distance_degraded_mode():
    lat = build_lattice("torus", 1.0, 1.0, 8, 8)
    mask = np.zeros(lat.n_sites, dtype=bool)
    mask[0] = True
    d = distance_to_set(lat, mask)
    w = smooth_distance(d, 10**6)  # rho = 5e-4 < h = 1/8
    assert w.degraded
    assert np.array_equal(w.values, d.values)
