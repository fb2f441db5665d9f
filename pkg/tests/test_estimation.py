import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ifsdim import _backend
from ifsdim.dynamics import forward_orbit
from ifsdim.estimation import (
    BallIndex,
    InsufficientData,
    build_index,
    dimension_profile,
    dyadic_radii,
    local_dimension,
    squared_distances,
)
from ifsdim.model import preset

from conftest import line_system

BACKENDS = sorted(_backend.available())


def brute_count(points, x, r):
    """Independent oracle: numpy broadcasting, no grid."""
    return int((((points - np.asarray(x)) ** 2).sum(axis=1) <= r * r).sum())


def test_unit_square_corners():
    idx = build_index(np.array([[0, 0], [1, 0], [0, 1], [1, 1]], float), r_min=0.1)
    assert idx.count((0.5, 0.5), 0.8) == 4
    assert idx.count((0.5, 0.5), 0.7) == 0
    assert idx.count((0, 0), 0.0) == 1


def test_bad_arguments():
    with pytest.raises(ValueError):
        BallIndex(np.zeros((3, 2)), r_min=0)
    with pytest.raises(ValueError):
        BallIndex(np.zeros((0, 2)), r_min=1)


@pytest.mark.parametrize("backend", BACKENDS)
def test_grid_equals_exhaustive(backend, monkeypatch):
    monkeypatch.setattr(_backend, "kernels", _backend.available()[backend])
    rng = np.random.default_rng(7)
    pts = forward_orbit(preset("example2"), n=10_000, seed=3).points
    grid = BallIndex(pts, r_min=1e-3)
    full = BallIndex(pts, r_min=1e-3, mode="exhaustive")
    for _ in range(100):
        x = pts[rng.integers(len(pts))] if rng.random() < 0.5 else rng.uniform(-1.2, 1.2, 2)
        radii = np.concatenate([[0.0], rng.uniform(0, 2.5, 5), dyadic_radii(1.0, 12)])
        assert np.array_equal(grid.count_many(x, radii), full.count_many(x, radii))
        assert grid.count(x, radii[3]) == brute_count(pts, x, radii[3])


def test_boundary_distances_are_counted_identically():
    # points exactly on the sphere of radius r in floating arithmetic
    pts = np.array([[0.0, 0.0], [0.3, 0.4], [0.1, 0.2], [-0.6, 0.8]])
    idx = BallIndex(pts, r_min=0.01)
    for x in pts:
        d = np.sqrt(squared_distances(pts, x))
        for r in d:
            assert idx.count(x, r) == int((squared_distances(pts, x) <= r * r).sum())


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31), st.floats(1e-4, 0.5), st.integers(1, 3))
def test_index_exact_in_any_dimension(seed, r_min, d):
    rng = np.random.default_rng(seed)
    pts = rng.uniform(0, 1, (500, d)) ** 2
    idx = BallIndex(pts, r_min=r_min)
    x = rng.uniform(-0.1, 1.1, d)
    radii = np.sort(rng.uniform(0, 1, 6))
    counts = idx.count_many(x, radii)
    assert [brute_count(pts, x, r) for r in radii] == counts.tolist()
    assert (np.diff(counts) >= 0).all()


@pytest.mark.parametrize("k", [-3, 1, 5])
def test_scale_equivariance(k):
    lam = 2.0**k
    pts = forward_orbit(preset("sierpinski-like"), n=20_000, seed=1).points
    a = BallIndex(pts, r_min=1e-3)
    b = BallIndex(pts * lam, r_min=1e-3 * lam)
    radii = dyadic_radii(0.2, 10)
    for x in pts[:20]:
        assert np.array_equal(a.count_many(x, radii), b.count_many(x * lam, radii * lam))
        sa = local_dimension(a, x, radii)
        sb = local_dimension(b, x * lam, radii * lam)
        assert sa.slope == pytest.approx(sb.slope, abs=1e-12)


def test_uniform_square_slope():
    pts = np.random.default_rng(0).uniform(0, 1, (10**6, 2))
    idx = build_index(pts, r_min=1e-3)
    est = local_dimension(idx, (0.5, 0.5), dyadic_radii(math.sqrt(2) / 8, 40), min_count=50)
    assert est.slope == pytest.approx(2.0, abs=0.1)


def test_point_mass_slope_zero():
    idx = build_index(np.full((1000, 2), 0.25), r_min=1e-3)
    est = local_dimension(idx, (0.25, 0.25), dyadic_radii(1.0, 10))
    assert est.slope == 0 and est.stderr == 0
    prof = dimension_profile(idx, n_centers=1)
    assert prof.quantiles == {"q10": 0.0, "q50": 0.0, "q90": 0.0}


def test_local_dimension_preconditions():
    idx = build_index(np.random.default_rng(1).uniform(size=(200, 2)), r_min=0.01)
    with pytest.raises(ValueError):
        local_dimension(idx, (0.5, 0.5), [0.1, 0.2, 0.05])
    with pytest.raises(ValueError):
        local_dimension(idx, (0.5, 0.5), [0.4, 0.2, 0.1], min_count=10)
    with pytest.raises(InsufficientData):
        local_dimension(idx, (0.5, 0.5), dyadic_radii(0.05, 10))


def test_sierpinski_profile():
    cloud = forward_orbit(preset("sierpinski-like"), n=10**6, seed=0)
    prof = dimension_profile(build_index(cloud, 1e-4), (math.log(3) / math.log(2),) * 2)
    assert abs(prof.quantiles["q50"] - math.log(3) / math.log(2)) < 0.1


def test_dyadic_line_profile():
    s = line_system([0.5, 0.5], [0.0, 0.5], [0.5, 0.5])
    cloud = forward_orbit(s, n=200_000, seed=2)
    prof = dimension_profile(build_index(cloud, 1e-5), (1.0, 1.0))
    assert 0.9 <= prof.quantiles["q50"] <= 1.1
    assert prof.band == (1.0, 1.0)


def test_profile_deterministic_and_thread_independent():
    cloud = forward_orbit(preset("example2"), n=100_000, seed=0)
    idx = build_index(cloud, 1e-4)
    a = dimension_profile(idx, n_centers=50, seed=3)
    b = dimension_profile(idx, n_centers=50, seed=3, workers=4)
    assert np.array_equal(a.slopes, b.slopes) and np.array_equal(a.centers, b.centers)


def test_edge_margin_on_selected_sides():
    s = preset("example1")
    cloud = forward_orbit(s, n=50_000, seed=0)
    idx = build_index(cloud, 1e-4)
    prof = dimension_profile(idx, n_centers=50, edge_margin=s.space.unbounded_sides())
    r0 = prof.window["r0"]
    assert (prof.centers[:, 0] <= idx.hi[0] - r0).all()
    assert prof.window["edge_margin"] == [[0, 1], [0, 0]]


def test_profile_csv(tmp_path):
    cloud = forward_orbit(preset("sierpinski-like"), n=20_000, seed=0)
    prof = dimension_profile(build_index(cloud, 1e-4), n_centers=10, min_count=20)
    path = tmp_path / "prof.csv"
    prof.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "x1,x2,slope,stderr,radii_used"
    assert len(lines) == 1 + len(prof.slopes)
