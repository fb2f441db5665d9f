import json

import numpy as np
import pytest

from ifsdim.dynamics import PointCloud, forward_orbit
from ifsdim.geometry import check_osc, check_sosc_mass
from ifsdim.model import PRESETS, OpenSetSpec, from_config, preset

from conftest import diagonal_system, line_system


def test_example1_osc_to_horizon():
    rep = check_osc(preset("example1"), horizon=50)
    assert rep.osc_ok
    assert len(rep.containment) == 50 and len(rep.disjointness) == 50 * 49 // 2
    assert rep.coverage == "verified to horizon" and rep.tail == "verified analytically"
    assert rep.horizon == 50


def test_example2_osc():
    rep = check_osc(preset("example2"))
    assert rep.osc_ok
    assert rep.tail == "none (finite system)"
    assert "sampled" in rep.methods["disjointness"]
    assert rep.methods["containment[3]"] == "exact-ball"


def test_identical_maps_fail_disjointness():
    s = line_system([0.5, 0.5], [0.0, 0.0], [0.5, 0.5], open_set=(0, 1))
    rep = check_osc(s)
    assert rep.disjointness == {(1, 2): False}
    assert all(rep.containment.values())
    assert not rep.osc_ok and rep.failures() == ["w_1(O) meets w_2(O)"]


def test_overlapping_radial_variant_is_detected():
    cfg = json.loads(json.dumps(PRESETS["example2"]))
    cfg["maps"][0]["translation"] = ["-3/10", 0]
    cfg["maps"][1]["translation"] = ["3/10", 0]
    rep = check_osc(from_config(cfg))
    assert rep.disjointness[(1, 2)] is False
    assert rep.disjointness[(3, 4)] is True


def test_radial_escape_breaks_containment():
    cfg = json.loads(json.dumps(PRESETS["example2"]))
    cfg["maps"][0]["translation"] = ["-7/10", 0]
    rep = check_osc(from_config(cfg))
    assert rep.containment[1] is False


def test_cantor_and_sierpinski():
    assert check_osc(preset("cantor3")).osc_ok
    assert check_osc(preset("sierpinski-like")).osc_ok


def test_horizon_monotonicity():
    short = check_osc(preset("example1"), horizon=10)
    long = check_osc(preset("example1"), horizon=50)
    for i, ok in short.containment.items():
        assert long.containment[i] == ok
    for pair, ok in short.disjointness.items():
        assert long.disjointness[pair] == ok


def _raster_flags(sys, O: OpenSetSpec, side=1000):
    """Brute-force flags from a dense grid of cell centres inside O."""
    lo = np.array([float(v) for v in O.lower])
    hi = np.array([float(v) for v in O.upper])
    u = (np.arange(side) + 0.5) / side
    gx, gy = np.meshgrid(lo[0] + u * (hi[0] - lo[0]), lo[1] + u * (hi[1] - lo[1]))
    grid = np.column_stack([gx.ravel(), gy.ravel()])
    maps = sys.maps
    images = [m.apply(grid) for m in maps]
    contain = {i + 1: bool(O.interior_contains(img).all()) for i, img in enumerate(images)}
    disjoint = {}
    for a in range(len(maps)):
        for b in range(a + 1, len(maps)):
            hit = O.interior_contains(maps[b].inverse(images[a])).any()
            disjoint[(a + 1, b + 1)] = not bool(hit)
    return contain, disjoint


@pytest.mark.parametrize("seed", range(6))
def test_exact_box_agrees_with_raster(seed):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(2, 4))
    maps = []
    for _ in range(k):
        f = tuple(float(v) for v in rng.choice([0.25, 0.5, 0.75], 2))
        t = tuple(float(v) for v in rng.integers(0, 7, 2) / 8)
        maps.append((f, t))
    p = [1 / k] * k
    p[-1] = 1 - sum(p[:-1])
    s = diagonal_system(maps, p, (-2, -2), (3, 3), open_set=((0, 0), (1, 1)))
    rep = check_osc(s)
    contain, disjoint = _raster_flags(s, s.open_set)
    assert rep.containment == contain
    assert rep.disjointness == disjoint


def test_sosc_mass_examples():
    for name in ("example1", "example2"):
        s = preset(name)
        cloud = forward_orbit(s, n=100_000, seed=1)
        m = check_sosc_mass(s, None, cloud)
        assert m.positive
        assert m.upper >= 1.0 - 3 * np.sqrt(1e-5) and m.fraction > 0.999
        rep = check_osc(s)
        rep.positive_mass = m
        assert rep.sosc_ok


def test_sosc_mass_outside_cloud():
    s = preset("example2")
    cloud = PointCloud(np.full((100, 2), 5.0))
    m = check_sosc_mass(s, None, cloud)
    assert m.fraction == 0 and not m.positive


def test_report_serializes():
    d = check_osc(preset("example2")).to_dict()
    json.dumps(d)
    assert d["schema"] == "ifsdim.osc/1" and d["osc"] is True
