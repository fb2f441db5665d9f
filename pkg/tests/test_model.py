import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ifsdim.dynamics import forward_orbit
from ifsdim.model import (
    PRESETS,
    ConfigError,
    apply_map,
    from_config,
    load_config,
    preset,
    translate_system,
    validate,
)
from ifsdim.moments import dimension_bounds

from conftest import diagonal_system, line_system


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_presets_validate(name):
    rep = validate(preset(name))
    assert rep.ok, rep.to_dict()


def test_normalization_violation():
    s = line_system([0.5, 0.5], [0.0, 0.5], [0.5, 0.6])
    codes = [v.code for v in validate(s).violations]
    assert "probability-normalization" in codes


def test_declared_lipschitz_violation():
    cfg = {
        "space": {"kind": "box", "lower": [0, 0], "upper": [1, 1]},
        "maps": [{"kind": "affine-diagonal", "factors": [0.5, 0.25], "translation": [0, 0],
                  "gamma": 0.25, "Gamma": 0.4}],
        "probabilities": [1],
    }
    codes = [v.code for v in validate(from_config(cfg)).violations]
    assert "lipschitz-constant" in codes


def test_parametric_family_needs_tail_mass():
    cfg = json.loads(json.dumps(PRESETS["example1"]))
    del cfg["probabilities"]["tail"]
    codes = [v.code for v in validate(from_config(cfg)).violations]
    assert "missing-tail-mass" in codes


def test_map_leaving_space_is_reported():
    s = line_system([0.5], [0.75], [1.0])
    codes = [v.code for v in validate(s).violations]
    assert "map-into-space" in codes


def test_apply_map_examples():
    e1, e2 = preset("example1"), preset("example2")
    assert np.allclose(apply_map(e1, 1, (0, 0)), (0, 0), atol=0)
    assert np.allclose(apply_map(e1, 2, (0, 0)), (1, 1 / 3), rtol=0, atol=1e-15)
    assert np.allclose(apply_map(e2, 3, (0, 0)), (0, 2 / 3), rtol=0, atol=1e-15)


def test_preset_values():
    e1, e2 = preset("example1"), preset("example2")
    assert e1.probabilities.p(3) == 0.125
    assert float(e2.maps[1].Gamma) == 1.25
    assert [float(e2.maps[k].gamma) for k in range(4)] == [0.25, 0.25, 1 / 3, 1 / 3]
    assert [float(v) for v in e2.probabilities.values] == [0.1, 0.1, 0.4, 0.4]
    m = e1.map(4)
    assert float(m.gamma) == pytest.approx(8 / 81)
    assert float(m.Gamma) == pytest.approx(8 / 81 + 0.4)
    c3 = preset("cantor3")
    assert [float(m.factors[0]) for m in c3.maps] == pytest.approx([1 / 3, 1 / 3])
    assert [float(m.translation[0]) for m in c3.maps] == pytest.approx([0, 2 / 3])


def test_example2_radial_ratios_within_declared_constants():
    m = preset("example2").map(1)
    sub = np.random.default_rng(0)
    x = sub.uniform(-0.7, 0.7, (20_000, 2))
    y = sub.uniform(-0.7, 0.7, (20_000, 2))
    ratio = np.linalg.norm(m.apply(x) - m.apply(y), axis=1) / np.linalg.norm(x - y, axis=1)
    assert ratio.min() >= 0.25 * (1 - 1e-9)
    assert ratio.max() <= 1.25 * (1 + 1e-9)


def test_radial_inverse_roundtrip():
    m = preset("example2").map(2)
    pts = np.random.default_rng(1).uniform(-0.7, 0.7, (500, 2))
    pts = pts[np.linalg.norm(pts, axis=1) < 1]
    assert np.abs(m.inverse(m.apply(pts)) - pts).max() < 1e-12


def test_config_roundtrip(tmp_path):
    for name in PRESETS:
        s = preset(name)
        path = tmp_path / f"{name}.json"
        path.write_text(json.dumps(s.to_config()))
        t = load_config(path)
        assert t.name == s.name
        for i, m in s.first_maps(5):
            assert np.array_equal(m.apply(np.array([[0.1, 0.2][: s.dim]])),
                                  t.map(i).apply(np.array([[0.1, 0.2][: s.dim]])))


def test_preset_reference_config():
    assert from_config({"preset": "cantor3"}).name == "cantor3"


@pytest.mark.parametrize("cfg", [
    [],
    {"space": {"kind": "box", "lower": [0], "upper": [1]}},
    {"space": {"kind": "torus"}, "maps": [], "probabilities": [1]},
    {"space": {"kind": "box", "lower": [0], "upper": [1]}, "probabilities": [1],
     "maps": [{"kind": "mobius", "translation": [0], "gamma": 1, "Gamma": 1}]},
])
def test_ill_formed_configs(cfg):
    with pytest.raises(ConfigError):
        from_config(cfg)


def test_unreadable_config(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(bad)


@settings(max_examples=25, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3))
def test_translation_conjugation(tx, ty):
    base = diagonal_system(
        [((0.5, 0.25), (0.0, 0.0)), ((0.5, 0.5), (0.5, 0.0)), ((0.25, 0.5), (0.25, 0.5))],
        [0.25, 0.25, 0.5], (0, 0), (1, 1))
    moved = translate_system(base, (tx, ty))
    b0, b1 = dimension_bounds(base), dimension_bounds(moved)
    assert b0.s_lower.value == b1.s_lower.value
    assert b0.s_upper.value == b1.s_upper.value
    x0 = np.array([0.5, 0.5])
    o0 = forward_orbit(base, x0=x0, n=300, burn_in=0, seed=3)
    o1 = forward_orbit(moved, x0=x0 + (tx, ty), n=300, burn_in=0, seed=3)
    drift = np.abs(o1.points - (o0.points + (tx, ty))).max()
    assert drift <= 1e-12 * max(1.0, abs(tx), abs(ty))
