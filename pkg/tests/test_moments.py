import json
import math
import time

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ifsdim.model import PRESETS, from_config, preset
from ifsdim.moments import (
    DivergentSeries,
    HypothesisViolated,
    MissingEnvelope,
    check_membership,
    dimension_bounds,
    moment_sums,
)

from conftest import diagonal_system, line_system

LN2, LN3 = math.log(2), math.log(3)


def oracle_example1(n_terms=200):
    """Brute-force partial sums of the first example's series (tail < 2^-190)."""
    ent = gam = lgam = lgam_lo = disp = 0.0
    for i in range(1, n_terms + 1):
        p = 2.0**-i
        g = 2.0 ** (i - 1) / 3.0**i
        G = g + i / 10
        t = (i - 1, 1 - (2 / 3) ** (i - 1))
        ent += p * math.log(p)
        gam += p * G
        lgam += p * math.log(G)
        lgam_lo += p * math.log(g)
        disp += p * math.hypot(*t)
    return dict(entropy=ent, mean_Gamma=gam, log_Gamma=lgam, log_gamma=lgam_lo, displacement=disp)


def test_example1_moments_match_brute_force():
    rep = moment_sums(preset("example1"), x0=(0, 0), tol=1e-9)
    ref = oracle_example1()
    for key, val in ref.items():
        est = getattr(rep, key)
        assert abs(est.value - val) <= est.error + 1e-12, key
        assert est.error <= 1e-9


def test_example1_closed_forms():
    rep = moment_sums(preset("example1"), x0=(0, 0), tol=1e-9)
    # sum 2^-i ((i-1) log 2 - i log 3) with sum i 2^-i = 2
    assert rep.log_gamma.value == pytest.approx(LN2 - 2 * LN3, abs=1e-9)
    assert rep.entropy.value == pytest.approx(-2 * LN2, abs=1e-9)
    assert rep.x0 == (0.0, 0.0)


def test_example2_log_gamma():
    rep = moment_sums(preset("example2"), x0=(0.3, -0.2))
    assert rep.log_gamma.value == pytest.approx(0.2 * math.log(0.25) + 0.8 * math.log(1 / 3), abs=1e-9)
    assert rep.log_gamma.error == 0 and rep.entropy.error == 0


def test_example1_bounds():
    b = dimension_bounds(preset("example1"))
    assert b.s_lower.value == pytest.approx(2 * LN2 / (2 * LN3 - LN2), abs=1e-6)
    assert b.s_lower.value == pytest.approx(0.9217, abs=0.001)
    assert b.s_upper.value == pytest.approx(1.721, abs=0.002)
    assert b.flags.accepted and not b.notes


def test_example2_bounds_and_printed_discrepancy():
    b = dimension_bounds(preset("example2"))
    assert b.s_upper.value == pytest.approx(1.4307, abs=0.002)
    assert b.s_lower.value == pytest.approx(1.0323, abs=0.002)
    assert any(n.startswith("s_lower") and "1.05" in n for n in b.notes)
    assert any(n.startswith("log_Gamma") and "-0.74" in n for n in b.notes)
    assert not any(n.startswith("s_upper") for n in b.notes)


def test_membership_flags_example1():
    flags = check_membership(moment_sums(preset("example1")))
    assert flags.accepted and flags.log_gamma_negative


def test_expanding_map_fails_log_gamma_condition():
    s = line_system([2.0], [0.0], [1.0], upper=1e9)
    flags = check_membership(moment_sums(s))
    assert not flags.log_Gamma_negative
    with pytest.raises(HypothesisViolated) as err:
        dimension_bounds(s)
    assert "log_Gamma_negative" in err.value.failed


def exploding_family():
    cfg = json.loads(json.dumps(PRESETS["example1"]))
    cfg["family"].update(factors=["3**i", "3**i"], gamma="3**i", Gamma="3**i")
    return from_config(cfg)


def test_divergent_mean_gamma_is_flagged():
    s = exploding_family()
    with pytest.raises(DivergentSeries) as err:
        moment_sums(s)
    assert err.value.series in ("mean_Gamma", "log_Gamma", "log_gamma", "displacement")
    flags = check_membership(moment_sums(s, strict=False))
    assert not flags.mean_Gamma_finite
    with pytest.raises(HypothesisViolated):
        dimension_bounds(s)


def test_missing_envelope():
    cfg = json.loads(json.dumps(PRESETS["example1"]))
    del cfg["envelopes"]["log_gamma"]
    with pytest.raises(MissingEnvelope):
        moment_sums(from_config(cfg))


def test_two_half_similitudes():
    b = dimension_bounds(line_system([0.5, 0.5], [0.0, 0.5], [0.5, 0.5]))
    assert b.s_lower.value == b.s_upper.value == pytest.approx(1.0, abs=1e-15)


def test_truncation_soundness():
    s = preset("example1")
    coarse = moment_sums(s, tol=1e-4)
    fine = moment_sums(s, tol=1e-5)
    for key in ("entropy", "mean_Gamma", "log_Gamma", "log_gamma", "displacement"):
        a, b = getattr(coarse, key), getattr(fine, key)
        assert abs(a.value - b.value) < a.error, key


def test_runtime_is_small():
    t = time.perf_counter()
    dimension_bounds(preset("example1"))
    assert time.perf_counter() - t < 1.0


finite_systems = st.lists(
    st.tuples(st.floats(0.05, 0.95), st.floats(0.05, 0.95), st.floats(0.1, 1.0)),
    min_size=1, max_size=6,
)


def _system_from(params, order=None):
    order = range(len(params)) if order is None else order
    weights = np.array([params[k][2] for k in order])
    p = (weights / weights.sum()).tolist()
    p[-1] = 1.0 - math.fsum(p[:-1])
    maps = [((params[k][0], params[k][1]), (0.0, 0.0)) for k in order]
    return diagonal_system(maps, p, (0, 0), (1, 1))


@settings(max_examples=40, deadline=None)
@given(finite_systems)
def test_bounds_are_ordered(params):
    b = dimension_bounds(_system_from(params))
    assert 0 <= b.s_lower.value <= b.s_upper.value
    assert b.moments.entropy.value <= 0
    assert b.moments.log_gamma.value <= b.moments.log_Gamma.value


@settings(max_examples=40, deadline=None)
@given(finite_systems, st.randoms(use_true_random=False))
def test_permutation_invariance(params, rnd):
    order = list(range(len(params)))
    rnd.shuffle(order)
    a = dimension_bounds(_system_from(params))
    b = dimension_bounds(_system_from(params, order))
    assert b.s_lower.value == pytest.approx(a.s_lower.value, rel=1e-14, abs=1e-15)
    assert b.s_upper.value == pytest.approx(a.s_upper.value, rel=1e-14, abs=1e-15)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0.05, 0.95), min_size=1, max_size=5))
def test_similitude_collapse(ratios):
    n = len(ratios)
    p = [1 / n] * n
    p[-1] = 1.0 - math.fsum(p[:-1])
    s = line_system(ratios, [0.0] * n, p)
    b = dimension_bounds(s)
    assert b.s_lower.value == b.s_upper.value
