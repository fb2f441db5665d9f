import sys
import numpy as np
import pytest

from ifsdim.model import from_config


def line_system(factors, translations, p, lower=0.0, upper=1.0, open_set=None, name="line"):
    """Finite 1-D affine system on ``[lower, upper]``."""
    cfg = {
        "name": name,
        "space": {"kind": "box", "lower": [lower], "upper": [upper]},
        "maps": [
            {"kind": "affine-diagonal", "factors": [f], "translation": [t],
             "gamma": abs(f), "Gamma": abs(f)}
            for f, t in zip(factors, translations)
        ],
        "probabilities": list(p),
    }
    if open_set is not None:
        cfg["open_set"] = {"kind": "open-box", "lower": [open_set[0]], "upper": [open_set[1]]}
    return from_config(cfg)


def diagonal_system(maps, p, lower, upper, open_set=None, name="diag"):
    """Finite affine-diagonal system; ``maps`` is a list of (factors, translation)."""
    cfg = {
        "name": name,
        "space": {"kind": "box", "lower": list(lower), "upper": list(upper)},
        "maps": [
            {"kind": "affine-diagonal", "factors": list(f), "translation": list(t),
             "gamma": min(abs(v) for v in f), "Gamma": max(abs(v) for v in f)}
            for f, t in maps
        ],
        "probabilities": list(p),
    }
    if open_set is not None:
        cfg["open_set"] = {"kind": "open-box", "lower": list(open_set[0]), "upper": list(open_set[1])}
    return from_config(cfg)


@pytest.fixture
def half_map():
    return line_system([0.5], [0.0], [1.0], name="half")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
