"""Open set condition checks for box and ball open sets.

Three methods, chosen per map or pair:

* ``exact-box``: affine-diagonal maps and a box ``O``; images are boxes,
  computed in rational arithmetic when the parameters are rational.
* ``exact-ball``: similitudes and a ball ``O``; images are balls, decided by
  centre distances.
* ``sampled``: everything else with an invertible map; dense boundary and
  interior samples are pushed forward and tested by pre-images.  A sampled
  point within ``BOUNDARY_TOL`` of the boundary counts as on the boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .dynamics import PointCloud
from .model import IfsSystem, MapSpec, OpenSetSpec
from .rng import Substream

BOUNDARY_TOL = 1e-9
BOUNDARY_SAMPLES = 10_000
INTERIOR_SAMPLES = 2_000
DEFAULT_HORIZON = 50


class UnsupportedCheck(ValueError):
    """No method covers this (open set, map kind) combination."""


@dataclass
class SoscMass:
    fraction: float
    lower: float
    upper: float
    n: int

    @property
    def positive(self) -> bool:
        return self.lower > 0

    def to_dict(self):
        return {"fraction": self.fraction, "lower": self.lower, "upper": self.upper,
                "n": self.n, "positive": self.positive}


@dataclass
class OscReport:
    containment: dict[int, bool]
    disjointness: dict[tuple[int, int], bool]
    methods: dict[str, str]
    horizon: int | None
    coverage: str
    tail: str
    positive_mass: SoscMass | None = None
    notes: list[str] = field(default_factory=list)

    @property
    def osc_ok(self) -> bool:
        return all(self.containment.values()) and all(self.disjointness.values())

    @property
    def sosc_ok(self) -> bool:
        return self.osc_ok and self.positive_mass is not None and self.positive_mass.positive

    def failures(self) -> list[str]:
        out = [f"w_{i}(O) not inside O" for i, ok in self.containment.items() if not ok]
        out += [f"w_{i}(O) meets w_{j}(O)" for (i, j), ok in self.disjointness.items() if not ok]
        if self.positive_mass is not None and not self.positive_mass.positive:
            out.append("empirical mass of O is not positive")
        return out

    def to_dict(self):
        return {
            "schema": "ifsdim.osc/1",
            "containment": {str(i): ok for i, ok in self.containment.items()},
            "disjointness": {f"{i},{j}": ok for (i, j), ok in self.disjointness.items()},
            "methods": self.methods,
            "horizon": self.horizon,
            "coverage": self.coverage,
            "tail": self.tail,
            "osc": self.osc_ok,
            "positive_mass": None if self.positive_mass is None else self.positive_mass.to_dict(),
            "notes": self.notes,
        }


def _exact(v):
    if isinstance(v, float) and math.isfinite(v):
        return Fraction(v)
    return v


def _box_image(m: MapSpec, O: OpenSetSpec):
    lo, hi = [], []
    for f, t, a, b in zip(m.factors, m.translation, O.lower, O.upper):
        f, t, a, b = _exact(f), _exact(t), _exact(a), _exact(b)
        u, v = f * a, f * b
        if u > v:
            u, v = v, u
        lo.append(u + t)
        hi.append(v + t)
    return lo, hi


def _ball_image(m: MapSpec, O: OpenSetSpec):
    c = np.array([float(v) for v in O.center])
    return m.apply(c), m.ratio * float(O.radius)


class _Sampler:
    """Boundary and interior samples of ``O`` and their images, cached per map."""

    def __init__(self, O: OpenSetSpec, seed: int):
        self.O = O
        sub = Substream(seed, 7)
        d = O.dim
        if O.kind == "open-ball":
            c = np.array([float(v) for v in O.center])
            r = float(O.radius)
            if d == 2:
                ang = 2 * np.pi * np.arange(BOUNDARY_SAMPLES) / BOUNDARY_SAMPLES
                dirs = np.column_stack([np.cos(ang), np.sin(ang)])
            else:
                dirs = sub.normals(BOUNDARY_SAMPLES * d).reshape(-1, d)
                dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
            self.boundary = c + r * dirs
        else:
            lo = np.array([float(v) for v in O.lower])
            hi = np.array([float(v) for v in O.upper])
            if not (np.isfinite(lo).all() and np.isfinite(hi).all()):
                raise UnsupportedCheck("sampled checks need a bounded open set")
            pts = sub.uniform_in(lo, hi, BOUNDARY_SAMPLES)
            face = (sub.uniforms(BOUNDARY_SAMPLES) * 2 * d).astype(int)
            axis, side = face // 2, face % 2
            pts[np.arange(BOUNDARY_SAMPLES), axis] = np.where(side == 1, hi[axis], lo[axis])
            self.boundary = pts
        self.interior = O.closure().sample(sub, INTERIOR_SAMPLES)
        self.interior = self.interior[O.interior_contains(self.interior)]
        self._img: dict[int, np.ndarray] = {}

    def image(self, i: int, m: MapSpec) -> np.ndarray:
        if i not in self._img:
            self._img[i] = m.apply(np.concatenate([self.boundary, self.interior]))
        return self._img[i]


def _contained_sampled(m, i, O, sampler) -> bool:
    img = sampler.image(i, m)
    closure = O.closure()
    return bool(closure.contains(img, tol=BOUNDARY_TOL).all())


def _inside_image(m: MapSpec, O: OpenSetSpec, pts) -> np.ndarray:
    pre = m.inverse(pts)
    with np.errstate(invalid="ignore"):
        ok = O.interior_contains(pre, margin=BOUNDARY_TOL)
    return ok & ~np.isnan(pre).any(axis=1)


def _disjoint_sampled(mi, i, mj, j, O, sampler) -> bool:
    for a, ma, mb in ((i, mi, mj), (j, mj, mi)):
        if not mb.invertible():
            raise UnsupportedCheck("sampled disjointness needs invertible maps")
        if _inside_image(mb, O, sampler.image(a, ma)).any():
            return False
    return True


def _method(m: MapSpec, O: OpenSetSpec) -> str:
    if O.kind == "open-box" and m.kind == "affine-diagonal":
        return "exact-box"
    if O.kind == "open-ball" and m.is_similitude:
        return "exact-ball"
    if not m.invertible():
        raise UnsupportedCheck(f"no OSC method for a non-invertible {m.kind} map")
    return "sampled"


def check_osc(sys: IfsSystem, O: OpenSetSpec | None = None, horizon: int = DEFAULT_HORIZON,
              seed: int = 0) -> OscReport:
    """Containment ``w_i(O) in O`` and pairwise disjointness of the images."""
    O = sys.open_set if O is None else O
    if O is None:
        raise ValueError("no open set given and the system declares none")
    if O.dim != sys.dim:
        raise ValueError("open set and system dimensions differ")
    maps = sys.first_maps(horizon if not sys.finite else sys.n_maps)
    methods = {i: _method(m, O) for i, m in maps}
    sampler = _Sampler(O, seed) if "sampled" in methods.values() else None
    boxes = {i: _box_image(m, O) for i, m in maps if methods[i] == "exact-box"}
    balls = {i: _ball_image(m, O) for i, m in maps if methods[i] == "exact-ball"}

    containment: dict[int, bool] = {}
    for i, m in maps:
        if methods[i] == "exact-box":
            lo, hi = boxes[i]
            containment[i] = all(a >= _exact(b) for a, b in zip(lo, O.lower)) and all(
                a <= _exact(b) for a, b in zip(hi, O.upper))
        elif methods[i] == "exact-ball":
            c, r = balls[i]
            R = float(O.radius)
            dist = float(np.linalg.norm(c - np.array([float(v) for v in O.center])))
            containment[i] = dist + r <= R * (1 + 1e-12)
        else:
            containment[i] = _contained_sampled(m, i, O, sampler)

    disjoint: dict[tuple[int, int], bool] = {}
    pair_methods = set()
    for a in range(len(maps)):
        i, mi = maps[a]
        for b in range(a + 1, len(maps)):
            j, mj = maps[b]
            if methods[i] == methods[j] == "exact-box":
                (lo_i, hi_i), (lo_j, hi_j) = boxes[i], boxes[j]
                disjoint[(i, j)] = any(
                    h1 <= l2 or h2 <= l1 for l1, h1, l2, h2 in zip(lo_i, hi_i, lo_j, hi_j))
                pair_methods.add("exact-box")
            elif methods[i] == methods[j] == "exact-ball":
                (ci, ri), (cj, rj) = balls[i], balls[j]
                disjoint[(i, j)] = float(np.linalg.norm(ci - cj)) >= (ri + rj) * (1 - 1e-12)
                pair_methods.add("exact-ball")
            else:
                if sampler is None:
                    sampler = _Sampler(O, seed)
                disjoint[(i, j)] = _disjoint_sampled(mi, i, mj, j, O, sampler)
                pair_methods.add("sampled")

    summary = {f"containment[{i}]": meth for i, meth in methods.items()}
    summary["disjointness"] = "+".join(sorted(pair_methods)) or "none"
    notes = []
    if sys.finite:
        coverage, tail, h = "all maps", "none (finite system)", None
    else:
        coverage, h = "verified to horizon", len(maps)
        if sys.osc_certificate:
            tail = "verified analytically"
            notes.append(sys.osc_certificate)
        else:
            tail = "unverified tail"
    if "sampled" in methods.values() or "sampled" in pair_methods:
        notes.append("sampled checks are numerical verification, not proof")
    return OscReport(containment, disjoint, summary, h, coverage, tail, notes=notes)


def check_sosc_mass(sys: IfsSystem, O: OpenSetSpec | None, cloud: PointCloud) -> SoscMass:
    """Empirical mass of ``O`` with a 3-sigma binomial interval."""
    O = sys.open_set if O is None else O
    n = len(cloud)
    if n == 0:
        return SoscMass(0.0, 0.0, 0.0, 0)
    frac = float(O.interior_contains(cloud.points).mean())
    half = 3.0 * math.sqrt(frac * (1.0 - frac) / n)
    return SoscMass(frac, max(0.0, frac - half), min(1.0, frac + half), n)
