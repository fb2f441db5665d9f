"""IFS declarations: spaces, bi-Lipschitz maps, probability vectors.

A system is the triple (space, maps, probabilities).  Maps are either a finite
list or a parametric family ``i -> MapSpec`` for ``i = 1, 2, ...``; indices are
1-based throughout the public API.

Map parameters may be :class:`~fractions.Fraction` values.  They are kept
exact where the checks benefit from it (Lipschitz-constant equality, image
boxes in the open set condition) and converted to float for numerics.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Real
from pathlib import Path
from typing import Callable, Mapping

import numpy as np

from .expr import ExpressionError, compile_expr, parse_number
from .rng import Substream

SPACE_KINDS = ("box", "ball", "halfspace-product")
MAP_KINDS = ("affine-diagonal", "affine-general", "radial-scaling")
OPEN_SET_KINDS = ("open-box", "open-ball")

MAP_SAMPLE_LIMIT = 50  # maps of an infinite family covered by sampled checks
PAIR_SAMPLES = 10_000
POINT_SAMPLES = 10_000
NORMALIZATION_TOL = 1e-12
LIPSCHITZ_RTOL = 1e-9
CONTAINMENT_TOL = 1e-9


class ConfigError(ValueError):
    """Ill-formed configuration (wrong keys, types, shapes)."""


def _f(x) -> float:
    return float(x)


def _vec(values, name: str) -> tuple:
    if not isinstance(values, (list, tuple)) or not values:
        raise ConfigError(f"{name} must be a non-empty list")
    try:
        return tuple(parse_number(v) for v in values)
    except ExpressionError as exc:
        raise ConfigError(f"{name}: {exc}") from None


def _num(value, name: str):
    try:
        return parse_number(value)
    except ExpressionError as exc:
        raise ConfigError(f"{name}: {exc}") from None


# --------------------------------------------------------------------------
# spaces and open sets


@dataclass(frozen=True)
class SpaceSpec:
    """The closed state space: a box (bounds may be infinite) or a ball."""

    kind: str
    lower: tuple = ()
    upper: tuple = ()
    center: tuple = ()
    radius: Real | None = None

    @property
    def dim(self) -> int:
        return len(self.center) if self.kind == "ball" else len(self.lower)

    @property
    def bounded(self) -> bool:
        if self.kind == "ball":
            return True
        return all(math.isfinite(v) for v in self.lower + self.upper)

    def problems(self) -> list[str]:
        if self.kind not in SPACE_KINDS:
            return [f"unknown space kind {self.kind!r}"]
        if self.kind == "ball":
            if self.radius is None or not self.radius > 0 or not math.isfinite(self.radius):
                return ["ball radius must be positive and finite"]
            return []
        out = []
        if len(self.lower) != len(self.upper) or not self.lower:
            return ["box bounds must be non-empty vectors of equal length"]
        for lo, hi in zip(self.lower, self.upper):
            if not hi > lo:
                out.append(f"box extent [{lo}, {hi}] is not positive")
        if self.kind == "box" and not self.bounded:
            out.append("a 'box' space needs finite bounds; use 'halfspace-product'")
        return out

    def unbounded_sides(self) -> np.ndarray:
        """``(d, 2)`` booleans: is the space unbounded below / above on each axis."""
        if self.kind == "ball":
            return np.zeros((self.dim, 2), dtype=bool)
        return np.array([[not math.isfinite(lo), not math.isfinite(hi)]
                         for lo, hi in zip(self.lower, self.upper)])

    def default_point(self) -> np.ndarray:
        """Center of the space; on infinite axes, the finite endpoint (or 0)."""
        if self.kind == "ball":
            return np.array([_f(c) for c in self.center])
        pt = []
        for lo, hi in zip(self.lower, self.upper):
            lo, hi = _f(lo), _f(hi)
            if math.isfinite(lo) and math.isfinite(hi):
                pt.append(0.5 * (lo + hi))
            elif math.isfinite(lo):
                pt.append(lo)
            elif math.isfinite(hi):
                pt.append(hi)
            else:
                pt.append(0.0)
        return np.array(pt)

    def scale(self) -> float:
        """Characteristic length: the diameter, or the largest finite extent."""
        if self.kind == "ball":
            return 2.0 * _f(self.radius)
        ext = [_f(hi) - _f(lo) for lo, hi in zip(self.lower, self.upper)]
        finite = [e for e in ext if math.isfinite(e)]
        if len(finite) == len(ext):
            return math.sqrt(sum(e * e for e in ext))
        return max(finite, default=1.0)

    def contains(self, points, tol: float = CONTAINMENT_TOL) -> np.ndarray:
        """Membership in the closed space, with absolute slack ``tol``."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if self.kind == "ball":
            c = np.array([_f(v) for v in self.center])
            dist = np.sqrt(((pts - c) ** 2).sum(axis=1))
            return dist <= _f(self.radius) + tol
        lo = np.array([_f(v) for v in self.lower])
        hi = np.array([_f(v) for v in self.upper])
        return np.all((pts >= lo - tol) & (pts <= hi + tol), axis=1)

    def exhaustions(self) -> list[tuple[np.ndarray, np.ndarray]]:
        """Bounded boxes exhausting a box space; infinite sides grow 1, 10, 100, 1000."""
        lo = np.array([_f(v) for v in self.lower])
        hi = np.array([_f(v) for v in self.upper])
        if self.bounded:
            return [(lo, hi)]
        out = []
        for reach in (1.0, 10.0, 100.0, 1000.0):
            a, b = lo.copy(), hi.copy()
            for k in range(len(a)):
                if not math.isfinite(a[k]) and not math.isfinite(b[k]):
                    a[k], b[k] = -reach, reach
                elif not math.isfinite(a[k]):
                    a[k] = b[k] - reach
                elif not math.isfinite(b[k]):
                    b[k] = a[k] + reach
            out.append((a, b))
        return out

    def sample(self, sub: Substream, n: int) -> np.ndarray:
        """``n`` points of the space; unbounded spaces are covered by exhaustions."""
        if self.kind == "ball":
            d = self.dim
            c = np.array([_f(v) for v in self.center])
            g = sub.normals(n * d).reshape(n, d)
            g /= np.linalg.norm(g, axis=1, keepdims=True)
            rad = _f(self.radius) * sub.uniforms(n) ** (1.0 / d)
            return c + g * rad[:, None]
        boxes = self.exhaustions()
        sizes = [n // len(boxes) + (k < n % len(boxes)) for k in range(len(boxes))]
        return np.concatenate([sub.uniform_in(a, b, m) for (a, b), m in zip(boxes, sizes)])

    def to_dict(self) -> dict:
        if self.kind == "ball":
            return {"kind": "ball", "center": [_jsonnum(v) for v in self.center],
                    "radius": _jsonnum(self.radius)}
        return {"kind": self.kind, "lower": [_jsonnum(v) for v in self.lower],
                "upper": [_jsonnum(v) for v in self.upper]}


@dataclass(frozen=True)
class OpenSetSpec:
    """Candidate open set for the (strong) open set condition."""

    kind: str
    lower: tuple = ()
    upper: tuple = ()
    center: tuple = ()
    radius: Real | None = None

    @property
    def dim(self) -> int:
        return len(self.center) if self.kind == "open-ball" else len(self.lower)

    def closure(self) -> SpaceSpec:
        if self.kind == "open-ball":
            return SpaceSpec("ball", center=self.center, radius=self.radius)
        kind = "box" if all(math.isfinite(v) for v in self.lower + self.upper) else "halfspace-product"
        return SpaceSpec(kind, lower=self.lower, upper=self.upper)

    def interior_contains(self, points, margin: float = 0.0) -> np.ndarray:
        """Strict membership; ``margin > 0`` additionally demands that distance from the boundary."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if self.kind == "open-ball":
            c = np.array([_f(v) for v in self.center])
            dist = np.sqrt(((pts - c) ** 2).sum(axis=1))
            return dist < _f(self.radius) - margin
        lo = np.array([_f(v) for v in self.lower])
        hi = np.array([_f(v) for v in self.upper])
        return np.all((pts > lo + margin) & (pts < hi - margin), axis=1)

    def to_dict(self) -> dict:
        if self.kind == "open-ball":
            return {"kind": "open-ball", "center": [_jsonnum(v) for v in self.center],
                    "radius": _jsonnum(self.radius)}
        return {"kind": "open-box", "lower": [_jsonnum(v) for v in self.lower],
                "upper": [_jsonnum(v) for v in self.upper]}


def _jsonnum(v):
    if isinstance(v, Fraction):
        return str(v) if v.denominator != 1 else int(v)
    if isinstance(v, float) and not math.isfinite(v):
        return "inf" if v > 0 else "-inf"
    return v


# --------------------------------------------------------------------------
# maps

KIND_CODES = {"affine-diagonal": 0, "affine-general": 1, "radial-scaling": 2}


@dataclass(frozen=True)
class MapSpec:
    """One bi-Lipschitz map with declared lower/upper Lipschitz constants.

    ``affine-diagonal``: ``w(x) = factors * x + translation``.
    ``affine-general``: ``w(x) = matrix @ x + translation``.
    ``radial-scaling``: ``w(x) = (alpha - beta * |x|**exponent) * x + translation``;
    Example 2 of the source has alpha = 5/4, beta = 3/4, exponent = 1/3, i.e.
    ``a(x, y) = (5 - 3 (x^2 + y^2)^(1/6)) / 4``, evaluated at the input point.
    """

    kind: str
    translation: tuple
    gamma: Real
    Gamma: Real
    factors: tuple | None = None
    matrix: tuple | None = None
    radial: tuple | None = None  # (alpha, beta, exponent)

    @property
    def dim(self) -> int:
        return len(self.translation)

    @property
    def t(self) -> np.ndarray:
        return np.array([_f(v) for v in self.translation])

    def linear(self) -> np.ndarray:
        """Matrix of the linear part (radial maps: ``alpha * I``, their value at the origin)."""
        d = self.dim
        if self.kind == "affine-diagonal":
            return np.diag([_f(v) for v in self.factors])
        if self.kind == "affine-general":
            return np.array([[_f(v) for v in row] for row in self.matrix])
        return _f(self.radial[0]) * np.eye(d)

    @property
    def is_affine(self) -> bool:
        return self.kind != "radial-scaling" or self.radial[1] == 0

    @property
    def is_similitude(self) -> bool:
        if self.kind == "affine-diagonal":
            return len({abs(v) for v in self.factors}) == 1
        if self.kind == "radial-scaling":
            return self.radial[1] == 0
        sv = np.linalg.svd(self.linear(), compute_uv=False)
        return bool(sv[0] - sv[-1] <= 1e-12 * sv[0])

    @property
    def ratio(self) -> float:
        """Contraction ratio of a similitude."""
        if self.kind == "radial-scaling":
            return abs(_f(self.radial[0]))
        return float(np.linalg.svd(self.linear(), compute_uv=False)[0])

    def apply(self, points) -> np.ndarray:
        """Vectorized image of an ``(n, d)`` array (or one point)."""
        pts = np.asarray(points, dtype=float)
        single = pts.ndim == 1
        pts = np.atleast_2d(pts)
        if self.kind == "affine-diagonal":
            out = pts * np.array([_f(v) for v in self.factors]) + self.t
        elif self.kind == "affine-general":
            out = pts @ self.linear().T + self.t
        else:
            alpha, beta, q = (_f(v) for v in self.radial)
            r2 = (pts * pts).sum(axis=1)
            a = alpha - beta * r2 ** (0.5 * q)
            out = a[:, None] * pts + self.t
        return out[0] if single else out

    def radial_profile(self, r):
        """``|w(x) - translation|`` as a function of ``r = |x|`` for radial maps."""
        alpha, beta, q = (_f(v) for v in self.radial)
        r = np.asarray(r, dtype=float)
        return alpha * r - beta * r ** (1.0 + q)

    def monotone_radius(self) -> float:
        """Largest ``R`` such that the radial profile is increasing on ``[0, R]``."""
        alpha, beta, q = (_f(v) for v in self.radial)
        if beta <= 0:
            return math.inf
        return (alpha / (beta * (1.0 + q))) ** (1.0 / q)

    def invertible(self) -> bool:
        if self.kind == "radial-scaling":
            return _f(self.radial[0]) != 0
        return bool(abs(np.linalg.det(self.linear())) > 0)

    def inverse(self, points) -> np.ndarray:
        """Pre-images of an ``(n, d)`` array.

        Radial maps are inverted on the monotone range of their profile;
        points outside the image of that range map to NaN.
        """
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        y = pts - self.t
        if self.kind == "affine-diagonal":
            return y / np.array([_f(v) for v in self.factors])
        if self.kind == "affine-general":
            return np.linalg.solve(self.linear(), y.T).T
        alpha = _f(self.radial[0])
        if self.radial[1] == 0:
            return y / alpha
        s = np.sqrt((y * y).sum(axis=1))
        r_hi = self.monotone_radius()
        s_hi = float(self.radial_profile(r_hi))
        lo = np.zeros_like(s)
        hi = np.full_like(s, r_hi)
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            below = self.radial_profile(mid) < s
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        r = 0.5 * (lo + hi)
        with np.errstate(invalid="ignore", divide="ignore"):
            out = np.where(s[:, None] > 0, y * (r / s)[:, None], 0.0)
        out[s > s_hi] = np.nan
        return out

    def kernel_row(self):
        """(kind code, d x d matrix, translation, (alpha, beta, exponent/2)) as floats."""
        d = self.dim
        rad = (0.0, 0.0, 0.0)
        if self.kind == "radial-scaling":
            alpha, beta, q = (_f(v) for v in self.radial)
            rad = (alpha, beta, 0.5 * q)
        return KIND_CODES[self.kind], self.linear().reshape(d, d), self.t, rad

    def to_dict(self) -> dict:
        out: dict = {"kind": self.kind}
        if self.kind == "affine-diagonal":
            out["factors"] = [_jsonnum(v) for v in self.factors]
        elif self.kind == "affine-general":
            out["matrix"] = [[_jsonnum(v) for v in row] for row in self.matrix]
        else:
            out["alpha"], out["beta"], out["exponent"] = (_jsonnum(v) for v in self.radial)
        out["translation"] = [_jsonnum(v) for v in self.translation]
        out["gamma"] = _jsonnum(self.gamma)
        out["Gamma"] = _jsonnum(self.Gamma)
        return out


# --------------------------------------------------------------------------
# probabilities


class ProbabilityVector:
    """Finite list of weights, or a parametric term ``p(i)`` with tail mass ``T(n)``.

    Parametric vectors may also carry ``tail_moment(n) = sum_{i>n} i p(i)``
    (needed for rigorous moment tails) and a closed-form ``quantile(u)``.
    """

    TABLE_LIMIT = 4096

    def __init__(self, values=None, *, term=None, tail=None, tail_moment=None, quantile=None):
        if (values is None) == (term is None):
            raise ConfigError("give either explicit values or a parametric term")
        self.values = None if values is None else tuple(values)
        self.term = term
        self.tail = tail
        self.tail_moment = tail_moment
        self.quantile = quantile
        self._cum: np.ndarray | None = None

    @property
    def finite(self) -> bool:
        return self.values is not None

    @property
    def size(self) -> int | None:
        return len(self.values) if self.finite else None

    def p(self, i: int):
        if i < 1:
            raise IndexError("indices are 1-based")
        if self.finite:
            if i > len(self.values):
                raise IndexError(f"index {i} outside 1..{len(self.values)}")
            return self.values[i - 1]
        return self.term(i)

    def entries(self, n: int) -> list:
        return [self.p(i) for i in range(1, n + 1)]

    def _cumulative(self, upto: float) -> np.ndarray:
        """Cached cumulative sums, extended until they reach ``upto``."""
        if self.finite:
            if self._cum is None:
                acc, cum = 0, []
                for v in self.values:
                    acc += v if isinstance(v, Fraction) else Fraction(v)
                    cum.append(float(acc))
                self._cum = np.array(cum)
            return self._cum
        cum = [] if self._cum is None else list(self._cum)
        while (not cum or cum[-1] < upto) and len(cum) < self.TABLE_LIMIT:
            n = len(cum) + 1
            if self.tail is not None:
                cum.append(float(1 - self.tail(n)))
            else:
                cum.append(math.fsum([cum[-1] if cum else 0.0, _f(self.term(n))]))
        self._cum = np.array(cum)
        return self._cum

    def symbols(self, u: np.ndarray) -> np.ndarray:
        """Inverse CDF: for each ``u`` the smallest ``i`` with cumulative ``>= u``."""
        u = np.asarray(u, dtype=float)
        if u.size == 0:
            return np.zeros(0, dtype=np.int64)
        cum = self._cumulative(float(u.max()))
        idx = np.searchsorted(cum, u, side="left") + 1
        if self.finite:
            return np.minimum(idx, len(cum)).astype(np.int64)
        beyond = idx > len(cum)
        if beyond.any():
            if self.quantile is None:
                raise RuntimeError("cumulative table exhausted and no closed-form quantile")
            idx[beyond] = [int(self.quantile(float(v))) for v in u[beyond]]
        return idx.astype(np.int64)

    def to_dict(self):
        if self.finite:
            return [_jsonnum(v) for v in self.values]
        return getattr(self, "source", {"term": "<callable>"})


# --------------------------------------------------------------------------
# systems


@dataclass(frozen=True)
class Envelope:
    """Declared bound ``|q_i| <= const + slope * i`` for all ``i >= start``."""

    start: int
    const: float
    slope: float

    def __call__(self, i: int) -> float:
        return self.const + self.slope * i


ENVELOPE_KEYS = ("Gamma", "log_Gamma", "log_gamma", "offset", "log_p")


@dataclass(frozen=True, eq=False)
class IfsSystem:
    space: SpaceSpec
    probabilities: ProbabilityVector
    maps: tuple[MapSpec, ...] | None = None
    family: Callable[[int], MapSpec] | None = None
    name: str = "unnamed"
    description: str = ""
    envelopes: Mapping[str, Envelope] = field(default_factory=dict)
    open_set: OpenSetSpec | None = None
    osc_certificate: str | None = None
    printed: Mapping[str, str] = field(default_factory=dict)
    notes: tuple[str, ...] = ()
    source: dict | None = None
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def finite(self) -> bool:
        return self.maps is not None

    @property
    def n_maps(self) -> int | None:
        return len(self.maps) if self.finite else None

    @property
    def dim(self) -> int:
        return self.space.dim

    def map(self, i: int) -> MapSpec:
        if i < 1:
            raise IndexError("map indices are 1-based")
        if self.finite:
            if i > len(self.maps):
                raise IndexError(f"map index {i} outside 1..{len(self.maps)}")
            return self.maps[i - 1]
        if i not in self._cache:
            self._cache[i] = self.family(i)
        return self._cache[i]

    def first_maps(self, limit: int = MAP_SAMPLE_LIMIT) -> list[tuple[int, MapSpec]]:
        n = self.n_maps if self.finite else limit
        return [(i, self.map(i)) for i in range(1, min(n, limit) + 1)]

    def kernel_table(self, upto: int):
        """Float arrays describing maps ``1..upto`` for the orbit kernels."""
        key = ("table", upto)
        if key not in self._cache:
            d = self.dim
            kinds = np.empty(upto, dtype=np.int8)
            lin = np.empty((upto, d, d))
            trans = np.empty((upto, d))
            rad = np.empty((upto, 3))
            for i in range(1, upto + 1):
                kinds[i - 1], lin[i - 1], trans[i - 1], rad[i - 1] = self.map(i).kernel_row()
            self._cache[key] = (kinds, lin, trans, rad)
        return self._cache[key]

    def to_config(self) -> dict:
        if self.source is not None:
            return self.source
        out = {"name": self.name, "space": self.space.to_dict()}
        if not self.finite:
            raise ConfigError("parametric systems serialize from their source config only")
        out["maps"] = [m.to_dict() for m in self.maps]
        out["probabilities"] = self.probabilities.to_dict()
        if self.open_set is not None:
            out["open_set"] = self.open_set.to_dict()
        return out


# --------------------------------------------------------------------------
# config ingestion


def _space_from(cfg, key="space") -> SpaceSpec:
    if not isinstance(cfg, dict) or "kind" not in cfg:
        raise ConfigError(f"{key} must be an object with a 'kind'")
    kind = cfg["kind"]
    if kind == "ball":
        return SpaceSpec("ball", center=_vec(cfg.get("center"), f"{key}.center"),
                         radius=_num(cfg.get("radius"), f"{key}.radius"))
    if kind in ("box", "halfspace-product"):
        return SpaceSpec(kind, lower=_vec(cfg.get("lower"), f"{key}.lower"),
                         upper=_vec(cfg.get("upper"), f"{key}.upper"))
    raise ConfigError(f"unknown space kind {kind!r}")


def _open_set_from(cfg) -> OpenSetSpec:
    if not isinstance(cfg, dict) or cfg.get("kind") not in OPEN_SET_KINDS:
        raise ConfigError(f"open_set.kind must be one of {OPEN_SET_KINDS}")
    if cfg["kind"] == "open-ball":
        return OpenSetSpec("open-ball", center=_vec(cfg.get("center"), "open_set.center"),
                           radius=_num(cfg.get("radius"), "open_set.radius"))
    return OpenSetSpec("open-box", lower=_vec(cfg.get("lower"), "open_set.lower"),
                       upper=_vec(cfg.get("upper"), "open_set.upper"))


def _map_from(cfg, where: str, conv: Callable = _num) -> MapSpec:
    if not isinstance(cfg, dict):
        raise ConfigError(f"{where} must be an object")
    kind = cfg.get("kind")
    if kind not in MAP_KINDS:
        raise ConfigError(f"{where}.kind must be one of {MAP_KINDS}")
    for key in ("translation", "gamma", "Gamma"):
        if key not in cfg:
            raise ConfigError(f"{where} is missing {key!r}")
    vec = lambda v, n: tuple(conv(x, f"{where}.{n}") for x in _listish(v, f"{where}.{n}"))
    kw = dict(
        kind=kind,
        translation=vec(cfg["translation"], "translation"),
        gamma=conv(cfg["gamma"], f"{where}.gamma"),
        Gamma=conv(cfg["Gamma"], f"{where}.Gamma"),
    )
    if kind == "affine-diagonal":
        kw["factors"] = vec(cfg.get("factors"), "factors")
    elif kind == "affine-general":
        rows = cfg.get("matrix")
        if not isinstance(rows, list) or not rows:
            raise ConfigError(f"{where}.matrix must be a list of rows")
        kw["matrix"] = tuple(vec(r, "matrix") for r in rows)
    else:
        kw["radial"] = tuple(conv(cfg.get(k), f"{where}.{k}") for k in ("alpha", "beta", "exponent"))
    return MapSpec(**kw)


def _listish(v, where):
    if not isinstance(v, (list, tuple)) or not v:
        raise ConfigError(f"{where} must be a non-empty list")
    return v


def _family_from(cfg):
    if not isinstance(cfg, dict):
        raise ConfigError("family must be an object of expressions in i")

    def conv(value, where):
        try:
            return compile_expr(str(value), ("i",))
        except ExpressionError as exc:
            raise ConfigError(f"{where}: {exc}") from None

    template = _map_from(cfg, "family", conv)

    def build(i: int) -> MapSpec:
        ev = lambda e: e(i)
        return MapSpec(
            kind=template.kind,
            translation=tuple(ev(e) for e in template.translation),
            gamma=ev(template.gamma),
            Gamma=ev(template.Gamma),
            factors=None if template.factors is None else tuple(ev(e) for e in template.factors),
            matrix=None if template.matrix is None else tuple(tuple(ev(e) for e in r) for r in template.matrix),
            radial=None if template.radial is None else tuple(ev(e) for e in template.radial),
        )

    return build


def _probabilities_from(cfg) -> ProbabilityVector:
    if isinstance(cfg, list):
        return ProbabilityVector(_vec(cfg, "probabilities"))
    if not isinstance(cfg, dict) or "term" not in cfg:
        raise ConfigError("probabilities must be a list or an object with a 'term'")
    try:
        pv = ProbabilityVector(
            term=compile_expr(str(cfg["term"]), ("i",)),
            tail=compile_expr(str(cfg["tail"]), ("n",)) if "tail" in cfg else None,
            tail_moment=compile_expr(str(cfg["tail_moment"]), ("n",)) if "tail_moment" in cfg else None,
            quantile=compile_expr(str(cfg["quantile"]), ("u",)) if "quantile" in cfg else None,
        )
    except ExpressionError as exc:
        raise ConfigError(f"probabilities: {exc}") from None
    pv.source = dict(cfg)
    return pv


def _envelopes_from(cfg) -> dict[str, Envelope]:
    if cfg is None:
        return {}
    if not isinstance(cfg, dict):
        raise ConfigError("envelopes must be an object")
    out = {}
    for key, val in cfg.items():
        if key not in ENVELOPE_KEYS:
            raise ConfigError(f"unknown envelope {key!r}; expected one of {ENVELOPE_KEYS}")
        try:
            out[key] = Envelope(int(val.get("start", 1)), float(val.get("const", 0.0)),
                                float(val.get("slope", 0.0)))
        except (AttributeError, TypeError, ValueError):
            raise ConfigError(f"envelope {key!r} must have numeric start/const/slope") from None
    return out


def from_config(cfg: dict) -> IfsSystem:
    """Build a system from the JSON configuration schema (see README)."""
    if not isinstance(cfg, dict):
        raise ConfigError("configuration must be a JSON object")
    if "preset" in cfg:
        return preset(cfg["preset"])
    for key in ("space", "probabilities"):
        if key not in cfg:
            raise ConfigError(f"configuration is missing {key!r}")
    if ("maps" in cfg) == ("family" in cfg):
        raise ConfigError("configuration needs exactly one of 'maps' or 'family'")
    maps = family = None
    if "maps" in cfg:
        if not isinstance(cfg["maps"], list) or not cfg["maps"]:
            raise ConfigError("maps must be a non-empty list")
        maps = tuple(_map_from(m, f"maps[{k}]") for k, m in enumerate(cfg["maps"]))
    else:
        family = _family_from(cfg["family"])
    return IfsSystem(
        space=_space_from(cfg["space"]),
        probabilities=_probabilities_from(cfg["probabilities"]),
        maps=maps,
        family=family,
        name=str(cfg.get("name", "unnamed")),
        description=str(cfg.get("description", "")),
        envelopes=_envelopes_from(cfg.get("envelopes")),
        open_set=_open_set_from(cfg["open_set"]) if "open_set" in cfg else None,
        osc_certificate=cfg.get("osc_certificate"),
        printed={k: str(v) for k, v in cfg.get("printed", {}).items()},
        notes=tuple(cfg.get("notes", ())),
        source=cfg,
    )


def load_config(path) -> IfsSystem:
    """Read a JSON config file.  Raises OSError / ConfigError on bad input."""
    text = Path(path).read_text()
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc.msg})") from None
    return from_config(cfg)


# --------------------------------------------------------------------------
# presets

PRESETS: dict[str, dict] = {
    "example1": {
        "name": "example1",
        "description": "Infinite family on [0,inf)x[0,1] expanding horizontally, contracting vertically",
        "space": {"kind": "halfspace-product", "lower": [0, 0], "upper": ["inf", 1]},
        "family": {
            "kind": "affine-diagonal",
            "factors": ["2**(i-1)/3**i + i/10", "2**(i-1)/3**i"],
            "translation": ["i - 1", "1 - (2/3)**(i-1)"],
            "gamma": "2**(i-1)/3**i",
            "Gamma": "2**(i-1)/3**i + i/10",
        },
        "probabilities": {
            "term": "2**-i",
            "tail": "2**-n",
            "tail_moment": "(n + 2) * 2**-n",
            "quantile": "max(1, ceil(-log2(1 - u)))",
        },
        "envelopes": {
            "Gamma": {"start": 1, "const": 1.0, "slope": 0.1},
            "log_Gamma": {"start": 10, "const": 0.0, "slope": 0.1},
            "log_gamma": {"start": 1, "const": 0.0, "slope": 1.1},
            "offset": {"start": 1, "const": 0.0, "slope": 1.0},
            "log_p": {"start": 1, "const": 0.0, "slope": 0.7},
        },
        "open_set": {"kind": "open-box", "lower": [0, 0], "upper": ["inf", 1]},
        "osc_certificate": (
            "w_i maps the strip (0,inf)x(0,1) onto (i-1,inf)x(s_{i-1},s_i) with "
            "s_i = 1 - (2/3)^i increasing to 1: images lie in O and their vertical "
            "extents are disjoint consecutive slices of (0,1) for every i"
        ),
        "printed": {"entropy": "-1.39", "mean_Gamma": "0.45", "log_Gamma": "-0.805",
                    "displacement": "1.03", "s_lower": "0.92", "s_upper": "1.73"},
    },
    "example2": {
        "name": "example2",
        "description": "Four maps on the unit disc; two radial maps expand near their centres",
        "space": {"kind": "ball", "center": [0, 0], "radius": 1},
        "maps": [
            {"kind": "radial-scaling", "alpha": "5/4", "beta": "3/4", "exponent": "1/3",
             "translation": ["-1/2", 0], "gamma": "1/4", "Gamma": "5/4"},
            {"kind": "radial-scaling", "alpha": "5/4", "beta": "3/4", "exponent": "1/3",
             "translation": ["1/2", 0], "gamma": "1/4", "Gamma": "5/4"},
            {"kind": "radial-scaling", "alpha": "1/3", "beta": 0, "exponent": 1,
             "translation": [0, "2/3"], "gamma": "1/3", "Gamma": "1/3"},
            {"kind": "radial-scaling", "alpha": "1/3", "beta": 0, "exponent": 1,
             "translation": [0, "-2/3"], "gamma": "1/3", "Gamma": "1/3"},
        ],
        "probabilities": ["1/10", "1/10", "2/5", "2/5"],
        "open_set": {"kind": "open-ball", "center": [0, 0], "radius": 1},
        "printed": {"log_Gamma": "-0.74", "s_lower": "1.05", "s_upper": "1.43"},
        "notes": [
            "radial factor a_i(x, y) is evaluated at the input point of w_i",
        ],
    },
    "cantor3": {
        "name": "cantor3",
        "description": "Middle-thirds Cantor measure, dimension log 2 / log 3",
        "space": {"kind": "box", "lower": [0], "upper": [1]},
        "maps": [
            {"kind": "affine-diagonal", "factors": ["1/3"], "translation": [0],
             "gamma": "1/3", "Gamma": "1/3"},
            {"kind": "affine-diagonal", "factors": ["1/3"], "translation": ["2/3"],
             "gamma": "1/3", "Gamma": "1/3"},
        ],
        "probabilities": ["1/2", "1/2"],
        "open_set": {"kind": "open-box", "lower": [0], "upper": [1]},
    },
    "sierpinski-like": {
        "name": "sierpinski-like",
        "description": "Three ratio-1/2 similitudes with equal weights, dimension log 3 / log 2",
        "space": {"kind": "box", "lower": [0, 0], "upper": [1, 1]},
        "maps": [
            {"kind": "affine-diagonal", "factors": ["1/2", "1/2"], "translation": [0, 0],
             "gamma": "1/2", "Gamma": "1/2"},
            {"kind": "affine-diagonal", "factors": ["1/2", "1/2"], "translation": ["1/2", 0],
             "gamma": "1/2", "Gamma": "1/2"},
            {"kind": "affine-diagonal", "factors": ["1/2", "1/2"], "translation": ["1/4", "1/2"],
             "gamma": "1/2", "Gamma": "1/2"},
        ],
        "probabilities": ["1/3", "1/3", "1/3"],
        "open_set": {"kind": "open-box", "lower": [0, 0], "upper": [1, 1]},
    },
}


def preset(name: str) -> IfsSystem:
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; available: {', '.join(PRESETS)}")
    return from_config(json.loads(json.dumps(PRESETS[name])))


def translate_system(sys: IfsSystem, shift) -> IfsSystem:
    """Conjugate a finite affine system by the translation ``x -> x + shift``.

    ``w'(x) = w(x - shift) + shift``, i.e. translation ``b + (I - L) shift``.
    """
    if not sys.finite or not all(m.kind != "radial-scaling" for m in sys.maps):
        raise ValueError("translation conjugation is implemented for finite affine systems")
    shift = tuple(shift)
    maps = []
    for m in sys.maps:
        if m.kind == "affine-diagonal":
            t = tuple(b + (1 - f) * s for b, f, s in zip(m.translation, m.factors, shift))
        else:
            t = tuple(
                b + s - sum(a * sj for a, sj in zip(row, shift))
                for b, s, row in zip(m.translation, shift, m.matrix)
            )
        maps.append(MapSpec(m.kind, t, m.gamma, m.Gamma, m.factors, m.matrix, m.radial))
    sp = sys.space
    if sp.kind == "ball":
        space = SpaceSpec("ball", center=tuple(c + s for c, s in zip(sp.center, shift)), radius=sp.radius)
    else:
        space = SpaceSpec(sp.kind, lower=tuple(v + s for v, s in zip(sp.lower, shift)),
                          upper=tuple(v + s for v, s in zip(sp.upper, shift)))
    return IfsSystem(space=space, probabilities=sys.probabilities, maps=tuple(maps),
                     name=f"{sys.name}+shift", description=sys.description)


# --------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class Violation:
    code: str
    message: str

    def to_dict(self):
        return {"code": self.code, "message": self.message}


@dataclass
class ValidationReport:
    system: str
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, code: str, message: str):
        self.violations.append(Violation(code, message))

    def to_dict(self):
        return {"schema": "ifsdim.validation/1", "system": self.system, "ok": self.ok,
                "violations": [v.to_dict() for v in self.violations]}


_PROBE_N = (1, 2, 3, 5, 10, 20, 50, 100)


def _check_probabilities(sys: IfsSystem, rep: ValidationReport):
    pv = sys.probabilities
    if pv.finite:
        for i, v in enumerate(pv.values, 1):
            if not v > 0:
                rep.add("probability-nonpositive", f"p_{i} = {v} is not positive")
        total = sum(v if isinstance(v, Fraction) else Fraction(v) for v in pv.values)
        if abs(total - 1) > NORMALIZATION_TOL:
            rep.add("probability-normalization", f"probabilities sum to {float(total)!r}, not 1")
        if sys.finite and len(pv.values) != len(sys.maps):
            rep.add("index-set-mismatch",
                    f"{len(sys.maps)} maps but {len(pv.values)} probabilities")
        return
    if sys.finite:
        rep.add("index-set-mismatch", "finite map list with a parametric probability vector")
    for i in range(1, 201):
        v = pv.p(i)
        if not v > 0:
            rep.add("probability-nonpositive", f"p_{i} = {v} is not positive")
            break
    if pv.tail is None:
        rep.add("missing-tail-mass", "parametric probabilities must declare tail(n)")
        return
    for n in _PROBE_N:
        head = sum(Fraction(v) if not isinstance(v, Fraction) else v for v in pv.entries(n))
        err = abs(head + Fraction(pv.tail(n)) - 1)
        if err > NORMALIZATION_TOL:
            rep.add("probability-normalization",
                    f"sum_(i<={n}) p_i + T({n}) deviates from 1 by {float(err):.3g}")
            break
    if pv.tail_moment is not None:
        for n in _PROBE_N:
            lhs = pv.tail_moment(n - 1) - pv.tail_moment(n)
            rhs = n * pv.p(n)
            if abs(lhs - rhs) > NORMALIZATION_TOL * max(1.0, abs(float(rhs))):
                rep.add("tail-moment-inconsistent",
                        f"tail_moment({n - 1}) - tail_moment({n}) != {n} p_{n}")
                break


def _check_map_constants(i: int, m: MapSpec, d: int, rep: ValidationReport):
    if m.dim != d:
        rep.add("dimension-mismatch", f"map {i} acts on R^{m.dim}, space is R^{d}")
        return False
    if not m.gamma > 0:
        rep.add("lipschitz-declaration", f"map {i}: gamma = {m.gamma} must be positive")
        return False
    if m.gamma > m.Gamma:
        rep.add("lipschitz-declaration", f"map {i}: gamma = {m.gamma} exceeds Gamma = {m.Gamma}")
        return False
    if m.kind == "affine-diagonal":
        if len(m.factors) != d:
            rep.add("dimension-mismatch", f"map {i}: {len(m.factors)} factors in R^{d}")
            return False
        lo = min(abs(f) for f in m.factors)
        hi = max(abs(f) for f in m.factors)
        if lo != m.gamma or hi != m.Gamma:
            rep.add("lipschitz-constant",
                    f"map {i}: per-axis factors give (gamma, Gamma) = ({lo}, {hi}), "
                    f"declared ({m.gamma}, {m.Gamma})")
    elif m.kind == "affine-general":
        if len(m.matrix) != d or any(len(r) != d for r in m.matrix):
            rep.add("dimension-mismatch", f"map {i}: matrix is not {d}x{d}")
            return False
        sv = np.linalg.svd(m.linear(), compute_uv=False)
        tol = LIPSCHITZ_RTOL * max(sv[0], 1.0)
        if abs(sv[-1] - _f(m.gamma)) > tol or abs(sv[0] - _f(m.Gamma)) > tol:
            rep.add("lipschitz-constant",
                    f"map {i}: singular values ({sv[-1]:.12g}, {sv[0]:.12g}) differ from "
                    f"declared ({m.gamma}, {m.Gamma})")
    else:
        alpha, beta, q = m.radial
        if not q > 0 or alpha == 0:
            rep.add("radial-parameters", f"map {i}: need exponent > 0 and alpha != 0")
            return False
    return True


def _sampled_pairs(sys: IfsSystem, sub: Substream):
    x = sys.space.sample(sub, PAIR_SAMPLES // 2)
    y = sys.space.sample(sub, PAIR_SAMPLES // 2)
    # close pairs probe local stretching; their partners must stay in the space
    base = sys.space.sample(sub, PAIR_SAMPLES)
    scale = np.maximum(np.abs(base).max(axis=1, keepdims=True), sys.space.scale())
    # fixed step length: much shorter steps drown the ratio in rounding error
    direction = sub.normals(PAIR_SAMPLES * sys.dim).reshape(PAIR_SAMPLES, sys.dim)
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    step = direction * 1e-3 * scale
    near = base + step
    keep = sys.space.contains(near, tol=0.0)
    xs = np.concatenate([x, base[keep]])
    ys = np.concatenate([y, near[keep]])
    dist = np.linalg.norm(xs - ys, axis=1)
    ok = dist > 0
    return xs[ok], ys[ok], dist[ok]


def validate(sys: IfsSystem, seed: int = 0) -> ValidationReport:
    """Check every declared invariant; violations are returned, never raised."""
    rep = ValidationReport(sys.name)
    for problem in sys.space.problems():
        rep.add("space", problem)
    if rep.violations:
        return rep
    _check_probabilities(sys, rep)
    if sys.open_set is not None and sys.open_set.dim != sys.dim:
        rep.add("dimension-mismatch", "open set dimension differs from the space")
    d = sys.dim
    for k, (i, m) in enumerate(sys.first_maps()):
        if not _check_map_constants(i, m, d, rep):
            continue
        sub = Substream(seed, 1000 + k)
        xs, ys, dist = _sampled_pairs(sys, sub)
        ratio = np.linalg.norm(m.apply(xs) - m.apply(ys), axis=1) / dist
        lo, hi = float(ratio.min()), float(ratio.max())
        if lo < _f(m.gamma) * (1 - LIPSCHITZ_RTOL) or hi > _f(m.Gamma) * (1 + LIPSCHITZ_RTOL):
            rep.add("lipschitz-sampled",
                    f"map {i}: sampled ratios span [{lo:.12g}, {hi:.12g}], outside "
                    f"declared [{m.gamma}, {m.Gamma}]")
        pts = sys.space.sample(sub, POINT_SAMPLES)
        img = m.apply(pts)
        tol = CONTAINMENT_TOL * max(1.0, float(np.abs(img).max()))
        inside = sys.space.contains(img, tol=tol)
        if not inside.all():
            bad = pts[~inside][0]
            rep.add("map-into-space", f"map {i} sends {bad.tolist()} outside the space")
    return rep


def apply_map(sys: IfsSystem, i: int, x) -> np.ndarray:
    """``w_i(x)`` computed exactly as the orbit kernels compute it."""
    from ._pykernels import step

    m = sys.map(i)
    x = np.asarray(x, dtype=float)
    if x.shape != (sys.dim,):
        raise ValueError(f"point must have shape ({sys.dim},)")
    kind, lin, trans, rad = m.kernel_row()
    return np.array(step(int(kind), lin.tolist(), trans.tolist(), tuple(rad), x.tolist()))
