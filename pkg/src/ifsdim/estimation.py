"""Local-dimension estimates from sampled point clouds.

``log mu(B(x, r)) / log r`` is approximated by the least-squares slope of
``log(count(x, r) / N)`` against ``log r`` over dyadic radii.  Ball counts are
exact: the grid index only prunes candidates, and every candidate goes
through the same squared-distance test as the exhaustive count.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _backend
from .rng import Substream

DEFAULT_MIN_COUNT = 50
DEFAULT_LEVELS = 40
BAND_TOLERANCE = 0.1


class InsufficientData(ValueError):
    """Fewer than three radii carry enough points for a slope."""


def squared_distances(points: np.ndarray, x) -> np.ndarray:
    """``sum_k (p_k - x_k)^2`` accumulated axis by axis (the order every count uses)."""
    d2 = np.zeros(len(points))
    for k in range(points.shape[1]):
        diff = points[:, k] - x[k]
        d2 = d2 + diff * diff
    return d2


class BallIndex:
    """Uniform grid over the cloud's bounding box answering closed-ball counts.

    Cells have side at least ``r_min``; the side grows when the grid would
    exceed ``max(4 N, 64)`` cells.  ``mode="exhaustive"`` skips the grid.
    """

    def __init__(self, points, r_min: float, mode: str = "grid"):
        if not (r_min > 0 and math.isfinite(r_min)):
            raise ValueError("r_min must be positive and finite")
        pts = np.ascontiguousarray(np.atleast_2d(np.asarray(points, dtype=float)))
        if pts.size == 0:
            raise ValueError("cannot index an empty cloud")
        if mode not in ("grid", "exhaustive"):
            raise ValueError("mode must be 'grid' or 'exhaustive'")
        self.n, self.d = pts.shape
        self.mode = mode
        self.r_min = r_min
        self.lo = pts.min(axis=0)
        self.hi = pts.max(axis=0)
        if mode == "exhaustive":
            self.points = pts
            return
        cap = max(4 * self.n, 64)
        h = r_min
        while True:
            dims = np.floor((self.hi - self.lo) / h).astype(np.int64) + 1
            if float(np.prod(dims.astype(float))) <= cap:
                break
            h *= 2.0
        self.h = h
        self.dims = dims
        cells = np.minimum(np.floor((pts - self.lo) / h).astype(np.int64), dims - 1)
        lin = np.ravel_multi_index(cells.T, dims)
        order = np.argsort(lin, kind="stable")
        self.points = np.ascontiguousarray(pts[order])
        counts = np.bincount(lin, minlength=int(np.prod(dims)))
        self.cell_start = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)

    @property
    def diameter(self) -> float:
        return float(np.linalg.norm(self.hi - self.lo))

    def count_many(self, x, radii) -> np.ndarray:
        """Counts of ``|y - x| <= r`` for each radius, in the order given."""
        x = np.ascontiguousarray(np.asarray(x, dtype=float))
        radii = np.asarray(radii, dtype=float)
        if radii.size == 0:
            return np.zeros(0, dtype=np.int64)
        if (radii < 0).any():
            raise ValueError("radii must be non-negative")
        order = np.argsort(-radii, kind="stable")
        r2 = np.ascontiguousarray(radii[order] * radii[order])
        if self.mode == "exhaustive":
            d2 = np.sort(squared_distances(self.points, x))
            got = np.searchsorted(d2, r2, side="right").astype(np.int64)
        else:
            got = _backend.kernels.count_within(
                self.points, self.cell_start, self.dims, self.lo, self.h, x, r2)
        out = np.empty_like(got)
        out[order] = got
        return out

    def count(self, x, r: float) -> int:
        return int(self.count_many(x, [r])[0])


def build_index(cloud, r_min: float, mode: str = "grid") -> BallIndex:
    pts = cloud.points if hasattr(cloud, "points") else cloud
    return BallIndex(pts, r_min, mode)


@dataclass(frozen=True)
class SlopeEstimate:
    slope: float
    stderr: float
    n_radii: int
    r_max: float
    r_min: float


def _fit(log_r: np.ndarray, log_m: np.ndarray) -> tuple[float, float]:
    k = len(log_r)
    xm, ym = log_r.mean(), log_m.mean()
    sxx = float(((log_r - xm) ** 2).sum())
    slope = float(((log_r - xm) * (log_m - ym)).sum() / sxx)
    resid = log_m - (ym + slope * (log_r - xm))
    se = math.sqrt(float((resid**2).sum()) / (k - 2) / sxx) if k > 2 else math.inf
    return slope, se


def local_dimension(index: BallIndex, x, radii, min_count: int = 20) -> SlopeEstimate:
    """Slope of ``log(count/N)`` vs ``log r`` over the radii holding ``>= min_count`` points."""
    if min_count < 20:
        raise ValueError("min_count must be at least 20")
    radii = np.asarray(radii, dtype=float)
    if len(radii) > 1 and not (np.diff(radii) < 0).all():
        raise ValueError("radii must be strictly decreasing")
    if (radii <= 0).any():
        raise ValueError("radii must be positive")
    counts = index.count_many(x, radii)
    use = counts >= min_count
    if use.sum() < 3:
        raise InsufficientData(f"only {int(use.sum())} radii hold {min_count}+ points")
    r, c = radii[use], counts[use]
    slope, se = _fit(np.log(r), np.log(c / index.n))
    return SlopeEstimate(slope, se, len(r), float(r.max()), float(r.min()))


def dyadic_radii(r0: float, levels: int = DEFAULT_LEVELS) -> np.ndarray:
    return r0 * 2.0 ** -np.arange(levels)


@dataclass
class DimensionProfile:
    centers: np.ndarray
    radii: np.ndarray
    slopes: np.ndarray
    stderrs: np.ndarray
    radii_used: np.ndarray
    quantiles: dict[str, float]
    band: tuple[float, float] | None
    coverage: float | None
    excluded: int
    window: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "schema": "ifsdim.profile/1",
            "n_centers": int(len(self.slopes)),
            "excluded": self.excluded,
            "quantiles": self.quantiles,
            "band": None if self.band is None else list(self.band),
            "band_tolerance": BAND_TOLERANCE,
            "coverage": self.coverage,
            "window": self.window,
            "slopes": [float(s) for s in self.slopes],
            "stderrs": [float(s) for s in self.stderrs],
        }

    def to_csv(self, path):
        d = self.centers.shape[1] if self.centers.ndim == 2 else 0
        with open(Path(path), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([f"x{k + 1}" for k in range(d)] + ["slope", "stderr", "radii_used"])
            for c, s, e, n in zip(self.centers, self.slopes, self.stderrs, self.radii_used):
                w.writerow([f"{v:.17g}" for v in c] + [f"{s:.17g}", f"{e:.17g}", int(n)])


def _band(bounds):
    if bounds is None:
        return None
    if hasattr(bounds, "s_lower"):
        return float(bounds.s_lower.value), float(bounds.s_upper.value)
    lo, hi = bounds
    return float(lo), float(hi)


def dimension_profile(index: BallIndex, bounds=None, n_centers: int = 200, seed: int = 0, *,
                      min_count: int = DEFAULT_MIN_COUNT, levels: int = DEFAULT_LEVELS,
                      edge_margin=False, workers: int = 1) -> DimensionProfile:
    """Slopes at centers drawn without replacement from the cloud.

    The radii are ``r0 * 2^-k`` with ``r0`` an eighth of the bounding-box
    diameter.  ``edge_margin`` keeps centers at least ``r0`` away from the
    bounding box: ``True`` applies this on every side, a ``(d, 2)`` boolean
    array (lower, upper) only on the selected sides, typically the sides where
    the support is unbounded and the sample is thin.
    """
    diam = index.diameter
    r0 = diam / 8.0 if diam > 0 else 1.0
    radii = dyadic_radii(r0, levels)
    pts = index.points
    eligible = np.arange(index.n)
    sides = np.broadcast_to(np.asarray(edge_margin, dtype=bool), (index.d, 2))
    if sides.any():
        lo = np.where(sides[:, 0], index.lo + r0, -np.inf)
        hi = np.where(sides[:, 1], index.hi - r0, np.inf)
        eligible = eligible[np.all((pts >= lo) & (pts <= hi), axis=1)]
    if n_centers > len(eligible):
        raise ValueError(f"{n_centers} centers requested, {len(eligible)} eligible points")
    pick = eligible[Substream(seed, 0).choice_without_replacement(len(eligible), n_centers)]
    centers = pts[pick]

    def one(c):
        try:
            return local_dimension(index, c, radii, min_count)
        except InsufficientData:
            return None

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(one, centers))
    else:
        results = [one(c) for c in centers]
    keep = [k for k, r in enumerate(results) if r is not None]
    slopes = np.array([results[k].slope for k in keep])
    band = _band(bounds)
    if len(slopes):
        quant = {f"q{q}": float(np.quantile(slopes, q / 100)) for q in (10, 50, 90)}
    else:
        quant = {"q10": math.nan, "q50": math.nan, "q90": math.nan}
    coverage = None
    if band is not None and len(slopes):
        lo, hi = band[0] - BAND_TOLERANCE, band[1] + BAND_TOLERANCE
        coverage = float(((slopes >= lo) & (slopes <= hi)).mean())
    return DimensionProfile(
        centers=centers[keep],
        radii=radii,
        slopes=slopes,
        stderrs=np.array([results[k].stderr for k in keep]),
        radii_used=np.array([results[k].n_radii for k in keep], dtype=np.int64),
        quantiles=quant,
        band=band,
        coverage=coverage,
        excluded=len(results) - len(keep),
        window={"r0": r0, "levels": levels, "min_count": min_count,
                "edge_margin": sides.astype(int).tolist()},
    )
