"""Sampling the invariant measure.

Forward iteration (the chaos game) runs in shards: shard ``k`` draws its
symbols from substream ``(seed, k)``, restarts at ``x0`` and discards its own
burn-in.  The shard layout depends only on ``n`` and ``shard_size``, so the
result is identical for any number of worker threads.
"""

from __future__ import annotations

import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _backend
from ._pykernels import step
from .model import IfsSystem, MapSpec, SpaceSpec
from .rng import substream_key, uniform_block
from .symbolic import RandomStream, SymbolStream, SymbolWord

DEFAULT_BURN_IN = 1000
SHARD_SIZE = 1 << 18
GUARD_FACTOR = 1e9
WINDOW = 10


class OrbitDivergence(RuntimeError):
    """The orbit left the guard box: the system is probably mis-specified."""


class UnsupportedMap(ValueError):
    pass


@dataclass
class PointCloud:
    points: np.ndarray
    provenance: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self):
        return len(self.points)

    def to_csv(self, path, provenance: bool = True):
        """Header ``x1,...,xd`` then one point per row, 17 significant digits."""
        path = Path(path)
        header = ",".join(f"x{k + 1}" for k in range(self.dim))
        with open(path, "w", newline="\n") as fh:
            fh.write(header + "\n")
            if len(self.points):
                np.savetxt(fh, self.points, fmt="%.17g", delimiter=",")
        if provenance:
            Path(str(path) + ".json").write_text(json.dumps(self.provenance, indent=2, sort_keys=True) + "\n")

    @classmethod
    def from_csv(cls, path) -> "PointCloud":
        path = Path(path)
        with open(path) as fh:
            header = fh.readline().strip()
            body = fh.read()
        cols = header.split(",") if header else []
        if not cols or cols != [f"x{k + 1}" for k in range(len(cols))]:
            raise ValueError(f"{path}: header must be x1,...,xd")
        if body.strip():
            data = np.loadtxt(io.StringIO(body), delimiter=",", ndmin=2, dtype=float)
        else:
            data = np.zeros((0, len(cols)))
        if data.shape[1] != len(cols):
            raise ValueError(f"{path}: rows do not match the header")
        prov_path = Path(str(path) + ".json")
        prov = json.loads(prov_path.read_text()) if prov_path.exists() else {}
        return cls(np.ascontiguousarray(data), prov)


def shard_layout(n: int, shard_size: int = SHARD_SIZE) -> list[int]:
    if n <= 0:
        return []
    full, rest = divmod(n, shard_size)
    return [shard_size] * full + ([rest] if rest else [])


def forward_orbit(sys: IfsSystem, x0=None, n: int = 100_000, burn_in: int = DEFAULT_BURN_IN,
                  seed: int = 0, workers: int = 1, shard_size: int = SHARD_SIZE,
                  guard: float | None = None) -> PointCloud:
    """``x_{k+1} = w_{i_{k+1}}(x_k)`` with i.i.d. indices; ``n`` points after burn-in."""
    x0 = sys.space.default_point() if x0 is None else np.asarray(x0, dtype=float)
    if x0.shape != (sys.dim,):
        raise ValueError(f"x0 must have shape ({sys.dim},)")
    if n < 0 or burn_in < 0:
        raise ValueError("n and burn_in must be non-negative")
    guard = GUARD_FACTOR * max(sys.space.scale(), float(np.abs(x0).max(initial=0.0)), 1.0) if guard is None else guard
    sizes = shard_layout(n, shard_size)
    symbols = [
        sys.probabilities.symbols(uniform_block(substream_key(seed, k), 0, burn_in + m))
        for k, m in enumerate(sizes)
    ]
    top = max((int(s.max()) for s in symbols if len(s)), default=1)
    table = sys.kernel_table(top)
    kern = _backend.kernels

    def run(sym):
        return kern.orbit(*table, sym, x0, burn_in, guard)

    if workers > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(run, symbols))
    else:
        results = [run(s) for s in symbols]
    for k, (_, escaped) in enumerate(results):
        if escaped >= 0:
            raise OrbitDivergence(f"shard {k} left the guard box |x| <= {guard:g} at step {escaped}")
    pts = np.concatenate([r[0] for r in results]) if results else np.zeros((0, sys.dim))
    prov = {
        "schema": "ifsdim.pointcloud/1",
        "system": sys.name,
        "seed": seed,
        "burn_in": burn_in,
        "n": n,
        "x0": x0.tolist(),
        "shard_size": shard_size,
        "rng": "splitmix64-substreams",
    }
    return PointCloud(np.ascontiguousarray(pts), prov)


# --------------------------------------------------------------------------
# coding map


@dataclass(frozen=True)
class CodingResult:
    point: np.ndarray
    iterations: int
    residual: float
    converged: bool


def _symbol_source(i):
    if isinstance(i, SymbolStream):
        return i.block, None
    word = np.array(SymbolWord(i), dtype=np.int64)
    return (lambda start, k: word[start : start + k]), len(word)


def coding_map(sys: IfsSystem, i, x0=None, eps: float | None = None, max_n: int = 10_000,
               window: int = WINDOW) -> CodingResult:
    """Approximate ``pi(i) = lim w_{i_1} o ... o w_{i_n}(x0)``.

    Stops once ``window`` consecutive increments are below ``eps``; reaching
    ``max_n`` (or the end of a finite word) gives ``converged=False``.
    """
    x0 = sys.space.default_point() if x0 is None else np.asarray(x0, dtype=float)
    eps = 1e-9 * sys.space.scale() if eps is None else eps
    source, length = _symbol_source(i)
    if length is not None:
        max_n = min(max_n, length)
    d = sys.dim
    prev = x0.copy()
    quiet = 0
    residual = math.inf
    A = np.eye(d)
    c = np.zeros(d)
    syms: list[int] = []
    rows: dict[int, tuple] = {}
    x0_list = x0.tolist()
    for n in range(1, max_n + 1):
        if n > len(syms):
            syms.extend(source(len(syms), min(max(64, len(syms)), max_n - len(syms))).tolist())
        s = syms[n - 1]
        if s not in rows:
            m = sys.map(s)
            kind, lin, t, rad = m.kernel_row()
            rows[s] = (m.is_affine, lin, t, (int(kind), lin.tolist(), t.tolist(), rad))
        if all(r[0] for r in rows.values()):
            _, lin, t, _ = rows[s]
            c = A @ t + c
            A = A @ lin
            cur = A @ x0 + c
        else:
            y = x0_list
            for k in range(n - 1, -1, -1):
                y = step(*rows[syms[k]][3], y)
            cur = np.array(y)
        residual = float(np.linalg.norm(cur - prev))
        prev = cur
        quiet = quiet + 1 if residual < eps else 0
        if quiet >= window:
            return CodingResult(cur, n, residual, True)
    return CodingResult(prev, max_n, residual, False)


def coding_samples(sys: IfsSystem, count: int, seed: int = 0, eps: float | None = None,
                   max_n: int = 10_000) -> np.ndarray:
    """``pi`` evaluated at ``count`` independent random streams (stream ``k`` of ``seed``)."""
    out = np.empty((count, sys.dim))
    for k in range(count):
        res = coding_map(sys, RandomStream(sys.probabilities, seed, k), eps=eps, max_n=max_n)
        if not res.converged:
            raise RuntimeError(f"coding map did not converge on stream {k}")
        out[k] = res.point
    return out


# --------------------------------------------------------------------------
# cylinder masses


def _image_box(maps: list[MapSpec], lower, upper):
    lo, hi = list(lower), list(upper)
    for m in reversed(maps):
        new_lo, new_hi = [], []
        for f, t, a, b in zip(m.factors, m.translation, lo, hi):
            u, v = f * a, f * b
            if u > v:
                u, v = v, u
            new_lo.append(u + t)
            new_hi.append(v + t)
        lo, hi = new_lo, new_hi
    return lo, hi


def word_image_contains(sys: IfsSystem, word, region: SpaceSpec, points, tol: float = 1e-9) -> np.ndarray:
    """Which points lie in ``w_word(region)`` (closed, slack ``tol``)."""
    word = SymbolWord(word)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    maps = [sys.map(s) for s in word]
    if region.kind != "ball" and all(m.kind == "affine-diagonal" for m in maps):
        lo, hi = _image_box(maps, region.lower, region.upper)
        lo = np.array([float(v) for v in lo])
        hi = np.array([float(v) for v in hi])
        return np.all((pts >= lo - tol) & (pts <= hi + tol), axis=1)
    y = pts
    for m in maps:
        if not m.invertible():
            raise UnsupportedMap(f"map {m.kind} is not invertible")
        y = m.inverse(y)
    with np.errstate(invalid="ignore"):
        return region.contains(y, tol=tol) & ~np.isnan(y).any(axis=1)


def cylinder_mass(cloud: PointCloud, sys: IfsSystem, word, region: SpaceSpec | None = None) -> float:
    """Fraction of ``cloud`` inside ``w_word(region)``; region defaults to the closed open set."""
    if region is None:
        region = sys.open_set.closure() if sys.open_set is not None else sys.space
    if len(cloud) == 0:
        raise ValueError("empty point cloud")
    return float(word_image_contains(sys, word, region, cloud.points).mean())
