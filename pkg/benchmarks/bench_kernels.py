"""Compare the compiled and pure-Python kernels on the two hot paths.

    python benchmarks/bench_kernels.py [--points 200000] [--centers 200]

Both backends must produce identical results; the script checks this and
prints wall-clock times.
"""

import argparse
import time

import numpy as np

from ifsdim import _backend
from ifsdim.dynamics import forward_orbit
from ifsdim.estimation import build_index, dyadic_radii
from ifsdim.model import preset
from ifsdim.rng import Substream


def timed(fn, repeat=3):
    best = float("inf")
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--points", type=int, default=200_000)
    ap.add_argument("--centers", type=int, default=200)
    ap.add_argument("--preset", default="example2")
    args = ap.parse_args()

    system = preset(args.preset)
    cloud = forward_orbit(system, n=args.points, seed=0)
    pick = Substream(1, 0).choice_without_replacement(len(cloud), args.centers)
    centers = cloud.points[pick]
    radii = dyadic_radii(float(np.linalg.norm(np.ptp(cloud.points, axis=0))) / 8, 40)

    rows, outputs = [], {}
    for name, mod in sorted(_backend.available().items()):
        _backend.kernels = mod
        t_orbit, orbit = timed(lambda: forward_orbit(system, n=args.points, seed=0).points)
        index = build_index(cloud, 1e-4)
        t_count, counts = timed(lambda: np.array([index.count_many(c, radii) for c in centers]))
        outputs[name] = (orbit, counts)
        rows.append((name, t_orbit, t_count))

    print(f"{'backend':<8} {'orbit (s)':>10} {'ball counts (s)':>16}   [{args.preset}, "
          f"{args.points} points, {args.centers} centers x {len(radii)} radii]")
    for name, t_orbit, t_count in rows:
        print(f"{name:<8} {t_orbit:>10.4f} {t_count:>16.4f}")
    if len(rows) == 2:
        (_, o1, c1), (_, o2, c2) = rows
        print(f"speed-up (python / cython): orbit {o2 / o1:.1f}x, counts {c2 / c1:.1f}x")
        (po, pc), (qo, qc) = outputs.values()
        same = np.array_equal(po, qo) and np.array_equal(pc, qc)
        print("outputs identical:", same)
        if not same:
            raise SystemExit(1)
    else:
        print("compiled kernels not available; only the fallback was timed")


if __name__ == "__main__":
    main()
