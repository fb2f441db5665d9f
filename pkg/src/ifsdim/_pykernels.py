"""Pure-Python reference kernels.

These mirror ``_ckernels.pyx`` operation for operation (same evaluation
order, no fused multiply-add), so both backends return bit-identical
orbits and identical counts.
"""

from __future__ import annotations

import math

import numpy as np

DIAGONAL, GENERAL, RADIAL = 0, 1, 2


def step(kind, lin, trans, rad, x):
    """One map application on a list of floats."""
    d = len(x)
    if kind == DIAGONAL:
        return [lin[k][k] * x[k] + trans[k] for k in range(d)]
    if kind == GENERAL:
        out = []
        for k in range(d):
            acc = 0.0
            row = lin[k]
            for j in range(d):
                acc = acc + row[j] * x[j]
            out.append(acc + trans[k])
        return out
    r2 = 0.0
    for k in range(d):
        r2 = r2 + x[k] * x[k]
    a = rad[0] - rad[1] * math.pow(r2, rad[2])
    return [a * x[k] + trans[k] for k in range(d)]


def orbit(kinds, lin, trans, rad, symbols, x0, burn_in, guard):
    """Forward orbit driven by 1-based ``symbols``; the first ``burn_in`` states are dropped.

    Returns ``(points, escaped_at)`` with ``escaped_at = -1`` unless some
    coordinate left ``[-guard, guard]`` (or became NaN) at that step.
    """
    n_steps = len(symbols)
    d = len(x0)
    out = np.empty((max(n_steps - burn_in, 0), d))
    kinds_l = [int(k) for k in kinds]
    lin_l = lin.tolist()
    trans_l = trans.tolist()
    rad_l = [tuple(r) for r in rad.tolist()]
    x = [float(v) for v in x0]
    for t, s in enumerate(symbols.tolist()):
        i = s - 1
        x = step(kinds_l[i], lin_l[i], trans_l[i], rad_l[i], x)
        for v in x:
            if not (-guard <= v <= guard):
                return out[: max(t - burn_in, 0)], t
        if t >= burn_in:
            out[t - burn_in] = x
    return out, -1


def count_within(points, cell_start, dims, lo, h, x, radii2):
    """Closed-ball counts around ``x`` for squared radii ``radii2`` (descending).

    ``points`` are sorted by C-order cell index; cells of side ``h`` start at
    ``lo``.  Candidate cells are widened by one on each side so that rounding
    in the cell arithmetic can never drop a point the distance test accepts.
    """
    d = len(dims)
    r = math.sqrt(radii2[0]) if len(radii2) else 0.0
    lo_c, hi_c = [], []
    for k in range(d):
        a = math.floor((x[k] - r - lo[k]) / h) - 1
        b = math.floor((x[k] + r - lo[k]) / h) + 1
        a = max(a, 0)
        b = min(b, int(dims[k]) - 1)
        if a > b:
            return np.zeros(len(radii2), dtype=np.int64)
        lo_c.append(a)
        hi_c.append(b)
    chunks = []
    # odometer over all axes but the last; each row of the last axis is contiguous
    idx = lo_c[:-1]
    while True:
        base = 0
        for k in range(d - 1):
            base = base * int(dims[k]) + idx[k]
        base *= int(dims[d - 1])
        s = cell_start[base + lo_c[-1]]
        e = cell_start[base + hi_c[-1] + 1]
        if e > s:
            chunks.append(points[s:e])
        k = d - 2
        while k >= 0:
            idx[k] += 1
            if idx[k] <= hi_c[k]:
                break
            idx[k] = lo_c[k]
            k -= 1
        if k < 0:
            break
    if not chunks:
        return np.zeros(len(radii2), dtype=np.int64)
    cand = np.concatenate(chunks)
    d2 = np.zeros(len(cand))
    for k in range(d):
        diff = cand[:, k] - x[k]
        d2 = d2 + diff * diff
    d2.sort()
    return np.searchsorted(d2, np.asarray(radii2), side="right").astype(np.int64)
