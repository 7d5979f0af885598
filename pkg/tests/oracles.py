"""Independent reference implementations used as test oracles.

They avoid the package's vectorised code paths on purpose: plain loops over
dictionaries of probabilities.
"""

import itertools
import math

import numpy as np


def h2(p):
    return 0.0 if p in (0.0, 1.0) else -p * math.log2(p) - (1 - p) * math.log2(1 - p)


def _sum_over(weights, keep):
    out = {}
    for idx in itertools.product(*(range(s) for s in weights.shape)):
        key = tuple(idx[k] for k in keep)
        out[key] = out.get(key, 0.0) + float(weights[idx])
    return out


def mutual_information(weights, a, b, c=()):
    """I(A;B|C) by a nested sum over the full joint; axes given by position."""
    weights = np.asarray(weights, dtype=float)
    p_abc = _sum_over(weights, tuple(a) + tuple(b) + tuple(c))
    p_ac = _sum_over(weights, tuple(a) + tuple(c))
    p_bc = _sum_over(weights, tuple(b) + tuple(c))
    p_c = _sum_over(weights, tuple(c))
    na, nb = len(a), len(b)
    total = 0.0
    for key, p in p_abc.items():
        if p <= 0:
            continue
        ka, kb, kc = key[:na], key[na:na + nb], key[na + nb:]
        total += p * math.log2(p * p_c[kc] / (p_ac[ka + kc] * p_bc[kb + kc]))
    return total


def expected_distortion(weights, table, u_axis, x_axis):
    pair = _sum_over(np.asarray(weights), (u_axis, x_axis))
    return sum(p * table[u][x] for (u, x), p in pair.items())


def brute_force_hull(points):
    """Vertices of the convex hull: a point is kept when it is an extreme
    point, i.e. not inside any triangle of other points nor strictly between
    two others on a segment.  Returned as a set of tuples."""
    pts = sorted(set(map(tuple, np.round(np.asarray(points, dtype=float), 12))))

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    def on_segment(p, a, b):
        return (abs(cross(a, b, p)) <= 1e-12 and min(a[0], b[0]) - 1e-12 <= p[0] <= max(a[0], b[0]) + 1e-12
                and min(a[1], b[1]) - 1e-12 <= p[1] <= max(a[1], b[1]) + 1e-12)

    def in_triangle(p, a, b, c):
        d1, d2, d3 = cross(a, b, p), cross(b, c, p), cross(c, a, p)
        neg = d1 < -1e-12 or d2 < -1e-12 or d3 < -1e-12
        pos = d1 > 1e-12 or d2 > 1e-12 or d3 > 1e-12
        return not (neg and pos)

    extreme = set()
    for p in pts:
        others = [q for q in pts if q != p]
        inside = any(on_segment(p, a, b) for a, b in itertools.combinations(others, 2))
        if not inside:
            inside = any(abs(cross(a, b, c)) > 1e-12 and in_triangle(p, a, b, c)
                         for a, b, c in itertools.combinations(others, 3))
        if not inside:
            extreme.add(p)
    return extreme


def pentagon_member(triple, point, tol=1e-12):
    a, b, c = triple
    r1, r2 = point
    return r1 >= -tol and r2 >= -tol and r1 <= a + tol and r2 <= b + tol and r1 + r2 <= c + tol
