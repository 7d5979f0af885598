"""Rate triples, feasibility tests and convex rate-region algebra."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import EmptyInput, ShapeMismatch
from .probcore import (
    CANONICAL_AXES,
    EmbeddingProblem,
    EncoderPolicy,
    JointPMF,
    JointPolicy,
    expected_distortion,
    mutual_information,
)

__all__ = [
    "EncoderPolicy", "JointPolicy", "RateTriple", "RateRegion", "Feasibility",
    "rate_triple_general", "rate_triple_independent", "rate_triple", "batch_triples",
    "feasible", "pentagon", "convex_hull", "hull_union", "contains",
    "POSITIVITY_TOL", "COLLINEAR_TOL",
]

POSITIVITY_TOL = 1e-9
COLLINEAR_TOL = 1e-12
FORMULAS = ("general", "independent")


@dataclass(frozen=True)
class RateTriple:
    """Upper bounds ``R1 <= a``, ``R2 <= b``, ``R1 + R2 <= c``."""

    a: float
    b: float
    c: float

    def as_array(self) -> np.ndarray:
        return np.array([self.a, self.b, self.c])

    def dot(self, w) -> float:
        return float(w[0] * self.a + w[1] * self.b + w[2] * self.c)


@dataclass(frozen=True)
class RateRegion:
    """Convex polygon, counterclockwise from (0, 0)."""

    vertices: tuple

    def __post_init__(self):
        object.__setattr__(
            self, "vertices", tuple((float(x), float(y)) for x, y in self.vertices)
        )

    @classmethod
    def degenerate(cls) -> "RateRegion":
        return cls(((0.0, 0.0),))

    @property
    def is_degenerate(self) -> bool:
        return len(self.vertices) == 1

    def as_array(self) -> np.ndarray:
        return np.array(self.vertices, dtype=float).reshape(-1, 2)

    def max_sum_rate(self) -> float:
        return float(self.as_array().sum(axis=1).max())


def _check_canonical(joint: JointPMF):
    if len(joint.axes) != 7:
        raise ShapeMismatch(f"expected the 7 canonical axes {CANONICAL_AXES}, got {joint.names}")
    if joint.names != CANONICAL_AXES:
        raise ShapeMismatch(f"axis order must be {CANONICAL_AXES}, got {joint.names}")


def rate_triple_general(joint: JointPMF) -> RateTriple:
    _check_canonical(joint)
    mi = mutual_information
    a = mi(joint, "T1", ("T2", "Y")) - mi(joint, "U1", "T1")
    b = mi(joint, "T2", ("T1", "Y")) - mi(joint, "U2", "T2")
    c = mi(joint, ("T1", "T2"), "Y") - mi(joint, ("U1", "U2"), ("T1", "T2"))
    return RateTriple(a, b, c)


def rate_triple_independent(joint: JointPMF) -> RateTriple:
    _check_canonical(joint)
    mi = mutual_information
    i1 = mi(joint, "U1", "T1")
    i2 = mi(joint, "U2", "T2")
    a = mi(joint, "T1", "Y", given="T2") - i1
    b = mi(joint, "T2", "Y", given="T1") - i2
    c = mi(joint, ("T1", "T2"), "Y") - i1 - i2
    return RateTriple(a, b, c)


def rate_triple(joint: JointPMF, formula: str = "general") -> RateTriple:
    if formula == "general":
        return rate_triple_general(joint)
    if formula == "independent":
        return rate_triple_independent(joint)
    raise ValueError(f"unknown formula {formula!r}")


# ---------------------------------------------------------------------------
# batched evaluation over stacks of canonical joints


def _batch_entropy(w: np.ndarray, keep: tuple) -> np.ndarray:
    """Entropy of the marginal on axes ``keep`` (1-based, axis 0 is the batch)."""
    drop = tuple(i for i in range(1, w.ndim) if i not in keep)
    m = w.sum(axis=drop) if drop else w
    m = m.reshape(m.shape[0], -1)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(m > 0, m * np.log2(np.where(m > 0, m, 1.0)), 0.0)
    return -terms.sum(axis=1)


# axis numbers inside a batch: 1=U1 2=T1 3=U2 4=T2 5=X1 6=X2 7=Y
_U1, _T1, _U2, _T2, _X1, _X2, _Y = range(1, 8)


def batch_information_terms(w: np.ndarray) -> dict:
    """Entropies needed by both triple formulas for a batch ``(B, U1..Y)``."""
    core = w.sum(axis=(_X1, _X2))  # (B, U1, T1, U2, T2, Y)
    # positions in core: 1=U1 2=T1 3=U2 4=T2 5=Y
    tty = core.sum(axis=(1, 3))  # (B, T1, T2, Y)
    uutt = core.sum(axis=5)  # (B, U1, T1, U2, T2)
    H = {}
    H["T1T2Y"] = _batch_entropy(tty, (1, 2, 3))
    H["T1T2"] = _batch_entropy(tty, (1, 2))
    H["T1Y"] = _batch_entropy(tty, (1, 3))
    H["T2Y"] = _batch_entropy(tty, (2, 3))
    H["T1"] = _batch_entropy(tty, (1,))
    H["T2"] = _batch_entropy(tty, (2,))
    H["Y"] = _batch_entropy(tty, (3,))
    H["U1U2T1T2"] = _batch_entropy(uutt, (1, 2, 3, 4))
    H["U1U2"] = _batch_entropy(uutt, (1, 3))
    H["U1T1"] = _batch_entropy(uutt, (1, 2))
    H["U2T2"] = _batch_entropy(uutt, (3, 4))
    H["U1"] = _batch_entropy(uutt, (1,))
    H["U2"] = _batch_entropy(uutt, (3,))
    return H


def batch_ut_information(w: np.ndarray) -> tuple:
    """``(I(U1;T1), I(U2;T2))`` for each joint in a batch."""
    ut1 = w.sum(axis=(_U2, _T2, _X1, _X2, _Y))
    ut2 = w.sum(axis=(_U1, _T1, _X1, _X2, _Y))
    i1 = _batch_entropy(ut1, (1,)) + _batch_entropy(ut1, (2,)) - _batch_entropy(ut1, (1, 2))
    i2 = _batch_entropy(ut2, (1,)) + _batch_entropy(ut2, (2,)) - _batch_entropy(ut2, (1, 2))
    return i1, i2


def batch_distortions(w: np.ndarray, d1: np.ndarray, d2: np.ndarray) -> tuple:
    ux1 = w.sum(axis=(_T1, _U2, _T2, _X2, _Y))
    ux2 = w.sum(axis=(_U1, _T1, _T2, _X1, _Y))
    return (np.einsum("nax,ax->n", ux1, d1), np.einsum("nax,ax->n", ux2, d2))


def batch_triples(w: np.ndarray, formula: str = "general") -> np.ndarray:
    """Rate triples ``(B, 3)`` for a stack of canonical joint arrays."""
    if w.ndim != 8:
        raise ShapeMismatch(f"expected (batch, U1, T1, U2, T2, X1, X2, Y), got {w.shape}")
    H = batch_information_terms(w)
    i_u1t1 = H["U1"] + H["T1"] - H["U1T1"]
    i_u2t2 = H["U2"] + H["T2"] - H["U2T2"]
    i_tt_y = H["T1T2"] + H["Y"] - H["T1T2Y"]
    if formula == "general":
        a = H["T1"] + H["T2Y"] - H["T1T2Y"] - i_u1t1
        b = H["T2"] + H["T1Y"] - H["T1T2Y"] - i_u2t2
        c = i_tt_y - (H["U1U2"] + H["T1T2"] - H["U1U2T1T2"])
    elif formula == "independent":
        a = H["T1T2"] + H["T2Y"] - H["T1T2Y"] - H["T2"] - i_u1t1
        b = H["T1T2"] + H["T1Y"] - H["T1T2Y"] - H["T1"] - i_u2t2
        c = i_tt_y - i_u1t1 - i_u2t2
    else:
        raise ValueError(f"unknown formula {formula!r}")
    return np.stack([a, b, c], axis=1)


# ---------------------------------------------------------------------------
# feasibility


@dataclass(frozen=True)
class Feasibility:
    ok: bool
    distortion1: float
    distortion2: float
    info1: float
    info2: float

    def __bool__(self):
        return self.ok


def feasible(joint: JointPMF, problem: EmbeddingProblem, mode: str = "S") -> Feasibility:
    """Distortion constraints, plus ``I(Ui;Ti) > 1e-9`` when ``mode == "S"``."""
    if mode not in ("S", "P"):
        raise ValueError(f"mode must be 'S' or 'P', got {mode!r}")
    e1 = expected_distortion(joint, problem.d1, ("U1", "X1"))
    e2 = expected_distortion(joint, problem.d2, ("U2", "X2"))
    i1 = mutual_information(joint, "U1", "T1")
    i2 = mutual_information(joint, "U2", "T2")
    ok = e1 <= problem.D1 + 1e-12 and e2 <= problem.D2 + 1e-12
    if mode == "S":
        ok = ok and i1 > POSITIVITY_TOL and i2 > POSITIVITY_TOL
    return Feasibility(bool(ok), e1, e2, i1, i2)


# ---------------------------------------------------------------------------
# polygons


def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def convex_hull(points) -> list:
    """Monotone-chain hull, counterclockwise from the lexicographically smallest point.

    Collinear points (cross product within 1e-12) are dropped.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(pts) == 0:
        raise EmptyInput("no points")
    pts = sorted(set(map(tuple, pts.tolist())))
    if len(pts) <= 2:
        return pts

    lower = []
    for p in pts:
        while len(lower) >= 2 and _cross(lower[-2], lower[-1], p) <= COLLINEAR_TOL:
            lower.pop()
        lower.append(p)
    upper = []
    for p in reversed(pts):
        while len(upper) >= 2 and _cross(upper[-2], upper[-1], p) <= COLLINEAR_TOL:
            upper.pop()
        upper.append(p)
    return lower[:-1] + upper[:-1]


def pentagon(triple: RateTriple) -> RateRegion:
    a, b, c = triple.a, triple.b, triple.c
    if min(a, b, c) <= 0:
        return RateRegion.degenerate()
    # clip the rectangle [0,a]x[0,b] by R1 + R2 <= c
    rect = [(0.0, 0.0), (a, 0.0), (a, b), (0.0, b)]
    clipped = []
    for i, p in enumerate(rect):
        q = rect[(i + 1) % 4]
        fp, fq = p[0] + p[1] - c, q[0] + q[1] - c
        if fp <= 0:
            clipped.append(p)
        if (fp < 0 < fq) or (fq < 0 < fp):
            t = fp / (fp - fq)
            clipped.append((p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])))
    return RateRegion(tuple(convex_hull(clipped)))


def hull_union(regions: Iterable[RateRegion]) -> RateRegion:
    regions = list(regions)
    if not regions:
        raise EmptyInput("hull_union needs at least one region")
    pts = [(0.0, 0.0)]
    for r in regions:
        pts.extend(r.vertices)
    return RateRegion(tuple(convex_hull(pts)))


def region_from_triples(triples) -> RateRegion:
    arr = np.asarray(triples, dtype=float).reshape(-1, 3)
    return hull_union([pentagon(RateTriple(*t)) for t in arr])


def contains(region: RateRegion, point: Sequence[float], slack: float = 0.0) -> bool:
    """Membership in the polygon grown by ``slack`` in the sup norm."""
    v = region.as_array()
    p = np.asarray(point, dtype=float)
    normals = [np.array(n, dtype=float) for n in ((1, 0), (-1, 0), (0, 1), (0, -1))]
    m = len(v)
    if m >= 2:
        for i in range(m if m > 2 else 1):
            e = v[(i + 1) % m] - v[i]
            n = np.array([e[1], -e[0]])  # outward for counterclockwise order
            normals.append(n)
            if m == 2:
                normals.append(-n)
    for n in normals:
        if p @ n > np.max(v @ n) + slack * np.abs(n).sum() + 1e-15 * np.abs(n).sum():
            return False
    return True


def region_contains_region(outer: RateRegion, inner: RateRegion, slack: float = 0.0) -> bool:
    return all(contains(outer, v, slack) for v in inner.vertices)
