"""Candidate-policy generation and region assembly.

Inner regions iterate over separate encoders ``P(Ti, Xi | Ui)``; outer subsets
iterate over cooperative encoders ``P(T1, T2, X1, X2 | U1, U2)``.  Candidates
are evaluated in fixed-size batches, pruned to their Pareto-maximal rate
triples, and the final region is the convex hull of the surviving pentagons.
"""

from __future__ import annotations

import itertools
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .errors import (
    BudgetZero,
    ExhaustiveTooLarge,
    InfeasibleStart,
    NotIndependent,
    StepNotDivisor,
    ValidationError,
)
from .probcore import EmbeddingProblem, EncoderPolicy, JointPolicy, entropy_array
from .region import (
    POSITIVITY_TOL,
    RateRegion,
    RateTriple,
    batch_distortions,
    batch_triples,
    batch_ut_information,
    region_from_triples,
)

MODES = ("exhaustive-grid", "random-sample", "sample-then-refine", "candidates-only")
DISTORTION_TOL = 1e-12


@dataclass(frozen=True)
class SearchStrategy:
    mode: str = "exhaustive-grid"
    grid_step: float = 0.1
    sample_budget: int = 10_000
    refine_directions: int = 64
    refine_steps: int = 100
    seed: int = 0
    rate_margin: float = 0.0
    exhaustive_cap: int = 10**8
    batch_size: int = 1024
    workers: int | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValidationError(f"unknown search mode {self.mode!r}", field="mode")
        if not 0 < self.grid_step <= 1:
            raise ValidationError("grid_step must lie in (0, 1]", field="grid_step")
        if self.mode == "exhaustive-grid":
            grid_units(self.grid_step)
        if self.rate_margin < 0:
            raise ValidationError("rate_margin must be >= 0", field="rate_margin")
        if self.refine_directions < 1 or self.batch_size < 1:
            raise ValidationError("refine_directions and batch_size must be >= 1")
        if self.refine_steps < 0:
            raise ValidationError("refine_steps must be >= 0", field="refine_steps")


@dataclass(frozen=True)
class CardinalityCaps:
    t1_size: int
    t2_size: int

    def __post_init__(self):
        if self.t1_size < 1 or self.t2_size < 1:
            raise ValidationError("auxiliary alphabet sizes must be >= 1")

    @classmethod
    def inner_general(cls, problem: EmbeddingProblem) -> "CardinalityCaps":
        nu = len(problem.U1) * len(problem.U2)
        return cls(nu * len(problem.X1) + 1, nu * len(problem.X2) + 1)

    @classmethod
    def inner_independent(cls, problem: EmbeddingProblem) -> "CardinalityCaps":
        return cls(len(problem.U1) * len(problem.X1) + 1, len(problem.U2) * len(problem.X2) + 1)


@dataclass
class RegionReport:
    region: RateRegion
    pareto_triples: list
    candidates_evaluated: int
    feasible_count: int
    wall_time: float
    kind: str = "inner"
    formula: str = "general"
    caps: CardinalityCaps | None = None
    strategy: SearchStrategy | None = None

    @property
    def label(self) -> str:
        if self.kind == "outer-subset":
            return "subset of outer bound (capped auxiliary alphabets)"
        return "inner bound"

    def triples_array(self) -> np.ndarray:
        return np.array([t.as_array() for t, _ in self.pareto_triples]).reshape(-1, 3)


def worker_count(requested: int | None = None) -> int:
    if requested is not None:
        return max(1, int(requested))
    env = os.environ.get("ERL_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValidationError(f"ERL_THREADS must be an integer, got {env!r}") from None
    return os.cpu_count() or 1


# ---------------------------------------------------------------------------
# grids and sampling


def grid_units(step: float) -> int:
    """Number of quanta ``1 / step``; raises unless it is an integer."""
    units = round(1.0 / step)
    if units < 1 or abs(units * step - 1.0) > 1e-9:
        raise StepNotDivisor(f"grid step {step} does not divide 1")
    return units


def compositions(total: int, parts: int) -> np.ndarray:
    """All nonnegative integer vectors of length ``parts`` summing to ``total``.

    Rows come in lexicographically increasing order.
    """
    out = []
    for bars in itertools.combinations(range(total + parts - 1), parts - 1):
        prev = -1
        row = []
        for b in bars:
            row.append(b - prev - 1)
            prev = b
        row.append(total + parts - 1 - prev - 1)
        out.append(row)
    arr = np.array(out, dtype=np.int64).reshape(-1, parts)
    return arr[np.lexsort(arr.T[::-1])]


def composition_count(total: int, parts: int) -> int:
    return math.comb(total + parts - 1, parts - 1)


def grid_tables(row_count: int, column_count: int, step: float) -> np.ndarray:
    """Every row-stochastic table on the ``step`` lattice, shape ``(K, rows, cols)``."""
    units = grid_units(step)
    rows = compositions(units, column_count) / units
    idx = np.array(list(itertools.product(range(len(rows)), repeat=row_count)), dtype=np.int64)
    return rows[idx.reshape(-1, row_count)]


def grid_policies(row_count: int, column_count: int, step: float) -> Iterator[np.ndarray]:
    units = grid_units(step)
    rows = compositions(units, column_count) / units
    for combo in itertools.product(range(len(rows)), repeat=row_count):
        yield rows[list(combo)]


def sample_tables(count: int, row_count: int, column_count: int, rng) -> np.ndarray:
    """Rows uniform on the simplex (normalized exponentials)."""
    e = rng.standard_exponential((count, row_count, column_count))
    return e / e.sum(axis=-1, keepdims=True)


def sample_policy(row_count: int, column_count: int, rng) -> np.ndarray:
    return sample_tables(1, row_count, column_count, rng)[0]


# ---------------------------------------------------------------------------
# batched composition


def compose_inner_batch(problem: EmbeddingProblem, p1: np.ndarray, p2: np.ndarray) -> np.ndarray:
    return np.einsum("ac,nabe,ncdf,efg->nabcdefg",
                     problem.Q.weights, p1, p2, problem.W.table, optimize=True)


def compose_outer_batch(problem: EmbeddingProblem, p: np.ndarray) -> np.ndarray:
    return np.einsum("ac,nacbdef,efg->nabcdefg",
                     problem.Q.weights, p, problem.W.table, optimize=True)


def lift_arrays(p1: np.ndarray, p2: np.ndarray) -> np.ndarray:
    return np.einsum("nabe,ncdf->nacbdef", p1, p2)


def pad_t(p: np.ndarray, size: int, axis: int) -> np.ndarray:
    """Embed a policy into a larger auxiliary alphabet (extra symbols get zero mass)."""
    extra = size - p.shape[axis]
    if extra < 0:
        raise ValidationError(f"policy auxiliary alphabet {p.shape[axis]} exceeds cap {size}")
    if extra == 0:
        return p
    widths = [(0, 0)] * p.ndim
    widths[axis] = (0, extra)
    return np.pad(p, widths)


def embed_encoder_policy(policy: EncoderPolicy, caps: CardinalityCaps) -> EncoderPolicy:
    p1, p2 = policy.arrays
    return EncoderPolicy.from_arrays(pad_t(p1, caps.t1_size, 1), pad_t(p2, caps.t2_size, 1))


def embed_joint_policy(policy: JointPolicy, caps: CardinalityCaps) -> JointPolicy:
    p = pad_t(pad_t(policy.array, caps.t1_size, 2), caps.t2_size, 3)
    return JointPolicy.from_array(p)


# ---------------------------------------------------------------------------
# Pareto bookkeeping


def pareto_mask(triples: np.ndarray) -> np.ndarray:
    """True for rows not dominated by any other row; among exact ties the first survives."""
    t = np.asarray(triples, dtype=float)
    n = len(t)
    if n == 0:
        return np.zeros(0, dtype=bool)
    ge = np.all(t[None, :, :] >= t[:, None, :], axis=2)  # ge[i, j]: j >= i everywhere
    gt = np.any(t[None, :, :] > t[:, None, :], axis=2)
    dominated = np.any(ge & gt, axis=1)
    equal = ge & ~gt
    earlier_equal = np.any(np.tril(equal, k=-1), axis=1)
    return ~(dominated | earlier_equal)


def _dominated_by(t: np.ndarray, others: np.ndarray, strict_ties: bool) -> np.ndarray:
    """Rows of ``t`` dominated by some row of ``others`` (ties count iff ``strict_ties``)."""
    if len(others) == 0 or len(t) == 0:
        return np.zeros(len(t), dtype=bool)
    ge = np.all(others[None, :, :] >= t[:, None, :], axis=2)
    if strict_ties:
        return np.any(ge, axis=1)
    gt = np.any(others[None, :, :] > t[:, None, :], axis=2)
    return np.any(ge & gt, axis=1)


@dataclass
class ParetoFront:
    """Pareto-maximal triples with their policy payloads (arrays)."""

    triples: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))
    payload: list = field(default_factory=list)

    def merge(self, triples: np.ndarray, payload: Sequence) -> None:
        if len(triples) == 0:
            return
        keep = pareto_mask(triples)
        triples = triples[keep]
        payload = [p for p, k in zip(payload, keep) if k]
        # incoming rows equal to an existing row lose (existing came first)
        new_ok = ~_dominated_by(triples, self.triples, strict_ties=True)
        old_ok = ~_dominated_by(self.triples, triples[new_ok], strict_ties=False)
        self.triples = np.concatenate([self.triples[old_ok], triples[new_ok]])
        self.payload = [p for p, k in zip(self.payload, old_ok) if k] + \
                       [p for p, k in zip(payload, new_ok) if k]

    def absorb(self, other: "ParetoFront") -> None:
        self.merge(other.triples, other.payload)


def _useful(triples: np.ndarray) -> np.ndarray:
    # pentagons with a nonpositive bound collapse to the origin
    return np.all(triples > 0, axis=1)


# ---------------------------------------------------------------------------
# evaluation of candidate batches


@dataclass
class BatchResult:
    front: ParetoFront
    evaluated: int
    feasible: int
    best: dict  # direction index -> (score, payload)


def _direction_best(triples: np.ndarray, ok: np.ndarray, payload_fn, directions) -> dict:
    best = {}
    if directions is None or not np.any(ok):
        return best
    scores = triples @ np.asarray(directions).T  # (B, K)
    scores = np.where(ok[:, None], scores, -np.inf)
    arg = np.argmax(scores, axis=0)
    for k, i in enumerate(arg):
        if np.isfinite(scores[i, k]):
            best[k] = (float(scores[i, k]), payload_fn(int(i)))
    return best


def _merge_best(into: dict, new: dict) -> None:
    for k, (score, payload) in new.items():
        if k not in into or score > into[k][0]:
            into[k] = (score, payload)


def _evaluate_inner(problem, p1, p2, formula, check, directions=None) -> BatchResult:
    w = compose_inner_batch(problem, p1, p2)
    triples = batch_triples(w, formula)
    if check:
        e1, e2 = batch_distortions(w, problem.d1, problem.d2)
        i1, i2 = batch_ut_information(w)
        ok = ((e1 <= problem.D1 + DISTORTION_TOL) & (e2 <= problem.D2 + DISTORTION_TOL)
              & (i1 > POSITIVITY_TOL) & (i2 > POSITIVITY_TOL))
    else:
        ok = np.ones(len(w), dtype=bool)
    use = ok & _useful(triples)
    idx = np.flatnonzero(use)
    front = ParetoFront()
    front.merge(triples[idx], [(p1[i].copy(), p2[i].copy()) for i in idx])
    best = _direction_best(triples, ok, lambda i: (p1[i].copy(), p2[i].copy()), directions)
    return BatchResult(front, len(w), int(ok.sum()), best)


def _evaluate_outer(problem, p, formula, directions=None) -> BatchResult:
    w = compose_outer_batch(problem, p)
    triples = batch_triples(w, formula)
    e1, e2 = batch_distortions(w, problem.d1, problem.d2)
    ok = (e1 <= problem.D1 + DISTORTION_TOL) & (e2 <= problem.D2 + DISTORTION_TOL)
    idx = np.flatnonzero(ok & _useful(triples))
    front = ParetoFront()
    front.merge(triples[idx], [p[i].copy() for i in idx])
    best = _direction_best(triples, ok, lambda i: p[i].copy(), directions)
    return BatchResult(front, len(w), int(ok.sum()), best)


def _run_batches(fn, batches, workers: int) -> list:
    if workers <= 1:
        return [fn(b) for b in batches]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, batches))


def _combine(results, front: ParetoFront, best: dict) -> tuple:
    evaluated = feasible = 0
    for r in results:
        front.absorb(r.front)
        _merge_best(best, r.best)
        evaluated += r.evaluated
        feasible += r.feasible
    return evaluated, feasible


def support_directions(count: int) -> np.ndarray:
    """Weights on (a, b, c) tracing the region boundary between the two axes.

    For a rate direction ``(cos th, sin th)`` the relevant pentagon corner is
    ``(a, c - a)`` or ``(c - b, b)``, whose score is linear in the triple.
    """
    if count == 1:
        return np.array([[0.0, 0.0, 1.0]])
    out = []
    for th in np.linspace(0.0, np.pi / 2, count):
        l1, l2 = math.cos(th), math.sin(th)
        if l1 >= l2:
            out.append((l1 - l2, 0.0, l2))
        else:
            out.append((0.0, l2 - l1, l1))
    return np.array(out)


# ---------------------------------------------------------------------------
# per-user candidate generation for inner regions


def user_candidates_grid(u_size: int, t_size: int, x_size: int, step: float) -> np.ndarray:
    """Factored grid ``P(T|U) P(X|U,T)``, shape ``(K, U, T, X)``."""
    pt = grid_tables(u_size, t_size, step)  # (A, U, T)
    px = grid_tables(u_size * t_size, x_size, step).reshape(-1, u_size, t_size, x_size)
    return (pt[:, None, :, :, None] * px[None, :, :, :, :]).reshape(-1, u_size, t_size, x_size)


def canonical_dedupe(p: np.ndarray, source_mass: np.ndarray) -> np.ndarray:
    """Drop candidates equal up to relabelling of the auxiliary symbols.

    Rows of sources with zero probability do not influence any triple and are
    ignored in the comparison.  First occurrences are kept, in input order.
    """
    if len(p) == 0:
        return p
    masked = np.round(p * (source_mass > 0)[None, :, None, None], 12)
    # key per auxiliary symbol: its (U, X) slice; sort symbols by key
    slices = np.transpose(masked, (0, 2, 1, 3)).reshape(len(p), p.shape[2], -1)
    order = np.lexsort(slices.transpose(2, 0, 1)[::-1], axis=-1)  # (K, T)
    canon = np.take_along_axis(slices, order[:, :, None], axis=1).reshape(len(p), -1)
    _, first = np.unique(canon, axis=0, return_index=True)
    return p[np.sort(first)]


def _user_filter(problem, p, user: int, mode: str) -> np.ndarray:
    """Keep candidates meeting user ``user``'s distortion and positivity constraints."""
    q = problem.Q.weights.sum(axis=1 if user == 1 else 0)
    d = problem.d1 if user == 1 else problem.d2
    D = problem.D1 if user == 1 else problem.D2
    ux = np.einsum("a,nabx->nax", q, p)
    dist = np.einsum("nax,ax->n", ux, d)
    ok = dist <= D + DISTORTION_TOL
    if mode == "S":
        ut = np.einsum("a,nabx->nab", q, p)
        hu = entropy_array(q)
        ht = np.array([entropy_array(m.sum(axis=0)) for m in ut])
        hut = np.array([entropy_array(m) for m in ut])
        ok &= (hu + ht - hut) > POSITIVITY_TOL
    return p[ok]


def _check_formula(problem: EmbeddingProblem, formula: str):
    if formula not in ("general", "independent"):
        raise ValidationError(f"unknown formula {formula!r}", field="formula")
    if formula == "independent":
        q = problem.Q.weights
        hu = entropy_array(q.sum(axis=1)) + entropy_array(q.sum(axis=0)) - entropy_array(q)
        if hu > 1e-9:
            raise NotIndependent(f"covertexts are correlated (I(U1;U2) = {hu:.3g} bits)")


def predicted_inner_count(problem: EmbeddingProblem, caps: CardinalityCaps, step: float) -> int:
    units = grid_units(step)
    total = 1
    for u, t, x in ((len(problem.U1), caps.t1_size, len(problem.X1)),
                    (len(problem.U2), caps.t2_size, len(problem.X2))):
        total *= composition_count(units, t) ** u * composition_count(units, x) ** (u * t)
    return total


def predicted_outer_count(problem: EmbeddingProblem, caps: CardinalityCaps, step: float) -> int:
    units = grid_units(step)
    nu = len(problem.U1) * len(problem.U2)
    nt = caps.t1_size * caps.t2_size
    nx = len(problem.X1) * len(problem.X2)
    return composition_count(units, nt) ** nu * composition_count(units, nx) ** (nu * nt)


def _finish(front: ParetoFront, make_policy, evaluated, feasible, t0, kind, formula, caps,
            strategy) -> RegionReport:
    order = np.lexsort(front.triples.T[::-1]) if len(front.triples) else np.zeros(0, int)
    triples = front.triples[order]
    payload = [front.payload[i] for i in order]
    region = region_from_triples(triples) if len(triples) else RateRegion.degenerate()
    pareto = [(RateTriple(*map(float, t)), make_policy(p)) for t, p in zip(triples, payload)]
    return RegionReport(region, pareto, evaluated, feasible, time.perf_counter() - t0,
                        kind, formula, caps, strategy)


def compute_inner_region(problem: EmbeddingProblem, caps: CardinalityCaps,
                         strategy: SearchStrategy, formula: str = "general",
                         include: Sequence[EncoderPolicy] = ()) -> RegionReport:
    """Inner region from separate-encoder candidates.

    ``include`` adds explicit candidates (embedded into ``caps`` if smaller),
    which lets callers nest candidate sets.
    """
    t0 = time.perf_counter()
    _check_formula(problem, formula)
    workers = worker_count(strategy.workers)
    u1, u2 = len(problem.U1), len(problem.U2)
    x1, x2 = len(problem.X1), len(problem.X2)
    q1, q2 = problem.Q.weights.sum(axis=1), problem.Q.weights.sum(axis=0)
    make = lambda p: EncoderPolicy.from_arrays(p[0], p[1], problem)  # noqa: E731
    front, best = ParetoFront(), {}
    directions = support_directions(strategy.refine_directions) \
        if strategy.mode == "sample-then-refine" else None
    evaluated = feasible = 0

    if include:
        emb = [embed_encoder_policy(p, caps).arrays for p in include]
        p1 = np.stack([e[0] for e in emb])
        p2 = np.stack([e[1] for e in emb])
        bs = strategy.batch_size
        results = [_evaluate_inner(problem, p1[i:i + bs], p2[i:i + bs], formula, True, directions)
                   for i in range(0, len(p1), bs)]
        evaluated, feasible = _combine(results, front, best)

    if strategy.mode == "exhaustive-grid":
        count = predicted_inner_count(problem, caps, strategy.grid_step)
        if count > strategy.exhaustive_cap:
            raise ExhaustiveTooLarge(
                f"exhaustive grid would evaluate {count:.3g} candidates "
                f"(cap {strategy.exhaustive_cap:.3g}); use sample-then-refine")
        c1 = user_candidates_grid(u1, caps.t1_size, x1, strategy.grid_step)
        c2 = user_candidates_grid(u2, caps.t2_size, x2, strategy.grid_step)
        c1 = _user_filter(problem, canonical_dedupe(c1, q1), 1, "S")
        c2 = _user_filter(problem, canonical_dedupe(c2, q2), 2, "S")
        total = len(c1) * len(c2)
        bs = strategy.batch_size
        starts = range(0, total, bs)

        def run(start):
            flat = np.arange(start, min(start + bs, total))
            return _evaluate_inner(problem, c1[flat // len(c2)], c2[flat % len(c2)],
                                   formula, False)

        e, f = _combine(_run_batches(run, starts, workers), front, best)
        evaluated, feasible = evaluated + e, feasible + f
    elif strategy.mode != "candidates-only":
        if strategy.sample_budget < 1:
            raise BudgetZero("sample_budget must be >= 1")
        e, f = _sample_inner(problem, caps, strategy, formula, directions, front, best, workers)
        evaluated, feasible = evaluated + e, feasible + f
        if strategy.mode == "sample-then-refine" and strategy.refine_steps > 0:
            starts = [(k, best[k][1]) for k in sorted(best)]

            def polish(item):
                k, (p1, p2) = item
                pol = refine(make((p1, p2)), problem, directions[k], strategy.refine_steps,
                             formula=formula)
                return pol.arrays

            refined = _run_batches(polish, starts, workers)
            if refined:
                p1 = np.stack([r[0] for r in refined])
                p2 = np.stack([r[1] for r in refined])
                r = _evaluate_inner(problem, p1, p2, formula, True)
                front.absorb(r.front)
                evaluated += r.evaluated
                feasible += r.feasible

    return _finish(front, make, evaluated, feasible, t0, "inner", formula, caps, strategy)


def _sample_inner(problem, caps, strategy, formula, directions, front, best, workers):
    rng = np.random.default_rng(strategy.seed)
    u1, u2 = len(problem.U1), len(problem.U2)
    x1, x2 = len(problem.X1), len(problem.X2)
    t1, t2 = caps.t1_size, caps.t2_size
    bs = strategy.batch_size
    batches = []
    remaining = strategy.sample_budget
    while remaining > 0:
        # draw whole chunks so a larger budget extends the same candidate stream
        p1 = sample_tables(bs, u1, t1 * x1, rng).reshape(bs, u1, t1, x1)
        p2 = sample_tables(bs, u2, t2 * x2, rng).reshape(bs, u2, t2, x2)
        take = min(bs, remaining)
        batches.append((p1[:take], p2[:take]))
        remaining -= take
    results = _run_batches(
        lambda b: _evaluate_inner(problem, b[0], b[1], formula, True, directions),
        batches, workers)
    return _combine(results, front, best)


def compute_outer_subset(problem: EmbeddingProblem, caps: CardinalityCaps,
                         strategy: SearchStrategy, formula: str = "general",
                         include: Sequence = ()) -> RegionReport:
    """Region over cooperative encoders with capped auxiliary alphabets.

    Only distortion constraints apply.  The result is a subset of the outer
    bound, not the bound itself.  ``include`` accepts JointPolicy or
    EncoderPolicy objects (the latter are lifted).
    """
    t0 = time.perf_counter()
    _check_formula(problem, formula)
    workers = worker_count(strategy.workers)
    u1, u2 = len(problem.U1), len(problem.U2)
    x1, x2 = len(problem.X1), len(problem.X2)
    t1, t2 = caps.t1_size, caps.t2_size
    make = lambda p: JointPolicy.from_array(p, problem)  # noqa: E731
    front, best = ParetoFront(), {}
    directions = support_directions(strategy.refine_directions) \
        if strategy.mode == "sample-then-refine" else None
    evaluated = feasible = 0

    if include:
        arrs = []
        for pol in include:
            if isinstance(pol, EncoderPolicy):
                pol = pol.lift()
            arrs.append(embed_joint_policy(pol, caps).array)
        arrs = np.stack(arrs)
        bs = strategy.batch_size
        results = [_evaluate_outer(problem, arrs[i:i + bs], formula, directions)
                   for i in range(0, len(arrs), bs)]
        evaluated, feasible = _combine(results, front, best)

    bs = strategy.batch_size
    if strategy.mode == "exhaustive-grid":
        count = predicted_outer_count(problem, caps, strategy.grid_step)
        if count > strategy.exhaustive_cap:
            raise ExhaustiveTooLarge(
                f"exhaustive grid would evaluate {count:.3g} candidates "
                f"(cap {strategy.exhaustive_cap:.3g}); use sample-then-refine")
        nu, nt, nx = u1 * u2, t1 * t2, x1 * x2
        pt = grid_tables(nu, nt, strategy.grid_step).reshape(-1, u1, u2, t1, t2)
        px = grid_tables(nu * nt, nx, strategy.grid_step).reshape(-1, u1, u2, t1, t2, x1, x2)
        total = len(pt) * len(px)

        def run(start):
            flat = np.arange(start, min(start + bs, total))
            p = pt[flat // len(px)][..., None, None] * px[flat % len(px)]
            return _evaluate_outer(problem, p, formula)

        e, f = _combine(_run_batches(run, range(0, total, bs), workers), front, best)
        evaluated, feasible = evaluated + e, feasible + f
    elif strategy.mode != "candidates-only":
        if strategy.sample_budget < 1:
            raise BudgetZero("sample_budget must be >= 1")
        rng = np.random.default_rng(strategy.seed)
        batches = []
        remaining = strategy.sample_budget
        while remaining > 0:
            p = sample_tables(bs, u1 * u2, t1 * t2 * x1 * x2, rng)
            p = p.reshape(bs, u1, u2, t1, t2, x1, x2)
            take = min(bs, remaining)
            batches.append(p[:take])
            remaining -= take
        results = _run_batches(lambda b: _evaluate_outer(problem, b, formula, directions),
                               batches, workers)
        e, f = _combine(results, front, best)
        evaluated, feasible = evaluated + e, feasible + f
        if strategy.mode == "sample-then-refine" and strategy.refine_steps > 0:
            starts = [(k, best[k][1]) for k in sorted(best)]

            def polish(item):
                k, p = item
                return refine(make(p), problem, directions[k], strategy.refine_steps,
                              formula=formula).array

            refined = _run_batches(polish, starts, workers)
            if refined:
                r = _evaluate_outer(problem, np.stack(refined), formula)
                front.absorb(r.front)
                evaluated += r.evaluated
                feasible += r.feasible

    return _finish(front, make, evaluated, feasible, t0, "outer-subset", formula, caps, strategy)


# ---------------------------------------------------------------------------
# local refinement


def _transfer_moves(table: np.ndarray, live_rows, delta: float):
    """All single mass transfers between two cells of one row, as (row, i, j, amount)."""
    moves = []
    cols = table.shape[1]
    for r in live_rows:
        row = table[r]
        for i in range(cols):
            if row[i] <= 0:
                continue
            amount = min(delta, row[i])
            for j in range(cols):
                if j != i:
                    moves.append((r, i, j, amount))
    return moves


def refine(policy, problem: EmbeddingProblem, direction, steps: int,
           formula: str = "general", mode: str | None = None, delta: float = 0.1,
           min_delta: float = 1e-4):
    """Coordinate ascent of ``w . (a, b, c)`` by moving mass inside one conditional row.

    Each step tries every transfer of ``delta`` between two cells of a row and
    takes the best feasible improvement; ``delta`` is halved when none helps.
    The returned policy is feasible and scores at least as well as the input.
    """
    w = np.asarray(direction, dtype=float)
    if w.shape != (3,) or np.any(w < 0) or not np.any(w > 0):
        raise ValidationError("direction must be three nonnegative weights, not all zero")
    inner = isinstance(policy, EncoderPolicy)
    if mode is None:
        mode = "S" if inner else "P"
    if inner:
        p1, p2 = (np.array(a, dtype=float) for a in policy.arrays)
        shapes = (p1.shape, p2.shape)
        tables = [p1.reshape(p1.shape[0], -1), p2.reshape(p2.shape[0], -1)]
        masses = [problem.Q.weights.sum(axis=1), problem.Q.weights.sum(axis=0)]
    else:
        p = np.array(policy.array, dtype=float)
        shapes = (p.shape,)
        tables = [p.reshape(p.shape[0] * p.shape[1], -1)]
        masses = [problem.Q.weights.reshape(-1)]

    def evaluate(stack):
        # stack: list over tables of arrays (B, rows, cols)
        if inner:
            wj = compose_inner_batch(problem, stack[0].reshape((-1,) + shapes[0]),
                                     stack[1].reshape((-1,) + shapes[1]))
        else:
            wj = compose_outer_batch(problem, stack[0].reshape((-1,) + shapes[0]))
        tri = batch_triples(wj, formula)
        e1, e2 = batch_distortions(wj, problem.d1, problem.d2)
        ok = (e1 <= problem.D1 + DISTORTION_TOL) & (e2 <= problem.D2 + DISTORTION_TOL)
        if mode == "S":
            i1, i2 = batch_ut_information(wj)
            ok &= (i1 > POSITIVITY_TOL) & (i2 > POSITIVITY_TOL)
        return tri @ w, ok

    score, ok = evaluate([t[None] for t in tables])
    if not ok[0]:
        raise InfeasibleStart("refine needs a feasible starting policy")
    current = float(score[0])
    live = [np.flatnonzero(m > 0) for m in masses]
    step = 0
    while step < steps and delta >= min_delta:
        step += 1
        cands, owners = [], []
        for k, table in enumerate(tables):
            for r, i, j, amount in _transfer_moves(table, live[k], delta):
                cands.append((k, r, i, j, amount))
        if not cands:
            break
        stack = [np.repeat(t[None], len(cands), axis=0) for t in tables]
        for n, (k, r, i, j, amount) in enumerate(cands):
            stack[k][n, r, i] -= amount
            stack[k][n, r, j] += amount
        scores, oks = evaluate(stack)
        scores = np.where(oks, scores, -np.inf)
        n = int(np.argmax(scores))
        if scores[n] > current + 1e-13:
            current = float(scores[n])
            tables = [s[n].copy() for s in stack]
            for t in tables:
                np.clip(t, 0.0, None, out=t)
                t /= t.sum(axis=1, keepdims=True)
        else:
            delta /= 2
    if inner:
        return EncoderPolicy.from_arrays(tables[0].reshape(shapes[0]),
                                         tables[1].reshape(shapes[1]), problem)
    return JointPolicy.from_array(tables[0].reshape(shapes[0]), problem)


def policy_score(policy, problem: EmbeddingProblem, direction, formula: str = "general") -> float:
    if isinstance(policy, EncoderPolicy):
        wj = compose_inner_batch(problem, policy.arrays[0][None], policy.arrays[1][None])
    else:
        wj = compose_outer_batch(problem, policy.array[None])
    return float(batch_triples(wj, formula)[0] @ np.asarray(direction, dtype=float))


def max_channel_information(problem: EmbeddingProblem, step: float = 0.05) -> float:
    """Largest ``I(X1,X2;Y)`` over joint input laws on a ``step`` grid (brute force)."""
    W = problem.W.table.reshape(len(problem.X1) * len(problem.X2), -1)
    inputs = compositions(grid_units(step), W.shape[0]) / grid_units(step)
    py = inputs @ W
    joint = inputs[:, :, None] * W[None]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(joint > 0, W[None] / np.where(py[:, None, :] > 0, py[:, None, :], 1), 1)
        vals = np.sum(np.where(joint > 0, joint * np.log2(ratio), 0.0), axis=(1, 2))
    return float(vals.max())
