"""Strong typicality for finite joint laws.

A tuple of length-``n`` index sequences is typical for a joint law ``P`` over
an alphabet of size ``|V|`` when every joint letter ``v`` satisfies
``|N(v)/n - P(v)| < eps/|V|`` and letters of zero probability never occur.
Sequences are integer index arrays (positions into each axis' symbols).

The strict inequality is evaluated with a 1e-12 guard so that counts lying
exactly on the boundary (common with decimal probabilities) are consistently
atypical instead of depending on floating-point rounding.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from ..errors import LengthMismatch, TypicalSetEmptyOrRare, ValidationError
from ..probcore import JointPMF

EXACT_ENUMERATION_LIMIT = 2**20
BOUNDARY_GUARD = 1e-12


@dataclass(frozen=True)
class TypicalityParams:
    n: int
    epsilon: float

    def __post_init__(self):
        if self.n < 1:
            raise ValidationError("block length n must be >= 1", field="n")
        if not 0 < self.epsilon < 1:
            raise ValidationError("epsilon must lie in (0, 1)", field="epsilon")


def count_bounds(probs, n: int, epsilon: float) -> tuple:
    """Per-letter inclusive integer ranges ``[lo, hi]`` of typical counts.

    ``lo > hi`` marks a letter whose count can never be typical.
    """
    p = np.asarray(probs, dtype=float).ravel()
    tol = epsilon / p.size - BOUNDARY_GUARD
    N = np.arange(n + 1)
    ok = np.abs(N[None, :] / n - p[:, None]) < tol
    ok &= (p[:, None] > 0) | (N[None, :] == 0)
    any_ok = ok.any(axis=1)
    lo = np.where(any_ok, np.argmax(ok, axis=1), n + 1)
    hi = np.where(any_ok, n - np.argmax(ok[:, ::-1], axis=1), -1)
    return lo, hi


def counts_typical(counts: np.ndarray, probs, n: int, epsilon: float) -> np.ndarray:
    """Typicality of count vectors ``(..., |V|)``."""
    p = np.asarray(probs, dtype=float).ravel()
    tol = epsilon / p.size - BOUNDARY_GUARD
    freq = counts / n
    ok = np.abs(freq - p) < tol
    ok &= (p > 0) | (counts == 0)
    return ok.all(axis=-1)


def letter_counts(codes: np.ndarray, size: int) -> np.ndarray:
    """Counts of each letter per row of a ``(S, n)`` code array."""
    codes = np.atleast_2d(codes)
    S = codes.shape[0]
    flat = (codes + size * np.arange(S)[:, None]).ravel()
    return np.bincount(flat, minlength=S * size).reshape(S, size)


def typical_mask(codes: np.ndarray, probs, epsilon: float) -> np.ndarray:
    """Typicality of each row of flattened joint-letter codes ``(S, n)``."""
    p = np.asarray(probs, dtype=float).ravel()
    codes = np.atleast_2d(codes)
    return counts_typical(letter_counts(codes, p.size), p, codes.shape[1], epsilon)


def encode(sequences, shape) -> np.ndarray:
    """Flatten a tuple of index sequences into joint-letter codes."""
    seqs = [np.asarray(s, dtype=np.int64) for s in sequences]
    if len(seqs) != len(shape):
        raise LengthMismatch(f"{len(seqs)} sequences for a {len(shape)}-axis law")
    lengths = {s.shape[-1] for s in seqs}
    if len(lengths) != 1:
        raise LengthMismatch(f"sequence lengths differ: {sorted(lengths)}")
    for s, k in zip(seqs, shape):
        if s.size and (s.min() < 0 or s.max() >= k):
            raise ValidationError("symbol index outside its alphabet")
    return np.ravel_multi_index(np.broadcast_arrays(*seqs), shape)


def is_typical(sequences, pmf: JointPMF, epsilon: float) -> bool:
    codes = encode(sequences, pmf.shape)
    return bool(typical_mask(codes.reshape(1, -1), pmf.weights, epsilon)[0])


def conditional_nonempty(fixed_counts: np.ndarray, probs2d: np.ndarray, n: int,
                         epsilon: float) -> np.ndarray:
    """Whether the fixed part can be completed to a typical tuple.

    ``probs2d`` is the joint law reshaped to ``(fixed letters, free letters)``
    and ``fixed_counts`` is ``(..., fixed letters)``.  The completion exists iff
    every letter has an admissible count and each fixed letter's count lies
    between the sums of its cells' lower and upper bounds.
    """
    lo, hi = count_bounds(probs2d, n, epsilon)
    lo = lo.reshape(probs2d.shape)
    hi = hi.reshape(probs2d.shape)
    if np.any(lo > hi):
        return np.zeros(fixed_counts.shape[:-1], dtype=bool)
    return np.all((fixed_counts >= lo.sum(axis=1)) & (fixed_counts <= hi.sum(axis=1)), axis=-1)


def typical_set_nonempty(probs, n: int, epsilon: float) -> bool:
    lo, hi = count_bounds(probs, n, epsilon)
    return bool(np.all(lo <= hi) and lo.sum() <= n <= hi.sum())


def enumerate_typical(pmf: JointPMF, n: int, epsilon: float) -> np.ndarray:
    """All typical joint-letter code sequences, shape ``(K, n)`` (small cases only)."""
    V = pmf.weights.size
    if V ** n > EXACT_ENUMERATION_LIMIT:
        raise ValidationError(f"{V}^{n} sequences is too many to enumerate")
    allseq = np.array(list(itertools.product(range(V), repeat=n)), dtype=np.int64).reshape(-1, n)
    return allseq[typical_mask(allseq, pmf.weights, epsilon)]


def draw_codes(probs, size, rng) -> np.ndarray:
    """I.i.d. joint-letter codes with law ``probs``."""
    p = np.asarray(probs, dtype=float).ravel()
    return rng.choice(p.size, size=size, p=p / p.sum())


def sample_typical_codes(probs, n: int, epsilon: float, rng, count: int = 1,
                         max_tries: int = 10_000, exact: bool = False) -> np.ndarray:
    """``count`` typical code sequences, shape ``(count, n)``.

    The default draws i.i.d. sequences and rejects atypical ones, so the result
    is i.i.d.-conditioned-on-typicality.  ``exact`` samples uniformly from the
    enumerated typical set instead.  ``max_tries`` bounds the rejection draws
    spent per requested sequence.
    """
    p = np.asarray(probs, dtype=float).ravel()
    if max_tries < 1:
        raise ValidationError("max_tries must be >= 1", field="max_tries")
    if exact:
        if p.size ** n > EXACT_ENUMERATION_LIMIT:
            raise ValidationError(f"exact typical sampling needs {p.size}^{n} <= 2^20")
        allseq = np.array(list(itertools.product(range(p.size), repeat=n)),
                          dtype=np.int64).reshape(-1, n)
        pool = allseq[typical_mask(allseq, p, epsilon)]
        if len(pool) == 0:
            raise TypicalSetEmptyOrRare("the typical set is empty")
        return pool[rng.integers(len(pool), size=count)]
    if not typical_set_nonempty(p, n, epsilon):
        raise TypicalSetEmptyOrRare(f"no typical sequence exists at n={n}, eps={epsilon}")
    out = []
    have = 0
    budget = max_tries * count
    chunk = max(16, min(4096, 2 * count))
    spent = 0
    while have < count:
        if spent >= budget:
            raise TypicalSetEmptyOrRare(
                f"only {have} of {count} typical sequences after {spent} draws")
        k = min(chunk, budget - spent)
        draws = draw_codes(p, (k, n), rng)
        mask = typical_mask(draws, p, epsilon)
        good = draws[mask]
        if have + len(good) > count:
            # charge only the draws up to the last accepted one
            last = np.flatnonzero(mask)[count - have - 1]
            spent += last + 1
            good = good[: count - have]
        else:
            spent += k
        out.append(good)
        have += len(good)
    return np.concatenate(out)[:count]


def sample_typical(pmf: JointPMF, n: int, epsilon: float, rng, max_tries: int = 10_000,
                   exact: bool = False) -> tuple:
    """One typical tuple of index sequences, one per axis of ``pmf``."""
    codes = sample_typical_codes(pmf.weights, n, epsilon, rng, 1, max_tries, exact)[0]
    return tuple(np.unravel_index(codes, pmf.shape))


def typicality_frequency(pmf: JointPMF, n: int, epsilon: float, rng, draws: int) -> float:
    """Fraction of i.i.d. draws that are typical."""
    codes = draw_codes(pmf.weights, (draws, n), rng)
    return float(typical_mask(codes, pmf.weights, epsilon).mean())
