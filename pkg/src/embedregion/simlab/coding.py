"""Desk-scale random-coding scheme for two-user public embedding.

Each user owns ``M_i`` message bins of ``L_i`` auxiliary codewords drawn from
the typical set of ``T_i``.  Pre-encoder 1 picks the first codeword in the
bin that is jointly typical with the covertext and whose estimated
probability ``A`` of landing jointly typical with the other user's
(covertext, codeword) reaches ``1 - mu``; pre-encoder 2 does the same with
the estimate ``B``, which averages over user 1's actual pre-encoder.  The
stegotext is drawn from ``P(X|U,T)``, passed through the attack channel, and
the decoder scans every codeword pair for joint typicality with the output.

Messages and codeword indices are 0-based.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import (
    Ambiguous,
    CapExceeded,
    LengthMismatch,
    NoneTypical,
    UndefinedRow,
    ValidationError,
)
from ..probcore import (
    EmbeddingProblem,
    EncoderPolicy,
    JointPMF,
    compose_inner,
    conditional,
    marginal,
    mutual_information,
)
from .typicality import (
    conditional_nonempty,
    count_bounds,
    counts_typical,
    letter_counts,
    sample_typical_codes,
    typical_mask,
)

EVENTS = ("A0", "A1", "E1", "E2", "E3", "E4")
PAIR_CHUNK = 4096


@dataclass(frozen=True)
class SimulationConfig:
    problem: EmbeddingProblem
    policy: EncoderPolicy
    R1: float
    R2: float
    n: int
    epsilon: float
    mu: float = 0.1
    nu: float = 0.1
    estimator_samples: int = 200
    trials: int = 100
    seed: int = 0
    codebook_cap: int = 2**20
    rate_margin: float = 0.0
    exact_codebooks: bool = False
    max_tries: int = 10_000

    def __post_init__(self):
        if self.n < 1:
            raise ValidationError("n must be >= 1", field="n")
        if not 0 < self.epsilon < 1:
            raise ValidationError("epsilon must lie in (0, 1)", field="epsilon")
        for key in ("mu", "nu"):
            v = getattr(self, key)
            if not 0 < v <= 1:
                raise ValidationError(f"{key} must lie in (0, 1]", field=key)
        for key in ("R1", "R2", "rate_margin"):
            if getattr(self, key) < 0:
                raise ValidationError(f"{key} must be >= 0", field=key)
        if self.trials < 1:
            raise ValidationError("trials must be >= 1", field="trials")
        if self.estimator_samples < 1:
            raise ValidationError("estimator_samples must be >= 1", field="estimator_samples")


def ceil_pow2(exponent: float) -> int:
    if exponent > 62:
        return 2**63
    return max(1, math.ceil(2.0 ** exponent - 1e-9))


def code_sizes(config: SimulationConfig, joint: JointPMF | None = None) -> tuple:
    """``(M1, L1, M2, L2)``: message bins and codewords per bin."""
    if joint is None:
        joint = compose_inner(config.problem, config.policy)
    n, eps = config.n, config.epsilon
    M1 = ceil_pow2(n * config.R1)
    M2 = ceil_pow2(n * config.R2)
    L1 = ceil_pow2(n * (max(mutual_information(joint, "U1", "T1"), 0.0) + 4 * eps))
    L2 = ceil_pow2(n * (max(mutual_information(joint, "U2", "T2"), 0.0) + 4 * eps))
    return M1, L1, M2, L2


class SchemeLaws:
    """Marginals and conditionals of the composed joint used by the scheme."""

    def __init__(self, problem: EmbeddingProblem, policy: EncoderPolicy):
        self.problem = problem
        self.joint = compose_inner(problem, policy)
        j = self.joint
        self.p_ut1 = marginal(j, ("U1", "T1"))
        self.p_ut2 = marginal(j, ("U2", "T2"))
        self.p_uutt = marginal(j, ("U1", "T1", "U2", "T2"))
        self.p_uuttxx = marginal(j, ("U1", "T1", "U2", "T2", "X1", "X2"))
        self.p_tty = marginal(j, ("T1", "T2", "Y"))
        self.p_t1 = marginal(j, "T1")
        self.p_t2 = marginal(j, "T2")
        self.p_utx1 = marginal(j, ("U1", "T1", "X1"))
        self.p_utx2 = marginal(j, ("U2", "T2", "X2"))
        self.x1_given = conditional(j, "X1", ("U1", "T1"))
        self.x2_given = conditional(j, "X2", ("U2", "T2"))
        self.u2t2_given_u1t1 = conditional(j, ("U2", "T2"), ("U1", "T1"))
        self.u1_given_u2t2 = conditional(j, "U1", ("U2", "T2"))
        self.sizes = dict(zip(j.names, j.shape))
        k = self.sizes
        self.k1 = k["U1"] * k["T1"]
        self.k2 = k["U2"] * k["T2"]
        self.uutt2d = self.p_uutt.weights.reshape(self.k1, self.k2)
        self.expected_d1 = float(np.sum(marginal(j, ("U1", "X1")).weights * problem.d1))
        self.expected_d2 = float(np.sum(marginal(j, ("U2", "X2")).weights * problem.d2))


@dataclass
class Codebooks:
    """Auxiliary codewords ``C1[w, l]`` and ``C2[w, l]`` (index sequences)."""

    C1: np.ndarray  # (M1, L1, n)
    C2: np.ndarray  # (M2, L2, n)
    laws: SchemeLaws
    config: SimulationConfig
    _a_cache: dict = field(default_factory=dict, repr=False)
    _b_cache: dict = field(default_factory=dict, repr=False)
    _phi1_cache: dict = field(default_factory=dict, repr=False)
    _unique: dict = field(default_factory=dict, repr=False)

    @property
    def M1(self) -> int:
        return self.C1.shape[0]

    @property
    def M2(self) -> int:
        return self.C2.shape[0]

    @property
    def n(self) -> int:
        return self.C1.shape[2]

    def unique_words(self, user: int) -> tuple:
        """Distinct codewords and a (distinct x message) membership matrix."""
        if user not in self._unique:
            C = self.C1 if user == 1 else self.C2
            M, L, n = C.shape
            words, inverse = np.unique(C.reshape(M * L, n), axis=0, return_inverse=True)
            member = np.zeros((len(words), M), dtype=bool)
            member[inverse.ravel(), np.repeat(np.arange(M), L)] = True
            self._unique[user] = (words, member)
        return self._unique[user]


def build_codebooks(config: SimulationConfig, rng, laws: SchemeLaws | None = None) -> Codebooks:
    if laws is None:
        laws = SchemeLaws(config.problem, config.policy)
    M1, L1, M2, L2 = code_sizes(config, laws.joint)
    total = M1 * L1 + M2 * L2
    if total > config.codebook_cap:
        raise CapExceeded(
            f"codebooks need {total} codewords (M1={M1}, L1={L1}, M2={M2}, L2={L2}); "
            f"cap is {config.codebook_cap}")
    n, eps = config.n, config.epsilon
    c1 = sample_typical_codes(laws.p_t1.weights, n, eps, rng, M1 * L1, config.max_tries,
                              config.exact_codebooks)
    c2 = sample_typical_codes(laws.p_t2.weights, n, eps, rng, M2 * L2, config.max_tries,
                              config.exact_codebooks)
    return Codebooks(c1.reshape(M1, L1, n), c2.reshape(M2, L2, n), laws, config)


# ---------------------------------------------------------------------------
# conditional sampling helpers


def _draw_rows(rows: np.ndarray, index: np.ndarray, samples: int, rng) -> np.ndarray:
    """Componentwise draws: position ``k`` uses distribution ``rows[index[k]]``."""
    cum = np.cumsum(rows[index], axis=1)  # (n, K)
    cum[:, -1] = 1.0
    r = rng.random((samples, len(index)))
    return (r[:, :, None] > cum[None, :, :]).sum(axis=2)


def _keyed_rng(seed: int, tag: int, *arrays) -> np.random.Generator:
    h = hashlib.blake2b(digest_size=16)
    for a in arrays:
        h.update(np.ascontiguousarray(a, dtype=np.int64).tobytes())
        h.update(b"|")
    words = np.frombuffer(h.digest(), dtype=np.uint32).tolist()
    return np.random.default_rng([seed, tag] + words)


def estimate_a(laws: SchemeLaws, u1, t1, epsilon: float, samples: int, rng) -> float:
    """Monte-Carlo ``A(u1, t1)``: probability that ``(U2^n, T2^n)`` drawn from
    ``P(U2,T2|U1,T1)`` makes the four sequences jointly typical."""
    u1 = np.asarray(u1)
    t1 = np.asarray(t1)
    n = len(u1)
    a_idx = u1 * laws.sizes["T1"] + t1
    counts = np.bincount(a_idx, minlength=laws.k1)
    if not conditional_nonempty(counts, laws.uutt2d, n, epsilon):
        return 0.0
    cond = laws.u2t2_given_u1t1
    if not np.all(cond.defined.reshape(-1)[a_idx]):
        return 0.0
    b = _draw_rows(cond.rows(), a_idx, samples, rng)
    codes = a_idx[None, :] * laws.k2 + b
    return float(typical_mask(codes, laws.uutt2d, epsilon).mean())


def estimate_b(codebooks: Codebooks, u2, t2, samples: int, rng) -> float:
    """Monte-Carlo ``B(u2, t2)``: average over uniform ``w1`` and
    ``U1^n ~ P(U1|U2,T2)`` of the event that user 1's pre-encoder output
    completes a jointly typical four-tuple."""
    laws, cfg = codebooks.laws, codebooks.config
    u2 = np.asarray(u2)
    t2 = np.asarray(t2)
    n = len(u2)
    b_idx = u2 * laws.sizes["T2"] + t2
    counts = np.bincount(b_idx, minlength=laws.k2)
    if not conditional_nonempty(counts, laws.uutt2d.T, n, cfg.epsilon):
        return 0.0
    cond = laws.u1_given_u2t2
    if not np.all(cond.defined.reshape(-1)[b_idx]):
        return 0.0
    u1s = _draw_rows(cond.rows(), b_idx, samples, rng)
    w1s = rng.integers(codebooks.M1, size=samples)
    hits = 0
    for w1, u1 in zip(w1s, u1s):
        l1, _ = _phi1(codebooks, int(w1), u1)
        t1 = codebooks.C1[w1, l1]
        code = (u1 * laws.sizes["T1"] + t1) * laws.k2 + b_idx
        hits += bool(typical_mask(code[None], laws.uutt2d, cfg.epsilon)[0])
    return hits / samples


def _cached_a(codebooks: Codebooks, u1, t1) -> float:
    key = (u1.tobytes(), t1.tobytes())
    if key not in codebooks._a_cache:
        cfg = codebooks.config
        rng = _keyed_rng(cfg.seed, 11, u1, t1)
        codebooks._a_cache[key] = estimate_a(codebooks.laws, u1, t1, cfg.epsilon,
                                             cfg.estimator_samples, rng)
    return codebooks._a_cache[key]


def _cached_b(codebooks: Codebooks, u2, t2) -> float:
    key = (u2.tobytes(), t2.tobytes())
    if key not in codebooks._b_cache:
        cfg = codebooks.config
        rng = _keyed_rng(cfg.seed, 22, u2, t2)
        codebooks._b_cache[key] = estimate_b(codebooks, u2, t2, cfg.estimator_samples, rng)
    return codebooks._b_cache[key]


def _first_qualifying(codebooks: Codebooks, user: int, w: int, u) -> tuple:
    laws, cfg = codebooks.laws, codebooks.config
    C = codebooks.C1 if user == 1 else codebooks.C2
    t_size = laws.sizes["T1" if user == 1 else "T2"]
    p_ut = laws.p_ut1 if user == 1 else laws.p_ut2
    bin_words = C[w]
    codes = u[None, :] * t_size + bin_words
    candidates = np.flatnonzero(typical_mask(codes, p_ut.weights, cfg.epsilon))
    threshold = 1.0 - (cfg.mu if user == 1 else cfg.nu)
    if threshold <= 0:
        return (int(candidates[0]), False) if len(candidates) else (0, True)
    if len(candidates) == 0:
        return 0, True
    # rule out, in one pass, candidates whose four-tuple completion is impossible
    k_own = laws.k1 if user == 1 else laws.k2
    counts = letter_counts(codes[candidates], k_own)
    probs2d = laws.uutt2d if user == 1 else laws.uutt2d.T
    possible = conditional_nonempty(counts, probs2d, codebooks.n, cfg.epsilon)
    for l in candidates[possible]:
        t = bin_words[l]
        score = _cached_a(codebooks, u, t) if user == 1 else _cached_b(codebooks, u, t)
        if score >= threshold:
            return int(l), False
    return 0, True


def _phi1(codebooks: Codebooks, w1: int, u1) -> tuple:
    key = (w1, np.asarray(u1).tobytes())
    if key not in codebooks._phi1_cache:
        codebooks._phi1_cache[key] = _first_qualifying(codebooks, 1, w1, np.asarray(u1))
    return codebooks._phi1_cache[key]


def pre_encode(user: int, w: int, u_seq, codebooks: Codebooks) -> tuple:
    """Codeword index chosen for message ``w`` and covertext ``u_seq``.

    Returns ``(l, fell_back)``; ``fell_back`` is True when no codeword in the
    bin qualified and index 0 was used.
    """
    u = np.asarray(u_seq, dtype=np.int64)
    if len(u) != codebooks.n:
        raise LengthMismatch(f"covertext length {len(u)} != n = {codebooks.n}")
    if user == 1:
        return _phi1(codebooks, int(w), u)
    if user == 2:
        return _first_qualifying(codebooks, 2, int(w), u)
    raise ValidationError(f"user must be 1 or 2, got {user}")


def stego(u_seq, t_seq, user: int, laws: SchemeLaws, rng) -> np.ndarray:
    """Stegotext drawn letter by letter from ``P(X|U,T)``."""
    u = np.asarray(u_seq, dtype=np.int64)
    t = np.asarray(t_seq, dtype=np.int64)
    if u.shape != t.shape:
        raise LengthMismatch("covertext and codeword lengths differ")
    cond = laws.x1_given if user == 1 else laws.x2_given
    t_size = cond.given_shape[1]
    idx = u * t_size + t
    if not np.all(cond.defined.reshape(-1)[idx]):
        raise UndefinedRow("a (covertext, codeword) letter pair has zero probability")
    return _draw_rows(cond.rows(), idx, 1, rng)[0]


def attack(x1_seq, x2_seq, W, rng) -> np.ndarray:
    """Memoryless attack channel output."""
    x1 = np.asarray(x1_seq, dtype=np.int64)
    x2 = np.asarray(x2_seq, dtype=np.int64)
    if x1.shape != x2.shape:
        raise LengthMismatch("stegotext lengths differ")
    rows = W.table.reshape(-1, W.table.shape[-1])
    return _draw_rows(rows, x1 * W.table.shape[1] + x2, 1, rng)[0]


# ---------------------------------------------------------------------------
# decoding


def typical_message_pairs(y_seq, codebooks: Codebooks, p_tty: JointPMF,
                          epsilon: float) -> np.ndarray:
    """``(M1, M2)`` boolean matrix: some codeword pair of the two bins is
    jointly typical with ``y_seq``.

    Candidate words are first screened by the necessary condition on the
    ``(T_i, Y)`` counts, then every surviving pair is checked exactly.
    """
    y = np.asarray(y_seq, dtype=np.int64)
    n = len(y)
    if n != codebooks.n:
        raise LengthMismatch(f"output length {n} != n = {codebooks.n}")
    P = p_tty.weights
    K1, K2, KY = P.shape
    V = P.size
    tol = epsilon / V
    words1, member1 = codebooks.unique_words(1)
    words2, member2 = codebooks.unique_words(2)

    def screen(words, pm, other):
        # pm: marginal over (T_i, Y); cell error can be at most other * tol
        cnt = letter_counts(words * KY + y[None, :], pm.size)
        p = pm.ravel()
        ok = np.abs(cnt / n - p) < other * tol
        ok &= (p > 0) | (cnt == 0)
        return np.flatnonzero(ok.all(axis=1))

    s1 = screen(words1, P.sum(axis=1), K2)
    s2 = screen(words2, P.sum(axis=0), K1)
    pairs = np.zeros((codebooks.M1, codebooks.M2), dtype=bool)
    if len(s1) == 0 or len(s2) == 0:
        return pairs
    w1, w2 = words1[s1], words2[s2]
    lo, hi = count_bounds(P, n, epsilon)
    # the two most constrained cells prune pairs with matrix products
    order = np.argsort(hi - lo, kind="stable")[:2]
    cells = [np.unravel_index(v, P.shape) for v in order]
    B = {b: (w2 == b).astype(np.float32).T for (_, b, _) in cells}
    m2 = member2[s2]
    for start in range(0, len(s1), PAIR_CHUNK):
        w1c = w1[start:start + PAIR_CHUNK]
        ok = None
        for v, (a, b, c) in zip(order, cells):
            A = ((w1c == a) & (y == c)[None, :]).astype(np.float32)
            cnt = A @ B[b]
            cell = (cnt >= lo[v]) & (cnt <= hi[v])
            ok = cell if ok is None else ok & cell
        i, j = np.nonzero(ok)
        for k in range(0, len(i), PAIR_CHUNK * 16):
            ii, jj = i[k:k + PAIR_CHUNK * 16], j[k:k + PAIR_CHUNK * 16]
            codes = (w1c[ii] * K2 + w2[jj]) * KY + y[None, :]
            good = counts_typical(letter_counts(codes, V), P, n, epsilon)
            if good.any():
                m1 = member1[s1[start + ii[good]]]
                pairs |= (m1.T.astype(np.int64) @ m2[jj[good]].astype(np.int64)) > 0
    return pairs


def decode(y_seq, codebooks: Codebooks, p_tty: JointPMF, epsilon: float) -> tuple:
    """Unique message pair with a jointly typical codeword pair.

    Raises NoneTypical or Ambiguous.  With a single possible message pair the
    decoder has nothing to choose and returns it.
    """
    if codebooks.M1 == 1 and codebooks.M2 == 1:
        return 0, 0
    return decide(typical_message_pairs(y_seq, codebooks, p_tty, epsilon))


def decide(pairs: np.ndarray) -> tuple:
    """Decoder verdict from a consistent-message-pair matrix."""
    if pairs.shape == (1, 1):
        return 0, 0
    found = np.argwhere(pairs)
    if len(found) == 0:
        raise NoneTypical("no codeword pair is jointly typical with the output")
    if len(found) > 1:
        raise Ambiguous(f"{len(found)} message pairs are consistent with the output")
    return int(found[0, 0]), int(found[0, 1])


# ---------------------------------------------------------------------------
# Monte-Carlo driver


@dataclass
class SimulationReport:
    trials_run: int
    p_e_hat: float
    d1_hat: float
    d2_hat: float
    event_counts: dict
    encoder_fallbacks: tuple
    code_sizes: tuple = ()
    errors: int = 0
    distortion_bound_violations: int = 0
    event_mismatches: int = 0
    rate_margin: float = 0.0

    def summary(self) -> str:
        M1, L1, M2, L2 = self.code_sizes or (0, 0, 0, 0)
        return (f"p_e_hat={self.p_e_hat:.4f} d1_hat={self.d1_hat:.4f} d2_hat={self.d2_hat:.4f} "
                f"trials={self.trials_run} M=({M1},{M2}) L=({L1},{L2})")


def _typical(laws_pmf: JointPMF, seqs, eps: float) -> bool:
    codes = np.ravel_multi_index(tuple(seqs), laws_pmf.shape)
    return bool(typical_mask(codes[None], laws_pmf.weights, eps)[0])


def run_trials(config: SimulationConfig) -> SimulationReport:
    laws = SchemeLaws(config.problem, config.policy)
    codebooks = build_codebooks(config, np.random.default_rng([config.seed, 0]), laws)
    problem = config.problem
    n, eps = config.n, config.epsilon
    q = problem.Q.weights
    nu2 = q.shape[1]
    counts = dict.fromkeys(EVENTS, 0)
    fallbacks = [0, 0]
    errors = violations = mismatches = 0
    d1_total = d2_total = 0.0
    bound1 = laws.expected_d1 + eps * problem.d1_max + 1e-12
    bound2 = laws.expected_d2 + eps * problem.d2_max + 1e-12

    for trial in range(config.trials):
        rng = np.random.default_rng([config.seed, 1, trial])
        uu = rng.choice(q.size, size=n, p=q.ravel())
        u1, u2 = uu // nu2, uu % nu2
        w1 = int(rng.integers(codebooks.M1))
        w2 = int(rng.integers(codebooks.M2))
        l1, fb1 = pre_encode(1, w1, u1, codebooks)
        l2, fb2 = pre_encode(2, w2, u2, codebooks)
        fallbacks[0] += fb1
        fallbacks[1] += fb2
        t1, t2 = codebooks.C1[w1, l1], codebooks.C2[w2, l2]
        x1 = stego(u1, t1, 1, laws, rng)
        x2 = stego(u2, t2, 2, laws, rng)
        y = attack(x1, x2, problem.W, rng)

        ev = {
            "A0": not _typical(laws.p_uutt, (u1, t1, u2, t2), eps),
            "A1": not _typical(laws.p_uuttxx, (u1, t1, u2, t2, x1, x2), eps),
            "E1": not _typical(laws.p_tty, (t1, t2, y), eps),
        }
        pairs = typical_message_pairs(y, codebooks, laws.p_tty, eps)
        other1 = np.arange(codebooks.M1) != w1
        other2 = np.arange(codebooks.M2) != w2
        ev["E2"] = bool(pairs[other1, w2].any())
        ev["E3"] = bool(pairs[w1, other2].any())
        ev["E4"] = bool(pairs[np.ix_(other1, other2)].any())
        for k, v in ev.items():
            counts[k] += v

        try:
            error = decide(pairs) != (w1, w2)
        except (NoneTypical, Ambiguous):
            error = True
        errors += error
        # an error needs one of E1..E4, and a wrong-bin event forces an error
        if (error and not any(ev[k] for k in ("E1", "E2", "E3", "E4"))) or \
                (not error and (ev["E2"] or ev["E3"] or ev["E4"])):
            mismatches += 1

        d1 = float(problem.d1[u1, x1].mean())
        d2 = float(problem.d2[u2, x2].mean())
        d1_total += d1
        d2_total += d2
        if _typical(laws.p_utx1, (u1, t1, x1), eps) and d1 > bound1:
            violations += 1
        if _typical(laws.p_utx2, (u2, t2, x2), eps) and d2 > bound2:
            violations += 1

    T = config.trials
    return SimulationReport(
        trials_run=T,
        p_e_hat=errors / T,
        d1_hat=d1_total / T,
        d2_hat=d2_total / T,
        event_counts=counts,
        encoder_fallbacks=tuple(fallbacks),
        code_sizes=(codebooks.M1, codebooks.C1.shape[1], codebooks.M2, codebooks.C2.shape[1]),
        errors=errors,
        distortion_bound_violations=violations,
        event_mismatches=mismatches,
        rate_margin=config.rate_margin,
    )
