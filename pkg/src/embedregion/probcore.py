"""Finite-alphabet probability tensors and exact information measures.

Joint laws are dense numpy arrays with one axis per named alphabet.  The
full system joint always uses the axis order ``U1, T1, U2, T2, X1, X2, Y``.
All logarithms are base 2 and ``0 log 0`` is taken as 0.
"""

from __future__ import annotations

import numbers
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import (
    NegativeMass,
    NotNormalized,
    OverlappingGroups,
    ShapeMismatch,
    UnknownAxis,
    ValidationError,
)

NORM_TOL = 1e-9
NEG_TOL = 1e-12

CANONICAL_AXES = ("U1", "T1", "U2", "T2", "X1", "X2", "Y")


@dataclass(frozen=True)
class FiniteAlphabet:
    name: str
    symbols: tuple

    def __post_init__(self):
        symbols = tuple(self.symbols)
        if len(symbols) < 1:
            raise ValidationError(f"alphabet {self.name!r} is empty", field=self.name)
        if len(set(symbols)) != len(symbols):
            raise ValidationError(f"alphabet {self.name!r} has repeated labels", field=self.name)
        object.__setattr__(self, "symbols", symbols)

    def __len__(self):
        return len(self.symbols)

    def index(self, symbol) -> int:
        return self.symbols.index(symbol)

    def renamed(self, name: str) -> "FiniteAlphabet":
        return FiniteAlphabet(name, self.symbols)


def alphabet(name: str, size_or_symbols) -> FiniteAlphabet:
    """Shorthand: ``alphabet("T1", 3)`` gives symbols ``(0, 1, 2)``."""
    if isinstance(size_or_symbols, numbers.Integral):
        return FiniteAlphabet(name, tuple(range(int(size_or_symbols))))
    return FiniteAlphabet(name, tuple(size_or_symbols))


def _frozen(arr) -> np.ndarray:
    arr = np.array(arr, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class JointPMF:
    axes: tuple
    weights: np.ndarray

    @property
    def names(self) -> tuple:
        return tuple(a.name for a in self.axes)

    @property
    def shape(self) -> tuple:
        return tuple(len(a) for a in self.axes)

    def axis(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise UnknownAxis(f"no axis named {name!r} in {self.names}") from None

    def alphabet(self, name: str) -> FiniteAlphabet:
        return self.axes[self.axis(name)]


@dataclass(frozen=True, eq=False)
class ConditionalPMF:
    """Rows ``P(target | given)``; ``table`` has shape given sizes + target sizes.

    ``defined`` marks the given-tuples whose row is meaningful.  Rows with zero
    conditioning mass are left undefined (stored as zeros).
    """

    given: tuple
    target: tuple
    table: np.ndarray
    defined: np.ndarray = field(default=None)

    @property
    def given_shape(self) -> tuple:
        return tuple(len(a) for a in self.given)

    @property
    def target_shape(self) -> tuple:
        return tuple(len(a) for a in self.target)

    def rows(self) -> np.ndarray:
        """Table reshaped to ``(n_given, n_target)``."""
        return self.table.reshape(int(np.prod(self.given_shape)), -1)


@dataclass(frozen=True, eq=False)
class EmbeddingProblem:
    """Covertext law ``Q`` over (U1, U2), attack channel ``W``, distortions."""

    Q: JointPMF
    W: ConditionalPMF
    d1: np.ndarray
    d2: np.ndarray
    D1: float
    D2: float

    def __post_init__(self):
        if len(self.Q.axes) != 2:
            raise ShapeMismatch("Q must be a joint law over two axes (U1, U2)", field="Q")
        if len(self.W.given) != 2 or len(self.W.target) != 1:
            raise ShapeMismatch("W must map (X1, X2) to Y", field="W")
        for key, level in (("D1", self.D1), ("D2", self.D2)):
            if not np.isfinite(level) or level < 0:
                raise ValidationError(f"{key} must be a nonnegative number, got {level}", field=key)
        for key, table, u, x in (
            ("d1", self.d1, self.U1, self.X1),
            ("d2", self.d2, self.U2, self.X2),
        ):
            table = np.asarray(table, dtype=float)
            if table.shape != (len(u), len(x)):
                raise ShapeMismatch(
                    f"{key} has shape {table.shape}, expected {(len(u), len(x))}", field=key
                )
            if not np.all(np.isfinite(table)) or np.any(table < 0):
                raise ValidationError(f"{key} entries must be finite and >= 0", field=key)
            object.__setattr__(self, key, _frozen(table))

    @property
    def U1(self) -> FiniteAlphabet:
        return self.Q.axes[0]

    @property
    def U2(self) -> FiniteAlphabet:
        return self.Q.axes[1]

    @property
    def X1(self) -> FiniteAlphabet:
        return self.W.given[0]

    @property
    def X2(self) -> FiniteAlphabet:
        return self.W.given[1]

    @property
    def Y(self) -> FiniteAlphabet:
        return self.W.target[0]

    @property
    def d1_max(self) -> float:
        return float(self.d1.max())

    @property
    def d2_max(self) -> float:
        return float(self.d2.max())

    def with_levels(self, D1: float, D2: float) -> "EmbeddingProblem":
        return EmbeddingProblem(self.Q, self.W, self.d1, self.d2, D1, D2)


@dataclass(frozen=True, eq=False)
class EncoderPolicy:
    """Separate encoders ``P1 = P(T1, X1 | U1)`` and ``P2 = P(T2, X2 | U2)``."""

    P1: ConditionalPMF
    P2: ConditionalPMF

    @classmethod
    def from_arrays(cls, p1, p2, problem: EmbeddingProblem | None = None) -> "EncoderPolicy":
        """Build from arrays of shape ``(|U|, |T|, |X|)``."""
        p1 = np.asarray(p1, dtype=float)
        p2 = np.asarray(p2, dtype=float)
        if problem is not None:
            u1, x1, u2, x2 = problem.U1, problem.X1, problem.U2, problem.X2
        else:
            u1, x1 = alphabet("U1", p1.shape[0]), alphabet("X1", p1.shape[2])
            u2, x2 = alphabet("U2", p2.shape[0]), alphabet("X2", p2.shape[2])
        P1 = make_conditional((u1,), (alphabet("T1", p1.shape[1]), x1), p1)
        P2 = make_conditional((u2,), (alphabet("T2", p2.shape[1]), x2), p2)
        return cls(P1, P2)

    @classmethod
    def from_factors(cls, t1_given_u1, x1_given_u1t1, t2_given_u2, x2_given_u2t2,
                     problem: EmbeddingProblem | None = None) -> "EncoderPolicy":
        """Build from ``P(T|U)`` of shape (U, T) and ``P(X|U,T)`` of shape (U, T, X)."""
        p1 = np.asarray(t1_given_u1, float)[:, :, None] * np.asarray(x1_given_u1t1, float)
        p2 = np.asarray(t2_given_u2, float)[:, :, None] * np.asarray(x2_given_u2t2, float)
        return cls.from_arrays(p1, p2, problem)

    @property
    def arrays(self) -> tuple:
        return self.P1.table, self.P2.table

    @property
    def t_sizes(self) -> tuple:
        return self.P1.table.shape[1], self.P2.table.shape[1]

    def lift(self) -> "JointPolicy":
        """The same encoders viewed as one joint conditional ``P(T1,T2,X1,X2|U1,U2)``."""
        p = np.einsum("abe,cdf->acbdef", self.P1.table, self.P2.table)
        given = (self.P1.given[0], self.P2.given[0])
        target = (self.P1.target[0], self.P2.target[0], self.P1.target[1], self.P2.target[1])
        return JointPolicy(make_conditional(given, target, p))


@dataclass(frozen=True, eq=False)
class JointPolicy:
    """Cooperative encoder ``P(T1, T2, X1, X2 | U1, U2)``."""

    P: ConditionalPMF

    @classmethod
    def from_array(cls, p, problem: EmbeddingProblem | None = None) -> "JointPolicy":
        """Build from an array of shape ``(|U1|, |U2|, |T1|, |T2|, |X1|, |X2|)``."""
        p = np.asarray(p, dtype=float)
        if problem is not None:
            u1, u2, x1, x2 = problem.U1, problem.U2, problem.X1, problem.X2
        else:
            u1, u2 = alphabet("U1", p.shape[0]), alphabet("U2", p.shape[1])
            x1, x2 = alphabet("X1", p.shape[4]), alphabet("X2", p.shape[5])
        target = (alphabet("T1", p.shape[2]), alphabet("T2", p.shape[3]), x1, x2)
        return cls(make_conditional((u1, u2), target, p))

    @property
    def array(self) -> np.ndarray:
        return self.P.table

    @property
    def t_sizes(self) -> tuple:
        return self.P.table.shape[2], self.P.table.shape[3]


# ---------------------------------------------------------------------------
# construction


def make_pmf(axes: Sequence[FiniteAlphabet], weights) -> JointPMF:
    axes = tuple(axes)
    w = np.array(weights, dtype=float)
    expected = tuple(len(a) for a in axes)
    if w.shape != expected:
        raise ShapeMismatch(f"weights shape {w.shape} does not match axes {expected}")
    if len({a.name for a in axes}) != len(axes):
        raise ShapeMismatch("axis names must be distinct")
    if np.any(~np.isfinite(w)):
        raise NotNormalized("weights contain non-finite entries")
    if np.any(w < -NEG_TOL):
        raise NegativeMass(f"negative probability mass {w.min():.3g}")
    w = np.clip(w, 0.0, None)
    total = w.sum()
    if abs(total - 1.0) > NORM_TOL:
        raise NotNormalized(f"weights sum to {total:.12g}, not 1")
    return JointPMF(axes, _frozen(w / total))


def make_conditional(given: Sequence[FiniteAlphabet], target: Sequence[FiniteAlphabet],
                     table, defined=None) -> ConditionalPMF:
    given, target = tuple(given), tuple(target)
    t = np.array(table, dtype=float)
    gshape = tuple(len(a) for a in given)
    tshape = tuple(len(a) for a in target)
    if t.shape != gshape + tshape:
        raise ShapeMismatch(f"table shape {t.shape} does not match {gshape + tshape}")
    if np.any(~np.isfinite(t)):
        raise NotNormalized("conditional table contains non-finite entries")
    if np.any(t < -NEG_TOL):
        raise NegativeMass(f"negative conditional probability {t.min():.3g}")
    t = np.clip(t, 0.0, None)
    rows = t.reshape(int(np.prod(gshape)), -1)
    sums = rows.sum(axis=1)
    if defined is None:
        defined = np.ones(gshape, dtype=bool)
    defined = np.asarray(defined, dtype=bool).reshape(gshape)
    flat_def = defined.reshape(-1)
    bad = flat_def & (np.abs(sums - 1.0) > NORM_TOL)
    if np.any(bad):
        r = int(np.flatnonzero(bad)[0])
        raise NotNormalized(f"conditional row {r} sums to {sums[r]:.12g}, not 1")
    rows = rows.copy()
    rows[flat_def] /= sums[flat_def, None]
    rows[~flat_def] = 0.0
    defined = defined.copy()
    defined.setflags(write=False)
    return ConditionalPMF(given, target, _frozen(rows.reshape(t.shape)), defined)


def _check_alphabets(expected: FiniteAlphabet, got: FiniteAlphabet, what: str):
    if len(expected) != len(got):
        raise ShapeMismatch(
            f"{what}: alphabet {got.name!r} has {len(got)} symbols, expected {len(expected)}"
        )


def compose_inner(problem: EmbeddingProblem, policy: EncoderPolicy) -> JointPMF:
    """Joint law ``Q(u1,u2) P1(t1,x1|u1) P2(t2,x2|u2) W(y|x1,x2)``."""
    P1, P2 = policy.P1, policy.P2
    _check_alphabets(problem.U1, P1.given[0], "policy user 1 source")
    _check_alphabets(problem.U2, P2.given[0], "policy user 2 source")
    _check_alphabets(problem.X1, P1.target[1], "policy user 1 stegotext")
    _check_alphabets(problem.X2, P2.target[1], "policy user 2 stegotext")
    w = np.einsum("ac,abe,cdf,efg->abcdefg",
                  problem.Q.weights, P1.table, P2.table, problem.W.table)
    axes = (problem.U1.renamed("U1"), P1.target[0].renamed("T1"),
            problem.U2.renamed("U2"), P2.target[0].renamed("T2"),
            problem.X1.renamed("X1"), problem.X2.renamed("X2"), problem.Y.renamed("Y"))
    return make_pmf(axes, w)


def compose_outer(problem: EmbeddingProblem, policy: JointPolicy) -> JointPMF:
    """Joint law ``Q(u1,u2) P(t1,t2,x1,x2|u1,u2) W(y|x1,x2)``."""
    P = policy.P
    _check_alphabets(problem.U1, P.given[0], "policy source 1")
    _check_alphabets(problem.U2, P.given[1], "policy source 2")
    _check_alphabets(problem.X1, P.target[2], "policy stegotext 1")
    _check_alphabets(problem.X2, P.target[3], "policy stegotext 2")
    # P axes: u1 u2 t1 t2 x1 x2 -> a c b d e f
    w = np.einsum("ac,acbdef,efg->abcdefg", problem.Q.weights, P.table, problem.W.table)
    axes = (problem.U1.renamed("U1"), P.target[0].renamed("T1"),
            problem.U2.renamed("U2"), P.target[1].renamed("T2"),
            problem.X1.renamed("X1"), problem.X2.renamed("X2"), problem.Y.renamed("Y"))
    return make_pmf(axes, w)


# ---------------------------------------------------------------------------
# marginals and conditionals


def _names(group) -> tuple:
    if isinstance(group, str):
        return (group,)
    return tuple(group)


def _positions(pmf: JointPMF, names) -> tuple:
    return tuple(pmf.axis(n) for n in names)


def _marginal_array(weights: np.ndarray, keep: tuple) -> np.ndarray:
    drop = tuple(i for i in range(weights.ndim) if i not in keep)
    m = weights.sum(axis=drop) if drop else weights
    # sum keeps remaining axes in increasing order; permute to requested order
    order = sorted(keep)
    return np.transpose(m, [order.index(k) for k in keep])


def marginal(pmf: JointPMF, keep) -> JointPMF:
    keep = _names(keep)
    if not keep:
        raise UnknownAxis("marginal needs at least one axis to keep")
    pos = _positions(pmf, keep)
    if len(set(pos)) != len(pos):
        raise OverlappingGroups("repeated axis in keep")
    m = _marginal_array(pmf.weights, pos)
    return make_pmf([pmf.axes[p] for p in pos], m / m.sum())


def conditional(pmf: JointPMF, targets, givens) -> ConditionalPMF:
    targets, givens = _names(targets), _names(givens)
    if set(targets) & set(givens):
        raise OverlappingGroups("targets and givens overlap")
    tpos, gpos = _positions(pmf, targets), _positions(pmf, givens)
    joint = _marginal_array(pmf.weights, gpos + tpos)
    gshape = joint.shape[: len(gpos)]
    denom = joint.reshape(gshape + (-1,)).sum(axis=-1)
    defined = denom > 0
    safe = np.where(defined, denom, 1.0)
    table = joint / safe.reshape(gshape + (1,) * len(tpos))
    table = np.where(defined.reshape(gshape + (1,) * len(tpos)), table, 0.0)
    return make_conditional([pmf.axes[p] for p in gpos], [pmf.axes[p] for p in tpos],
                            table, defined)


# ---------------------------------------------------------------------------
# information measures


def entropy_array(p: np.ndarray) -> float:
    p = np.asarray(p, dtype=float).ravel()
    p = p[p > 0]
    return float(-np.sum(p * np.log2(p)))


def entropy(pmf: JointPMF, group=None) -> float:
    """Entropy in bits of the whole joint, or of the marginal on ``group``."""
    if group is None:
        return entropy_array(pmf.weights)
    pos = _positions(pmf, _names(group))
    return entropy_array(_marginal_array(pmf.weights, pos))


def mutual_information(pmf: JointPMF, groupA, groupB, given=None) -> float:
    """``I(A;B)`` or ``I(A;B|C)`` in bits via entropies of marginals."""
    A, B = _names(groupA), _names(groupB)
    C = _names(given) if given is not None else ()
    for g in (A, B, C):
        _positions(pmf, g)
    if not A or not B:
        raise UnknownAxis("mutual information needs non-empty groups")
    if set(A) & set(B) or set(A) & set(C) or set(B) & set(C):
        raise OverlappingGroups(f"groups {A}, {B}, {C} are not disjoint")

    def H(names):
        return entropy(pmf, names) if names else 0.0

    return H(A + C) + H(B + C) - H(A + B + C) - H(C)


def expected_distortion(pmf: JointPMF, table, pair) -> float:
    src, steg = pair
    table = np.asarray(table, dtype=float)
    m = _marginal_array(pmf.weights, _positions(pmf, (src, steg)))
    if m.shape != table.shape:
        raise ShapeMismatch(f"distortion table {table.shape} vs axes {m.shape}")
    return float(np.sum(m * table))
