"""Ready-made problems: the binary additive example and small test channels."""

from __future__ import annotations

import numpy as np

from .probcore import EmbeddingProblem, alphabet, make_conditional, make_pmf

HAMMING = np.array([[0.0, 1.0], [1.0, 0.0]])


def binary_source(name: str, p0: float):
    return make_pmf([alphabet(name, 2)], [p0, 1.0 - p0])


def xor_channel(noise: float):
    """``Y = X1 xor X2 xor Z`` with ``Pr(Z = 1) = noise``."""
    table = np.zeros((2, 2, 2))
    for x1 in range(2):
        for x2 in range(2):
            y = x1 ^ x2
            table[x1, x2, y] = 1.0 - noise
            table[x1, x2, 1 - y] = noise
    return make_conditional([alphabet("X1", 2), alphabet("X2", 2)], [alphabet("Y", 2)], table)


def example_problem(D1: float = 0.45, D2: float = 0.4, noise: float = 0.02) -> EmbeddingProblem:
    """Independent binary covertexts with ``P(U1=0)=0.05``, ``P(U2=0)=0.1``,
    the modulo-2 additive attack channel, and Hamming distortion."""
    q = np.outer([0.05, 0.95], [0.1, 0.9])
    Q = make_pmf([alphabet("U1", 2), alphabet("U2", 2)], q)
    return EmbeddingProblem(Q, xor_channel(noise), HAMMING, HAMMING, D1, D2)


def parallel_bsc_problem(p1: float, p2: float, q1: float = 0.3, q2: float = 0.6,
                         D1: float = 1.0, D2: float = 1.0) -> EmbeddingProblem:
    """Independent binary covertexts and two independent binary symmetric channels;
    ``Y = (Y1, Y2)`` is coded as ``2 * y1 + y2``."""
    Q = make_pmf([alphabet("U1", 2), alphabet("U2", 2)], np.outer([q1, 1 - q1], [q2, 1 - q2]))
    b1 = np.array([[1 - p1, p1], [p1, 1 - p1]])
    b2 = np.array([[1 - p2, p2], [p2, 1 - p2]])
    table = np.einsum("ac,bd->abcd", b1, b2).reshape(2, 2, 4)
    W = make_conditional([alphabet("X1", 2), alphabet("X2", 2)], [alphabet("Y", 4)], table)
    return EmbeddingProblem(Q, W, HAMMING, HAMMING, D1, D2)


def constant_channel_problem(D1: float = 0.45, D2: float = 0.4) -> EmbeddingProblem:
    """Example covertexts with an attack channel whose output is constant."""
    base = example_problem(D1, D2)
    table = np.zeros((2, 2, 1))
    table[..., 0] = 1.0
    W = make_conditional([alphabet("X1", 2), alphabet("X2", 2)], [alphabet("Y", 1)], table)
    return EmbeddingProblem(base.Q, W, HAMMING, HAMMING, D1, D2)


def single_user_problem(D1: float = 1.0, noise: float = 0.02) -> EmbeddingProblem:
    """Example channel with user 2 reduced to a constant stegotext ``X2 = 0``.

    User 2 keeps the example covertext so it can still satisfy ``I(U2;T2) > 0``
    by copying it into ``T2``; the channel becomes ``Y = X1 xor Z``.
    """
    base = example_problem(D1, 1.0, noise)
    table = base.W.table[:, :1, :]
    W = make_conditional([alphabet("X1", 2), alphabet("X2", 1)], [alphabet("Y", 2)], table)
    d2 = np.zeros((2, 1))
    return EmbeddingProblem(base.Q, W, HAMMING, d2, D1, 1.0)
