"""Shared builders for tests."""

import numpy as np


def random_encoder_arrays(rng, problem, t1=2, t2=2):
    u1, u2 = len(problem.U1), len(problem.U2)
    x1, x2 = len(problem.X1), len(problem.X2)
    p1 = rng.dirichlet(np.ones(t1 * x1), size=u1).reshape(u1, t1, x1)
    p2 = rng.dirichlet(np.ones(t2 * x2), size=u2).reshape(u2, t2, x2)
    return p1, p2


# acceptance results, printed in the terminal summary by conftest
ACCEPTANCE = []


def record(number, title, passed, detail):
    line = f"CRITERION {number:>2} {'PASS' if passed else 'FAIL'}  {title}: {detail}"
    ACCEPTANCE.append((number, line))
    return line
