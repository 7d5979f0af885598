import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from embedregion import (
    EncoderPolicy,
    RateRegion,
    RateTriple,
    compose_inner,
    compose_outer,
    contains,
    feasible,
    hull_union,
    mutual_information,
    pentagon,
)
from embedregion.errors import EmptyInput, ShapeMismatch
from embedregion.problems import constant_channel_problem, example_problem, parallel_bsc_problem
from embedregion.region import (
    batch_triples,
    convex_hull,
    rate_triple,
    rate_triple_general,
    rate_triple_independent,
    region_contains_region,
    region_from_triples,
)
from embedregion.search import compose_inner_batch

from helpers import random_encoder_arrays
import oracles


def policy(problem, p1, p2):
    return EncoderPolicy.from_arrays(p1, p2, problem)


def copy_policy(problem):
    """T = X = U for both users."""
    eye = np.zeros((2, 2, 2))
    eye[0, 0, 0] = eye[1, 1, 1] = 1.0
    return policy(problem, eye, eye)


class TestTriples:
    def test_degenerate_policy(self, example):
        const = np.zeros((2, 1, 2))
        const[:, 0, 0] = 1.0
        t = rate_triple_general(compose_inner(example, policy(example, const, const)))
        assert np.allclose(t.as_array(), 0, atol=1e-12)
        t = rate_triple_independent(compose_inner(example, policy(example, const, const)))
        assert np.allclose(t.as_array(), 0, atol=1e-12)

    def test_noiseless_single_user(self):
        from embedregion.probcore import EmbeddingProblem, alphabet, make_conditional, make_pmf

        Q = make_pmf([alphabet("U1", 2), alphabet("U2", 1)], [[0.3], [0.7]])
        table = np.zeros((2, 1, 2))
        table[0, 0, 0] = table[1, 0, 1] = 1.0
        W = make_conditional([alphabet("X1", 2), alphabet("X2", 1)], [alphabet("Y", 2)], table)
        prob = EmbeddingProblem(Q, W, np.ones((2, 2)), np.zeros((1, 1)), 1.0, 0.0)
        p1 = np.zeros((2, 2, 2))
        p1[:, 0, 0] = p1[:, 1, 1] = 0.5
        t = rate_triple_general(compose_inner(prob, policy(prob, p1, np.ones((1, 1, 1)))))
        assert t.a == pytest.approx(1.0, abs=1e-12)

    def test_terms_match_nested_sum(self, example, rng):
        for _ in range(10):
            j = compose_inner(example, policy(example, *random_encoder_arrays(rng, example)))
            w = j.weights
            # axes: U1 T1 U2 T2 X1 X2 Y -> 0..6
            a = oracles.mutual_information(w, [1], [3, 6]) - oracles.mutual_information(w, [0], [1])
            b = oracles.mutual_information(w, [3], [1, 6]) - oracles.mutual_information(w, [2], [3])
            c = oracles.mutual_information(w, [1, 3], [6]) - oracles.mutual_information(w, [0, 2], [1, 3])
            assert np.allclose(rate_triple_general(j).as_array(), [a, b, c], atol=1e-10)

    def test_general_equals_independent_for_product_sources(self, example, rng):
        for _ in range(30):
            j = compose_inner(example, policy(example, *random_encoder_arrays(rng, example, 3, 2)))
            assert np.allclose(rate_triple(j, "general").as_array(),
                               rate_triple(j, "independent").as_array(), atol=1e-10)

    def test_parallel_channel_sum(self, rng):
        prob = parallel_bsc_problem(0.1, 0.2)
        for _ in range(20):
            j = compose_inner(prob, policy(prob, *random_encoder_arrays(rng, prob)))
            t = rate_triple_independent(j)
            assert abs(t.c - (t.a + t.b)) <= 1e-10

    def test_lift_consistency(self, example, rng):
        for _ in range(20):
            pol = policy(example, *random_encoder_arrays(rng, example))
            a = rate_triple_general(compose_inner(example, pol)).as_array()
            b = rate_triple_general(compose_outer(example, pol.lift())).as_array()
            assert np.max(np.abs(a - b)) <= 1e-12

    def test_sum_bound_chain_rule(self, example, rng):
        for _ in range(20):
            j = compose_inner(example, policy(example, *random_encoder_arrays(rng, example)))
            t = rate_triple_general(j)
            assert t.c <= t.a + t.b + mutual_information(j, "T1", "T2") + 1e-9

    def test_batch_matches_single(self, example, rng):
        p1s, p2s, singles = [], [], []
        for _ in range(8):
            p1, p2 = random_encoder_arrays(rng, example)
            p1s.append(p1)
            p2s.append(p2)
            singles.append(rate_triple_general(compose_inner(example, policy(example, p1, p2))).as_array())
        batch = batch_triples(compose_inner_batch(example, np.stack(p1s), np.stack(p2s)))
        assert np.allclose(batch, singles, atol=1e-12)

    def test_requires_canonical_axes(self, example):
        with pytest.raises(ShapeMismatch):
            rate_triple_general(example.Q)


class TestFeasible:
    def test_copy_is_feasible(self, example):
        f = feasible(compose_inner(example, copy_policy(example)), example, "S")
        assert f.ok and f.distortion1 == 0 and f.info1 > 0

    def test_independent_t_only_feasible_in_p(self, example):
        p = np.zeros((2, 2, 2))
        p[0, :, 0] = 0.5
        p[1, :, 1] = 0.5  # X = U, T a fair coin
        j = compose_inner(example, policy(example, p, p))
        assert not feasible(j, example, "S")
        assert feasible(j, example, "P")


class TestPolygons:
    def test_pentagon(self):
        r = pentagon(RateTriple(0.4, 0.5, 0.7))
        assert np.allclose(r.vertices, [(0, 0), (0.4, 0), (0.4, 0.3), (0.2, 0.5), (0, 0.5)])

    def test_rectangle(self):
        r = pentagon(RateTriple(0.4, 0.5, 1.0))
        assert np.allclose(r.vertices, [(0, 0), (0.4, 0), (0.4, 0.5), (0, 0.5)])

    def test_negative_bound(self):
        assert pentagon(RateTriple(-0.1, 0.5, 0.5)).vertices == ((0.0, 0.0),)

    def test_pentagon_vertices_satisfy_bounds(self, rng):
        for t in rng.random((200, 3)):
            for v in pentagon(RateTriple(*t)).vertices:
                assert oracles.pentagon_member(t, v)

    def test_hull_idempotent(self):
        p = pentagon(RateTriple(0.4, 0.5, 0.7))
        assert hull_union([p]) == p
        assert hull_union([hull_union([p])]) == p

    def test_time_sharing(self):
        a = RateRegion(((0, 0), (1, 0)))
        b = RateRegion(((0, 0), (0, 1)))
        assert hull_union([a, b]).vertices == ((0.0, 0.0), (1.0, 0.0), (0.0, 1.0))

    def test_empty(self):
        with pytest.raises(EmptyInput):
            hull_union([])

    def test_hull_against_brute_force(self, rng):
        for _ in range(25):
            pts = rng.random((int(rng.integers(3, 12)), 2))
            got = set(map(tuple, np.round(convex_hull(pts), 12)))
            assert got == oracles.brute_force_hull(pts)

    def test_contains(self):
        p = pentagon(RateTriple(0.4, 0.5, 0.7))
        assert contains(p, (0, 0))
        assert not contains(p, (0.5, 0), slack=0.09)
        assert contains(p, (0.5, 0), slack=0.1 + 1e-12)
        assert contains(RateRegion.degenerate(), (0, 0))

    def test_containment_matches_grid_oracle(self, rng):
        grid = np.array(list(itertools.product(np.linspace(0, 1, 41), repeat=2)))
        for _ in range(20):
            a = region_from_triples(rng.random((3, 3)))
            b = region_from_triples(rng.random((3, 3)))
            by_vertices = region_contains_region(b, a, 1e-9)
            in_a = np.array([contains(a, g) for g in grid])
            in_b = np.array([contains(b, g, 1e-9) for g in grid])
            by_grid = not np.any(in_a & ~in_b)
            if by_vertices:
                assert by_grid


class TestRegions:
    def test_constant_channel(self, rng):
        prob = constant_channel_problem()
        for _ in range(10):
            j = compose_inner(prob, policy(prob, *random_encoder_arrays(rng, prob)))
            assert pentagon(rate_triple_general(j)).is_degenerate

    def test_distortion_monotone(self, rng):
        tight, loose = example_problem(0.1, 0.1), example_problem(0.45, 0.4)
        pols = [policy(tight, *random_encoder_arrays(rng, tight)) for _ in range(200)]
        ok_t = [feasible(compose_inner(tight, p), tight).ok for p in pols]
        ok_l = [feasible(compose_inner(loose, p), loose).ok for p in pols]
        assert all(l or not t for t, l in zip(ok_t, ok_l))
        tri = [rate_triple_general(compose_inner(loose, p)).as_array() for p in pols]
        rt = region_from_triples([t for t, k in zip(tri, ok_t) if k] or [(0, 0, 0)])
        rl = region_from_triples([t for t, k in zip(tri, ok_l) if k] or [(0, 0, 0)])
        assert region_contains_region(rl, rt, 1e-12)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.floats(-0.5, 2.0), st.floats(-0.5, 2.0), st.floats(-0.5, 3.0)),
                min_size=1, max_size=6))
def test_hull_union_is_convex_cover(triples):
    regions = [pentagon(RateTriple(*t)) for t in triples]
    hull = hull_union(regions)
    v = hull.as_array()
    assert tuple(v[0]) == (0.0, 0.0)
    for r in regions:
        assert region_contains_region(hull, r, 1e-9)
    if len(v) >= 3:
        e = np.roll(v, -1, axis=0) - v
        f = np.roll(e, -1, axis=0)
        cross = e[:, 0] * f[:, 1] - e[:, 1] * f[:, 0]
        assert min(cross) > 0
    assert hull_union([hull]) == hull
