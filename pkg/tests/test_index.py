"""Dynamic point index against brute-force distance scans."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cadfill import ConfigError, DynamicPointIndex


def brute_nearest(points: np.ndarray, q: np.ndarray) -> float:
    # single-vector norms: the arithmetic the scalar query path uses
    if len(points) == 0:
        return np.inf
    return min(float(np.linalg.norm(p - q)) for p in points)


def brute_nearest_rowwise(points: np.ndarray, q: np.ndarray) -> float:
    # row-wise norms: the arithmetic the batch query path uses
    return float(np.min(np.linalg.norm(points - q, axis=1)))


def brute_k_nearest(points: np.ndarray, q: np.ndarray, k: int,
                    exclude_self: bool = False):
    d = np.linalg.norm(points - q, axis=1)
    order = np.lexsort((np.arange(len(points)), d))
    d = d[order]
    if exclude_self and len(order) and d[0] == 0.0:
        order, d = order[1:], d[1:]
    return order[:k], d[:k]


@pytest.mark.parametrize("dim", [1, 2, 3])
def test_nearest_distance_matches_brute_force(dim):
    rng = np.random.default_rng(5)
    index = DynamicPointIndex(dim)
    pts = rng.uniform(-1, 1, size=(700, dim))
    index.insert_many(pts)
    queries = rng.uniform(-1.2, 1.2, size=(200, dim))
    for q in queries:
        assert index.nearest_distance(q) == brute_nearest(pts, q)
    batch = index.nearest_distance_batch(queries)
    expect = np.array([brute_nearest_rowwise(pts, q) for q in queries])
    np.testing.assert_array_equal(batch, expect)


@pytest.mark.parametrize("dim", [2, 3])
def test_k_nearest_matches_brute_force_through_growth(dim):
    # interleave inserts and queries so both the tree snapshot and the
    # unindexed buffer are exercised
    rng = np.random.default_rng(11)
    index = DynamicPointIndex(dim, capacity=4)
    stored = []
    for round_ in range(12):
        chunk = rng.uniform(-1, 1, size=(23, dim))
        index.insert_many(chunk)
        stored.extend(chunk)
        pts = np.asarray(stored)
        for q in rng.uniform(-1, 1, size=(5, dim)):
            k = int(rng.integers(1, min(9, len(pts)) + 1))
            got_i, got_d = index.k_nearest(q, k)
            exp_i, exp_d = brute_k_nearest(pts, q, k)
            np.testing.assert_array_equal(got_i, exp_i)
            np.testing.assert_array_equal(got_d, exp_d)


def test_k_nearest_breaks_distance_ties_by_insertion_order():
    index = DynamicPointIndex(2)
    # four points at identical distance from the origin
    for p in [(1, 0), (0, 1), (-1, 0), (0, -1)]:
        index.insert(np.asarray(p, dtype=float))
    idx, d = index.k_nearest(np.zeros(2), 4)
    np.testing.assert_array_equal(idx, [0, 1, 2, 3])
    np.testing.assert_array_equal(d, np.ones(4))


def test_k_nearest_excludes_one_exact_duplicate_of_the_query():
    index = DynamicPointIndex(2)
    index.insert_many(np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 0.0]]))
    idx, d = index.k_nearest(np.zeros(2), 2, exclude_self=True)
    # only one zero-distance point is dropped
    np.testing.assert_array_equal(idx, [1, 2])
    np.testing.assert_array_equal(d, [0.0, 1.0])


def test_neighbors_within_matches_brute_force():
    rng = np.random.default_rng(3)
    pts = rng.uniform(0, 1, size=(400, 3))
    index = DynamicPointIndex(3)
    index.insert_many(pts)
    for q in rng.uniform(0, 1, size=(50, 3)):
        r = float(rng.uniform(0.05, 0.4))
        got = np.sort(index.neighbors_within(q, r))
        exp = np.nonzero(np.linalg.norm(pts - q, axis=1) < r)[0]
        np.testing.assert_array_equal(got, exp)


def test_has_point_within_is_strict():
    index = DynamicPointIndex(1)
    index.insert(np.array([1.0]))
    assert not index.has_point_within(np.array([0.0]), 1.0)
    assert index.has_point_within(np.array([0.0]), 1.0 + 1e-12)


def test_empty_index_reports_infinite_distance():
    index = DynamicPointIndex(2)
    assert index.nearest_distance(np.zeros(2)) == np.inf
    assert not index.has_point_within(np.zeros(2), 10.0)


def test_insert_many_equals_repeated_insert():
    rng = np.random.default_rng(7)
    pts = rng.normal(size=(300, 2))
    a = DynamicPointIndex(2)
    b = DynamicPointIndex(2)
    a.insert_many(pts)
    for p in pts:
        b.insert(p)
    q = rng.normal(size=(40, 2))
    np.testing.assert_array_equal(a.nearest_distance_batch(q),
                                  b.nearest_distance_batch(q))
    assert a.size == b.size == len(pts)
    np.testing.assert_array_equal(a.points, pts)


def test_invalid_inputs_are_rejected():
    with pytest.raises(ConfigError):
        DynamicPointIndex(0)
    index = DynamicPointIndex(2)
    with pytest.raises(ConfigError):
        index.insert(np.array([1.0]))                # wrong dim
    with pytest.raises(ConfigError):
        index.insert(np.array([np.nan, 0.0]))
    index.insert(np.zeros(2))
    with pytest.raises(ConfigError):
        index.k_nearest(np.zeros(2), 2)              # k > size
    with pytest.raises(ConfigError):
        index.has_point_within(np.zeros(2), 0.0)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.floats(-5, 5), st.floats(-5, 5)),
                min_size=1, max_size=64),
       st.tuples(st.floats(-6, 6), st.floats(-6, 6)))
def test_nearest_distance_property(points, query):
    pts = np.asarray(points, dtype=float)
    q = np.asarray(query, dtype=float)
    index = DynamicPointIndex(2, capacity=2)
    for p in pts:
        index.insert(p)
    # below the rebuild threshold every query scans the raw buffer
    assert index.nearest_distance(q) == brute_nearest_rowwise(pts, q)
