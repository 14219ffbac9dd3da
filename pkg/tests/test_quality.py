"""Node quality metrics against brute-force and closed-form references."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cadfill import (ConfigError, default_neighbor_count, fill_distance,
                     grid_probes, local_regularity, regularity_vs_c,
                     separation_distance)


def brute_neighbor_distances(positions: np.ndarray, c: int) -> np.ndarray:
    diff = positions[:, None, :] - positions[None, :, :]
    d = np.linalg.norm(diff, axis=2)
    np.fill_diagonal(d, np.inf)
    return np.sort(d, axis=1)[:, :c]


def test_default_neighbor_counts():
    assert default_neighbor_count(1) == 2
    assert default_neighbor_count(2) == 3
    assert default_neighbor_count(3) == 5


@pytest.mark.parametrize("dim,c", [(1, 2), (2, 3), (2, 7), (3, 5)])
def test_local_regularity_matches_brute_force(dim, c):
    rng = np.random.default_rng(dim * 10 + c)
    positions = rng.uniform(0, 1, size=(120, dim))
    h = 0.1
    report = local_regularity(positions, c, h)
    dist = brute_neighbor_distances(positions, c)
    np.testing.assert_allclose(report.d_mean, dist.mean(axis=1), rtol=1e-12)
    np.testing.assert_allclose(report.d_min, dist[:, 0], rtol=1e-12)
    np.testing.assert_allclose(report.d_max, dist[:, -1], rtol=1e-12)
    norm = dist.mean(axis=1) / h
    assert abs(report.mean - norm.mean()) <= 1e-12
    assert abs(report.std - norm.std()) <= 1e-12
    spread = (dist[:, -1] - dist[:, 0]) / h
    assert abs(report.spread_mean - spread.mean()) <= 1e-12


def test_uniform_lattice_statistics_are_exact():
    h = 0.125
    n = 17
    xs = (np.arange(n) * h).reshape(-1, 1)
    report = local_regularity(xs, 2, h)
    # interior nodes average (h + h)/2, each end node (h + 2h)/2
    assert abs(report.mean - (n + 1) / n) <= 1e-12
    assert abs(report.spread_mean - 2.0 / n) <= 1e-12
    assert separation_distance(xs) == h / 2.0


def test_separation_distance_is_half_the_closest_pair():
    rng = np.random.default_rng(8)
    pts = rng.uniform(0, 1, size=(200, 2))
    diff = pts[:, None, :] - pts[None, :, :]
    d = np.linalg.norm(diff, axis=2)
    np.fill_diagonal(d, np.inf)
    assert abs(separation_distance(pts) - d.min() / 2.0) <= 1e-15


def test_regularity_vs_c_grows_with_neighbor_count():
    rng = np.random.default_rng(9)
    pts = rng.uniform(0, 1, size=(300, 2))
    curve = regularity_vs_c(pts, [1, 2, 3, 5, 8], h=0.05)
    np.testing.assert_array_equal(curve.c_values, [1, 2, 3, 5, 8])
    assert np.all(np.diff(curve.mean) > 0)
    # each c reproduces the direct single-c computation
    for k, c in enumerate(curve.c_values):
        single = local_regularity(pts, int(c), 0.05)
        assert abs(curve.mean[k] - single.mean) <= 1e-12
        assert abs(curve.std[k] - single.std) <= 1e-12


def test_report_serialization_and_extremes():
    rng = np.random.default_rng(10)
    pts = rng.uniform(0, 1, size=(50, 2))
    report = local_regularity(pts, 3, 0.1)
    assert report.r_min is None and report.r_max_normalized is None
    stamped = report.with_extremes(r_min=0.04, r_max=0.12)
    assert stamped.r_min_normalized == pytest.approx(0.4)
    assert stamped.r_max_normalized == pytest.approx(1.2)
    d = stamped.to_dict(per_node=False)
    assert d["count"] == 50 and "d_mean" not in d
    full = stamped.to_dict()
    assert len(full["d_mean"]) == 50


def test_grid_probes_cover_the_predicate_region():
    inside = lambda pts: np.linalg.norm(pts, axis=1) <= 1.0
    box = (np.array([-1.0, -1.0]), np.array([1.0, 1.0]))
    probes = grid_probes(inside, box, step=0.1)
    assert np.all(inside(probes))
    assert len(probes) > 250                     # pi/4 of the 21x21 grid
    with pytest.raises(ConfigError):
        grid_probes(inside, box, step=0.0)


def test_fill_distance_of_a_square_lattice_is_the_half_diagonal():
    h = 0.1
    g = np.arange(0.0, 1.0 + 1e-12, h)
    pts = np.stack(np.meshgrid(g, g, indexing="ij"), axis=-1).reshape(-1, 2)
    box = (np.zeros(2), np.ones(2))
    always = lambda q: np.ones(len(q), dtype=bool)
    exact = h * np.sqrt(2.0) / 2.0
    est = fill_distance(pts, always, box, oversample=4)
    assert abs(est - exact) <= 0.05 * exact
    tighter = fill_distance(pts, always, box, oversample=8)
    assert abs(tighter - exact) <= 0.02 * exact
    assert tighter <= exact + 1e-12              # estimator is a lower bound


def test_fill_distance_validates_inputs():
    pts = np.random.default_rng(0).uniform(0, 1, size=(30, 2))
    box = (np.zeros(2), np.ones(2))
    always = lambda q: np.ones(len(q), dtype=bool)
    never = lambda q: np.zeros(len(q), dtype=bool)
    with pytest.raises(ConfigError, match="oversample"):
        fill_distance(pts, always, box, oversample=2)
    with pytest.raises(ConfigError, match="probe"):
        fill_distance(pts, never, box)


def test_regularity_validates_inputs():
    pts = np.random.default_rng(1).uniform(0, 1, size=(10, 2))
    with pytest.raises(ConfigError):
        local_regularity(pts, 10, 0.1)          # c >= node count
    with pytest.raises(ConfigError):
        local_regularity(pts, 3, 0.0)
    with pytest.raises(ConfigError):
        regularity_vs_c(pts, [], 0.1)
    with pytest.raises(ConfigError):
        regularity_vs_c(pts, [0, 2], 0.1)
    with pytest.raises(ConfigError):
        separation_distance(pts[:1])


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10 ** 6),
       scale=st.floats(0.1, 10.0),
       shift=st.floats(-5.0, 5.0))
def test_normalized_statistics_are_scale_and_shift_invariant(seed, scale, shift):
    rng = np.random.default_rng(seed)
    pts = rng.uniform(0, 1, size=(40, 2))
    h = 0.15
    base = local_regularity(pts, 3, h)
    moved = local_regularity(pts * scale + shift, 3, h * scale)
    assert abs(base.mean - moved.mean) <= 1e-9 * max(1.0, base.mean)
    assert abs(base.std - moved.std) <= 1e-9
    assert abs(base.spread_mean - moved.spread_mean) <= 1e-9
