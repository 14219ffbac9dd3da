"""Generalized finite-difference weights: exactness, scaling, conditioning.

The binding contract is polynomial reproduction: a weight row for an
operator L must apply L exactly (to rounding) to every polynomial the
stencil was augmented with.
"""
import numpy as np
import pytest

from cadfill import (ConfigError, Directional, Identity, Laplacian,
                     NumericalError, Partial, SecondPartial, apply_operator,
                     build_stencils, compute_all_weights, compute_weights,
                     monomial_exponents, phs_exponent, stencil_size)


def brute_stencils(positions: np.ndarray, n: int) -> np.ndarray:
    d = np.linalg.norm(positions[:, None, :] - positions[None, :, :], axis=2)
    order = np.lexsort((np.tile(np.arange(len(positions)), (len(positions), 1)), d),
                       axis=1)
    return order[:, :n]


def monomial(exponents: np.ndarray):
    def f(p):
        return np.prod(p ** exponents, axis=-1)
    return f


def test_stencil_size_rule():
    assert stencil_size(2, 2) == 24
    assert stencil_size(2, 4) == 60
    assert stencil_size(3, 2) == 40
    assert stencil_size(3, 4) == 140
    with pytest.raises(ConfigError):
        stencil_size(0, 2)
    with pytest.raises(ConfigError):
        stencil_size(2, -1)


def test_phs_exponent_is_odd_and_grows_with_order():
    assert [phs_exponent(m) for m in (1, 2, 3, 4, 5, 6)] == [3, 3, 3, 5, 5, 7]


def test_monomial_exponents_enumerate_all_low_degrees():
    expo = monomial_exponents(2, 2)
    assert len(expo) == 6
    assert sorted(map(tuple, expo)) == [(0, 0), (0, 1), (0, 2),
                                        (1, 0), (1, 1), (2, 0)]
    degrees = expo.sum(axis=1)
    assert np.all(np.diff(degrees) >= 0)         # graded order
    assert len(monomial_exponents(3, 4)) == 35


def test_build_stencils_matches_brute_force():
    rng = np.random.default_rng(0)
    positions = rng.uniform(0, 1, size=(150, 2))
    stencils = build_stencils(positions, m=2)
    assert stencils.shape == (150, 24)
    np.testing.assert_array_equal(stencils[:, 0], np.arange(150))
    np.testing.assert_array_equal(stencils, brute_stencils(positions, 24))
    small = build_stencils(positions, n=7)
    np.testing.assert_array_equal(small, brute_stencils(positions, 7))
    with pytest.raises(ConfigError):
        build_stencils(positions)
    with pytest.raises(ConfigError):
        build_stencils(positions[:5], m=2)


def test_three_point_line_recovers_the_classic_second_difference():
    h = 0.05
    positions = np.array([[0.0], [h], [2 * h]])
    stencils = build_stencils(positions, n=3)
    w = compute_weights(positions, stencils[1], Laplacian(), m=2)
    # center first, then the two neighbors
    np.testing.assert_allclose(w, np.array([-2.0, 1.0, 1.0]) / h ** 2,
                               rtol=1e-10)


@pytest.mark.parametrize("m", [2, 4])
def test_weights_reproduce_polynomials_on_scattered_nodes(m, fill_cache):
    nodes = fill_cache("disk", 0.15, 2.0)
    pos = nodes.positions
    stencils = build_stencils(pos, m=m)
    ops = [Laplacian(), Partial(0), Partial(1),
           SecondPartial(0, 0), SecondPartial(0, 1)]
    W = compute_all_weights(pos, stencils, ops, m=m)
    h = 0.15
    for expo in monomial_exponents(2, m):
        f = monomial(expo)
        vals = f(pos)
        # true operator actions, written out per exponent
        ex, ey = int(expo[0]), int(expo[1])
        x, y = pos[:, 0], pos[:, 1]
        mono = lambda a, b: (x ** a if a else 1.0) * (y ** b if b else 1.0)
        d2x = ex * (ex - 1) * mono(ex - 2, ey) if ex >= 2 else 0.0
        d2y = ey * (ey - 1) * mono(ex, ey - 2) if ey >= 2 else 0.0
        dx = ex * mono(ex - 1, ey) if ex >= 1 else 0.0
        dy = ey * mono(ex, ey - 1) if ey >= 1 else 0.0
        dxy = ex * ey * mono(ex - 1, ey - 1) if ex >= 1 and ey >= 1 else 0.0
        truths = [d2x + d2y, dx, dy, d2x, dxy]
        for Wop, truth in zip(W, truths):
            got = apply_operator(Wop, stencils, vals)
            scale = np.abs(Wop).sum(axis=1) * np.abs(vals[stencils]).max(axis=1)
            err = np.abs(got - np.broadcast_to(truth, got.shape))
            assert np.max(err / np.maximum(scale, h ** -2 * 1e-3)) <= 1e-8


def test_laplacian_rows_annihilate_constants_and_identity_sums_to_one(
        fill_cache):
    nodes = fill_cache("disk", 0.15, 2.0)
    stencils = build_stencils(nodes.positions, m=2)
    W = compute_all_weights(nodes.positions, stencils,
                            [Laplacian(), Identity()], m=2)
    lap_sums = W[0].sum(axis=1)
    scale = np.abs(W[0]).sum(axis=1)
    assert np.max(np.abs(lap_sums) / scale) <= 1e-10
    np.testing.assert_allclose(W[1].sum(axis=1), 1.0, atol=1e-10)
    # identity rows collapse onto the center node
    np.testing.assert_allclose(W[1][:, 0], 1.0, atol=1e-10)
    np.testing.assert_allclose(W[1][:, 1:], 0.0, atol=1e-10)


def test_directional_weights_combine_the_partials():
    rng = np.random.default_rng(3)
    pos = rng.uniform(0, 1, size=(60, 2)) * 0.3
    stencils = build_stencils(pos, m=2)
    direction = np.array([0.6, -0.8])
    W = compute_all_weights(pos, stencils,
                            [Directional(direction), Partial(0), Partial(1)],
                            m=2)
    np.testing.assert_allclose(
        W[0], direction[0] * W[1] + direction[1] * W[2], atol=1e-9)


def test_weights_scale_like_the_operator_order():
    rng = np.random.default_rng(4)
    pos = rng.uniform(0, 1, size=(40, 2)) * 0.2
    stencils = build_stencils(pos, n=15)
    alpha = 3.7
    for op, power in [(Laplacian(), 2), (Partial(0), 1), (Identity(), 0)]:
        w1 = compute_weights(pos, stencils[0], op, m=2)
        w2 = compute_weights(pos * alpha, stencils[0], op, m=2)
        np.testing.assert_allclose(w2, w1 / alpha ** power, rtol=1e-8)


def test_batched_weights_match_the_single_stencil_path(fill_cache):
    nodes = fill_cache("disk", 0.2, 2.0)
    pos = nodes.positions
    stencils = build_stencils(pos, m=2)
    ops = [Laplacian(), Partial(1)]
    batched = compute_all_weights(pos, stencils, ops, m=2)
    for i in range(0, len(pos), 7):
        single = compute_weights(pos, stencils[i], ops, m=2)
        for c in range(len(ops)):
            scale = np.abs(single[c]).max()
            np.testing.assert_allclose(batched[c][i], single[c],
                                       atol=1e-9 * scale)


@pytest.mark.filterwarnings("ignore::scipy.linalg.LinAlgWarning")
def test_coincident_stencil_points_raise_a_named_error():
    pos = np.zeros((5, 2))
    pos[3:] = np.random.default_rng(5).uniform(size=(2, 2))
    stencil = np.array([0, 1, 2, 3, 4])
    with pytest.raises(NumericalError, match="node 0"):
        compute_weights(pos, stencil, Laplacian(), m=1)
    with pytest.raises(NumericalError):
        compute_all_weights(pos, stencil[None, :], [Laplacian()], m=1)


def test_operator_argument_forms():
    rng = np.random.default_rng(6)
    pos = rng.uniform(0, 1, size=(30, 2))
    stencils = build_stencils(pos, n=12)
    lone = compute_weights(pos, stencils[0], Laplacian(), m=2)
    listed = compute_weights(pos, stencils[0], [Laplacian()], m=2)
    assert lone.shape == (12,)
    assert listed.shape == (1, 12)
    np.testing.assert_array_equal(lone, listed[0])
    with pytest.raises(ConfigError):
        compute_weights(pos, stencils[0], [], m=2)
    with pytest.raises(ConfigError):
        compute_weights(pos, stencils[0], Laplacian(), m=2, k=4)
