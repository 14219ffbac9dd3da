"""Meshless PDE solvers: references, boundary handling, exactness oracles.

Closed-form references are validated against finite differences of their
own displacement or value fields, and each solver is checked against
fields its discretization must reproduce exactly (low-degree polynomials).
"""
import numpy as np
import pytest
import scipy.sparse as sp

from cadfill import (BOUNDARY, ConfigError, DISPLACEMENT, INTERIOR,
                     NumericalError, NodeSet, TRACTION,
                     assemble_navier_cauchy, error_norms, navier_reference,
                     poisson_reference, solve_heat_implicit,
                     solve_navier_cauchy, solve_poisson, solve_sparse,
                     split_boundary_halves)
from cadfill.pde import ScalarReference


def circle_nodes(n_boundary: int = 40, n_interior: int = 60,
                 seed: int = 0) -> NodeSet:
    rng = np.random.default_rng(seed)
    ang = 2 * np.pi * np.arange(n_boundary) / n_boundary
    bpos = np.column_stack([np.cos(ang), np.sin(ang)])
    ipos = rng.uniform(-0.68, 0.68, size=(4 * n_interior, 2))
    ipos = ipos[np.linalg.norm(ipos, axis=1) < 0.95][:n_interior]
    positions = np.vstack([bpos, ipos])
    kinds = np.concatenate([np.full(n_boundary, BOUNDARY, dtype=np.int8),
                            np.full(len(ipos), INTERIOR, dtype=np.int8)])
    normals = np.vstack([bpos, np.full((len(ipos), 2), np.nan)])
    return NodeSet(positions=positions, kinds=kinds, normals=normals,
                   spacing=np.full(len(positions), 2 * np.pi / n_boundary))


def test_error_norms_match_their_definitions():
    u = np.array([1.0, 2.0, -1.0, 4.0])
    v = np.array([1.5, 2.0, -2.0, 3.0])
    n = 4
    diff = u - v
    norms = error_norms(u, v)
    assert norms.e1 == pytest.approx(np.abs(diff).sum() / n
                                     / (np.abs(v).sum() / n))
    assert norms.e2 == pytest.approx(np.sqrt((diff ** 2).sum() / n)
                                     / np.sqrt((v ** 2).sum() / n))
    assert norms.einf == pytest.approx(np.abs(diff).max() / np.abs(v).max())
    assert set(norms.to_dict()) == {"e1", "e2", "einf"}
    with pytest.raises(ConfigError):
        error_norms(u, np.zeros(4))
    with pytest.raises(ConfigError):
        error_norms(u, v[:3])


@pytest.mark.parametrize("dim", [2, 3])
def test_poisson_reference_derivatives_are_consistent(dim):
    ref = poisson_reference(dim)
    rng = np.random.default_rng(dim)
    pts = rng.uniform(-1, 1, size=(30, dim))
    eps = 1e-6
    grad_fd = np.empty_like(pts)
    lap_fd = np.zeros(len(pts))
    for a in range(dim):
        e = np.zeros(dim)
        e[a] = eps
        up, dn = ref.value(pts + e), ref.value(pts - e)
        grad_fd[:, a] = (up - dn) / (2 * eps)
        lap_fd += (up - 2 * ref.value(pts) + dn) / eps ** 2
    np.testing.assert_allclose(ref.gradient(pts), grad_fd, atol=1e-8)
    np.testing.assert_allclose(ref.laplacian(pts), lap_fd, atol=1e-3)
    with pytest.raises(ConfigError):
        poisson_reference(4)


def test_solve_sparse_reaches_the_residual_target():
    rng = np.random.default_rng(1)
    n = 300
    A = sp.random(n, n, density=0.02, random_state=1, format="csr")
    A = A + sp.diags(np.full(n, 4.0))
    x_true = rng.normal(size=n)
    b = A @ x_true
    x, resid = solve_sparse(A, b)
    assert resid <= 1e-10
    np.testing.assert_allclose(x, x_true, atol=1e-7)
    x0, r0 = solve_sparse(A, np.zeros(n))
    assert r0 == 0.0 and np.all(x0 == 0.0)


def test_solve_sparse_raises_when_no_path_converges():
    # numerically singular but with nonzero pivots, so every solve path
    # returns a finite answer whose residual misses the target
    rng = np.random.default_rng(5)
    n = 8
    Q1 = np.linalg.qr(rng.normal(size=(n, n)))[0]
    Q2 = np.linalg.qr(rng.normal(size=(n, n)))[0]
    svals = np.ones(n)
    svals[-1] = 1e-17
    A = sp.csr_matrix(Q1 @ np.diag(svals) @ Q2.T)
    b = Q1[:, -1].copy()
    with pytest.raises(NumericalError):
        solve_sparse(A, b)


def test_boundary_split_partitions_by_median_x():
    nodes = circle_nodes()
    dirichlet, neumann = split_boundary_halves(nodes)
    bnd = nodes.kinds == BOUNDARY
    assert not np.any(dirichlet & neumann)
    np.testing.assert_array_equal(dirichlet | neumann, bnd)
    med = np.median(nodes.positions[bnd, 0])
    assert np.all(nodes.positions[dirichlet, 0] < med)
    assert np.all(nodes.positions[neumann, 0] >= med)

    interior_only = nodes.subset(~bnd)
    with pytest.raises(ConfigError):
        split_boundary_halves(interior_only)


def test_poisson_reproduces_affine_solutions_exactly(fill_cache):
    nodes = fill_cache("disk", 0.15, 2.0)
    ref = ScalarReference(
        value=lambda p: 1.0 + 2.0 * p[:, 0] - 0.5 * p[:, 1],
        gradient=lambda p: np.tile([2.0, -0.5], (len(p), 1)),
        laplacian=lambda p: np.zeros(len(p)),
    )
    result = solve_poisson(nodes, 2, reference=ref)
    assert result.norms.einf <= 1e-6
    assert result.residual <= 1e-10
    bnd = int((nodes.kinds == BOUNDARY).sum())
    assert result.dirichlet_count + result.neumann_count == bnd
    assert result.dirichlet_count > 0 and result.neumann_count > 0


def test_poisson_smoke_on_the_default_reference(fill_cache):
    nodes = fill_cache("disk", 0.15, 2.0)
    result = solve_poisson(nodes, 2)
    assert result.residual <= 1e-10
    assert 0.0 < result.norms.e2 < 0.1
    assert len(result.solution) == len(nodes)


def test_heat_with_zero_source_stays_at_zero(fill_cache):
    nodes = fill_cache("disk", 0.2, 2.0)
    result = solve_heat_implicit(nodes, 2, lambda p: np.zeros(len(p)),
                                 lam_th=2.0, dt=1e-3)
    assert result.converged and result.steps == 1
    np.testing.assert_array_equal(result.temperature, 0.0)
    np.testing.assert_array_equal(result.history, [0.0])


def test_heat_relaxes_monotonically_to_a_steady_state(fill_cache):
    from cadfill import Laplacian, apply_operator, build_stencils, \
        compute_all_weights
    nodes = fill_cache("disk", 0.2, 2.0)
    lam_th = 2.0
    result = solve_heat_implicit(nodes, 2, lambda p: np.ones(len(p)),
                                 lam_th=lam_th, dt=1e-3, max_steps=20000,
                                 probe_point=[0.0, 0.0])
    assert result.converged
    assert result.final_delta < 3e-6
    # probe temperature climbs to the steady value
    steady = result.history[-1]
    assert steady > 0
    assert np.min(np.diff(result.history)) >= -1e-5 * steady
    assert result.probe_index == int(
        np.argmin(np.linalg.norm(nodes.positions, axis=1)))
    # steady state balances the source against diffusion in the interior
    stencils = build_stencils(nodes, 2)
    W = compute_all_weights(nodes, stencils, Laplacian(), 2)
    balance = lam_th * apply_operator(W, stencils, result.temperature) + 1.0
    interior = nodes.kinds == INTERIOR
    assert np.abs(balance[interior]).max() <= 1e-2


def test_heat_rejects_bad_parameters(fill_cache):
    nodes = fill_cache("disk", 0.2, 2.0)
    src = lambda p: np.ones(len(p))
    with pytest.raises(ConfigError):
        solve_heat_implicit(nodes, 2, src, lam_th=0.0, dt=1e-3)
    with pytest.raises(ConfigError):
        solve_heat_implicit(nodes, 2, src, lam_th=2.0, dt=0.0)


def test_navier_reference_force_is_the_operator_applied_to_the_field():
    E, nu = 3.0, 0.3
    ref = navier_reference(E, nu)
    shear = E / (2 * (1 + nu))
    cpl = 1 / (1 - 2 * nu)
    rng = np.random.default_rng(2)
    pts = rng.uniform(-1, 1, size=(20, 2))
    eps = 1e-5

    def fd_op(p):
        # shear * (lap u + cpl * grad(div u)) by central differences
        out = np.zeros((len(p), 2))
        lap = np.zeros((len(p), 2))
        for a in range(2):
            e = np.zeros(2)
            e[a] = eps
            lap += (ref.value(p + e) - 2 * ref.value(p) + ref.value(p - e)) / eps ** 2
        div = lambda q: ((ref.value(q + [eps, 0])[:, 0]
                          - ref.value(q - [eps, 0])[:, 0])
                         + (ref.value(q + [0, eps])[:, 1]
                            - ref.value(q - [0, eps])[:, 1])) / (2 * eps)
        for a in range(2):
            e = np.zeros(2)
            e[a] = eps
            out[:, a] = (div(p + e) - div(p - e)) / (2 * eps)
        return shear * (lap + cpl * out)

    np.testing.assert_allclose(ref.body_force(pts), fd_op(pts),
                               rtol=0, atol=2e-4)


def test_navier_reference_stress_matches_its_strain():
    E, nu = 2.0, 0.25
    ref = navier_reference(E, nu)
    cpl = 1 / (1 - 2 * nu)
    c = E / (1 + nu)
    rng = np.random.default_rng(3)
    pts = rng.uniform(-1, 1, size=(15, 2))
    eps = 1e-6
    grad = np.empty((len(pts), 2, 2))
    for a in range(2):
        e = np.zeros(2)
        e[a] = eps
        grad[:, :, a] = (ref.value(pts + e) - ref.value(pts - e)) / (2 * eps)
    strain = 0.5 * (grad + np.swapaxes(grad, 1, 2))
    tr = np.trace(strain, axis1=1, axis2=2)
    expected = c * (cpl * tr[:, None, None] * np.eye(2) + strain)
    np.testing.assert_allclose(ref.stress(pts), expected, atol=1e-8)


def test_navier_solver_reproduces_affine_displacements(fill_cache):
    nodes = fill_cache("disk", 0.15, 2.0)
    M = np.array([[0.3, -1.1], [0.7, 0.2]])
    t = np.array([0.5, -0.25])
    exact = nodes.positions @ M.T + t
    bnd = nodes.kinds == BOUNDARY
    bc_kind = np.where(bnd, DISPLACEMENT, 0)
    bc_values = np.where(bnd[:, None], exact, 0.0)
    result = solve_navier_cauchy(nodes, 2, 1.0, 0.33, bc_kind, bc_values)
    assert result.norms is None
    scale = np.abs(exact).max()
    assert np.abs(result.displacement - exact).max() <= 1e-8 * scale


def test_navier_assembly_scales_linearly_with_stiffness(fill_cache):
    nodes = fill_cache("disk", 0.15, 2.0)
    N = len(nodes)
    E, nu = 72.1e9, 0.33
    dirichlet, neumann = split_boundary_halves(nodes)
    kind = np.zeros(N, dtype=int)
    kind[dirichlet] = DISPLACEMENT
    kind[neumann] = TRACTION
    vals = np.zeros((N, 2))
    A1, b1 = assemble_navier_cauchy(nodes, 2, 1.0, nu, kind, vals)
    AE, bE = assemble_navier_cauchy(nodes, 2, E, nu, kind, vals)
    # interior and traction rows carry the stiffness, displacement rows do not
    D = np.where(np.tile(dirichlet, 2), 1.0, E)
    diff = np.abs(AE.toarray() - D[:, None] * A1.toarray())
    assert diff.max() <= 1e-12 * np.abs(AE.toarray()).max()
    np.testing.assert_array_equal(b1, bE)


def test_traction_rows_apply_plane_strain_stress_exactly(fill_cache):
    # an affine field has a constant stress the derivative weights
    # reproduce exactly, so traction rows must hit their target values
    nodes = fill_cache("disk", 0.15, 2.0)
    E, nu = 1.0, 0.33
    pos = nodes.positions
    N = len(nodes)
    dirichlet, neumann = split_boundary_halves(nodes)
    bc_kind = np.zeros(N, dtype=int)
    bc_kind[dirichlet] = DISPLACEMENT
    bc_kind[neumann] = TRACTION
    M = np.array([[0.3, -1.1], [0.7, 0.2]])
    u = pos @ M.T + np.array([0.5, -0.25])
    strain = 0.5 * (M + M.T)
    cpl = 1 / (1 - 2 * nu)
    c = E / (1 + nu)
    sigma = c * (cpl * np.trace(strain) * np.eye(2) + strain)
    bc_values = np.zeros_like(pos)
    bc_values[dirichlet] = u[dirichlet]
    bc_values[neumann] = nodes.normals[neumann] @ sigma.T
    A, b = assemble_navier_cauchy(nodes, 2, E, nu, bc_kind, bc_values)
    ub = u.T.ravel()                             # component-blocked unknowns
    resid = np.abs(A @ ub - b)
    scale = np.abs(A).dot(np.abs(ub)) + np.abs(b)
    rows = np.concatenate([np.nonzero(neumann)[0], N + np.nonzero(neumann)[0]])
    assert np.max(resid[rows] / scale[rows]) <= 1e-8


def test_navier_assembly_validates_inputs(fill_cache):
    nodes = fill_cache("disk", 0.2, 2.0)
    n = len(nodes)
    bnd = nodes.kinds == BOUNDARY
    kind = np.where(bnd, DISPLACEMENT, 0)
    vals = np.zeros((n, 2))
    with pytest.raises(ConfigError):
        assemble_navier_cauchy(nodes, 2, -1.0, 0.3, kind, vals)
    with pytest.raises(ConfigError):
        assemble_navier_cauchy(nodes, 2, 1.0, 0.5, kind, vals)
    with pytest.raises(ConfigError):
        assemble_navier_cauchy(nodes, 2, 1.0, 0.3, kind[:-1], vals)
    with pytest.raises(ConfigError):
        assemble_navier_cauchy(nodes, 2, 1.0, 0.3, kind, vals[:, :1])
    flipped = np.where(bnd, 0, DISPLACEMENT)
    with pytest.raises(ConfigError):
        assemble_navier_cauchy(nodes, 2, 1.0, 0.3, flipped, vals)
