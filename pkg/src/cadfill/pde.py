"""PDE validation solvers on scattered nodes: Poisson, heat, elasticity.

Collocation with RBF-FD weights row by row: interior rows discretize the
differential operator, boundary rows the boundary condition. Systems are
sparse with row sparsity bounded by the stencil size.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConfigError, NumericalError
from .index import DynamicPointIndex
from .nodes import NodeSet
from . import rbffd

__all__ = [
    "ErrorNorms",
    "error_norms",
    "poisson_reference",
    "navier_reference",
    "solve_sparse",
    "split_boundary_halves",
    "solve_poisson",
    "PoissonResult",
    "solve_heat_implicit",
    "HeatResult",
    "assemble_navier_cauchy",
    "solve_navier_cauchy",
    "NavierResult",
    "DISPLACEMENT",
    "TRACTION",
]

DISPLACEMENT = 1
TRACTION = 2


@dataclass(frozen=True)
class ErrorNorms:
    e1: float
    e2: float
    einf: float

    def to_dict(self) -> dict:
        return {"e1": self.e1, "e2": self.e2, "einf": self.einf}


def error_norms(u_hat: np.ndarray, u_exact: np.ndarray) -> ErrorNorms:
    """Relative discrete norms of the error against a reference field."""
    u_hat = np.asarray(u_hat, dtype=float).ravel()
    u_exact = np.asarray(u_exact, dtype=float).ravel()
    if u_hat.shape != u_exact.shape:
        raise ConfigError("solution and reference must have matching shapes")
    diff = u_hat - u_exact
    n = len(u_exact)
    ref1 = np.abs(u_exact).sum() / n
    ref2 = np.sqrt((u_exact ** 2).sum() / n)
    refi = np.abs(u_exact).max()
    if not (ref1 > 0 and ref2 > 0 and refi > 0):
        raise ConfigError("reference field is identically zero")
    return ErrorNorms(
        e1=float(np.abs(diff).sum() / n / ref1),
        e2=float(np.sqrt((diff ** 2).sum() / n) / ref2),
        einf=float(np.abs(diff).max() / refi),
    )


@dataclass(frozen=True)
class ScalarReference:
    """Closed-form scalar field with gradient and Laplacian."""

    value: Callable[[np.ndarray], np.ndarray]
    gradient: Callable[[np.ndarray], np.ndarray]
    laplacian: Callable[[np.ndarray], np.ndarray]


def poisson_reference(dim: int) -> ScalarReference:
    """Smooth test solutions used by the convergence studies."""
    if dim == 2:
        a, b = np.pi / 100.0, 2.0 * np.pi / 100.0

        def value(p):
            return np.sin(a * p[:, 0]) * np.cos(b * p[:, 1])

        def gradient(p):
            return np.stack([
                a * np.cos(a * p[:, 0]) * np.cos(b * p[:, 1]),
                -b * np.sin(a * p[:, 0]) * np.sin(b * p[:, 1]),
            ], axis=1)

        def laplacian(p):
            return -(a * a + b * b) * value(p)

        return ScalarReference(value, gradient, laplacian)
    if dim == 3:
        a, b, c = np.pi, 2.0 * np.pi, 0.5 * np.pi

        def value(p):
            return (np.sin(a * p[:, 0]) * np.cos(b * p[:, 1])
                    * np.sin(c * p[:, 2]))

        def gradient(p):
            sx, cx = np.sin(a * p[:, 0]), np.cos(a * p[:, 0])
            sy, cy = np.sin(b * p[:, 1]), np.cos(b * p[:, 1])
            sz, cz = np.sin(c * p[:, 2]), np.cos(c * p[:, 2])
            return np.stack([a * cx * cy * sz,
                             -b * sx * sy * sz,
                             c * sx * cy * cz], axis=1)

        def laplacian(p):
            return -(a * a + b * b + c * c) * value(p)

        return ScalarReference(value, gradient, laplacian)
    raise ConfigError(f"no reference solution for dimension {dim}")


def solve_sparse(A: sp.spmatrix, b: np.ndarray, *, tol: float = 1e-10,
                 maxiter: int = 3000, dense_limit: int = 6000,
                 x0: Optional[np.ndarray] = None) -> tuple[np.ndarray, float]:
    """Solve A x = b to a verified relative residual.

    Primary path is BiCGSTAB with an incomplete-LU preconditioner on the
    row-equilibrated system; falls back to a direct sparse factorization,
    then to dense for small systems. Returns (x, relative residual).
    """
    A = A.tocsr()
    b = np.asarray(b, dtype=float)
    bnorm = np.linalg.norm(b)
    if bnorm == 0:
        return np.zeros_like(b), 0.0

    def true_residual(x):
        return float(np.linalg.norm(A @ x - b) / bnorm)

    row_max = np.maximum.reduceat(np.abs(A.data), A.indptr[:-1]) \
        if A.nnz and np.all(np.diff(A.indptr) > 0) else None
    if row_max is not None and np.all(row_max > 0):
        D = sp.diags(1.0 / row_max)
        As, bs = (D @ A).tocsc(), D @ b
    else:
        As, bs = A.tocsc(), b
    try:
        ilu = spla.spilu(As, drop_tol=1e-5, fill_factor=12)
        M = spla.LinearOperator(As.shape, ilu.solve)
        x, _ = spla.bicgstab(As, bs, rtol=tol * 1e-2, atol=0.0,
                             maxiter=maxiter, M=M, x0=x0)
        if np.all(np.isfinite(x)) and true_residual(x) <= tol:
            return x, true_residual(x)
    except (RuntimeError, MemoryError):
        pass
    try:
        x = spla.splu(As).solve(bs)
        if np.all(np.isfinite(x)) and true_residual(x) <= tol:
            return x, true_residual(x)
    except (RuntimeError, MemoryError):
        pass
    if A.shape[0] <= dense_limit:
        x = np.linalg.solve(A.toarray(), b)
        r = true_residual(x)
        if r <= tol:
            return x, r
        raise NumericalError(f"linear solve stalled at residual {r:.3e}")
    raise NumericalError("linear solve failed to reach the residual target")


def _require_boundary(nodes: NodeSet) -> np.ndarray:
    mask = nodes.boundary_mask
    if not np.any(mask):
        raise ConfigError("node set has no boundary nodes")
    normals = nodes.normals[mask]
    if np.any(~np.isfinite(normals)):
        raise ConfigError("boundary nodes must carry normals")
    return mask


def split_boundary_halves(nodes: NodeSet) -> tuple[np.ndarray, np.ndarray]:
    """Boundary split into two halves by the median of the x coordinate.

    Returns boolean masks over all nodes (dirichlet_half, neumann_half).
    """
    mask = _require_boundary(nodes)
    x = nodes.positions[:, 0]
    med = float(np.median(x[mask]))
    dirichlet = mask & (x < med)
    neumann = mask & ~(x < med)
    if not np.any(dirichlet) or not np.any(neumann):
        raise ConfigError("degenerate boundary split; all nodes on one side")
    return dirichlet, neumann


@dataclass(frozen=True)
class PoissonResult:
    solution: np.ndarray
    norms: ErrorNorms
    residual: float
    dirichlet_count: int
    neumann_count: int


def solve_poisson(nodes: NodeSet, m: int,
                  reference: Optional[ScalarReference] = None) -> PoissonResult:
    """Collocation solve of lap(u) = f with mixed boundary conditions.

    One half of the boundary gets Dirichlet values, the other half Neumann
    normal derivatives, both read from the reference solution.
    """
    if reference is None:
        reference = poisson_reference(nodes.dim)
    N = len(nodes)
    pos = nodes.positions
    dirichlet, neumann = split_boundary_halves(nodes)
    interior = ~(dirichlet | neumann)

    stencils = rbffd.build_stencils(nodes, m)
    n = stencils.shape[1]
    ops = [rbffd.Laplacian()] + [rbffd.Partial(a) for a in range(nodes.dim)]
    W = rbffd.compute_all_weights(nodes, stencils, ops, m)

    rows = np.empty((N, n))
    rows[interior] = W[0][interior]
    nrm = nodes.normals
    comb = np.zeros((N, n))
    for a in range(nodes.dim):
        comb[neumann] += nrm[neumann, a:a + 1] * W[1 + a][neumann]
    rows[neumann] = comb[neumann]
    # Dirichlet rows are plain identities
    rows[dirichlet] = 0.0
    cols = stencils.copy()
    rows[dirichlet, 0] = 1.0
    cols[dirichlet, 0] = np.nonzero(dirichlet)[0]

    b = np.empty(N)
    b[interior] = reference.laplacian(pos[interior])
    b[dirichlet] = reference.value(pos[dirichlet])
    grad = reference.gradient(pos[neumann])
    b[neumann] = np.einsum("ij,ij->i", grad, nrm[neumann])

    A = sp.csr_matrix(
        (rows.ravel(), (np.repeat(np.arange(N), n), cols.ravel())),
        shape=(N, N))
    x, resid = solve_sparse(A, b)
    norms = error_norms(x, reference.value(pos))
    return PoissonResult(solution=x, norms=norms, residual=resid,
                         dirichlet_count=int(dirichlet.sum()),
                         neumann_count=int(neumann.sum()))


@dataclass(frozen=True)
class HeatResult:
    temperature: np.ndarray
    history: np.ndarray
    probe_index: int
    steps: int
    converged: bool
    final_delta: float


def solve_heat_implicit(nodes: NodeSet, m: int,
                        source: Callable[[np.ndarray], np.ndarray],
                        lam_th: float, dt: float, *,
                        max_steps: int = 3000, tol: float = 3e-6,
                        probe_point: Optional[Sequence[float]] = None) -> HeatResult:
    """Implicit Euler for dT/dt = lam_th lap(T) + q from T = 0.

    Boundary rows enforce dT/dn + T = 0. The constant step matrix is
    factored once. Stops when max|T2 - T1| < tol or at max_steps.
    """
    if not (lam_th > 0 and dt > 0):
        raise ConfigError("conductivity and time step must be positive")
    N = len(nodes)
    pos = nodes.positions
    boundary = _require_boundary(nodes)
    interior = ~boundary

    stencils = rbffd.build_stencils(nodes, m)
    n = stencils.shape[1]
    ops = [rbffd.Laplacian()] + [rbffd.Partial(a) for a in range(nodes.dim)]
    W = rbffd.compute_all_weights(nodes, stencils, ops, m)

    rows = np.zeros((N, n))
    cols = stencils.copy()
    rows[interior] = -lam_th * W[0][interior]
    rows[interior, 0] += 1.0 / dt
    nrm = nodes.normals
    for a in range(nodes.dim):
        rows[boundary] += nrm[boundary, a:a + 1] * W[1 + a][boundary]
    rows[boundary, 0] += 1.0
    A = sp.csc_matrix(
        (rows.ravel(), (np.repeat(np.arange(N), n), cols.ravel())),
        shape=(N, N))
    try:
        factor = spla.splu(A)
    except (RuntimeError, MemoryError) as exc:
        raise NumericalError(f"time-step matrix factorization failed: {exc}")

    q = np.asarray(source(pos), dtype=float)
    rhs_const = np.where(interior, q, 0.0)
    if probe_point is not None:
        index = DynamicPointIndex(nodes.dim)
        index.insert_many(pos)
        (pi,), _ = index.k_nearest(np.asarray(probe_point, float), 1)
        probe = int(pi)
    else:
        probe = int(np.argmax(interior))

    T = np.zeros(N)
    history = []
    converged = False
    delta = np.inf
    steps = 0
    for steps in range(1, max_steps + 1):
        rhs = rhs_const + np.where(interior, T / dt, 0.0)
        T2 = factor.solve(rhs)
        if np.any(~np.isfinite(T2)):
            raise NumericalError(f"time step {steps} produced non-finite values")
        delta = float(np.abs(T2 - T).max())
        T = T2
        history.append(T[probe])
        if delta < tol:
            converged = True
            break
    return HeatResult(temperature=T, history=np.asarray(history),
                      probe_index=probe, steps=steps, converged=converged,
                      final_delta=delta)


@dataclass(frozen=True)
class VectorReference:
    """Closed-form displacement field with its body-force term."""

    value: Callable[[np.ndarray], np.ndarray]
    body_force: Callable[[np.ndarray], np.ndarray]
    stress: Callable[[np.ndarray], np.ndarray]


def navier_reference(E: float, nu: float, scale: float = 1.0) -> VectorReference:
    """2D displacement test field with closed-form force and stress."""
    a = np.pi / 2.0
    shear = E / (2.0 * (nu + 1.0))
    cpl = 1.0 / (1.0 - 2.0 * nu)

    def value(p):
        x, y = p[:, 0], p[:, 1]
        return scale * np.stack([np.sin(a * x) * np.cos(a * y),
                                 np.cos(a * x) * np.sin(a * y)], axis=1)

    def body_force(p):
        # lap(u) = -2 a^2 u and grad(div u) = -2 a^2 u for this field
        return shear * (-2.0 * a * a) * (1.0 + cpl) * value(p)

    def stress(p):
        x, y = p[:, 0], p[:, 1]
        exx = scale * a * np.cos(a * x) * np.cos(a * y)
        eyy = exx
        exy = scale * 0.5 * (-a * np.sin(a * x) * np.sin(a * y)
                             - a * np.sin(a * x) * np.sin(a * y))
        tr = exx + eyy
        c = E / (nu + 1.0)
        sxx = c * (cpl * tr + exx)
        syy = c * (cpl * tr + eyy)
        sxy = c * exy
        return np.stack([np.stack([sxx, sxy], axis=1),
                         np.stack([sxy, syy], axis=1)], axis=1)

    return VectorReference(value, body_force, stress)


def _second_partial_pairs(dim: int) -> list[tuple[int, int]]:
    return [(i, j) for i in range(dim) for j in range(i, dim)]


def assemble_navier_cauchy(nodes: NodeSet, m: int, E: float, nu: float,
                           bc_kind: np.ndarray, bc_values: np.ndarray,
                           body_force: Optional[np.ndarray] = None):
    """Navier-Cauchy collocation system with displacement/traction rows.

    Unknowns are blocked per component: component a of node i sits at
    a*N + i. bc_kind is 0 for interior, DISPLACEMENT or TRACTION for
    boundary nodes; bc_values holds the prescribed vector per node.
    """
    if not (E > 0 and 0 < nu < 0.5):
        raise ConfigError("need E > 0 and 0 < nu < 0.5")
    N, d = nodes.positions.shape
    bc_kind = np.asarray(bc_kind)
    bc_values = np.asarray(bc_values, dtype=float)
    if bc_kind.shape != (N,) or bc_values.shape != (N, d):
        raise ConfigError("bc arrays must cover every node")
    boundary = nodes.boundary_mask
    if np.any((bc_kind != 0) != boundary):
        raise ConfigError("bc_kind must mark exactly the boundary nodes")

    shear = E / (2.0 * (nu + 1.0))
    cpl = 1.0 / (1.0 - 2.0 * nu)
    cstress = E / (nu + 1.0)

    stencils = rbffd.build_stencils(nodes, m)
    n = stencils.shape[1]
    pairs = _second_partial_pairs(d)
    ops = ([rbffd.Laplacian()] + [rbffd.Partial(a) for a in range(d)]
           + [rbffd.SecondPartial(i, j) for i, j in pairs])
    W = rbffd.compute_all_weights(nodes, stencils, ops, m)
    Wlap = W[0]
    Wp = {a: W[1 + a] for a in range(d)}
    Wsp = {pair: W[1 + d + k] for k, pair in enumerate(pairs)}

    def sp_w(i, j):
        return Wsp[(i, j)] if (i, j) in Wsp else Wsp[(j, i)]

    interior = ~boundary
    disp = bc_kind == DISPLACEMENT
    trac = bc_kind == TRACTION
    nrm = nodes.normals

    rows_i, cols_i, data = [], [], []
    b = np.zeros(d * N)
    idx = np.arange(N)

    def add_block(row_nodes, comp_row, comp_col, weights):
        take = np.nonzero(row_nodes)[0]
        if len(take) == 0:
            return
        rows_i.append(np.repeat(comp_row * N + take, n))
        cols_i.append((comp_col * N + stencils[take]).ravel())
        data.append(weights[take].ravel())

    for a in range(d):
        # interior: shear * (lap u_a + cpl * sum_b d_a d_b u_b)
        add_block(interior, a, a, shear * Wlap)
        for bcomp in range(d):
            add_block(interior, a, bcomp, shear * cpl * sp_w(a, bcomp))
        if body_force is not None:
            b[a * N + idx[interior]] = np.asarray(body_force, float)[interior, a]

        # displacement rows: identity
        take = np.nonzero(disp)[0]
        if len(take):
            rows_i.append(a * N + take)
            cols_i.append(a * N + take)
            data.append(np.ones(len(take)))
            b[a * N + take] = bc_values[take, a]

        # traction right-hand side; the rows follow below
        take = np.nonzero(trac)[0]
        if len(take):
            b[a * N + take] = bc_values[take, a]

    # traction rows: (sigma . n)_a via Hooke's law on the strain of u
    take = np.nonzero(trac)[0]
    if len(take):
        for a in range(d):
            na = nrm[take, a]
            for c in range(d):
                nc = nrm[take, c]
                # volumetric part: cpl * n_a * d_c u_c
                blk = cstress * cpl * na[:, None] * Wp[c][take]
                # strain part 1: 0.5 * n_c * d_a u_c
                blk = blk + cstress * 0.5 * nc[:, None] * Wp[a][take]
                rows_i.append(np.repeat(a * N + take, n))
                cols_i.append((c * N + stencils[take]).ravel())
                data.append(blk.ravel())
            # strain part 2: 0.5 * sum_c n_c d_c u_a
            blk = np.zeros((len(take), n))
            for c in range(d):
                blk += cstress * 0.5 * nrm[take, c][:, None] * Wp[c][take]
            rows_i.append(np.repeat(a * N + take, n))
            cols_i.append((a * N + stencils[take]).ravel())
            data.append(blk.ravel())

    A = sp.csr_matrix(
        (np.concatenate(data),
         (np.concatenate(rows_i), np.concatenate(cols_i))),
        shape=(d * N, d * N))
    return A, b


@dataclass(frozen=True)
class NavierResult:
    displacement: np.ndarray
    norms: Optional[ErrorNorms]
    residual: float


def solve_navier_cauchy(nodes: NodeSet, m: int, E: float, nu: float,
                        bc_kind: np.ndarray, bc_values: np.ndarray,
                        body_force: Optional[np.ndarray] = None,
                        reference: Optional[VectorReference] = None) -> NavierResult:
    A, b = assemble_navier_cauchy(nodes, m, E, nu, bc_kind, bc_values,
                                  body_force)
    x, resid = solve_sparse(A, b)
    N, d = nodes.positions.shape
    u = x.reshape(d, N).T
    norms = None
    if reference is not None:
        norms = error_norms(u.T.ravel(), reference.value(nodes.positions).T.ravel())
    return NavierResult(displacement=u, norms=norms, residual=resid)
