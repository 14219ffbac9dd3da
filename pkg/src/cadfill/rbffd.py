"""RBF-FD weights from polyharmonic splines with monomial augmentation.

Weights approximate a linear operator L at a stencil center:
L u(x_i) ~ sum_j w_j u(x_j) over the n nearest nodes. The local system is
shifted to the center and scaled by the stencil radius before solving, and
the resulting weights are scaled back.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations_with_replacement
from typing import Sequence, Union

import numpy as np
import scipy.linalg as sla

from .errors import ConfigError, NumericalError
from .index import DynamicPointIndex
from .nodes import NodeSet

__all__ = [
    "stencil_size",
    "phs_exponent",
    "monomial_exponents",
    "build_stencils",
    "compute_weights",
    "compute_all_weights",
    "apply_operator",
    "Laplacian",
    "Partial",
    "SecondPartial",
    "Directional",
    "Identity",
]


def stencil_size(dim: int, m: int) -> int:
    """Stencil size for augmentation order m: 4 * C(m + dim, dim)."""
    if dim < 1 or m < 0:
        raise ConfigError(f"invalid dimension {dim} or order {m}")
    return 4 * math.comb(m + dim, dim)


def phs_exponent(m: int) -> int:
    """Default odd polyharmonic exponent paired with augmentation order m."""
    if m <= 3:
        return 3
    if m <= 5:
        return 5
    return 7


def monomial_exponents(dim: int, m: int) -> np.ndarray:
    """Exponent rows of all monomials with total degree <= m, graded order."""
    rows = [(0,) * dim]
    for deg in range(1, m + 1):
        for combo in combinations_with_replacement(range(dim), deg):
            e = [0] * dim
            for axis in combo:
                e[axis] += 1
            rows.append(tuple(e))
    return np.asarray(rows, dtype=int)


def _r_pow(r: np.ndarray, p: int) -> np.ndarray:
    """r**p with the r=0 singularity cut off (limits are 0 for our uses)."""
    if p >= 0:
        return r ** p
    with np.errstate(divide="ignore"):
        out = np.where(r > 0, r, 1.0) ** p
    return np.where(r > 0, out, 0.0)


class _Operator:
    """Linear operator with a known action on PHS kernels and monomials."""

    scale_power: int = 0

    def phs_rhs(self, offsets: np.ndarray, r: np.ndarray, k: int) -> np.ndarray:
        """L applied to phi(||. - y_j||), evaluated at the center.

        offsets[..., j, :] is center minus node j in local coordinates,
        r the matching norms.
        """
        raise NotImplementedError

    def poly_rhs(self, exponents: np.ndarray) -> np.ndarray:
        """L applied to each monomial, evaluated at the center (origin)."""
        raise NotImplementedError


@dataclass(frozen=True)
class Laplacian(_Operator):
    scale_power: int = field(default=2, init=False)

    def phs_rhs(self, offsets, r, k):
        d = offsets.shape[-1]
        return k * (k + d - 2) * _r_pow(r, k - 2)

    def poly_rhs(self, exponents):
        return np.array([2.0 * np.sum((e == 2) & (e.sum() == 2))
                         for e in exponents])


@dataclass(frozen=True)
class Partial(_Operator):
    axis: int
    scale_power: int = field(default=1, init=False)

    def phs_rhs(self, offsets, r, k):
        return k * _r_pow(r, k - 2) * offsets[..., self.axis]

    def poly_rhs(self, exponents):
        want = np.zeros(exponents.shape[1], dtype=int)
        want[self.axis] = 1
        return (exponents == want).all(axis=1).astype(float)


@dataclass(frozen=True)
class SecondPartial(_Operator):
    axis_a: int
    axis_b: int
    scale_power: int = field(default=2, init=False)

    def phs_rhs(self, offsets, r, k):
        za = offsets[..., self.axis_a]
        zb = offsets[..., self.axis_b]
        out = k * (k - 2) * _r_pow(r, k - 4) * za * zb
        if self.axis_a == self.axis_b:
            out = out + k * _r_pow(r, k - 2)
        return out

    def poly_rhs(self, exponents):
        want = np.zeros(exponents.shape[1], dtype=int)
        want[self.axis_a] += 1
        want[self.axis_b] += 1
        hit = (exponents == want).all(axis=1)
        factor = 2.0 if self.axis_a == self.axis_b else 1.0
        return factor * hit.astype(float)


@dataclass(frozen=True)
class Directional(_Operator):
    """First derivative along a fixed unit direction (e.g. a normal)."""

    direction: tuple
    scale_power: int = field(default=1, init=False)

    def phs_rhs(self, offsets, r, k):
        vec = np.asarray(self.direction, dtype=float)
        return k * _r_pow(r, k - 2) * (offsets @ vec)

    def poly_rhs(self, exponents):
        vec = np.asarray(self.direction, dtype=float)
        out = np.zeros(len(exponents))
        for a in range(exponents.shape[1]):
            want = np.zeros(exponents.shape[1], dtype=int)
            want[a] = 1
            out += vec[a] * (exponents == want).all(axis=1)
        return out


@dataclass(frozen=True)
class Identity(_Operator):
    scale_power: int = field(default=0, init=False)

    def phs_rhs(self, offsets, r, k):
        return _r_pow(r, k)

    def poly_rhs(self, exponents):
        return (exponents.sum(axis=1) == 0).astype(float)


def _positions(nodes) -> np.ndarray:
    if isinstance(nodes, NodeSet):
        return nodes.positions
    return np.atleast_2d(np.asarray(nodes, dtype=float))


def build_stencils(nodes, m: int = None, *, n: int = None) -> np.ndarray:
    """Indices of the n nearest nodes per node, the node itself first.

    n defaults to the augmentation-order rule stencil_size(dim, m).
    Rows are sorted ascending by (distance, node index).
    """
    positions = _positions(nodes)
    count, dim = positions.shape
    if n is None:
        if m is None:
            raise ConfigError("need either an augmentation order m or a size n")
        n = stencil_size(dim, m)
    if count < n:
        raise ConfigError(f"stencil size {n} exceeds node count {count}")
    index = DynamicPointIndex(dim)
    index.insert_many(positions)
    idx, _ = index.k_nearest_batch(positions, n)
    return idx


def _saddle_parts(local: np.ndarray, expo: np.ndarray, k: int):
    """Phi and P blocks for stencil coordinates local (..., n, dim)."""
    diff = local[..., :, None, :] - local[..., None, :, :]
    r = np.linalg.norm(diff, axis=-1)
    phi = r ** k
    # 0**0 == 1 under numpy float rules, as the monomial basis needs
    powers = local[..., :, None, :] ** expo[..., None, :, :]
    P = powers.prod(axis=-1)
    return phi, P


def _rhs_columns(local: np.ndarray, expo: np.ndarray, k: int,
                 ops: Sequence[_Operator]) -> np.ndarray:
    """Stacked saddle right-hand sides, one column per operator."""
    offsets = -local                      # center (origin) minus node
    r = np.linalg.norm(local, axis=-1)
    n = local.shape[-2]
    q = len(expo)
    shape = local.shape[:-2]
    out = np.empty(shape + (n + q, len(ops)))
    for c, op in enumerate(ops):
        out[..., :n, c] = op.phs_rhs(offsets, r, k)
        out[..., n:, c] = op.poly_rhs(expo)
    return out


def _normalize_ops(ops) -> tuple[list, bool]:
    if isinstance(ops, _Operator):
        return [ops], True
    ops = list(ops)
    if not ops:
        raise ConfigError("no operators given")
    return ops, False


def compute_weights(nodes, stencil, ops, m: int, *, k: int = None,
                    eps_cond: float = 1e-15):
    """Weights for one stencil; rows ordered like ops.

    The stencil's first entry is its center. Raises when the local system
    is ill conditioned (reciprocal condition below eps_cond).
    """
    positions = _positions(nodes)
    ops, single = _normalize_ops(ops)
    if k is None:
        k = phs_exponent(m)
    if k < 1 or k % 2 == 0:
        raise ConfigError(f"polyharmonic exponent must be odd, got {k}")
    stencil = np.asarray(stencil, dtype=int)
    pts = positions[stencil]
    center = pts[0]
    rho = np.linalg.norm(pts - center, axis=1).max()
    if not (rho > 0):
        raise NumericalError(f"degenerate stencil at node {int(stencil[0])}")
    local = (pts - center) / rho
    expo = monomial_exponents(positions.shape[1], m)
    n, q = len(stencil), len(expo)
    phi, P = _saddle_parts(local, expo, k)
    A = np.zeros((n + q, n + q))
    A[:n, :n] = phi
    A[:n, n:] = P
    A[n:, :n] = P.T
    b = _rhs_columns(local, expo, k, ops)
    anorm = np.abs(A).sum(axis=0).max()
    lu, piv = sla.lu_factor(A)
    gecon = sla.get_lapack_funcs("gecon", (A,))
    rcond, _ = gecon(lu, anorm)
    if not np.isfinite(rcond) or rcond < eps_cond:
        raise NumericalError(
            f"ill-conditioned weight system for node {int(stencil[0])} "
            f"(rcond {rcond:.2e})")
    sol = sla.lu_solve((lu, piv), b)
    w = sol[:n]
    scales = np.array([rho ** op.scale_power for op in ops])
    out = (w / scales).T
    return out[0] if single else out


def compute_all_weights(nodes, stencils, ops, m: int, *, k: int = None,
                        eps_cond: float = 1e-15, residual_tol: float = 1e-8):
    """Weights for every stencil, batched; shape (n_ops, N, n).

    Stencils are solved in chunks with a vectorized LU. Chunks whose
    solution residual looks suspect fall back to the single-stencil path,
    which raises a named conditioning error.
    """
    positions = _positions(nodes)
    ops, single = _normalize_ops(ops)
    if k is None:
        k = phs_exponent(m)
    if k < 1 or k % 2 == 0:
        raise ConfigError(f"polyharmonic exponent must be odd, got {k}")
    stencils = np.asarray(stencils, dtype=int)
    N, n = stencils.shape
    dim = positions.shape[1]
    expo = monomial_exponents(dim, m)
    q = len(expo)
    s = n + q
    out = np.empty((len(ops), N, n))
    scales = np.array([float(op.scale_power) for op in ops])
    chunk = max(1, int(1.2e8 / (8 * s * s * (dim + 1))))
    for lo in range(0, N, chunk):
        hi = min(N, lo + chunk)
        pts = positions[stencils[lo:hi]]               # (B, n, dim)
        centers = pts[:, :1]
        rho = np.linalg.norm(pts - centers, axis=2).max(axis=1)
        bad = ~(rho > 0)
        if np.any(bad):
            j = int(stencils[lo:hi][bad][0, 0])
            raise NumericalError(f"degenerate stencil at node {j}")
        local = (pts - centers) / rho[:, None, None]
        phi, P = _saddle_parts(local, expo, k)
        A = np.zeros((hi - lo, s, s))
        A[:, :n, :n] = phi
        A[:, :n, n:] = P
        A[:, n:, :n] = np.swapaxes(P, 1, 2)
        b = _rhs_columns(local, expo, k, ops)
        try:
            sol = np.linalg.solve(A, b)
        except np.linalg.LinAlgError:
            sol = None
        if sol is not None:
            resid = np.abs(np.einsum("bij,bjc->bic", A, sol) - b).max(axis=(1, 2))
            ref = np.abs(b).max(axis=(1, 2)) + 1.0
            suspect = ~np.isfinite(resid) | (resid > residual_tol * ref)
        if sol is None or np.any(suspect):
            for r in range(lo, hi):
                w = compute_weights(positions, stencils[r], ops, m, k=k,
                                    eps_cond=eps_cond)
                out[:, r] = w
            continue
        w = sol[:, :n, :]                              # (B, n, n_ops)
        w = w / (rho[:, None, None] ** scales[None, None, :])
        out[:, lo:hi] = np.moveaxis(w, 2, 0)
    return out[0] if single else out


def apply_operator(weights: np.ndarray, stencils: np.ndarray,
                   values: np.ndarray) -> np.ndarray:
    """Per-node weighted sums: out[i] = sum_j weights[i,j] values[stencil[i,j]]."""
    weights = np.asarray(weights, dtype=float)
    stencils = np.asarray(stencils, dtype=int)
    values = np.asarray(values, dtype=float)
    return np.einsum("ij,ij->i", weights, values[stencils])
