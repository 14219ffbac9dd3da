"""Boundary sampling of multi-patch models and volume filling behind them.

The boundary pipeline runs in three phases. Corner points shared by several
patches are emitted once per geometric corner, subject to spacing-h thinning
so that models with patches smaller than h degrade the way a coarse fill
should (nodes survive on a subset of the corners). Each patch edge curve is
then filled once per incident patch: the copy run by the lexicographically
lower (patch, edge) emits nodes, the other copy is kept only as parametric
context (its nodes seed and obstruct the patch interior fill, giving every
patch seed coordinates in its own rectangle). Finally each patch interior is
filled in its parametric rectangle, obstructed by everything emitted so far
plus the context copies.

Volume filling classifies points with the refined-boundary half-space test:
a point is inside when the nearest refined boundary node's outward normal
faces away from it.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import ConfigError, SingularityError
from .fill import ensure_rng, fill_volume
from .index import DynamicPointIndex
from .models import CadModel
from .nodes import BOUNDARY, NodeSet, NodeSetBuilder
from .surface_fill import (DEFAULT_EPS_PROX, CurveMapping, SurfaceMapping,
                           fill_parametric)

_DEGENERATE_EDGE = 1e-12


def as_spacing(h):
    """Turn a constant or callable into a spacing callable."""
    if callable(h):
        return h
    val = float(h)
    if val <= 0:
        raise ConfigError(f"spacing must be positive, got {val}")
    return lambda p: val


def _curve_normal(curve, t: float) -> np.ndarray:
    d = np.asarray(curve.derivative(t), dtype=float)
    d = d / np.linalg.norm(d)
    return curve.orientation * np.array([d[1], -d[0]])


def _surface_normal(surface, u: float, v: float) -> np.ndarray:
    """Frame normal with a parametric retreat for singular corners."""
    (au, bu), (av, bv) = surface.domain
    du, dv = bu - au, bv - av
    for shift in (0.0, 1e-6, 1e-4, 1e-2):
        uu = min(max(u, au + shift * du), bu - shift * du)
        vv = min(max(v, av + shift * dv), bv - shift * dv)
        try:
            return surface.frame(uu, vv).normal
        except SingularityError:
            continue
    raise SingularityError(f"no usable frame near (u, v)=({u}, {v})")


# ---------------------------------------------------------------------------
# corner bookkeeping
# ---------------------------------------------------------------------------
def _patch_corners(model: CadModel):
    """[(patch, corner_id, lambda, position)] in deterministic order."""
    out = []
    for i, p in enumerate(model.patches):
        if model.dimension == 2:
            a, b = p.domain
            out.append((i, 0, np.array([a]), np.asarray(p.evaluate(a))))
            out.append((i, 1, np.array([b]), np.asarray(p.evaluate(b))))
        else:
            (au, bu), (av, bv) = p.domain
            for ci, (u, v) in enumerate([(au, av), (bu, av), (au, bv), (bu, bv)]):
                out.append((i, ci, np.array([u, v]),
                            np.asarray(p.evaluate(u, v))))
    return out


def _group_corners(corners, tol: float):
    """Union coincident corner points; groups sorted by their lowest member."""
    n = len(corners)
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    pos = np.asarray([c[3] for c in corners])
    tree = cKDTree(pos)
    for a, b in sorted(tree.query_pairs(tol)):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    groups: dict[int, list[int]] = {}
    for k in range(n):
        groups.setdefault(find(k), []).append(k)
    return [groups[r] for r in sorted(groups)]


# ---------------------------------------------------------------------------
# boundary sampling
# ---------------------------------------------------------------------------
def sample_model_boundary(model: CadModel, h, rng=None, *, n: int | None = None,
                          eps_prox: float = DEFAULT_EPS_PROX) -> NodeSet:
    """Nodes on the model boundary at spacing h, with outward unit normals."""
    h = as_spacing(h)
    rng = ensure_rng(rng)
    dim = model.dimension
    builder = NodeSetBuilder(dim)
    index = DynamicPointIndex(dim)

    adj: dict[tuple, tuple] = {}
    for pa, ea, pb, eb in model.adjacency:
        adj[(pa, ea)] = (pb, eb)
        adj[(pb, eb)] = (pa, ea)

    # phase 1: corners, thinned at spacing h
    corners = _patch_corners(model)
    bbox = model.bounding_box()
    tol = 1e-8 * max(1.0, float(np.max(bbox[:, 1] - bbox[:, 0])))
    for group in _group_corners(corners, tol):
        i, ci, lam, pos = corners[group[0]]
        h_val = float(h(pos))
        if index.has_point_within(pos, h_val * (1.0 - eps_prox) * (1.0 - 1e-12)):
            continue
        if dim == 2:
            normal = _curve_normal(model.patches[i], float(lam[0]))
        else:
            normal = _surface_normal(model.patches[i], lam[0], lam[1])
        builder.add(pos, BOUNDARY, h_val, normal)
        index.insert(pos)

    # phases 2 and 3, patch by patch
    for i, patch in enumerate(model.patches):
        if dim == 2:
            _fill_curve_patch(model, i, h, n, rng, builder, index, eps_prox)
        else:
            _fill_surface_patch(model, i, adj, h, n, rng, builder, index, eps_prox)

    return builder.build()


def _edge_fill(curve, h, n, rng, obstacles, eps_prox):
    """1D advancing front along one boundary curve, seeded at its endpoints.

    Returns (params, points) with the two seeds first; degenerate (zero
    length) curves yield empty output.
    """
    a, b = curve.domain
    pts = curve.evaluate(np.linspace(a, b, 7))
    length = float(np.linalg.norm(np.diff(pts, axis=0), axis=1).sum())
    if length < _DEGENERATE_EDGE:
        return np.empty((0, 1)), np.empty((0, pts.shape[1]))
    mapping = CurveMapping(curve)
    lams, mapped = fill_parametric(
        np.array([[a], [b]]), mapping.bounds, h, mapping, n=n, rng=rng,
        obstacles=obstacles, eps_prox=eps_prox)
    return lams, mapped


def _fill_curve_patch(model, i, h, n, rng, builder, index, eps_prox):
    curve = model.patches[i]
    lams, mapped = _edge_fill(curve, h, n, rng, index.points, eps_prox)
    for lam, pos in zip(lams[2:], mapped[2:]):
        builder.add(pos, BOUNDARY, float(h(pos)), _curve_normal(curve, float(lam[0])))
        index.insert(pos)


def _fill_surface_patch(model, i, adj, h, n, rng, builder, index, eps_prox):
    patch = model.patches[i]
    edges = patch.boundary_curves()
    interior_seeds: list[np.ndarray] = []
    ghost_points: list[np.ndarray] = []

    for e, be in enumerate(edges):
        partner = adj.get((i, e))
        owned = partner is None or (i, e) < partner
        obstacles = index.points if owned else None
        lams, mapped = _edge_fill(be.curve, h, n, rng, obstacles, eps_prox)
        if len(lams) == 0:
            continue
        uv = be.embed(lams[:, 0])
        interior_seeds.extend(uv)
        if owned:
            for (u, v), pos in zip(uv[2:], mapped[2:]):
                builder.add(pos, BOUNDARY, float(h(pos)),
                            _surface_normal(patch, u, v))
                index.insert(pos)
        else:
            ghost_points.extend(mapped[2:])

    # deduplicate corner seeds shared by two edges of this rectangle
    seen = set()
    seeds = []
    for uv in interior_seeds:
        key = (float(uv[0]), float(uv[1]))
        if key not in seen:
            seen.add(key)
            seeds.append(uv)
    seeds = np.asarray(seeds)

    mapping = SurfaceMapping(patch)
    obstacles = index.points
    if ghost_points:
        obstacles = np.vstack([obstacles, np.asarray(ghost_points)])
    lams, mapped = fill_parametric(seeds, mapping.bounds, h, mapping, n=n,
                                   rng=rng, obstacles=obstacles,
                                   eps_prox=eps_prox)
    n_seeds = len(seeds)
    accepted = lams[n_seeds:]
    if len(accepted) == 0:
        area = _patch_area(patch)
        h_mid = float(h(mapped[0] if len(mapped) else np.zeros(3)))
        if area > (2.0 * h_mid) ** 2:
            warnings.warn(f"patch {i}: no interior nodes accepted although "
                          f"area {area:.3g} exceeds (2h)^2; h may be too "
                          f"coarse for this patch", stacklevel=2)
    if len(accepted):
        _, _, normals = patch.frames(accepted[:, 0], accepted[:, 1])
        for (u, v), pos, nrm in zip(accepted, mapped[n_seeds:], normals):
            builder.add(pos, BOUNDARY, float(h(pos)), nrm)
            index.insert(pos)


def _patch_area(patch) -> float:
    (au, bu), (av, bv) = patch.domain
    g = 9
    u = np.linspace(au, bu, g)
    v = np.linspace(av, bv, g)
    uu, vv = np.meshgrid(u, v, indexing="ij")
    _, J = patch.jacobians(uu.ravel(), vv.ravel())
    dA = np.linalg.norm(np.cross(J[:, :, 0], J[:, :, 1]), axis=1)
    cell = (bu - au) * (bv - av) / (g - 1) ** 2
    return float(dA.mean() * (g - 1) ** 2 * cell)


# ---------------------------------------------------------------------------
# inside testing and volume fill
# ---------------------------------------------------------------------------
@dataclass
class InsideTester:
    nodes: NodeSet
    tree: cKDTree
    tau: float
    bbox: np.ndarray            # (dim, 2) lo/hi per axis

    def contains(self, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        _, idx = self.tree.query(pts)
        diff = pts - self.nodes.positions[idx]
        ok = np.einsum("ij,ij->i", self.nodes.normals[idx], diff) < 0.0
        # near needle tips the nearest normal is almost perpendicular to the
        # probe ray and the sign alone can admit arbitrarily distant points;
        # nothing outside the model box is ever inside the model
        ok &= np.all((pts >= self.bbox[:, 0]) & (pts <= self.bbox[:, 1]), axis=1)
        return ok


def build_inside_tester(model: CadModel, h, tau: float, rng=None, *,
                        n: int | None = None) -> InsideTester:
    """Refined boundary sampling at spacing h/tau for membership queries."""
    if tau < 1.0:
        raise ConfigError(f"supersampling factor tau must be >= 1, got {tau}")
    h = as_spacing(h)
    refined = sample_model_boundary(model, lambda p: h(p) / tau, rng, n=n)
    return InsideTester(refined, cKDTree(refined.positions), float(tau),
                        model.bounding_box())


def is_inside(tester: InsideTester, x) -> bool:
    return bool(tester.contains(np.asarray(x, dtype=float).reshape(1, -1))[0])


def fill_model(model: CadModel, h, tau: float, n: int | None = None,
               rng=None, *, eps_prox_boundary: float = DEFAULT_EPS_PROX,
               eps_prox_volume: float = 0.0) -> NodeSet:
    """Boundary nodes at h plus interior nodes from the advancing front."""
    if not model.closed:
        raise ConfigError(f"model {model.name!r} is not closed; cannot fill")
    h = as_spacing(h)
    rng = ensure_rng(rng)
    boundary = sample_model_boundary(model, h, rng, n=n,
                                     eps_prox=eps_prox_boundary)
    tester = build_inside_tester(model, h, tau, rng, n=n)
    return fill_volume(boundary, h, tester.contains, n=n, rng=rng,
                       eps_prox=eps_prox_volume)


# ---------------------------------------------------------------------------
# supersampling study
# ---------------------------------------------------------------------------
def count_escaped(nodes: NodeSet, oracle) -> int:
    """Interior nodes the analytic membership oracle places outside."""
    interior = nodes.interior_subset()
    if len(interior) == 0:
        return 0
    return int(np.sum(~oracle(interior.positions)))


def tau_min_study(models_by_s: dict, h_values, *, tau_lo: float = 1.0,
                  tau_hi: float = 8.0, resolution: float = 0.25,
                  seed: int = 0, n: int | None = None) -> list:
    """Smallest tau (bisection) that leaves zero escaped interior nodes.

    models_by_s maps the star parameter s to a CadModel carrying an analytic
    inside_oracle. Every fill restarts from the same seed so the table is
    deterministic and independent of evaluation order.
    """
    rows = []
    for s, model in models_by_s.items():
        if model.inside_oracle is None:
            raise ConfigError(f"model for s={s} has no analytic oracle")
        for h in h_values:
            def escaped(tau: float) -> int:
                nodes = fill_model(model, h, tau, n=n,
                                   rng=np.random.default_rng(seed))
                return count_escaped(nodes, model.inside_oracle)

            if escaped(tau_lo) == 0:
                tau_min = tau_lo
            elif escaped(tau_hi) > 0:
                tau_min = float("nan")       # not attainable in range
            else:
                lo, hi = tau_lo, tau_hi
                while hi - lo > resolution:
                    mid = 0.5 * (lo + hi)
                    if escaped(mid) == 0:
                        hi = mid
                    else:
                        lo = mid
                tau_min = hi
            rows.append({"s": float(s), "h": float(h), "tau_min": tau_min})
    return rows
