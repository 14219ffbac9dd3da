"""Advancing-front filler for parametrized curves and surfaces.

The front advances in the parametric rectangle; step lengths are divided by
the Jacobian-transformed direction norm so that mapped steps approximate the
target spacing, and proximity rejection happens on the mapped points in
Euclidean space. Spacing guarantees are first-order in h times curvature.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericalError, SingularityError
from .fill import ensure_rng, unit_directions
from .index import DynamicPointIndex
from .nurbs import NurbsCurve, NurbsSurface

# mapped chords fall short of the first-order step by O((h*curvature)^2), so
# the rejection radius allows for the measured shortfall of each candidate's
# own chord, or fronts stall wherever spacing is coarse relative to curvature;
# kappa_tol caps that allowance so the floor (1-eps_prox)*(1-kappa_tol) stays
# above 0.85
DEFAULT_EPS_PROX = 0.01
DEFAULT_KAPPA_TOL = 0.14
DEFAULT_CANDIDATES = {1: 2, 2: 6}


class CurveMapping:
    """Adapter giving a NURBS curve the filler's mapping interface."""

    lam_dim = 1

    def __init__(self, curve: NurbsCurve):
        self.curve = curve
        a, b = curve.domain
        self.bounds = np.array([[a, b]])

    def point(self, lam):
        return self.curve.evaluate(float(np.asarray(lam).reshape(-1)[0]))

    def points(self, lams):
        return self.curve.evaluate(np.asarray(lams, dtype=float).reshape(-1))

    def jacobian(self, lam):
        d = self.curve.derivative(float(np.asarray(lam).reshape(-1)[0]))
        return np.asarray(d, dtype=float).reshape(-1, 1)


class SurfaceMapping:
    """Adapter giving a NURBS surface the filler's mapping interface."""

    lam_dim = 2

    def __init__(self, surface: NurbsSurface):
        self.surface = surface
        (au, bu), (av, bv) = surface.domain
        self.bounds = np.array([[au, bu], [av, bv]])

    def point(self, lam):
        lam = np.asarray(lam, dtype=float).reshape(2)
        return self.surface.evaluate(lam[0], lam[1])

    def points(self, lams):
        lams = np.asarray(lams, dtype=float).reshape(-1, 2)
        return self.surface.evaluate(lams[:, 0], lams[:, 1])

    def jacobian(self, lam):
        lam = np.asarray(lam, dtype=float).reshape(2)
        _, J = self.surface.jacobians(lam[0], lam[1])
        return J[0]


def _steps(lam, mapping, n: int, rng):
    """Candidate directions and the per-direction transformed norms."""
    dirs = unit_directions(mapping.lam_dim, n, rng)        # (m, k)
    J = mapping.jacobian(lam)                              # (d, k)
    norms = np.linalg.norm(dirs @ J.T, axis=1)             # ||J s||
    return dirs, norms


def parametric_candidates(lam, h, mapping, n: int | None = None, rng=None, *,
                          eps_j: float = 1e-12) -> np.ndarray:
    """Candidates lam + alpha*s with alpha = h(r(lam)) / ||J s||.

    Raises SingularityError when any generated direction is annihilated by
    the Jacobian (||J s|| <= eps_j).
    """
    rng = ensure_rng(rng)
    lam = np.asarray(lam, dtype=float).reshape(-1)
    n_eff = DEFAULT_CANDIDATES[mapping.lam_dim] if n is None else int(n)
    h_val = float(h(mapping.point(lam)))
    if not np.isfinite(h_val) or h_val <= 0:
        raise NumericalError(f"spacing function returned {h_val}")
    dirs, norms = _steps(lam, mapping, n_eff, rng)
    if np.any(norms <= eps_j):
        raise SingularityError(f"Jacobian annihilates a step direction at {lam}")
    return lam[None, :] + (h_val / norms)[:, None] * dirs


def fill_parametric(seeds, bounds, h, mapping, n: int | None = None, rng=None, *,
                    obstacles=None, eps_prox: float = DEFAULT_EPS_PROX,
                    kappa_tol: float = DEFAULT_KAPPA_TOL,
                    eps_j: float = 1e-12, max_nodes: int = 2_000_000):
    """Run the advancing front inside the parametric box `bounds`.

    seeds: (m, k) parametric points, all inside bounds. obstacles: optional
    (M, d) mapped points that reject candidates but are never expanded.
    Candidates leaving the box are dropped; a surviving candidate is rejected
    when its mapped point lies strictly within (1-eps_prox)*min(chord, h) of
    any existing mapped node (seeds, accepted nodes, obstacles), where chord
    is the candidate's own mapped distance to the node it was expanded from,
    floored at (1-kappa_tol)*h. The chord term forgives exactly the
    first-order stepping error, so fronts advance over curved regions without
    admitting neighbors any closer than the local step truly is.

    Returns (lams (N, k), points (N, d)) with seeds first, in creation order.
    """
    seeds = np.atleast_2d(np.asarray(seeds, dtype=float))
    if seeds.size == 0:
        raise ConfigError("fill_parametric requires a nonempty seed set")
    bounds = np.asarray(bounds, dtype=float).reshape(-1, 2)
    k = bounds.shape[0]
    if seeds.shape[1] != k:
        raise ConfigError(f"seeds are {seeds.shape[1]}-dimensional, bounds {k}")
    if np.any(seeds < bounds[:, 0]) or np.any(seeds > bounds[:, 1]):
        raise ConfigError("seeds must lie inside the parametric bounds")
    if not 0.0 <= eps_prox < 1.0:
        raise ConfigError(f"eps_prox must be in [0, 1), got {eps_prox}")
    if not 0.0 <= kappa_tol < 1.0:
        raise ConfigError(f"kappa_tol must be in [0, 1), got {kappa_tol}")
    rng = ensure_rng(rng)
    n_eff = DEFAULT_CANDIDATES[k] if n is None else int(n)

    mapped_seeds = np.atleast_2d(mapping.points(seeds))
    d = mapped_seeds.shape[1]
    index = DynamicPointIndex(d)
    if obstacles is not None and len(obstacles):
        index.insert_many(np.atleast_2d(np.asarray(obstacles, dtype=float)))
    index.insert_many(mapped_seeds)

    lams = [np.array(s) for s in seeds]
    pts = [np.array(p) for p in mapped_seeds]
    queue = deque(range(len(lams)))

    while queue:
        i = queue.popleft()
        lam = lams[i]
        h_val = float(h(pts[i]))
        if not np.isfinite(h_val) or h_val <= 0:
            raise NumericalError(f"spacing function returned {h_val} at {pts[i]}")
        dirs, norms = _steps(lam, mapping, n_eff, rng)
        ok = norms > eps_j
        if not ok.any():
            continue
        cands = lam[None, :] + (h_val / norms[ok])[:, None] * dirs[ok]
        inb = np.all((cands >= bounds[:, 0]) & (cands <= bounds[:, 1]), axis=1)
        if not inb.any():
            continue
        cands = cands[inb]
        mapped = np.atleast_2d(mapping.points(cands))
        chord = np.linalg.norm(mapped - pts[i], axis=1)
        reject_r = (1.0 - eps_prox) * np.clip(
            chord, (1.0 - kappa_tol) * h_val, h_val)
        near = index.nearest_distance_batch(mapped)
        keep = near >= reject_r
        fresh: list[np.ndarray] = []
        for lam_c, pt_c, rr in zip(cands[keep], mapped[keep], reject_r[keep]):
            if fresh and np.min(np.linalg.norm(np.asarray(fresh) - pt_c, axis=1)) < rr:
                continue
            fresh.append(pt_c)
            queue.append(len(lams))
            lams.append(lam_c)
            pts.append(pt_c)
            index.insert(pt_c)
            if len(lams) > max_nodes:
                raise NumericalError(f"fill exceeded max_nodes={max_nodes}")

    return np.asarray(lams), np.asarray(pts)
