"""Advancing-front volume filler.

Nodes are expanded breadth-first: each dequeued node spawns candidates on a
sphere of its local spacing radius, candidates fall to the inside predicate or
to proximity against all previously kept nodes, survivors are enqueued. With a
fixed seed the result is bitwise reproducible.
"""
from __future__ import annotations

from collections import deque

import numpy as np

from .errors import ConfigError, NumericalError
from .index import DynamicPointIndex
from .nodes import INTERIOR, NodeSet

DEFAULT_CANDIDATES = {1: 2, 2: 6, 3: 30}

_GOLDEN_ANGLE = np.pi * (3.0 - np.sqrt(5.0))


def ensure_rng(rng) -> np.random.Generator:
    """Accept a Generator, a seed, or None (seed 0)."""
    if isinstance(rng, np.random.Generator):
        return rng
    if rng is None:
        return np.random.default_rng(0)
    return np.random.default_rng(rng)


def _random_rotation(rng: np.random.Generator) -> np.ndarray:
    # uniform over SO(3): normalized 4-vector of Gaussians as a quaternion
    q = rng.standard_normal(4)
    q /= np.linalg.norm(q)
    a, b, c, d = q
    return np.array([
        [a * a + b * b - c * c - d * d, 2 * (b * c - a * d), 2 * (b * d + a * c)],
        [2 * (b * c + a * d), a * a - b * b + c * c - d * d, 2 * (c * d - a * b)],
        [2 * (b * d - a * c), 2 * (c * d + a * b), a * a - b * b - c * c + d * d],
    ])


def unit_directions(dim: int, n: int, rng: np.random.Generator) -> np.ndarray:
    """n unit vectors covering the sphere: +-1 in 1D, rotated equal angles in
    2D, a rotated Fibonacci pattern in 3D."""
    if dim == 1:
        return np.array([[-1.0], [1.0]])
    if dim == 2:
        phase = rng.uniform(0.0, 2.0 * np.pi)
        ang = phase + 2.0 * np.pi * np.arange(n) / n
        return np.column_stack([np.cos(ang), np.sin(ang)])
    if dim == 3:
        k = np.arange(n)
        z = 1.0 - (2.0 * k + 1.0) / n
        r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
        th = _GOLDEN_ANGLE * k
        pts = np.column_stack([r * np.cos(th), r * np.sin(th), z])
        return pts @ _random_rotation(rng).T
    raise ConfigError(f"unsupported dimension {dim}")


def sphere_candidates(center, radius: float, n: int, rng) -> np.ndarray:
    """Candidate points on the sphere |x - center| = radius."""
    center = np.asarray(center, dtype=float)
    if radius <= 0:
        raise ConfigError(f"radius must be positive, got {radius}")
    if n < 1:
        raise ConfigError(f"candidate count must be >= 1, got {n}")
    dirs = unit_directions(center.size, n, ensure_rng(rng))
    return center[None, :] + radius * dirs


def _predicate_mask(inside, pts: np.ndarray) -> np.ndarray:
    res = np.asarray(inside(pts))
    if res.shape != (len(pts),):
        res = np.fromiter((bool(inside(p)) for p in pts), dtype=bool, count=len(pts))
    return res.astype(bool)


def fill_volume(seeds: NodeSet, h, inside, n: int | None = None, rng=None, *,
                eps_prox: float = 0.0, max_nodes: int = 2_000_000) -> NodeSet:
    """Fill the region where `inside` holds, starting the front from `seeds`.

    `h` maps a point to the local spacing; it is evaluated at the node being
    expanded, so all of that node's candidates share one radius. `inside`
    takes an (m, d) array and returns a boolean mask. Rejection is strict:
    a candidate lives only if every kept node is at distance
    >= h(p) * (1 - eps_prox) from it. Returns seeds plus accepted interior
    nodes in creation order.
    """
    if len(seeds) == 0:
        raise ConfigError("fill_volume requires a nonempty seed set")
    if not 0.0 <= eps_prox < 1.0:
        raise ConfigError(f"eps_prox must be in [0, 1), got {eps_prox}")
    rng = ensure_rng(rng)
    dim = seeds.dim
    n_eff = DEFAULT_CANDIDATES[dim] if n is None else int(n)
    if n_eff < 1:
        raise ConfigError(f"candidate count must be >= 1, got {n_eff}")

    index = DynamicPointIndex(dim)
    index.insert_many(seeds.positions)
    positions = [np.array(p) for p in seeds.positions]
    accepted_pos: list[np.ndarray] = []
    accepted_h: list[float] = []
    queue = deque(range(len(seeds)))

    while queue:
        i = queue.popleft()
        p = positions[i]
        radius = float(h(p))
        if not np.isfinite(radius) or radius <= 0:
            raise NumericalError(f"spacing function returned {radius} at {p}")
        cands = sphere_candidates(p, radius, n_eff, rng)
        keep = _predicate_mask(inside, cands)
        if not keep.any():
            continue
        cands = cands[keep]
        # tiny relative slack so a node never rejects its own candidates,
        # which sit at distance exactly h(p) up to rounding
        reject_r = radius * (1.0 - eps_prox) * (1.0 - 1e-12)
        near = index.nearest_distance_batch(cands)
        cands = cands[near >= reject_r]
        fresh: list[np.ndarray] = []
        for c in cands:
            if fresh and np.min(np.linalg.norm(np.asarray(fresh) - c, axis=1)) < reject_r:
                continue
            fresh.append(c)
            queue.append(len(positions))
            positions.append(c)
            index.insert(c)
            accepted_pos.append(c)
            accepted_h.append(float(h(c)))
            if len(positions) > max_nodes:
                raise NumericalError(f"fill exceeded max_nodes={max_nodes}")

    if not accepted_pos:
        return seeds
    interior = NodeSet(
        positions=np.asarray(accepted_pos),
        kinds=np.full(len(accepted_pos), INTERIOR, dtype=np.int8),
        normals=np.full((len(accepted_pos), dim), np.nan),
        spacing=np.asarray(accepted_h),
    )
    return NodeSet.concatenate([seeds, interior])
