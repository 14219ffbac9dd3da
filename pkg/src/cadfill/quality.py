"""Node-quality metrics: local regularity, separation and fill distance.

All metrics treat the node set as given; nothing here depends on how the
nodes were generated. Distances are Euclidean, normalization is by a
constant target spacing h.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ConfigError
from .index import DynamicPointIndex
from .nodes import NodeSet

__all__ = [
    "QualityReport",
    "RegularityCurve",
    "default_neighbor_count",
    "local_regularity",
    "regularity_vs_c",
    "separation_distance",
    "fill_distance",
    "grid_probes",
    "surface_probes",
]

# neighbor counts used for regularity statistics, keyed by the dimension
# of the object the nodes discretize (curve=1, surface=2, volume=3)
_DEFAULT_C = {1: 2, 2: 3, 3: 5}


def default_neighbor_count(object_dim: int) -> int:
    try:
        return _DEFAULT_C[object_dim]
    except KeyError:
        raise ConfigError(f"no default neighbor count for {object_dim}D objects")


@dataclass(frozen=True)
class QualityReport:
    """Local-regularity statistics of a node set at constant spacing h.

    Per-node arrays are raw distances; the summary statistics are
    normalized by h (prime quantities: d' = d/h).
    """

    c: int
    h: float
    d_mean: np.ndarray
    d_min: np.ndarray
    d_max: np.ndarray
    mean: float
    std: float
    spread_mean: float
    r_min: Optional[float] = None
    r_max: Optional[float] = None

    @property
    def d_mean_normalized(self) -> np.ndarray:
        return self.d_mean / self.h

    @property
    def r_min_normalized(self) -> Optional[float]:
        return None if self.r_min is None else self.r_min / self.h

    @property
    def r_max_normalized(self) -> Optional[float]:
        return None if self.r_max is None else self.r_max / self.h

    def with_extremes(self, r_min: Optional[float] = None,
                      r_max: Optional[float] = None) -> "QualityReport":
        return replace(self, r_min=r_min if r_min is not None else self.r_min,
                       r_max=r_max if r_max is not None else self.r_max)

    def to_dict(self, per_node: bool = True) -> dict:
        out = {
            "count": int(len(self.d_mean)),
            "c": self.c,
            "h": self.h,
            "mean": self.mean,
            "std": self.std,
            "spread_mean": self.spread_mean,
            "r_min": self.r_min,
            "r_min_normalized": self.r_min_normalized,
            "r_max": self.r_max,
            "r_max_normalized": self.r_max_normalized,
        }
        if per_node:
            out["d_mean"] = self.d_mean.tolist()
            out["d_min"] = self.d_min.tolist()
            out["d_max"] = self.d_max.tolist()
        return out


def _positions(nodes) -> np.ndarray:
    if isinstance(nodes, NodeSet):
        return nodes.positions
    return np.atleast_2d(np.asarray(nodes, dtype=float))


def _neighbor_distances(positions: np.ndarray, c: int) -> np.ndarray:
    """Distances to the c nearest other nodes, one row per node."""
    n = len(positions)
    if n <= c:
        raise ConfigError(f"need more than c={c} nodes, got {n}")
    index = DynamicPointIndex(positions.shape[1])
    index.insert_many(positions)
    # column 0 is the query node itself at distance 0
    _, dist = index.k_nearest_batch(positions, c + 1)
    return dist[:, 1:]


def local_regularity(nodes, c: int, h: float) -> QualityReport:
    """Statistics of the mean distance to the c nearest neighbors.

    d_mean[i] is the average distance from node i to its c nearest
    neighbors; ideal quasi-uniform sets give d_mean/h close to 1.
    """
    positions = _positions(nodes)
    if not (h > 0):
        raise ConfigError(f"spacing must be positive, got {h}")
    dist = _neighbor_distances(positions, int(c))
    d_mean = dist.mean(axis=1)
    d_min = dist[:, 0]
    d_max = dist[:, -1]
    norm = d_mean / h
    return QualityReport(
        c=int(c),
        h=float(h),
        d_mean=d_mean,
        d_min=d_min,
        d_max=d_max,
        mean=float(norm.mean()),
        std=float(norm.std()),
        spread_mean=float(((d_max - d_min) / h).mean()),
    )


@dataclass(frozen=True)
class RegularityCurve:
    c_values: np.ndarray
    mean: np.ndarray
    std: np.ndarray


def regularity_vs_c(nodes, c_values: Sequence[int], h: float) -> RegularityCurve:
    """Mean/std of normalized regularity for each neighbor count in c_values."""
    positions = _positions(nodes)
    cs = np.asarray(sorted(set(int(c) for c in c_values)), dtype=int)
    if len(cs) == 0 or cs[0] < 1:
        raise ConfigError("neighbor counts must be positive integers")
    dist = _neighbor_distances(positions, int(cs[-1]))
    means = np.empty(len(cs))
    stds = np.empty(len(cs))
    for k, c in enumerate(cs):
        norm = dist[:, :c].mean(axis=1) / h
        means[k] = norm.mean()
        stds[k] = norm.std()
    return RegularityCurve(c_values=cs, mean=means, std=stds)


def separation_distance(nodes) -> float:
    """Half the minimal pairwise distance of the node set."""
    positions = _positions(nodes)
    if len(positions) < 2:
        raise ConfigError("separation distance needs at least 2 nodes")
    index = DynamicPointIndex(positions.shape[1])
    index.insert_many(positions)
    _, dist = index.k_nearest_batch(positions, 2)
    return float(dist[:, 1].min()) / 2.0


def grid_probes(predicate: Callable[[np.ndarray], np.ndarray],
                bounding_box, step: float) -> np.ndarray:
    """Regular grid over the bounding box, filtered by the membership test."""
    lo, hi = (np.asarray(b, dtype=float) for b in bounding_box)
    if not (step > 0):
        raise ConfigError(f"probe step must be positive, got {step}")
    axes = []
    for a, b in zip(lo, hi):
        n = max(int(np.ceil((b - a) / step)) + 1, 2)
        axes.append(np.linspace(a, b, n))
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    keep = np.asarray(predicate(pts), dtype=bool)
    return pts[keep]


def fill_distance(nodes, predicate: Callable[[np.ndarray], np.ndarray],
                  bounding_box, oversample: float = 4.0, *,
                  spacing: Optional[float] = None, refine: int = 5) -> float:
    """Estimate of the largest empty-ball radius inside the domain.

    Probes the domain on a grid with step spacing/oversample, then locally
    refines around the worst probe. The result is a lower bound of the
    true supremum that tightens as oversample grows.
    """
    positions = _positions(nodes)
    if oversample < 4:
        raise ConfigError(f"oversample factor must be >= 4, got {oversample}")
    if spacing is None:
        index = DynamicPointIndex(positions.shape[1])
        index.insert_many(positions)
        _, dist = index.k_nearest_batch(positions, 2)
        spacing = float(np.median(dist[:, 1]))
    step = spacing / float(oversample)
    probes = grid_probes(predicate, bounding_box, step)
    if len(probes) == 0:
        raise ConfigError("no probe points fall inside the domain")
    from scipy.spatial import cKDTree

    tree = cKDTree(positions)
    d, _ = tree.query(probes)
    best = probes[int(np.argmax(d))]
    value = float(d.max())
    # local refinement around the worst probe; the box contracts 3x per
    # round, so the estimate error shrinks like step / 3^refine
    half = step
    for _ in range(max(0, int(refine))):
        offsets = np.linspace(-half, half, 7)
        mesh = np.meshgrid(*([offsets] * positions.shape[1]), indexing="ij")
        local = best + np.stack([m.ravel() for m in mesh], axis=1)
        keep = np.asarray(predicate(local), dtype=bool)
        local = local[keep]
        if len(local) == 0:
            break
        ld, _ = tree.query(local)
        j = int(np.argmax(ld))
        if ld[j] > value:
            value = float(ld[j])
            best = local[j]
        half /= 3.0
    return value


def surface_probes(model, spacing: float) -> np.ndarray:
    """Dense point samples on every boundary patch of a model.

    Parametric grids sized from the patch Jacobians so the mapped probe
    spacing is roughly the requested one. Intended for boundary fill
    distance estimates.
    """
    if not (spacing > 0):
        raise ConfigError(f"probe spacing must be positive, got {spacing}")
    chunks = []
    for patch in model.patches:
        if model.dimension == 2:
            a, b = patch.domain
            t = np.linspace(a, b, 33)
            d = patch.derivative(t)
            length = float(np.trapezoid(np.linalg.norm(d, axis=1), t))
            n = max(int(np.ceil(length / spacing)) + 1, 2)
            chunks.append(patch.evaluate(np.linspace(a, b, n)))
        else:
            (ua, ub), (va, vb) = patch.domain
            gu = np.linspace(ua, ub, 9)
            gv = np.linspace(va, vb, 9)
            uu, vv = np.meshgrid(gu, gv, indexing="ij")
            _, jac = patch.jacobians(uu.ravel(), vv.ravel())
            su = float(np.linalg.norm(jac[:, :, 0], axis=1).mean()) * (ub - ua)
            sv = float(np.linalg.norm(jac[:, :, 1], axis=1).mean()) * (vb - va)
            nu = max(int(np.ceil(su / spacing)) + 1, 2)
            nv = max(int(np.ceil(sv / spacing)) + 1, 2)
            uu, vv = np.meshgrid(np.linspace(ua, ub, nu),
                                 np.linspace(va, vb, nv), indexing="ij")
            chunks.append(patch.evaluate(uu.ravel(), vv.ravel()))
    return np.vstack(chunks)
