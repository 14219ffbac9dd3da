"""Node set container shared by the samplers, quality metrics, and solvers."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

INTERIOR = 0
BOUNDARY = 1

KIND_NAMES = {INTERIOR: "interior", BOUNDARY: "boundary"}
KIND_CODES = {v: k for k, v in KIND_NAMES.items()}


@dataclass
class NodeSet:
    """Generated nodes: positions, kind flags, outward normals, target spacing.

    Normals are NaN rows for interior nodes. `spacing` holds h at creation
    time so variable-spacing sets stay self-describing.
    """

    positions: np.ndarray                 # (N, d)
    kinds: np.ndarray                     # (N,) int, INTERIOR or BOUNDARY
    normals: np.ndarray                   # (N, d), NaN where interior
    spacing: np.ndarray                   # (N,)

    def __post_init__(self):
        self.positions = np.atleast_2d(np.asarray(self.positions, dtype=float))
        self.kinds = np.asarray(self.kinds, dtype=np.int8)
        self.normals = np.atleast_2d(np.asarray(self.normals, dtype=float))
        self.spacing = np.asarray(self.spacing, dtype=float)

    @property
    def dim(self) -> int:
        return self.positions.shape[1]

    def __len__(self) -> int:
        return self.positions.shape[0]

    @property
    def boundary_mask(self) -> np.ndarray:
        return self.kinds == BOUNDARY

    def subset(self, mask: np.ndarray) -> "NodeSet":
        return NodeSet(self.positions[mask], self.kinds[mask],
                       self.normals[mask], self.spacing[mask])

    def boundary_subset(self) -> "NodeSet":
        return self.subset(self.boundary_mask)

    def interior_subset(self) -> "NodeSet":
        return self.subset(~self.boundary_mask)

    @staticmethod
    def empty(dim: int) -> "NodeSet":
        return NodeSet(np.empty((0, dim)), np.empty(0, dtype=np.int8),
                       np.empty((0, dim)), np.empty(0))

    @staticmethod
    def concatenate(parts: list["NodeSet"]) -> "NodeSet":
        parts = [p for p in parts if len(p)]
        if not parts:
            raise ValueError("nothing to concatenate")
        return NodeSet(np.vstack([p.positions for p in parts]),
                       np.concatenate([p.kinds for p in parts]),
                       np.vstack([p.normals for p in parts]),
                       np.concatenate([p.spacing for p in parts]))


class NodeSetBuilder:
    """Append-only accumulator used by the fill loops."""

    def __init__(self, dim: int):
        self.dim = dim
        self._pos: list[np.ndarray] = []
        self._kind: list[int] = []
        self._normal: list[np.ndarray] = []
        self._h: list[float] = []

    def add(self, position, kind: int, h: float, normal=None) -> int:
        self._pos.append(np.asarray(position, dtype=float))
        self._kind.append(kind)
        if normal is None:
            normal = np.full(self.dim, np.nan)
        self._normal.append(np.asarray(normal, dtype=float))
        self._h.append(float(h))
        return len(self._pos) - 1

    def __len__(self) -> int:
        return len(self._pos)

    def build(self) -> NodeSet:
        if not self._pos:
            return NodeSet.empty(self.dim)
        return NodeSet(np.vstack(self._pos),
                       np.array(self._kind, dtype=np.int8),
                       np.vstack(self._normal),
                       np.array(self._h))
