"""Dynamic nearest-neighbor index over a growing point set.

A k-d tree snapshot plus a linear insertion buffer; the tree is rebuilt once
the buffer outgrows a threshold. All queries are exact and match a
brute-force linear scan, including the (distance, insertion index) tie rule.
All reported distances are numpy Euclidean norms, so results are comparable
bit-for-bit with a naive scan.
"""
from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

from .errors import ConfigError

_REBUILD_MIN = 64
_REBUILD_MAX = 2048
_TIE_EPS = 1e-12


class DynamicPointIndex:
    def __init__(self, dim: int, capacity: int = 1024):
        if dim < 1:
            raise ConfigError(f"dimension must be >= 1, got {dim}")
        self.dim = dim
        self._points = np.empty((capacity, dim), dtype=float)
        self._n = 0
        self._tree: cKDTree | None = None
        self._tree_n = 0          # points covered by the snapshot

    # ---------------- growth ------------------------------------------------
    def _ensure(self, extra: int):
        need = self._n + extra
        if need > self._points.shape[0]:
            cap = max(need, 2 * self._points.shape[0])
            grown = np.empty((cap, self.dim), dtype=float)
            grown[:self._n] = self._points[:self._n]
            self._points = grown

    def _maybe_rebuild(self):
        buffered = self._n - self._tree_n
        threshold = max(_REBUILD_MIN, min(_REBUILD_MAX, self._n // 4))
        if buffered > threshold:
            self._tree = cKDTree(self._points[:self._n])
            self._tree_n = self._n

    def insert(self, p) -> int:
        p = np.asarray(p, dtype=float)
        if p.shape != (self.dim,) or not np.all(np.isfinite(p)):
            raise ConfigError(f"bad point for insert: {p!r}")
        self._ensure(1)
        self._points[self._n] = p
        self._n += 1
        self._maybe_rebuild()
        return self._n - 1

    def insert_many(self, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        if pts.shape[1] != self.dim or not np.all(np.isfinite(pts)):
            raise ConfigError("bad points for insert_many")
        self._ensure(len(pts))
        start = self._n
        self._points[start:start + len(pts)] = pts
        self._n += len(pts)
        self._maybe_rebuild()
        return np.arange(start, self._n)

    # ---------------- queries ----------------------------------------------
    @property
    def size(self) -> int:
        return self._n

    @property
    def points(self) -> np.ndarray:
        return self._points[:self._n]

    def _buffer_range(self) -> np.ndarray:
        return np.arange(self._tree_n, self._n)

    def nearest_distance(self, q) -> float:
        """Distance to the closest stored point; inf when empty."""
        q = np.asarray(q, dtype=float)
        best = np.inf
        if self._tree is not None:
            _, i = self._tree.query(q)
            best = float(np.linalg.norm(self._points[int(i)] - q))
        buf = self._points[self._tree_n:self._n]
        if len(buf):
            best = min(best, float(np.min(np.linalg.norm(buf - q, axis=1))))
        return best

    def nearest_distance_batch(self, Q) -> np.ndarray:
        Q = np.atleast_2d(np.asarray(Q, dtype=float))
        best = np.full(len(Q), np.inf)
        if self._tree is not None:
            _, i = self._tree.query(Q)
            best = np.linalg.norm(self._points[i] - Q, axis=1)
        buf = self._points[self._tree_n:self._n]
        if len(buf):
            d2 = np.linalg.norm(Q[:, None, :] - buf[None, :, :], axis=2)
            best = np.minimum(best, d2.min(axis=1))
        return best

    def has_point_within(self, q, radius: float) -> bool:
        """True iff a stored point lies strictly closer than `radius`."""
        if radius <= 0:
            raise ConfigError("radius must be positive")
        if self._n == 0:
            return False
        return self.nearest_distance(q) < radius

    def k_nearest(self, q, k: int, exclude_self: bool = False):
        """Exact k nearest, ascending by (distance, insertion index).

        With exclude_self=True, one stored point at distance exactly 0 is
        skipped (the "query from a member point" mode).
        """
        q = np.asarray(q, dtype=float)
        avail = self._n - (1 if exclude_self else 0)
        if k < 1 or k > avail:
            raise ConfigError(f"k={k} out of range for size {self._n}")
        kk = k + (1 if exclude_self else 0)
        cand = self._candidate_set(q, kk)
        d = np.linalg.norm(self._points[cand] - q, axis=1)
        order = np.lexsort((cand, d))
        cand, d = cand[order], d[order]
        if exclude_self and len(cand) and d[0] == 0.0:
            cand, d = cand[1:], d[1:]
        return cand[:k], d[:k]

    def _candidate_set(self, q, k: int) -> np.ndarray:
        """Index superset guaranteed to contain the exact k nearest."""
        buf_idx = self._buffer_range()
        if self._tree is None:
            return buf_idx
        # k-th smallest distance over snapshot-partial + buffer bounds the
        # search radius; inclusive ball query then catches every tie
        kq = min(k, self._tree_n)
        d, _ = self._tree.query(q, k=kq)
        d = np.atleast_1d(d)
        if len(buf_idx):
            bd = np.linalg.norm(self._points[buf_idx] - q, axis=1)
            merged = np.concatenate([d, bd])
        else:
            merged = d
        if len(merged) >= k:
            dk = np.partition(merged, k - 1)[k - 1]
        else:
            dk = merged.max(initial=0.0)
        near = self._tree.query_ball_point(q, dk * (1 + 1e-12) + 1e-300)
        return np.concatenate([np.asarray(near, dtype=int), buf_idx])

    def neighbors_within(self, q, radius: float) -> np.ndarray:
        """Indices with distance <= radius (inclusive), ascending by index."""
        out = []
        if self._tree is not None:
            out.extend(self._tree.query_ball_point(np.asarray(q, float), radius))
        buf = self._points[self._tree_n:self._n]
        if len(buf):
            d = np.linalg.norm(buf - np.asarray(q, float), axis=1)
            out.extend((np.nonzero(d <= radius)[0] + self._tree_n).tolist())
        return np.asarray(sorted(out), dtype=int)

    def k_nearest_batch(self, Q, k: int):
        """Vectorized k_nearest over many query points (no exclude_self)."""
        Q = np.atleast_2d(np.asarray(Q, dtype=float))
        if k < 1 or k > self._n:
            raise ConfigError(f"k={k} out of range for size {self._n}")
        idx = np.empty((len(Q), k), dtype=int)
        dist = np.empty((len(Q), k), dtype=float)
        if self._tree is not None and self._tree_n == self._n:
            kk = min(k + 1, self._n)
            _, ti = self._tree.query(Q, k=kk)
            ti = np.atleast_2d(ti)
            gathered = self._points[ti]                     # (m, kk, d)
            td = np.linalg.norm(gathered - Q[:, None, :], axis=2)
            for r in range(len(Q)):
                rd, ri = td[r], ti[r]
                order = np.lexsort((ri, rd))
                rd, ri = rd[order], ri[order]
                if kk > k and rd[k] - rd[k - 1] < _TIE_EPS:
                    idx[r], dist[r] = self.k_nearest(Q[r], k)
                else:
                    idx[r], dist[r] = ri[:k], rd[:k]
            return idx, dist
        for r in range(len(Q)):
            idx[r], dist[r] = self.k_nearest(Q[r], k)
        return idx, dist
