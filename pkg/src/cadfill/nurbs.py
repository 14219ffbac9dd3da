"""B-spline basis, NURBS curves, tensor-product NURBS surfaces, derivatives.

Everything evaluates in homogeneous coordinates via the de Boor recursion and
projects at the API surface. Evaluation points may be scalars or arrays; the
right domain endpoint is treated as part of the last nonempty span.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DomainError, ModelError, SingularityError

_NORMAL_EPS = 1e-10


# ---------------------------------------------------------------------------
# knots and basis
# ---------------------------------------------------------------------------
def validate_knots(knots: np.ndarray, degree: int) -> None:
    if degree < 0:
        raise ModelError(f"degree must be >= 0, got {degree}")
    if len(knots) < 2 * degree + 2:
        raise ModelError("knot vector too short for degree")
    if np.any(np.diff(knots) < 0):
        raise ModelError("knots must be nondecreasing")
    p = degree
    if not (np.all(knots[:p + 1] == knots[0]) and np.all(knots[-p - 1:] == knots[-1])):
        raise ModelError("knot vector must be clamped")
    if knots[0] == knots[-1]:
        raise ModelError("knot vector spans an empty interval")


def _check_domain(knots: np.ndarray, u: np.ndarray) -> None:
    a, b = knots[0], knots[-1]
    if np.any(u < a) or np.any(u > b):
        raise DomainError(f"parameter outside [{a}, {b}]")


def find_span(knots: np.ndarray, degree: int, n_ctrl: int, u: np.ndarray) -> np.ndarray:
    """Index s with t_s <= u < t_{s+1}, u=b clamped into the last span."""
    s = np.searchsorted(knots, u, side="right") - 1
    return np.clip(s, degree, n_ctrl - 1)


def bspline_basis(knots, degree: int, i: int, u: float) -> float:
    """Single basis function N_{i,p}(u) by the two-level recursion.

    0/0 terms contribute 0; the right domain endpoint belongs to the last
    nonempty span so the basis sums to one on the closed interval.
    """
    knots = np.asarray(knots, dtype=float)
    _check_domain(knots, np.asarray(u, dtype=float))
    if i < 0 or i + degree + 1 >= len(knots):
        raise DomainError(f"basis index {i} out of range")
    return _basis_rec(knots, degree, i, float(u))


def _basis_rec(t: np.ndarray, p: int, i: int, u: float) -> float:
    if p == 0:
        if t[i] <= u < t[i + 1]:
            return 1.0
        # closed right end of the global interval
        if u == t[-1] and t[i] < t[i + 1] == t[-1]:
            return 1.0
        return 0.0
    left = 0.0
    den = t[i + p] - t[i]
    if den > 0:
        left = (u - t[i]) / den * _basis_rec(t, p - 1, i, u)
    right = 0.0
    den = t[i + p + 1] - t[i + 1]
    if den > 0:
        right = (t[i + p + 1] - u) / den * _basis_rec(t, p - 1, i + 1, u)
    return left + right


def _deboor(knots: np.ndarray, degree: int, ctrl: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Batched de Boor: ctrl (n, dim), u (m,) -> (m, dim)."""
    p = degree
    n_ctrl = ctrl.shape[0]
    s = find_span(knots, p, n_ctrl, u)
    offs = s[:, None] - p + np.arange(p + 1)[None, :]          # (m, p+1)
    H = ctrl[offs].astype(float, copy=True)                    # (m, p+1, dim)
    for r in range(1, p + 1):
        for j in range(p, r - 1, -1):
            left = knots[offs[:, j]]
            right = knots[offs[:, j] + p - r + 1]
            den = right - left
            with np.errstate(invalid="ignore", divide="ignore"):
                alpha = np.where(den > 0, (u - left) / np.where(den > 0, den, 1.0), 0.0)
            H[:, j] = (1 - alpha)[:, None] * H[:, j - 1] + alpha[:, None] * H[:, j]
    return H[:, p]


def _derivative_ctrl(knots: np.ndarray, degree: int, ctrl: np.ndarray):
    """Control points/knots of the first-derivative spline."""
    p = degree
    den = knots[p + 1:p + 1 + len(ctrl) - 1] - knots[1:len(ctrl)]
    scale = np.where(den > 0, p / np.where(den > 0, den, 1.0), 0.0)
    dctrl = scale[:, None] * (ctrl[1:] - ctrl[:-1])
    return knots[1:-1], p - 1, dctrl


# ---------------------------------------------------------------------------
# curves
# ---------------------------------------------------------------------------
class NurbsCurve:
    def __init__(self, degree: int, knots, control_points, weights,
                 orientation: int = 1):
        self.degree = int(degree)
        self.knots = np.asarray(knots, dtype=float)
        self.control_points = np.atleast_2d(np.asarray(control_points, dtype=float))
        self.weights = np.asarray(weights, dtype=float)
        if orientation not in (1, -1):
            raise ModelError("orientation must be +1 or -1")
        self.orientation = int(orientation)
        validate_knots(self.knots, self.degree)
        n_expected = len(self.knots) - self.degree - 1
        if len(self.control_points) != n_expected:
            raise ModelError(f"expected {n_expected} control points, "
                             f"got {len(self.control_points)}")
        if len(self.weights) != len(self.control_points):
            raise ModelError("weights/control points length mismatch")
        if np.any(self.weights <= 0):
            raise ModelError("weights must be positive")

    @property
    def dim(self) -> int:
        return self.control_points.shape[1]

    @property
    def domain(self) -> tuple[float, float]:
        return float(self.knots[0]), float(self.knots[-1])

    @cached_property
    def _ctrl_h(self) -> np.ndarray:
        return np.column_stack([self.weights[:, None] * self.control_points,
                                self.weights])

    @cached_property
    def _d1(self):
        return _derivative_ctrl(self.knots, self.degree, self._ctrl_h)

    @cached_property
    def _d2(self):
        k1, p1, c1 = self._d1
        return _derivative_ctrl(k1, p1, c1)

    def _eval_h(self, u: np.ndarray) -> np.ndarray:
        return _deboor(self.knots, self.degree, self._ctrl_h, u)

    def evaluate(self, u):
        """Point(s) on the curve."""
        u_arr = np.atleast_1d(np.asarray(u, dtype=float))
        _check_domain(self.knots, u_arr)
        H = self._eval_h(u_arr)
        out = H[:, :-1] / H[:, -1:]
        return out[0] if np.isscalar(u) or np.asarray(u).ndim == 0 else out

    def derivative(self, u, order: int = 1):
        """Parametric derivative(s) of the given order (1 or 2)."""
        if order not in (1, 2):
            raise DomainError(f"derivative order must be 1 or 2, got {order}")
        u_arr = np.atleast_1d(np.asarray(u, dtype=float))
        _check_domain(self.knots, u_arr)
        H = self._eval_h(u_arr)
        s = H[:, :-1] / H[:, -1:]
        w = H[:, -1:]
        k1, p1, c1 = self._d1
        H1 = _deboor(k1, p1, c1, u_arr) if p1 >= 0 else np.zeros_like(H)
        s1 = (H1[:, :-1] - H1[:, -1:] * s) / w
        if order == 1:
            out = s1
        else:
            k2, p2, c2 = self._d2
            if p2 >= 0:
                H2 = _deboor(k2, p2, c2, u_arr)
            else:
                H2 = np.zeros_like(H)
            out = (H2[:, :-1] - 2 * H1[:, -1:] * s1 - H2[:, -1:] * s) / w
        return out[0] if np.isscalar(u) or np.asarray(u).ndim == 0 else out


# ---------------------------------------------------------------------------
# surfaces
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class SurfaceFrame:
    position: np.ndarray          # (3,)
    jacobian: np.ndarray          # (3, 2), columns dr/du, dr/dv
    normal: np.ndarray            # (3,), unit, oriented by the patch flag


class NurbsSurface:
    def __init__(self, degree_u: int, degree_v: int, knots_u, knots_v,
                 control_net, weights, orientation: int = 1):
        self.degree_u = int(degree_u)
        self.degree_v = int(degree_v)
        self.knots_u = np.asarray(knots_u, dtype=float)
        self.knots_v = np.asarray(knots_v, dtype=float)
        self.control_net = np.asarray(control_net, dtype=float)
        self.weights = np.asarray(weights, dtype=float)
        if orientation not in (1, -1):
            raise ModelError("orientation must be +1 or -1")
        self.orientation = int(orientation)
        validate_knots(self.knots_u, self.degree_u)
        validate_knots(self.knots_v, self.degree_v)
        nu = len(self.knots_u) - self.degree_u - 1
        nv = len(self.knots_v) - self.degree_v - 1
        if self.control_net.shape != (nu, nv, 3):
            raise ModelError(f"control net must be ({nu}, {nv}, 3), "
                             f"got {self.control_net.shape}")
        if self.weights.shape != (nu, nv):
            raise ModelError("weights grid shape mismatch")
        if np.any(self.weights <= 0):
            raise ModelError("weights must be positive")

    @property
    def domain(self):
        return ((float(self.knots_u[0]), float(self.knots_u[-1])),
                (float(self.knots_v[0]), float(self.knots_v[-1])))

    @cached_property
    def _net_h(self) -> np.ndarray:
        return np.concatenate([self.weights[..., None] * self.control_net,
                               self.weights[..., None]], axis=-1)

    @cached_property
    def _du(self):
        # derivative net along u: apply the 1D rule to each v-column
        p = self.degree_u
        n = self._net_h.shape[0]
        den = self.knots_u[p + 1:p + n] - self.knots_u[1:n]
        scale = np.where(den > 0, p / np.where(den > 0, den, 1.0), 0.0)
        d = scale[:, None, None] * (self._net_h[1:] - self._net_h[:-1])
        return self.knots_u[1:-1], p - 1, d

    @cached_property
    def _dv(self):
        p = self.degree_v
        n = self._net_h.shape[1]
        den = self.knots_v[p + 1:p + n] - self.knots_v[1:n]
        scale = np.where(den > 0, p / np.where(den > 0, den, 1.0), 0.0)
        d = scale[None, :, None] * (self._net_h[:, 1:] - self._net_h[:, :-1])
        return self.knots_v[1:-1], p - 1, d

    @staticmethod
    def _tensor_deboor(ku, pu, kv, pv, net, u, v):
        """net (nu, nv, dim), u/v (m,) -> (m, dim)."""
        nu, nv = net.shape[0], net.shape[1]
        su = find_span(ku, pu, nu, u)
        sv = find_span(kv, pv, nv, v)
        ou = su[:, None] - pu + np.arange(pu + 1)[None, :]     # (m, pu+1)
        ov = sv[:, None] - pv + np.arange(pv + 1)[None, :]     # (m, pv+1)
        local = net[ou[:, :, None], ov[:, None, :]]            # (m, pu+1, pv+1, dim)
        # collapse u
        H = np.swapaxes(local, 1, 2).copy()                    # (m, pv+1, pu+1, dim)
        for r in range(1, pu + 1):
            for j in range(pu, r - 1, -1):
                left = ku[ou[:, j]][:, None]
                right = ku[ou[:, j] + pu - r + 1][:, None]
                den = right - left
                with np.errstate(invalid="ignore", divide="ignore"):
                    alpha = np.where(den > 0, (u[:, None] - left) / np.where(den > 0, den, 1.0), 0.0)
                H[:, :, j] = (1 - alpha)[..., None] * H[:, :, j - 1] + alpha[..., None] * H[:, :, j]
        G = H[:, :, pu]                                        # (m, pv+1, dim)
        for r in range(1, pv + 1):
            for j in range(pv, r - 1, -1):
                left = kv[ov[:, j]]
                right = kv[ov[:, j] + pv - r + 1]
                den = right - left
                with np.errstate(invalid="ignore", divide="ignore"):
                    alpha = np.where(den > 0, (v - left) / np.where(den > 0, den, 1.0), 0.0)
                G[:, j] = (1 - alpha)[:, None] * G[:, j - 1] + alpha[:, None] * G[:, j]
        return G[:, pv]

    def _eval_h(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        return self._tensor_deboor(self.knots_u, self.degree_u,
                                   self.knots_v, self.degree_v,
                                   self._net_h, u, v)

    def evaluate(self, u, v):
        """Surface point(s)."""
        scalar = np.asarray(u).ndim == 0
        u_arr = np.atleast_1d(np.asarray(u, dtype=float))
        v_arr = np.atleast_1d(np.asarray(v, dtype=float))
        _check_domain(self.knots_u, u_arr)
        _check_domain(self.knots_v, v_arr)
        H = self._eval_h(u_arr, v_arr)
        out = H[:, :3] / H[:, 3:]
        return out[0] if scalar else out

    def jacobians(self, u, v):
        """Positions and Jacobians for batches: returns (pos (m,3), J (m,3,2))."""
        u_arr = np.atleast_1d(np.asarray(u, dtype=float))
        v_arr = np.atleast_1d(np.asarray(v, dtype=float))
        _check_domain(self.knots_u, u_arr)
        _check_domain(self.knots_v, v_arr)
        H = self._eval_h(u_arr, v_arr)
        pos = H[:, :3] / H[:, 3:]
        w = H[:, 3:]
        ku1, pu1, dnu = self._du
        Hu = self._tensor_deboor(ku1, pu1, self.knots_v, self.degree_v, dnu,
                                 u_arr, v_arr) if pu1 >= 0 else np.zeros_like(H)
        kv1, pv1, dnv = self._dv
        Hv = self._tensor_deboor(self.knots_u, self.degree_u, kv1, pv1, dnv,
                                 u_arr, v_arr) if pv1 >= 0 else np.zeros_like(H)
        ru = (Hu[:, :3] - Hu[:, 3:] * pos) / w
        rv = (Hv[:, :3] - Hv[:, 3:] * pos) / w
        J = np.stack([ru, rv], axis=-1)
        return pos, J

    def frame(self, u: float, v: float) -> SurfaceFrame:
        """Position, Jacobian, oriented unit normal at one parameter point."""
        pos, J = self.jacobians(u, v)
        pos, J = pos[0], J[0]
        cr = np.cross(J[:, 0], J[:, 1])
        scale = np.linalg.norm(J[:, 0]) * np.linalg.norm(J[:, 1])
        ncr = np.linalg.norm(cr)
        if ncr <= _NORMAL_EPS * max(scale, 1e-300):
            raise SingularityError(f"degenerate Jacobian at (u, v)=({u}, {v})")
        return SurfaceFrame(pos, J, self.orientation * cr / ncr)

    def frames(self, u, v):
        """Batched frames; raises if any point is singular."""
        pos, J = self.jacobians(u, v)
        cr = np.cross(J[:, :, 0], J[:, :, 1])
        scale = np.linalg.norm(J[:, :, 0], axis=1) * np.linalg.norm(J[:, :, 1], axis=1)
        ncr = np.linalg.norm(cr, axis=1)
        bad = ncr <= _NORMAL_EPS * np.maximum(scale, 1e-300)
        if np.any(bad):
            i = int(np.argmax(bad))
            raise SingularityError(
                f"degenerate Jacobian at (u, v)=({np.atleast_1d(u)[i]}, {np.atleast_1d(v)[i]})")
        normals = self.orientation * cr / ncr[:, None]
        return pos, J, normals

    def boundary_curves(self) -> list["BoundaryEdge"]:
        """The four iso-parameter boundary curves with rectangle bookkeeping."""
        net, w = self.control_net, self.weights
        (au, bu), (av, bv) = self.domain
        edges = [
            BoundaryEdge("u0", NurbsCurve(self.degree_v, self.knots_v, net[0], w[0]),
                         axis=1, fixed=au),
            BoundaryEdge("u1", NurbsCurve(self.degree_v, self.knots_v, net[-1], w[-1]),
                         axis=1, fixed=bu),
            BoundaryEdge("v0", NurbsCurve(self.degree_u, self.knots_u, net[:, 0], w[:, 0]),
                         axis=0, fixed=av),
            BoundaryEdge("v1", NurbsCurve(self.degree_u, self.knots_u, net[:, -1], w[:, -1]),
                         axis=0, fixed=bv),
        ]
        return edges


@dataclass(frozen=True)
class BoundaryEdge:
    """One surface boundary curve plus its place on the parametric rectangle.

    axis is the rectangle coordinate the curve parameter runs along (0 = u,
    1 = v); `fixed` is the frozen value of the other coordinate.
    """
    edge_id: str
    curve: NurbsCurve
    axis: int
    fixed: float

    def embed(self, t):
        """Map curve parameter(s) to (u, v) rectangle points."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        uv = np.empty((len(t), 2))
        uv[:, self.axis] = t
        uv[:, 1 - self.axis] = self.fixed
        return uv
