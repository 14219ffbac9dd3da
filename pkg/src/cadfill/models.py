"""Built-in multi-patch test geometries and the in-memory model type.

2D models are closed (or open) chains of NURBS curves; 3D models are
watertight unions of NURBS surface patches. Star-shaped models also carry an
analytic membership oracle so classification errors can be measured exactly.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from math import comb

import numpy as np
from scipy.interpolate import make_interp_spline

from .errors import ModelError
from .nurbs import NurbsCurve, NurbsSurface

EDGE_NAMES = ("u0", "u1", "v0", "v1")

BUILTIN_NAMES = ("sphere6", "deformed-sphere", "multiarc2d", "star2d",
                 "star3d", "square", "disk", "subdivided-bezier")


@dataclass
class CadModel:
    dimension: int
    patches: list
    adjacency: list
    name: str = ""
    inside_oracle: object = None          # vectorized membership, when analytic
    closed: bool = True

    def bounding_box(self) -> np.ndarray:
        """(d, 2) box containing the model (convex-hull property)."""
        lo = np.full(self.dimension, np.inf)
        hi = np.full(self.dimension, -np.inf)
        for p in self.patches:
            pts = p.control_points if self.dimension == 2 else p.control_net.reshape(-1, 3)
            lo = np.minimum(lo, pts.min(axis=0))
            hi = np.maximum(hi, pts.max(axis=0))
        return np.column_stack([lo, hi])

    def edge_curve(self, patch_index: int, edge: int):
        """The NURBS curve of one patch edge (2D: endpoint params)."""
        patch = self.patches[patch_index]
        if self.dimension == 2:
            raise ModelError("2D patch edges are endpoints, not curves")
        return patch.boundary_curves()[edge]


def _edge_samples(model: CadModel, patch_index: int, edge: int, n: int = 5) -> np.ndarray:
    be = model.edge_curve(patch_index, edge)
    a, b = be.curve.domain
    return be.curve.evaluate(np.linspace(a, b, n))


def validate_adjacency(model: CadModel, eps_adj: float = 1e-8) -> None:
    """Check each declared shared edge coincides geometrically (either
    parameter direction allowed)."""
    for pa, ea, pb, eb in model.adjacency:
        if model.dimension == 2:
            qa = model.patches[pa].evaluate(model.patches[pa].domain[ea])
            qb = model.patches[pb].evaluate(model.patches[pb].domain[eb])
            err = float(np.linalg.norm(qa - qb))
        else:
            sa = _edge_samples(model, pa, ea)
            sb = _edge_samples(model, pb, eb)
            err = min(float(np.max(np.linalg.norm(sa - sb, axis=1))),
                      float(np.max(np.linalg.norm(sa - sb[::-1], axis=1))))
        if err > eps_adj:
            raise ModelError(
                f"adjacency ({pa},{ea})<->({pb},{eb}) mismatch {err:.3e} > {eps_adj:.1e}")


def derive_adjacency(model: CadModel, eps: float = 1e-8) -> list:
    """Pair up coincident patch edges by sampling (3D) or endpoints (2D)."""
    pairs = []
    if model.dimension == 2:
        ends = [(i, e) for i in range(len(model.patches)) for e in (0, 1)]
        pts = {ie: model.patches[ie[0]].evaluate(model.patches[ie[0]].domain[ie[1]])
               for ie in ends}
    else:
        ends = [(i, e) for i in range(len(model.patches)) for e in range(4)]
        pts = {ie: _edge_samples(model, *ie) for ie in ends}
    used = set()
    for a_i, a in enumerate(ends):
        if a in used:
            continue
        for b in ends[a_i + 1:]:
            if b in used or b[0] == a[0]:
                continue
            if model.dimension == 2:
                err = float(np.linalg.norm(pts[a] - pts[b]))
            else:
                err = min(float(np.max(np.linalg.norm(pts[a] - pts[b], axis=1))),
                          float(np.max(np.linalg.norm(pts[a] - pts[b][::-1], axis=1))))
            if err <= eps:
                pairs.append((a[0], a[1], b[0], b[1]))
                used.add(a)
                used.add(b)
                break
    return pairs


# ---------------------------------------------------------------------------
# 2D primitives
# ---------------------------------------------------------------------------
def _line(p0, p1) -> NurbsCurve:
    return NurbsCurve(1, [0, 0, 1, 1], [p0, p1], [1.0, 1.0])


def _arc(center, radius: float, ang0: float, sweep: float) -> NurbsCurve:
    """Circular arc as one rational quadratic; |sweep| must stay below pi."""
    if not 0 < abs(sweep) < np.pi:
        raise ModelError("single-segment arc sweep must be in (0, pi)")
    c = np.asarray(center, dtype=float)
    e = lambda a: np.array([np.cos(a), np.sin(a)])
    half = 0.5 * sweep
    p0 = c + radius * e(ang0)
    p2 = c + radius * e(ang0 + sweep)
    p1 = c + radius / np.cos(half) * e(ang0 + half)
    w1 = float(np.cos(half))
    return NurbsCurve(2, [0, 0, 0, 1, 1, 1], [p0, p1, p2], [1.0, w1, 1.0])


def make_square() -> CadModel:
    corners = [np.array(c, dtype=float)
               for c in [(0, 0), (1, 0), (1, 1), (0, 1)]]
    patches = [_line(corners[k], corners[(k + 1) % 4]) for k in range(4)]
    adj = [(k, 1, (k + 1) % 4, 0) for k in range(4)]
    box = lambda pts: np.all((pts > 0.0) & (pts < 1.0), axis=1)
    return CadModel(2, patches, adj, name="square", inside_oracle=box)


def make_disk() -> CadModel:
    patches = [_arc((0.0, 0.0), 1.0, k * np.pi / 2, np.pi / 2) for k in range(4)]
    adj = [(k, 1, (k + 1) % 4, 0) for k in range(4)]
    oracle = lambda pts: np.linalg.norm(pts, axis=1) < 1.0
    return CadModel(2, patches, adj, name="disk", inside_oracle=oracle)


def make_multiarc2d(n_arcs: int = 8, target_width: float = 100.0) -> CadModel:
    """Closed convex chain of tangent-continuous circular arcs.

    Turning angles are fixed; radii start from a rough profile and are
    projected onto the 2D linear closure constraint, then everything is
    scaled so the bounding box width matches the target.
    """
    weights = np.array([1.2, 0.7, 1.0, 1.4, 0.8, 1.1, 0.6, 1.2])[:n_arcs]
    if len(weights) < n_arcs:
        weights = np.resize(weights, n_arcs)
    sweeps = 2 * np.pi * weights / weights.sum()
    headings = np.concatenate([[0.0], np.cumsum(sweeps)])[:-1]
    e = lambda a: np.column_stack([np.cos(a), np.sin(a)])
    # displacement of arc k is R_k * (e(phi_k + sweep - pi/2) - e(phi_k - pi/2))
    A = (e(headings + sweeps - np.pi / 2) - e(headings - np.pi / 2)).T  # (2, n)
    r0 = np.array([1.1, 0.6, 0.9, 1.2, 0.7, 1.0, 0.55, 1.05])[:n_arcs]
    if len(r0) < n_arcs:
        r0 = np.resize(r0, n_arcs)
    radii = r0 - A.T @ np.linalg.solve(A @ A.T, A @ r0)
    if np.any(radii <= 0.05 * radii.mean()):
        raise ModelError("arc radii collapsed during closure projection")

    starts = [np.zeros(2)]
    for k in range(n_arcs):
        disp = radii[k] * (e(headings[k] + sweeps[k] - np.pi / 2)
                           - e(headings[k] - np.pi / 2))[0]
        starts.append(starts[-1] + disp)
    pts = np.asarray(starts)
    scale = target_width / (pts.max(axis=0) - pts.min(axis=0)).max()
    center = 0.5 * (pts.max(axis=0) + pts.min(axis=0))
    ends = [(s - center) * scale for s in starts]
    ends[-1] = ends[0]      # snap: projected radii close only to solver precision
    patches = []
    for k in range(n_arcs):
        half = 0.5 * sweeps[k]
        c = ends[k] - radii[k] * scale * e(headings[k] - np.pi / 2)[0]
        shoulder = c + radii[k] * scale / np.cos(half) * e(headings[k] - np.pi / 2 + half)[0]
        patches.append(NurbsCurve(2, [0, 0, 0, 1, 1, 1],
                                  [ends[k], shoulder, ends[k + 1]],
                                  [1.0, float(np.cos(half)), 1.0]))
    adj = [(k, 1, (k + 1) % n_arcs, 0) for k in range(n_arcs)]
    return CadModel(2, patches, adj, name="multiarc2d")


# ---------------------------------------------------------------------------
# star models
# ---------------------------------------------------------------------------
def star_radius(theta: np.ndarray, s: float) -> np.ndarray:
    """Polar radius |cos(s t)|^sin(2 s t) of the star family."""
    theta = np.asarray(theta, dtype=float)
    b = np.abs(np.cos(s * theta))
    expo = np.sin(2 * s * theta)
    return np.exp(expo * np.log(np.maximum(b, 1e-300)))


def star_inside_oracle(s: float, z_range=None):
    def inside(pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        rho = np.linalg.norm(pts[:, :2], axis=1)
        theta = np.arctan2(pts[:, 1], pts[:, 0])
        ok = rho < star_radius(theta, s)
        if z_range is not None:
            ok &= (pts[:, 2] > z_range[0]) & (pts[:, 2] < z_range[1])
        return ok
    return inside


def _star_tips(s: float) -> np.ndarray:
    n_seg = int(round(2 * s))
    if abs(2 * s - n_seg) > 1e-12 or n_seg < 2:
        raise ModelError(f"star parameter s must be a half-integer >= 1, got {s}")
    return (np.pi / 2 + np.arange(n_seg + 1) * np.pi) / s


def _star_segment_points(s: float, t0: float, t1: float, n: int = 81):
    # Chebyshev-Lobatto angles: dense near the C0 tips, where the polar
    # radius has a logarithmic derivative spike
    i = np.arange(n)
    t = 0.5 * (t0 + t1) - 0.5 * (t1 - t0) * np.cos(np.pi * i / (n - 1))
    r = star_radius(t, s)
    r[0] = 1.0
    r[-1] = 1.0
    pts = np.column_stack([r * np.cos(t), r * np.sin(t)])
    # parametrize by cumulative chord length, not by angle: the angle
    # parametrization inherits the tip spike, and a near-unit-speed curve
    # is what first-order parametric stepping assumes
    u = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(pts, axis=0), axis=1))])
    return u, pts


def _interp_curve(t: np.ndarray, pts: np.ndarray) -> NurbsCurve:
    spl = make_interp_spline(t, pts, k=3)
    ctrl = np.asarray(spl.c, dtype=float).copy()
    # interpolation pins the end control points up to solver roundoff only;
    # snapping keeps abutting segments watertight bitwise
    ctrl[0] = pts[0]
    ctrl[-1] = pts[-1]
    return NurbsCurve(3, np.asarray(spl.t, dtype=float), ctrl, np.ones(len(ctrl)))


def make_star2d(s: float = 2.0) -> CadModel:
    tips = _star_tips(s)
    patches = []
    for k in range(len(tips) - 1):
        t, pts = _star_segment_points(s, tips[k], tips[k + 1])
        pts[0] = [np.cos(tips[k]), np.sin(tips[k])]
        pts[-1] = [np.cos(tips[k + 1]), np.sin(tips[k + 1])]
        patches.append(_interp_curve(t, pts))
    m = len(patches)
    adj = [(k, 1, (k + 1) % m, 0) for k in range(m)]
    return CadModel(2, patches, adj, name=f"star2d({s:g})",
                    inside_oracle=star_inside_oracle(s))


def make_star3d(s: float = 2.0, z_half: float = 1.0) -> CadModel:
    """Star cross-section extruded along z, capped by flat fans to the axis."""
    base = make_star2d(s)
    m = len(base.patches)
    patches = []
    lift = lambda pts2, z: np.column_stack([pts2, np.full(len(pts2), z)])
    for c in base.patches:                      # side strips, v is the z axis
        net = np.stack([lift(c.control_points, -z_half),
                        lift(c.control_points, z_half)], axis=1)
        w = np.stack([c.weights, c.weights], axis=1)
        patches.append(NurbsSurface(c.degree, 1, c.knots, [0, 0, 1, 1], net, w))
    for z, flip in ((z_half, 1), (-z_half, -1)):   # cap fans
        for c in base.patches:
            apex = np.zeros((len(c.control_points), 3))
            apex[:, 2] = z
            net = np.stack([lift(c.control_points, z), apex], axis=1)
            w = np.stack([c.weights, c.weights], axis=1)
            patches.append(NurbsSurface(c.degree, 1, c.knots, [0, 0, 1, 1], net, w))
    model = CadModel(3, patches, [], name=f"star3d({s:g})",
                     inside_oracle=star_inside_oracle(s, (-z_half, z_half)))
    _orient_outward(model, _star3d_reference(m, z_half))
    adj = []
    for k in range(m):                          # vertical strip-strip edges
        adj.append((k, 1, (k + 1) % m, 0))
    for k in range(m):                          # strip top/bottom to caps
        adj.append((k, 3, m + k, 2))            # strip v1 <-> top cap v0
        adj.append((k, 2, 2 * m + k, 2))        # strip v0 <-> bottom cap v0
    for base_i in (m, 2 * m):                   # radial cap-cap edges
        for k in range(m):
            adj.append((base_i + k, 1, base_i + (k + 1) % m, 0))
    model.adjacency = adj
    return model


def _star3d_reference(m: int, z_half: float):
    def outward(i, pos):
        if i < m:                                # side strip
            return np.array([pos[0], pos[1], 0.0])
        if i < 2 * m:                            # top cap
            return np.array([0.0, 0.0, 1.0])
        return np.array([0.0, 0.0, -1.0])        # bottom cap
    return outward


def _orient_outward(model: CadModel, reference) -> None:
    """Set each patch's orientation flag so frame normals match the
    reference outward direction probed near the patch center."""
    for i, p in enumerate(model.patches):
        (au, bu), (av, bv) = p.domain
        fr = p.frame(0.5 * (au + bu), 0.37 * av + 0.63 * bv)
        ref = reference(i, fr.position)
        d = float(np.dot(fr.normal, ref))
        if d == 0:
            raise ModelError(f"cannot orient patch {i}")
        p.orientation = p.orientation if d > 0 else -p.orientation


# ---------------------------------------------------------------------------
# six-patch sphere
# ---------------------------------------------------------------------------
def _planar_arc_shoulder(a2, b2, center, radius):
    """Middle control point and weight of a rational-quadratic arc; the
    shoulder sits on the bisector at distance radius / cos(half-angle)."""
    c = np.asarray(center, dtype=float)
    va = np.asarray(a2, dtype=float) - c
    vb = np.asarray(b2, dtype=float) - c
    cosg = float(np.dot(va, vb)) / radius ** 2
    w = np.sqrt((1.0 + cosg) / 2.0)
    bis = va + vb
    bis = bis / np.linalg.norm(bis)
    m = c + radius / w * bis
    return m, w


def _master_planar_net(w0: float = 1.0):
    """Biquadratic net in the stereographic plane: a curvilinear square whose
    edges are circular arcs (images of the cube cell's great-circle edges)."""
    c = (np.sqrt(3.0) - 1.0) / 2.0
    corners = {
        (-1, -1): np.array([-c, -c]), (1, -1): np.array([c, -c]),
        (1, 1): np.array([c, c]), (-1, 1): np.array([-c, c]),
    }
    r = np.sqrt(2.0)
    P = np.zeros((3, 3))
    Q = np.zeros((3, 3))
    W = np.ones((3, 3))
    for (i, j), xy in (((0, 0), corners[(-1, -1)]), ((2, 0), corners[(1, -1)]),
                       ((2, 2), corners[(1, 1)]), ((0, 2), corners[(-1, 1)])):
        P[i, j], Q[i, j] = xy
    # the four bounding circles have radius sqrt(2) and centers on the far
    # side of the square, so each edge arc bulges slightly outward
    edges = [
        ((0, 0), (2, 0), np.array([0.0, 1.0]), (1, 0)),    # bottom, j = 0
        ((0, 2), (2, 2), np.array([0.0, -1.0]), (1, 2)),   # top, j = 2
        ((0, 0), (0, 2), np.array([1.0, 0.0]), (0, 1)),    # left, i = 0
        ((2, 0), (2, 2), np.array([-1.0, 0.0]), (2, 1)),   # right, i = 2
    ]
    for a_idx, b_idx, center, m_idx in edges:
        a2 = np.array([P[a_idx], Q[a_idx]])
        b2 = np.array([P[b_idx], Q[b_idx]])
        m, w = _planar_arc_shoulder(a2, b2, center, r)
        P[m_idx], Q[m_idx] = m
        W[m_idx] = w
    P[1, 1], Q[1, 1], W[1, 1] = 0.0, 0.0, w0
    # homogeneous planar coordinates (P*w, Q*w, w)
    return P * W, Q * W, W


def _bernstein_product(Fa: np.ndarray, Fb: np.ndarray) -> np.ndarray:
    """Coefficients of the product of two biquadratic Bernstein polynomials
    in the degree (4, 4) Bernstein basis."""
    out = np.zeros((5, 5))
    for i in range(3):
        for k in range(3):
            for j in range(3):
                for l in range(3):
                    m, n = i + j, k + l
                    out[m, n] += (comb(2, i) * comb(2, j) * comb(2, k) * comb(2, l)
                                  / (comb(4, m) * comb(4, n))) * Fa[i, k] * Fb[j, l]
    return out


def _master_quartic_net(w0: float = 1.0):
    """Stereographic lift of the planar net to a biquartic homogeneous net on
    the unit sphere: x = (2Pw, 2Qw, w^2-P^2-Q^2) / (w^2+P^2+Q^2)."""
    Pw, Qw, W = _master_planar_net(w0)
    pp = _bernstein_product(Pw, Pw)
    qq = _bernstein_product(Qw, Qw)
    ww = _bernstein_product(W, W)
    X = 2.0 * _bernstein_product(Pw, W)
    Y = 2.0 * _bernstein_product(Qw, W)
    Z = ww - pp - qq
    Wh = ww + pp + qq
    return np.stack([X, Y, Z, Wh], axis=-1)       # (5, 5, 4)


_FACE_ROTATIONS = {
    "+z": np.eye(3),
    "-z": np.diag([1.0, -1.0, -1.0]),
    "+x": np.array([[0.0, 0.0, 1.0], [0.0, 1.0, 0.0], [-1.0, 0.0, 0.0]]),
    "-x": np.array([[0.0, 0.0, -1.0], [0.0, 1.0, 0.0], [1.0, 0.0, 0.0]]),
    "+y": np.array([[1.0, 0.0, 0.0], [0.0, 0.0, -1.0], [0.0, 1.0, 0.0]]),
    "-y": np.array([[1.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, -1.0, 0.0]]),
}


def _sphere_patches(deform=None) -> list:
    base = _master_quartic_net()
    knots = [0.0] * 5 + [1.0] * 5
    patches = []
    for key in ("+z", "-z", "+x", "-x", "+y", "-y"):
        R = _FACE_ROTATIONS[key]
        net_h = base.copy()
        net_h[..., :3] = net_h[..., :3] @ R.T
        w = net_h[..., 3]
        ctrl = net_h[..., :3] / w[..., None]
        if deform is not None:
            ctrl = ctrl * deform(ctrl)[..., None]
        patches.append(NurbsSurface(4, 4, knots, knots, ctrl, w))
    return patches


def make_sphere6() -> CadModel:
    patches = _sphere_patches()
    model = CadModel(3, patches, [], name="sphere6",
                     inside_oracle=lambda pts: np.linalg.norm(pts, axis=1) < 1.0)
    _orient_outward(model, lambda i, pos: pos)
    model.adjacency = derive_adjacency(model)
    if len(model.adjacency) != 12:
        raise ModelError("sphere adjacency derivation failed")
    return model


def _radial_bump(ctrl: np.ndarray) -> np.ndarray:
    d = ctrl / np.linalg.norm(ctrl, axis=-1, keepdims=True)
    q = d[..., 0] ** 4 + d[..., 1] ** 4 + d[..., 2] ** 4   # in [1/3, 1]
    return 1.0 + 0.15 * (q - 0.6) / 0.4


def make_deformed_sphere() -> CadModel:
    # shared boundary control rows transform identically (the bump depends
    # only on the control point itself), so the model stays watertight
    patches = _sphere_patches(deform=_radial_bump)
    model = CadModel(3, patches, [], name="deformed-sphere")
    _orient_outward(model, lambda i, pos: pos)
    model.adjacency = derive_adjacency(model)
    if len(model.adjacency) != 12:
        raise ModelError("deformed-sphere adjacency derivation failed")
    return model


# ---------------------------------------------------------------------------
# subdivided Bezier chain
# ---------------------------------------------------------------------------
_BEZIER_BASE = np.array([[0.0, 0.0], [1.0, 2.0], [3.0, -1.0], [4.0, 1.0]])


def _decasteljau_split(ctrl: np.ndarray):
    """Split a cubic Bezier at its parametric midpoint (exact)."""
    p = ctrl
    a = 0.5 * (p[:-1] + p[1:])
    b = 0.5 * (a[:-1] + a[1:])
    c = 0.5 * (b[0] + b[1])
    left = np.array([p[0], a[0], b[0], c])
    right = np.array([c, b[1], a[2], p[3]])
    return left, right


def make_subdivided_bezier(levels: int = 0) -> CadModel:
    if levels < 0 or levels > 12:
        raise ModelError(f"levels must be in [0, 12], got {levels}")
    segments = [_BEZIER_BASE]
    for _ in range(levels):
        segments = [half for seg in segments for half in _decasteljau_split(seg)]
    patches = []
    for seg in segments:
        patches.append(NurbsCurve(3, [0, 0, 0, 0, 1, 1, 1, 1], seg, np.ones(4)))
    adj = [(k, 1, k + 1, 0) for k in range(len(patches) - 1)]
    return CadModel(2, patches, adj, name=f"subdivided-bezier({levels})",
                    closed=False)


# ---------------------------------------------------------------------------
# registry
# ---------------------------------------------------------------------------
def parse_builtin_name(name: str):
    """Accept 'star2d', 'star2d(2)' or 'star2d(s=2)' forms."""
    m = re.fullmatch(r"([a-z0-9-]+)(?:\(([^)]*)\))?", name.strip())
    if not m:
        raise ModelError(f"cannot parse model name {name!r}")
    base, argstr = m.group(1), m.group(2)
    params = {}
    if argstr:
        for part in argstr.split(","):
            if "=" in part:
                k, v = part.split("=", 1)
                params[k.strip()] = float(v)
            else:
                params["_pos"] = float(part)
    return base, params


def generate_builtin(name: str, **params) -> CadModel:
    base, parsed = parse_builtin_name(name)
    parsed.update(params)
    pos = parsed.pop("_pos", None)
    if base == "sphere6":
        model = make_sphere6()
    elif base == "deformed-sphere":
        model = make_deformed_sphere()
    elif base == "multiarc2d":
        if "n_arcs" in parsed:
            parsed["n_arcs"] = int(parsed["n_arcs"])
        model = make_multiarc2d(**parsed)
    elif base == "star2d":
        model = make_star2d(s=parsed.get("s", pos if pos is not None else 2.0))
    elif base == "star3d":
        model = make_star3d(s=parsed.get("s", pos if pos is not None else 2.0),
                            z_half=parsed.get("z_half", 1.0))
    elif base == "square":
        model = make_square()
    elif base == "disk":
        model = make_disk()
    elif base == "subdivided-bezier":
        lv = parsed.get("levels", pos if pos is not None else 0)
        model = make_subdivided_bezier(levels=int(lv))
    else:
        raise ModelError(f"unknown builtin model {name!r}; "
                         f"choose from {', '.join(BUILTIN_NAMES)}")
    validate_adjacency(model)
    return model
