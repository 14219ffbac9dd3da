"""Model JSON and node CSV serialization.

Floats go through repr (JSON) or %.17g (CSV), which round-trips IEEE doubles
bit for bit. Analytic membership oracles attached to built-in models are not
serialized; reloading a model file yields geometry and adjacency only.
"""
from __future__ import annotations

import json

import numpy as np

from .errors import ModelError
from .models import CadModel, validate_adjacency
from .nodes import BOUNDARY, INTERIOR, KIND_CODES, KIND_NAMES, NodeSet
from .nurbs import NurbsCurve, NurbsSurface


# ---------------------------------------------------------------------------
# models
# ---------------------------------------------------------------------------
def model_to_dict(model: CadModel) -> dict:
    patches = []
    for p in model.patches:
        if model.dimension == 2:
            rows = np.column_stack([p.control_points, p.weights])
            patches.append({
                "degree_u": p.degree,
                "knots_u": list(map(float, p.knots)),
                "control_points": rows.tolist(),
                "orientation": p.orientation,
            })
        else:
            nu, nv = p.weights.shape
            rows = np.concatenate([p.control_net.reshape(nu * nv, 3),
                                   p.weights.reshape(nu * nv, 1)], axis=1)
            patches.append({
                "degree_u": p.degree_u,
                "degree_v": p.degree_v,
                "knots_u": list(map(float, p.knots_u)),
                "knots_v": list(map(float, p.knots_v)),
                "control_points": rows.tolist(),
                "orientation": p.orientation,
            })
    return {
        "dimension": model.dimension,
        "name": model.name,
        "patches": patches,
        "adjacency": [list(map(int, a)) for a in model.adjacency],
    }


def _require(d: dict, key: str, where: str):
    if key not in d:
        raise ModelError(f"missing field {key!r} in {where}")
    return d[key]


def model_from_dict(doc: dict) -> CadModel:
    dim = _require(doc, "dimension", "model")
    if dim not in (2, 3):
        raise ModelError(f"dimension must be 2 or 3, got {dim}")
    patches = []
    for k, pd in enumerate(_require(doc, "patches", "model")):
        where = f"patches[{k}]"
        degree_u = int(_require(pd, "degree_u", where))
        knots_u = np.asarray(_require(pd, "knots_u", where), dtype=float)
        rows = np.asarray(_require(pd, "control_points", where), dtype=float)
        orientation = int(pd.get("orientation", 1))
        if rows.ndim != 2 or rows.shape[1] != dim + 1:
            raise ModelError(f"{where}: control point rows must have "
                             f"{dim + 1} entries [coords..., w]")
        if dim == 2:
            patches.append(NurbsCurve(degree_u, knots_u, rows[:, :2], rows[:, 2],
                                      orientation=orientation))
        else:
            degree_v = int(_require(pd, "degree_v", where))
            knots_v = np.asarray(_require(pd, "knots_v", where), dtype=float)
            nu = len(knots_u) - degree_u - 1
            nv = len(knots_v) - degree_v - 1
            if len(rows) != nu * nv:
                raise ModelError(f"{where}: expected {nu * nv} control points "
                                 f"(row-major {nu}x{nv}), got {len(rows)}")
            net = rows[:, :3].reshape(nu, nv, 3)
            w = rows[:, 3].reshape(nu, nv)
            patches.append(NurbsSurface(degree_u, degree_v, knots_u, knots_v,
                                        net, w, orientation=orientation))
    adjacency = [tuple(int(x) for x in a) for a in doc.get("adjacency", [])]
    for k, a in enumerate(adjacency):
        if len(a) != 4:
            raise ModelError(f"adjacency[{k}] must be [patchA, edgeA, patchB, edgeB]")
    model = CadModel(dim, patches, adjacency, name=str(doc.get("name", "")))
    validate_adjacency(model)
    return model


def save_model(model: CadModel, path: str) -> None:
    with open(path, "w", newline="\n") as f:
        json.dump(model_to_dict(model), f, indent=1)
        f.write("\n")


def load_model(path: str) -> CadModel:
    try:
        with open(path) as f:
            doc = json.load(f)
    except OSError as e:
        raise ModelError(f"cannot read model file {path}: {e.strerror}") from e
    except json.JSONDecodeError as e:
        raise ModelError(f"{path}: invalid JSON at line {e.lineno}: {e.msg}") from e
    if not isinstance(doc, dict):
        raise ModelError(f"{path}: top level must be a JSON object")
    return model_from_dict(doc)


# ---------------------------------------------------------------------------
# node sets
# ---------------------------------------------------------------------------
def save_nodes(nodes: NodeSet, path: str) -> None:
    d = nodes.dim
    coord = ["x", "y", "z"][:d]
    ncols = ["nx", "ny", "nz"][:d]
    header = ",".join(coord + ["kind"] + ncols + ["h"])
    lines = [header]
    for i in range(len(nodes)):
        vals = [("%.17g" % v) for v in nodes.positions[i]]
        kind = KIND_NAMES[int(nodes.kinds[i])]
        if nodes.kinds[i] == BOUNDARY:
            nrm = [("%.17g" % v) for v in nodes.normals[i]]
        else:
            nrm = [""] * d
        lines.append(",".join(vals + [kind] + nrm + ["%.17g" % nodes.spacing[i]]))
    with open(path, "w", newline="\n") as f:
        f.write("\n".join(lines) + "\n")


def load_nodes(path: str) -> NodeSet:
    try:
        f = open(path)
    except OSError as e:
        raise ModelError(f"cannot read node file {path}: {e.strerror}") from e
    with f:
        header = f.readline().strip()
        cols = header.split(",")
        if cols[:2] != ["x", "y"] or "kind" not in cols or cols[-1] != "h":
            raise ModelError(f"{path}: unexpected node CSV header {header!r}")
        d = cols.index("kind")
        if cols != (["x", "y", "z"][:d] + ["kind"] + ["nx", "ny", "nz"][:d] + ["h"]):
            raise ModelError(f"{path}: malformed node CSV header {header!r}")
        positions, kinds, normals, spacing = [], [], [], []
        for ln, line in enumerate(f, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 2 * d + 2:
                raise ModelError(f"{path}:{ln}: expected {2 * d + 2} fields, "
                                 f"got {len(parts)}")
            try:
                positions.append([float(v) for v in parts[:d]])
                if parts[d] not in KIND_CODES:
                    raise ValueError(f"unknown kind {parts[d]!r}")
                kind = KIND_CODES[parts[d]]
                kinds.append(kind)
                if kind == BOUNDARY:
                    normals.append([float(v) for v in parts[d + 1:2 * d + 1]])
                else:
                    normals.append([np.nan] * d)
                spacing.append(float(parts[-1]))
            except ValueError as e:
                raise ModelError(f"{path}:{ln}: {e}") from e
    return NodeSet(
        positions=np.asarray(positions, dtype=float).reshape(-1, d),
        kinds=np.asarray(kinds, dtype=np.int8),
        normals=np.asarray(normals, dtype=float).reshape(-1, d),
        spacing=np.asarray(spacing, dtype=float),
    )
