"""Scattered-node generation on NURBS-bounded CAD models, with quality
metrics and meshless PDE validation solvers.

The core pipeline: boundary patches are sampled with an advancing front in
parameter space, the enclosed volume is filled with a dimension-independent
advancing front, and the resulting node sets feed RBF-FD discretizations.
"""
from .errors import (CadfillError, ConfigError, DomainError, ModelError,
                     NumericalError, SingularityError)
from .nodes import INTERIOR, BOUNDARY, NodeSet, NodeSetBuilder
from .index import DynamicPointIndex
from .nurbs import NurbsCurve, NurbsSurface, SurfaceFrame, BoundaryEdge
from .fill import fill_volume, sphere_candidates, unit_directions, ensure_rng
from .surface_fill import (CurveMapping, SurfaceMapping, fill_parametric,
                           parametric_candidates)
from .models import (CadModel, generate_builtin, derive_adjacency,
                     validate_adjacency, star_radius, star_inside_oracle)
from .io import (load_model, save_model, load_nodes, save_nodes,
                 model_from_dict, model_to_dict)
from .sampler import (sample_model_boundary, fill_model, build_inside_tester,
                      InsideTester, is_inside, count_escaped, tau_min_study)
from .quality import (QualityReport, RegularityCurve, default_neighbor_count,
                      local_regularity, regularity_vs_c, separation_distance,
                      fill_distance, grid_probes, surface_probes)
from .rbffd import (stencil_size, phs_exponent, monomial_exponents,
                    build_stencils, compute_weights, compute_all_weights,
                    apply_operator, Laplacian, Partial, SecondPartial,
                    Directional, Identity)
from .pde import (ErrorNorms, error_norms, poisson_reference, navier_reference,
                  solve_sparse, split_boundary_halves, solve_poisson,
                  PoissonResult, solve_heat_implicit, HeatResult,
                  assemble_navier_cauchy, solve_navier_cauchy, NavierResult,
                  DISPLACEMENT, TRACTION)

__version__ = "0.1.0"

__all__ = [
    "CadfillError", "ConfigError", "DomainError", "ModelError",
    "NumericalError", "SingularityError",
    "INTERIOR", "BOUNDARY", "NodeSet", "NodeSetBuilder",
    "DynamicPointIndex",
    "NurbsCurve", "NurbsSurface", "SurfaceFrame", "BoundaryEdge",
    "fill_volume", "sphere_candidates", "unit_directions", "ensure_rng",
    "CurveMapping", "SurfaceMapping", "fill_parametric",
    "parametric_candidates",
    "CadModel", "generate_builtin", "derive_adjacency", "validate_adjacency",
    "star_radius", "star_inside_oracle",
    "load_model", "save_model", "load_nodes", "save_nodes",
    "model_from_dict", "model_to_dict",
    "sample_model_boundary", "fill_model", "build_inside_tester",
    "InsideTester", "is_inside", "count_escaped", "tau_min_study",
    "QualityReport", "RegularityCurve", "default_neighbor_count",
    "local_regularity", "regularity_vs_c", "separation_distance",
    "fill_distance", "grid_probes", "surface_probes",
    "stencil_size", "phs_exponent", "monomial_exponents", "build_stencils",
    "compute_weights", "compute_all_weights", "apply_operator",
    "Laplacian", "Partial", "SecondPartial", "Directional", "Identity",
    "ErrorNorms", "error_norms", "poisson_reference", "navier_reference",
    "solve_sparse", "split_boundary_halves", "solve_poisson", "PoissonResult",
    "solve_heat_implicit", "HeatResult", "assemble_navier_cauchy",
    "solve_navier_cauchy", "NavierResult", "DISPLACEMENT", "TRACTION",
    "__version__",
]
