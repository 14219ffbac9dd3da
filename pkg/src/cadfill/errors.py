"""Exception hierarchy.

CLI mapping: ModelError and its subclasses exit 1, NumericalError exits 2.
"""


class CadfillError(Exception):
    """Base class for all package errors."""


class ModelError(CadfillError):
    """Invalid model: bad file, failed adjacency check, unknown builtin."""


class DomainError(CadfillError):
    """Parameter outside its allowed range (knot span, Λ rectangle)."""


class SingularityError(CadfillError):
    """Degenerate Jacobian at an evaluation point."""


class ConfigError(CadfillError):
    """Invalid configuration value (τ ≤ 0, bad candidate count, ...)."""


class NumericalError(CadfillError):
    """Numerical failure: singular stencil system, solver non-convergence."""
