"""Exception types raised across the solver pipeline."""
from __future__ import annotations


class RBFFDError(Exception):
    """Base class for all errors raised by this package."""

    code = "error"


class NodeGenerationError(RBFFDError):
    code = "node_generation"


class BoundaryPointError(RBFFDError):
    code = "not_on_boundary"


class SingularStencil(RBFFDError):
    """The local saddle system of a stencil is (numerically) singular.

    ``node`` holds the index of the offending evaluation point when the
    stencil was built as part of an operator assembly.
    """

    code = "singular_stencil"

    def __init__(self, message: str, node: int | None = None, rcond: float | None = None):
        super().__init__(message)
        self.node = node
        self.rcond = rcond


class MissingNormal(RBFFDError):
    code = "missing_normal"


class SingularGlobalSystem(RBFFDError):
    code = "singular_global_system"


class DegenerateNorm(RBFFDError):
    code = "degenerate_norm"


class ConfigError(RBFFDError):
    code = "config"
