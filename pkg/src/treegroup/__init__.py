"""Exact and Monte Carlo tools for automorphism groups of rooted d-ary trees."""

from .errors import (DomainError, NotFoundError, NotSolvableError, PreconditionError,
                     ResourceError, TreeGroupError, UnsupportedFeatureError)
from .treealg import (PermGroupSpec, TreeAutomorphism, apply, compose, element_order,
                      element_order_exponent, inverse, perm_rank, power, truncate,
                      vertex_index)

__version__ = "0.1.0"

__all__ = [
    "DomainError", "NotFoundError", "NotSolvableError", "PermGroupSpec", "PreconditionError",
    "ResourceError", "TreeAutomorphism", "TreeGroupError", "UnsupportedFeatureError",
    "apply", "compose", "element_order", "element_order_exponent", "inverse", "perm_rank",
    "power", "truncate", "vertex_index",
]
