"""Exception hierarchy shared by all modules and mapped to CLI exit codes."""


class TreeGroupError(Exception):
    """Base class for errors raised by treegroup."""


class DomainError(TreeGroupError, ValueError):
    """Input violates a precondition of the operation."""


class PreconditionError(DomainError):
    """A mathematical precondition (independence, solvability, ...) fails."""


class NotSolvableError(PreconditionError):
    pass


class NotFoundError(TreeGroupError):
    """A bounded search finished without a result."""


class UnsupportedFeatureError(TreeGroupError):
    pass


class ResourceError(TreeGroupError):
    """A configured budget (points, tuples, nodes) would be exceeded."""
