"""Exception types shared across the package."""


class AmnetError(Exception):
    """Base class for all package errors."""


class CycleError(AmnetError):
    """The node dependency graph contains a directed cycle."""


class DimError(AmnetError):
    """Incompatible dimensions between connected nodes or supplied data."""


class DanglingRef(AmnetError):
    """A node description references an unknown node id."""


class StructureError(AmnetError):
    """The node set violates a structural invariant (input/output shape)."""


class LayoutError(AmnetError):
    """A parameter vector does not match the network's affine layout."""


class LogicError(AmnetError):
    """A formula was requested under a logic that cannot express it."""


class UnboundedError(AmnetError):
    """An operation that needs a bounded input box received none."""


class SolverNotFound(AmnetError):
    """No external solver binary could be resolved."""


class SolverParseError(AmnetError):
    """External solver output could not be parsed."""


class NonlinearUnderEnumerate(AmnetError):
    """The enumeration backend was given a nonlinear (polynomial) query."""


class DivergenceError(AmnetError):
    """Training loss exceeded the divergence threshold."""


class AmnSyntaxError(AmnetError):
    """Syntax error in AMN text, with 1-based line/column position."""

    def __init__(self, message, line, col):
        super().__init__(f"{message} (line {line}, col {col})")
        self.line = line
        self.col = col


class SemanticError(AmnetError):
    """Well-formed AMN text that does not describe a valid network."""
