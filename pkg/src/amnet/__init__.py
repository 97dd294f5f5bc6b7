"""Affine multiplexing networks: exact encodings and verification.

Networks compose affine maps and multiplexers into piecewise-affine
(possibly discontinuous) functions.  Their input-output graphs encode
exactly into linear real arithmetic and big-M mixed-integer systems,
which powers feasibility checking, bisection optimization, weight
training, and Lyapunov-style stability certification, all in exact
rational arithmetic.
"""

from .core import (
    Affine,
    Builder,
    GraphMeta,
    Input,
    Mux,
    Network,
    ParameterVector,
    bind_params,
    build,
    evaluate,
    graph_meta,
    params_of,
)
from .errors import (
    AmnetError,
    AmnSyntaxError,
    CycleError,
    DanglingRef,
    DimError,
    DivergenceError,
    LayoutError,
    LogicError,
    NonlinearUnderEnumerate,
    SemanticError,
    SolverNotFound,
    SolverParseError,
    StructureError,
    UnboundedError,
)
from .rationals import rat, rat_mat, rat_vec
from .sexpr import load_amn, parse_amn, serialize_amn

__version__ = "0.1.0"

__all__ = [
    "Affine",
    "AmnetError",
    "AmnSyntaxError",
    "Builder",
    "CycleError",
    "DanglingRef",
    "DimError",
    "DivergenceError",
    "GraphMeta",
    "Input",
    "LayoutError",
    "LogicError",
    "Mux",
    "Network",
    "NonlinearUnderEnumerate",
    "ParameterVector",
    "SemanticError",
    "SolverNotFound",
    "SolverParseError",
    "StructureError",
    "UnboundedError",
    "bind_params",
    "build",
    "evaluate",
    "graph_meta",
    "load_amn",
    "params_of",
    "parse_amn",
    "rat",
    "rat_mat",
    "rat_vec",
    "serialize_amn",
]
