"""Computation graphs of affine maps and multiplexers.

A network is an immutable DAG over three node kinds:

* ``Input(dim)`` -- the single q-dimensional input;
* ``Affine(a, b, children)`` -- ``a @ concat(children) + b``; with no
  children this is a constant (``a`` is m-by-0 and the value is ``b``);
* ``Mux(first, second, guard)`` -- ``first`` when the scalar guard value
  is <= 0, else ``second``.

All values are exact rationals, so the guard comparison is exact and
evaluation is deterministic.  Networks are pure values: every operation
here returns new objects and never mutates.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence, Union

from .errors import CycleError, DanglingRef, DimError, LayoutError, StructureError
from .rationals import RatLike, mat_vec, rat, rat_mat, rat_vec

Vec = tuple[Fraction, ...]
Mat = tuple[Vec, ...]


@dataclass(frozen=True)
class Input:
    dim: int


@dataclass(frozen=True)
class Affine:
    a: Mat
    b: Vec
    children: tuple[int, ...]

    @property
    def out_dim(self) -> int:
        return len(self.b)


@dataclass(frozen=True)
class Mux:
    first: int
    second: int
    guard: int


Node = Union[Input, Affine, Mux]


def affine(a: Iterable[Iterable[RatLike]], b: Iterable[RatLike], *children: int) -> Affine:
    am = rat_mat(a)
    bv = rat_vec(b)
    if len(am) != len(bv):
        raise DimError(f"affine has {len(am)} matrix rows but {len(bv)} bias entries")
    return Affine(am, bv, tuple(children))


def const(values: Iterable[RatLike]) -> Affine:
    bv = rat_vec(values)
    return Affine(tuple(() for _ in bv), bv, ())


@dataclass(frozen=True)
class Network:
    """A validated network: acyclic, dimension-consistent, single input."""

    nodes: tuple[Node, ...]
    output: int
    input_id: int
    input_dim: int
    output_dim: int
    topo: tuple[int, ...]
    dims: tuple[int, ...]

    def node_dim(self, nid: int) -> int:
        return self.dims[nid]

    @property
    def mux_ids(self) -> tuple[int, ...]:
        return tuple(i for i in self.topo if isinstance(self.nodes[i], Mux))

    @property
    def affine_ids(self) -> tuple[int, ...]:
        return tuple(i for i in self.topo if isinstance(self.nodes[i], Affine))


def _children_of(node: Node) -> tuple[int, ...]:
    if isinstance(node, Input):
        return ()
    if isinstance(node, Affine):
        return node.children
    return (node.first, node.second, node.guard)


def build(nodes: Sequence[Node], output: int) -> Network:
    """Validate a node list and return the finished Network.

    Node ids are positions in ``nodes``.  Raises DanglingRef on unknown
    ids, CycleError if the dependency graph is cyclic, DimError on any
    dimension mismatch, and StructureError if there is not exactly one
    input node or the output node has outgoing edges.
    """
    nodes = tuple(nodes)
    n = len(nodes)
    if not (0 <= output < n):
        raise DanglingRef(f"output id {output} out of range")
    for nid, node in enumerate(nodes):
        for c in _children_of(node):
            if not (0 <= c < n):
                raise DanglingRef(f"node {nid} references unknown id {c}")

    input_ids = [i for i, node in enumerate(nodes) if isinstance(node, Input)]
    if len(input_ids) != 1:
        raise StructureError(f"expected exactly one input node, found {len(input_ids)}")
    input_id = input_ids[0]
    if nodes[input_id].dim < 1:
        raise DimError("input dimension must be positive")

    # Kahn's algorithm; a leftover node means a directed cycle.
    indeg = [0] * n
    dependents: list[list[int]] = [[] for _ in range(n)]
    for nid, node in enumerate(nodes):
        for c in _children_of(node):
            indeg[nid] += 1
            dependents[c].append(nid)
    ready = sorted(i for i in range(n) if indeg[i] == 0)
    topo: list[int] = []
    queue = list(ready)
    while queue:
        nid = queue.pop(0)
        topo.append(nid)
        for d in dependents[nid]:
            indeg[d] -= 1
            if indeg[d] == 0:
                queue.append(d)
    if len(topo) != n:
        cyclic = sorted(set(range(n)) - set(topo))
        raise CycleError(f"dependency cycle through nodes {cyclic}")

    dims = [0] * n
    for nid in topo:
        node = nodes[nid]
        if isinstance(node, Input):
            dims[nid] = node.dim
        elif isinstance(node, Affine):
            width = sum(dims[c] for c in node.children)
            for row in node.a:
                if len(row) != width:
                    raise DimError(
                        f"affine node {nid}: matrix width {len(row)} != child width {width}"
                    )
            if node.out_dim < 1:
                raise DimError(f"affine node {nid} has empty output")
            dims[nid] = node.out_dim
        else:
            if dims[node.first] != dims[node.second]:
                raise DimError(
                    f"mux node {nid}: branch dims {dims[node.first]} != {dims[node.second]}"
                )
            if dims[node.guard] != 1:
                raise DimError(f"mux node {nid}: guard dim {dims[node.guard]} != 1")
            dims[nid] = dims[node.first]

    if dependents[output]:
        raise StructureError(f"output node {output} has outgoing edges")

    return Network(
        nodes=nodes,
        output=output,
        input_id=input_id,
        input_dim=nodes[input_id].dim,
        output_dim=dims[output],
        topo=tuple(topo),
        dims=tuple(dims),
    )


def evaluate(net: Network, x: Sequence[RatLike]) -> Vec:
    """Evaluate the network at ``x`` in exact rational arithmetic."""
    xv = rat_vec(x)
    if len(xv) != net.input_dim:
        raise DimError(f"input has dim {len(xv)}, network expects {net.input_dim}")
    values: dict[int, Vec] = {}
    for nid in net.topo:
        node = net.nodes[nid]
        if isinstance(node, Input):
            values[nid] = xv
        elif isinstance(node, Affine):
            stacked: list[Fraction] = []
            for c in node.children:
                stacked.extend(values[c])
            values[nid] = tuple(
                u + v for u, v in zip(mat_vec(node.a, stacked), node.b)
            )
        else:
            guard = values[node.guard][0]
            values[nid] = values[node.first] if guard <= 0 else values[node.second]
    return values[net.output]


@dataclass(frozen=True)
class GraphMeta:
    """Vertex/edge view of a network's dependency graph."""

    vars: frozenset[int]
    edges: frozenset[tuple[int, int]]
    inputs: frozenset[int]
    outputs: frozenset[int]
    topo_order: tuple[int, ...]


def graph_meta(net: Network) -> GraphMeta:
    """Variables, dependency edges, inputs, outputs, and a topological order.

    Edges run child -> dependent.  ``inputs`` holds input-kind nodes only;
    constant nodes also have no incoming edges but carry no free signal.
    ``outputs`` holds every node without outgoing edges.
    """
    edges = set()
    has_out = set()
    for nid, node in enumerate(net.nodes):
        for c in _children_of(node):
            edges.add((c, nid))
            has_out.add(c)
    sinks = frozenset(i for i in range(len(net.nodes)) if i not in has_out)
    return GraphMeta(
        vars=frozenset(range(len(net.nodes))),
        edges=frozenset(edges),
        inputs=frozenset({net.input_id}),
        outputs=sinks,
        topo_order=net.topo,
    )


@dataclass(frozen=True)
class LayoutEntry:
    node_id: int
    field: str  # "a" or "b"
    shape: tuple[int, int]  # (rows, cols); cols == 1 for "b"


@dataclass(frozen=True)
class ParameterVector:
    """Flat view of every affine weight and bias in a network.

    The layout lists, per affine node in id order, the "a" block
    (row-major) followed by the "b" block.  Any fixed order would do;
    this one is stable and matches construction order for networks
    built front to back.
    """

    theta: Vec
    layout: tuple[LayoutEntry, ...]

    def __len__(self) -> int:
        return len(self.theta)


def _layout_of(net: Network) -> tuple[LayoutEntry, ...]:
    entries = []
    for nid, node in enumerate(net.nodes):
        if isinstance(node, Affine):
            cols = len(node.a[0]) if node.a else 0
            entries.append(LayoutEntry(nid, "a", (len(node.a), cols)))
            entries.append(LayoutEntry(nid, "b", (len(node.b), 1)))
    return tuple(entries)


def params_of(net: Network) -> ParameterVector:
    """Extract the current parameter vector of ``net``."""
    theta: list[Fraction] = []
    for entry in _layout_of(net):
        node = net.nodes[entry.node_id]
        assert isinstance(node, Affine)
        if entry.field == "a":
            for row in node.a:
                theta.extend(row)
        else:
            theta.extend(node.b)
    return ParameterVector(tuple(theta), _layout_of(net))


def bind_params(net: Network, params: ParameterVector) -> Network:
    """Return a copy of ``net`` with affine weights/biases from ``params``.

    The layout must cover exactly the affine nodes of ``net`` with
    matching shapes; otherwise LayoutError.
    """
    expected = _layout_of(net)
    if params.layout != expected:
        raise LayoutError("parameter layout does not match this network")
    total = sum(e.shape[0] * e.shape[1] for e in expected)
    if len(params.theta) != total:
        raise LayoutError(f"theta has {len(params.theta)} entries, layout needs {total}")

    new_nodes: list[Node] = list(net.nodes)
    pos = 0
    i = 0
    while i < len(expected):
        ea, eb = expected[i], expected[i + 1]
        rows, cols = ea.shape
        a_vals = params.theta[pos : pos + rows * cols]
        pos += rows * cols
        b_vals = params.theta[pos : pos + eb.shape[0]]
        pos += eb.shape[0]
        old = net.nodes[ea.node_id]
        assert isinstance(old, Affine)
        new_a = tuple(tuple(a_vals[r * cols : (r + 1) * cols]) for r in range(rows))
        new_nodes[ea.node_id] = Affine(new_a, tuple(b_vals), old.children)
        i += 2
    return build(new_nodes, net.output)


def guard_only_params(net: Network) -> frozenset[int]:
    """Indices of theta components that only ever feed mux guards.

    These are the parameters the weak-gradient rule provably never
    moves: every path from their affine node to the output passes
    through a guard port.
    """
    # A node "reaches a non-guard use" if some dependent uses it as an
    # affine child or mux branch and that dependent (or the output)
    # itself escapes through non-guard paths.
    escapes = {net.output}
    changed = True
    while changed:
        changed = False
        for nid, node in enumerate(net.nodes):
            if isinstance(node, Affine):
                if nid in escapes:
                    for c in node.children:
                        if c not in escapes:
                            escapes.add(c)
                            changed = True
            elif isinstance(node, Mux):
                if nid in escapes:
                    for c in (node.first, node.second):
                        if c not in escapes:
                            escapes.add(c)
                            changed = True
    stuck = []
    pos = 0
    for entry in _layout_of(net):
        count = entry.shape[0] * entry.shape[1]
        if entry.node_id not in escapes:
            stuck.extend(range(pos, pos + count))
        pos += count
    return frozenset(stuck)


class Builder:
    """Incremental network construction with dense integer ids.

    Nodes can only reference earlier ids, so cycles cannot be formed
    here; ``build`` still re-validates everything.
    """

    def __init__(self, input_dim: int):
        self._nodes: list[Node] = [Input(input_dim)]
        self.input = 0
        self.input_dim = input_dim

    def _add(self, node: Node) -> int:
        for c in _children_of(node):
            if not (0 <= c < len(self._nodes)):
                raise DanglingRef(f"reference to undeclared node {c}")
        self._nodes.append(node)
        return len(self._nodes) - 1

    def affine(self, a, b, *children: int) -> int:
        return self._add(affine(a, b, *children))

    def const(self, values) -> int:
        return self._add(const(values))

    def mux(self, first: int, second: int, guard: int) -> int:
        return self._add(Mux(first, second, guard))

    def dim(self, nid: int) -> int:
        node = self._nodes[nid]
        if isinstance(node, Input):
            return node.dim
        if isinstance(node, Affine):
            return node.out_dim
        return self.dim(node.first)

    def proj(self, child: int, index: int) -> int:
        """Scalar coordinate of a node, as a 1-row selector affine."""
        d = self.dim(child)
        if not (0 <= index < d):
            raise DimError(f"projection index {index} out of range for dim {d}")
        row = [Fraction(1) if j == index else Fraction(0) for j in range(d)]
        return self.affine([row], [0], child)

    def stack(self, *children: int) -> int:
        """Concatenation of nodes, as an identity affine over them."""
        width = sum(self.dim(c) for c in children)
        rows = [
            [Fraction(1) if j == i else Fraction(0) for j in range(width)]
            for i in range(width)
        ]
        return self.affine(rows, [0] * width, *children)

    def scale(self, child: int, factor: RatLike) -> int:
        d = self.dim(child)
        f = rat(factor)
        rows = [[f if j == i else Fraction(0) for j in range(d)] for i in range(d)]
        return self.affine(rows, [0] * d, child)

    def add(self, *children: int, coeffs=None, bias=None) -> int:
        """Weighted sum of same-dim nodes (coeffs default to all ones)."""
        dims = [self.dim(c) for c in children]
        if len(set(dims)) != 1:
            raise DimError(f"add over mixed dims {dims}")
        d = dims[0]
        cs = [rat(c) for c in (coeffs if coeffs is not None else [1] * len(children))]
        if len(cs) != len(children):
            raise DimError("one coefficient per child required")
        rows = []
        for i in range(d):
            row = []
            for c in cs:
                row.extend(c if j == i else Fraction(0) for j in range(d))
            rows.append(row)
        bv = bias if bias is not None else [0] * d
        return self.affine(rows, bv, *children)

    def network(self, output: int) -> Network:
        return build(self._nodes, output)
