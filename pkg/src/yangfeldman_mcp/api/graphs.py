"""
Gluing of labeled trees into extended Feynman graphs and evaluation of the
truncated Wightman functions.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from itertools import permutations, product
from typing import Dict, Iterator, List, Optional, Sequence, Tuple, Union

import networkx as nx
import numpy as np
from networkx.utils import UnionFind

from ..utils.label_utils import format_label
from .errors import BudgetExceededError, ConfigError
from .lattice import lattice_frequencies, volume_weights
from .trees import compositions, expand_field
from .types import (
    EdgeKind,
    Endpoint,
    ExtendedGraph,
    FieldType,
    GraphEdge,
    LatticeSpacetime,
    PropagatorSet,
    Tree,
    WightmanResult,
)

logger = logging.getLogger(__name__)

CONTRACTION_BUDGET = 16
SWITCHING_PROFILES = ("none", "adiabatic")
ADIABATIC_BETA_PER_SLICE = 0.5


def adiabatic_beta(lattice: LatticeSpacetime, legs: int = 4) -> float:
    """
    Kaiser shape parameter that puts the edge of the window's main lobe at the
    smallest distance of a sum of `legs` on-shell phase advances from 2*pi*Z.

    Falls back to ADIABATIC_BETA_PER_SLICE * nt when that distance closes.
    """
    thetas = lattice_frequencies(lattice)
    gap = min(legs * float(thetas.min()), 2.0 * np.pi - legs * float(thetas.max()))
    if gap <= 0.0:
        logger.warning("On-shell frequency sums of %d legs reach 2*pi; using the default window", legs)
        return ADIABATIC_BETA_PER_SLICE * lattice.nt
    return 0.5 * lattice.nt * gap


def switching_profile(lattice: LatticeSpacetime, switching: str = "none",
                      beta: Optional[float] = None) -> np.ndarray:
    """
    Temporal switching function chi over sites.

    "adiabatic" is a Kaiser window over the time slices, with shape parameter
    beta (adiabatic_beta of the lattice by default). A time sum against it
    suppresses every frequency beyond 2 * beta / nt per step, so it stands in
    for the vertex integral over all times; the remainder falls off
    exponentially in beta.
    """
    if switching == "none":
        return np.ones(lattice.n_sites)
    if switching != "adiabatic":
        raise ConfigError(f"Unknown switching '{switching}'. Available: {', '.join(SWITCHING_PROFILES)}")
    beta = adiabatic_beta(lattice) if beta is None else beta
    chi = np.kaiser(lattice.nt, beta)
    return np.repeat(chi, lattice.nx)


def interaction_weights(lattice: LatticeSpacetime, switching: str = "none",
                        beta: Optional[float] = None) -> np.ndarray:
    """Volume weight times switching function, the measure of every interaction vertex."""
    return volume_weights(lattice) * switching_profile(lattice, switching, beta)


def _pairings(items: Sequence[int]) -> Iterator[List[Tuple[int, int]]]:
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for k, partner in enumerate(rest):
        remaining = rest[:k] + rest[k + 1:]
        for tail in _pairings(remaining):
            yield [(first, partner)] + tail


def glue_trees(trees: Sequence[Tree], connected: bool = True) -> List[ExtendedGraph]:
    """
    Glue the leaves of one tree per external point into extended graphs.

    Leaves carry the label (tree position,) + leaf label. Every complete pairing
    of the leaves becomes Dplus lines running from the lower to the higher label.

    Args:
        trees: One tree per external point, in operator order.
        connected: Discard pairings that leave the graph disconnected.

    Returns:
        Graphs in pairing enumeration order; empty for an odd number of leaves.
    """
    externals = tuple((i, tree.root_type) for i, tree in enumerate(trees))
    vertex_ids: Dict[Tuple[int, tuple], int] = {}
    vertex_labels = []
    structure: List[GraphEdge] = []
    leaves = []

    for i, tree in enumerate(trees):
        for node in tree.root.walk():
            if not node.is_leaf:
                vertex_ids[(i, node.label)] = len(vertex_labels)
                vertex_labels.append((i + 1,) + node.label)
        if tree.order > 0:
            kind = EdgeKind.GR if tree.trunk == "Gr" else EdgeKind.D
            structure.append(GraphEdge(kind, Endpoint("external", i), Endpoint("internal", vertex_ids[(i, ())])))
        for node in tree.root.walk():
            if node.is_leaf:
                if tree.order == 0:
                    location = Endpoint("external", i)
                else:
                    location = Endpoint("internal", vertex_ids[(i, node.label[:-1])])
                leaves.append(((i + 1,) + node.label, location, i))
            else:
                parent = Endpoint("internal", vertex_ids[(i, node.label)])
                for child in node.children:
                    if not child.is_leaf:
                        structure.append(GraphEdge(EdgeKind.GR, parent, Endpoint("internal", vertex_ids[(i, child.label)])))

    if len(leaves) % 2:
        return []
    leaves.sort(key=lambda leaf: leaf[0])

    graphs = []
    for pairing in _pairings(list(range(len(leaves)))):
        if connected and len(trees) > 1:
            components = UnionFind(range(len(trees)))
            for a, b in pairing:
                components.union(leaves[a][2], leaves[b][2])
            if len({components[i] for i in range(len(trees))}) > 1:
                continue
        lines = tuple(GraphEdge(EdgeKind.DPLUS, leaves[a][1], leaves[b][1]) for a, b in pairing)
        graphs.append(
            ExtendedGraph(
                externals=externals,
                n_internal=len(vertex_labels),
                edges=tuple(structure) + lines,
                trees=tuple(trees),
                pairing=tuple((leaves[a][0], leaves[b][0]) for a, b in pairing),
                vertex_labels=tuple(vertex_labels),
            )
        )
    return graphs


def _kernel(propagators: PropagatorSet, kind: EdgeKind) -> np.ndarray:
    if kind == EdgeKind.GR:
        return propagators.gr_float()
    if kind == EdgeKind.D:
        return propagators.d_float()
    if kind == EdgeKind.DPLUS:
        return propagators.dplus
    return propagators.dtilde


class GraphEvaluator:
    """
    Evaluates graphs on a fixed PropagatorSet, caching values by the canonical
    form of the graph (internal vertices relabeled) and the point assignment.
    """

    def __init__(self, propagators: PropagatorSet, vertex_weights: Optional[np.ndarray] = None):
        if propagators.dplus is None:
            raise ConfigError("Graph evaluation needs a PropagatorSet built with a mode basis")
        self.propagators = propagators
        self.kernels = {kind: _kernel(propagators, kind) for kind in EdgeKind}
        self.vertex_weights = (
            propagators.weights_float() if vertex_weights is None else np.asarray(vertex_weights, dtype=float)
        )
        self._cache: Dict[tuple, complex] = {}
        self.hits = 0

    def evaluate(self, graph: ExtendedGraph, points: Sequence[int]) -> complex:
        key = (canonical_form(graph), tuple(int(x) for x in points))
        if key in self._cache:
            self.hits += 1
            return self._cache[key]
        value = evaluate_graph(graph, self.kernels, points, self.vertex_weights)
        self._cache[key] = value
        return value


def canonical_form(graph: ExtendedGraph) -> tuple:
    """Edge multiset minimized over relabelings of the internal vertices."""

    def encode(mapping):
        encoded = []
        for edge in graph.edges:
            ends = []
            for end in (edge.source, edge.target):
                ends.append((end.kind, mapping[end.index] if end.kind == "internal" else end.index))
            encoded.append((edge.kind.value,) + tuple(ends))
        return tuple(sorted(encoded))

    if graph.n_internal > 5:
        return (graph.n_internal, encode(list(range(graph.n_internal))))
    return (graph.n_internal, min(encode(list(perm)) for perm in permutations(range(graph.n_internal))))


def evaluate_graph(graph: ExtendedGraph, kernels, points: Sequence[int],
                   vertex_weights: np.ndarray) -> complex:
    """
    Contract the propagators of a graph over its internal vertex sites.

    Args:
        graph: The graph.
        kernels: Mapping EdgeKind -> site matrix, or a PropagatorSet.
        points: Site of every external point.
        vertex_weights: Measure of each internal vertex (volume weight times switching).

    Returns:
        The complex graph value; 1 for a graph with no lines.
    """
    if isinstance(kernels, PropagatorSet):
        kernels = {kind: _kernel(kernels, kind) for kind in EdgeKind}
    factor = 1.0 + 0j
    operands = []
    for edge in graph.edges:
        matrix = kernels[edge.kind]
        src, tgt = edge.source, edge.target
        if src.is_external and tgt.is_external:
            factor *= matrix[points[src.index], points[tgt.index]]
        elif src.is_external:
            operands += [matrix[points[src.index], :], [tgt.index]]
        elif tgt.is_external:
            operands += [matrix[:, points[tgt.index]], [src.index]]
        elif src.index == tgt.index:
            operands += [np.diagonal(matrix), [src.index]]
        else:
            operands += [matrix, [src.index, tgt.index]]
    if graph.n_internal == 0:
        return complex(factor)
    for k in range(graph.n_internal):
        operands += [vertex_weights, [k]]
    return complex(factor * np.einsum(*operands, [], optimize="greedy"))


def enumerate_graphs(types: Sequence[FieldType], sigma: int, p: int) -> List[Tuple[tuple, ExtendedGraph]]:
    """All (orders, graph) pairs contributing at order sigma, in enumeration order."""
    graphs: List[Tuple[tuple, ExtendedGraph]] = []
    for orders in compositions(sigma, len(types)):
        tree_lists = [expand_field(a, s, p) for a, s in zip(types, orders)]
        for trees in product(*tree_lists):
            for graph in glue_trees(trees):
                graphs.append((orders, graph))
    return graphs


def evaluate_graph_table(graph: ExtendedGraph, kernels, sites: Sequence[int],
                         vertex_weights: np.ndarray) -> np.ndarray:
    """
    Graph value for every assignment of the external points to the given sites.

    External point k keeps a free index of length len(sites), so one einsum
    covers all point tuples.
    """
    if isinstance(kernels, PropagatorSet):
        kernels = {kind: _kernel(kernels, kind) for kind in EdgeKind}
    sites = np.asarray(sites, dtype=int)
    n_ext = len(graph.externals)
    offset = graph.n_internal

    def label(end: Endpoint) -> int:
        return offset + end.index if end.is_external else end.index

    operands = []
    for edge in graph.edges:
        matrix = kernels[edge.kind]
        src, tgt = edge.source, edge.target
        if src.is_external:
            matrix = matrix[sites, :]
        if tgt.is_external:
            matrix = matrix[:, sites]
        if src == tgt:
            operands += [np.diagonal(matrix), [label(src)]]
        else:
            operands += [matrix, [label(src), label(tgt)]]
    for k in range(graph.n_internal):
        operands += [vertex_weights, [k]]
    output = [offset + k for k in range(n_ext)]
    return np.asarray(np.einsum(*operands, output, optimize="greedy"), dtype=complex)


def truncated_wightman_table(types: Sequence[Union[str, FieldType]], sites: Sequence[int], sigma: int,
                             propagators: PropagatorSet, p: int,
                             vertex_weights: Optional[np.ndarray] = None,
                             budget: int = CONTRACTION_BUDGET) -> np.ndarray:
    """
    Truncated Wightman coefficient at order sigma for every point tuple over sites.

    The graphs are enumerated once and each is contracted with its external
    indices left free.

    Returns:
        Complex tensor of rank len(types), axis k running over sites.
    """
    types = tuple(FieldType(a) for a in types)
    if p * sigma > budget:
        raise BudgetExceededError(f"p*sigma = {p * sigma} exceeds the contraction budget {budget}")
    if propagators.dplus is None:
        raise ConfigError("Graph evaluation needs a PropagatorSet built with a mode basis")
    kernels = {kind: _kernel(propagators, kind) for kind in EdgeKind}
    weights = propagators.weights_float() if vertex_weights is None else np.asarray(vertex_weights, dtype=float)
    graphs = enumerate_graphs(types, sigma, p)
    table = np.zeros((len(sites),) * len(types), dtype=complex)
    for _, graph in graphs:
        table += evaluate_graph_table(graph, kernels, sites, weights)
    logger.debug("Tabulated %d-point function at order %d over %d sites (%d graphs)",
                 len(types), sigma, len(sites), len(graphs))
    return table


def truncated_wightman(types: Sequence[Union[str, FieldType]], points: Sequence[int], sigma: int,
                       propagators: PropagatorSet, p: int, vertex_weights: Optional[np.ndarray] = None,
                       jobs: int = 1, breakdown: bool = False,
                       budget: int = CONTRACTION_BUDGET) -> WightmanResult:
    """
    Coefficient of (-lambda)^sigma in the truncated Wightman function.

    Sums over all compositions sigma_1 + ... + sigma_n = sigma, all tuples of
    labeled trees and all connected gluings.

    Args:
        types: Field type of every external point, in operator order.
        points: External sites.
        sigma: Perturbative order.
        propagators: PropagatorSet with a mode basis.
        p: Interaction power.
        vertex_weights: Vertex measure; the volume weights when omitted.
        jobs: Worker threads for graph evaluation; the sum is reduced in
            enumeration order.
        breakdown: Attach the value of every graph to the result.
        budget: Upper bound for p * sigma.

    Returns:
        WightmanResult with value and number of enumerated graphs.

    Raises:
        BudgetExceededError: If p * sigma exceeds budget.
    """
    types = tuple(FieldType(a) for a in types)
    if len(types) != len(points):
        raise ConfigError(f"Got {len(types)} field types for {len(points)} points")
    if p * sigma > budget:
        raise BudgetExceededError(f"p*sigma = {p * sigma} exceeds the contraction budget {budget}")

    evaluator = GraphEvaluator(propagators, vertex_weights)
    graphs = enumerate_graphs(types, sigma, p)

    if jobs > 1 and len(graphs) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            values = list(pool.map(lambda item: evaluator.evaluate(item[1], points), graphs))
    else:
        values = [evaluator.evaluate(graph, points) for _, graph in graphs]

    total = 0j
    for value in values:
        total += value
    logger.debug("Truncated Wightman %s at order %d: %d graphs, %d cache hits",
                 [a.value for a in types], sigma, len(graphs), evaluator.hits)

    details = []
    if breakdown:
        for (orders, graph), value in zip(graphs, values):
            details.append({
                "orders": list(orders),
                "pairing": [[format_label(a), format_label(b)] for a, b in graph.pairing],
                "value_re": value.real,
                "value_im": value.imag,
            })
    return WightmanResult(
        types=types,
        points=tuple(int(x) for x in points),
        order=sigma,
        p=p,
        value=total,
        graphs_enumerated=len(graphs),
        breakdown=details,
    )


def graph_to_networkx(graph: ExtendedGraph) -> nx.MultiDiGraph:
    """Directed multigraph view; nodes are ("external", i) and ("internal", k)."""
    view = nx.MultiDiGraph()
    for i, a in graph.externals:
        view.add_node(("external", i), field_type=a.value)
    for k in range(graph.n_internal):
        label = graph.vertex_labels[k] if graph.vertex_labels else (k,)
        view.add_node(("internal", k), label=format_label(label))
    for edge in graph.edges:
        view.add_edge((edge.source.kind, edge.source.index), (edge.target.kind, edge.target.index),
                      kind=edge.kind.value)
    return view


def is_connected(graph: ExtendedGraph) -> bool:
    view = graph_to_networkx(graph)
    return view.number_of_nodes() <= 1 or nx.is_weakly_connected(view)


def graph_to_dot(graph: ExtendedGraph, name: str = "graph") -> str:
    lines = [f"digraph {name} {{"]
    for i, a in graph.externals:
        lines.append(f'  x{i} [shape=box, label="x{i + 1} ({a.value})"];')
    for k in range(graph.n_internal):
        lines.append(f'  v{k} [shape=circle, label="{format_label(graph.vertex_labels[k])}"];')
    for edge in graph.edges:
        src = ("x" if edge.source.is_external else "v") + str(edge.source.index)
        tgt = ("x" if edge.target.is_external else "v") + str(edge.target.index)
        lines.append(f'  {src} -> {tgt} [label="{edge.kind.value}"];')
    lines.append("}")
    return "\n".join(lines)
