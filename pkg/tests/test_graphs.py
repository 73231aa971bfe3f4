import numpy as np
import pytest

from yangfeldman_mcp.api.ccr_algebra import CCRAlgebra
from yangfeldman_mcp.api.errors import BudgetExceededError, ConfigError
from yangfeldman_mcp.api.experiments import _oracle_truncated
from yangfeldman_mcp.api.graphs import (
    GraphEvaluator,
    adiabatic_beta,
    canonical_form,
    enumerate_graphs,
    glue_trees,
    graph_to_dot,
    graph_to_networkx,
    interaction_weights,
    is_connected,
    switching_profile,
    truncated_wightman,
    truncated_wightman_table,
)
from yangfeldman_mcp.api.lattice import build_lattice, spacelike_pairs
from yangfeldman_mcp.api.propagators import build_propagators
from yangfeldman_mcp.api.trees import expand_field
from yangfeldman_mcp.api.types import EdgeKind, FieldType, LatticeConfig


def test_bare_leaves_glue_into_one_two_point_line():
    trees = [expand_field("in", 0, 4)[0], expand_field("in", 0, 4)[0]]
    graphs = glue_trees(trees)
    assert len(graphs) == 1
    (edge,) = graphs[0].edges
    assert edge.kind == EdgeKind.DPLUS
    assert edge.source.is_external and edge.target.is_external


def test_free_two_point_function(float_propagators):
    result = truncated_wightman(["in", "in"], [3, 17], 0, float_propagators, 4)
    assert result.graphs_enumerated == 1
    assert result.value == pytest.approx(float_propagators.dplus[3, 17])


def test_quasifree_four_point_function_vanishes(float_propagators):
    result = truncated_wightman(["in"] * 4, [0, 5, 10, 20], 0, float_propagators, 4)
    assert result.graphs_enumerated == 0
    assert result.value == 0


def test_disconnected_gluings_are_dropped():
    trees = [expand_field("in", 0, 4)[0]] * 4
    assert glue_trees(trees) == []
    all_graphs = glue_trees(trees, connected=False)
    assert len(all_graphs) == 3
    assert not any(is_connected(graph) for graph in all_graphs)


def test_outgoing_four_point_graph_count():
    graphs = enumerate_graphs([FieldType.OUT] * 4, 1, 4)
    assert len(graphs) == 24
    assert all(is_connected(graph) for _, graph in graphs)
    for orders, graph in graphs:
        assert sum(orders) == 1
        assert graph.n_internal == 1
        assert sum(1 for edge in graph.edges if edge.kind == EdgeKind.D) == 1


def test_odd_leaf_count_gives_no_graphs():
    assert enumerate_graphs([FieldType.LOC, FieldType.IN], 1, 3) == []


@pytest.mark.parametrize(
    "types,points,sigma,p",
    [
        (["loc", "in"], [20, 3], 1, 4),
        (["loc", "loc"], [21, 14], 1, 4),
        (["out", "loc"], [22, 9], 2, 3),
        (["in", "loc", "out"], [1, 18, 23], 1, 3),
        (["loc", "out", "in", "loc"], [16, 21, 2, 13], 1, 4),
    ],
)
def test_graph_sum_matches_wick_oracle(float_propagators, float_algebra, types, points, sigma, p):
    graph = truncated_wightman(types, points, sigma, float_propagators, p).value
    oracle = _oracle_truncated(float_algebra, types, points, sigma, p)
    assert abs(graph - oracle) <= 1e-10 * max(1.0, abs(oracle))


def test_table_matches_pointwise_values(float_propagators):
    sites = [16, 18, 21]
    table = truncated_wightman_table(["out", "loc", "in"], sites, 1, float_propagators, 3)
    assert table.shape == (3, 3, 3)
    for i, x in enumerate(sites):
        for j, y in enumerate(sites):
            for k, z in enumerate(sites):
                value = truncated_wightman(["out", "loc", "in"], [x, y, z], 1, float_propagators, 3).value
                assert table[i, j, k] == pytest.approx(value, abs=1e-12)


def test_parallel_evaluation_is_deterministic(float_propagators):
    types, points = ["out"] * 4, [20, 21, 22, 23]
    serial = truncated_wightman(types, points, 1, float_propagators, 4, jobs=1)
    parallel = truncated_wightman(types, points, 1, float_propagators, 4, jobs=3)
    assert serial.value == parallel.value


def test_breakdown_lists_every_graph(float_propagators):
    result = truncated_wightman(["loc", "in"], [20, 3], 1, float_propagators, 4, breakdown=True)
    assert len(result.breakdown) == result.graphs_enumerated
    total = sum(entry["value_re"] + 1j * entry["value_im"] for entry in result.breakdown)
    assert total == pytest.approx(result.value)
    assert all(len(entry["pairing"]) == 2 for entry in result.breakdown)


def test_evaluator_caches_equivalent_graphs(float_propagators):
    evaluator = GraphEvaluator(float_propagators)
    (_, graph), *_ = enumerate_graphs([FieldType.LOC, FieldType.IN], 1, 4)
    first = evaluator.evaluate(graph, [20, 3])
    second = evaluator.evaluate(graph, [20, 3])
    assert first == second
    assert evaluator.hits == 1
    assert canonical_form(graph) == canonical_form(graph)


def test_contraction_budget(float_propagators):
    with pytest.raises(BudgetExceededError):
        truncated_wightman(["loc", "in"], [20, 3], 5, float_propagators, 4)
    with pytest.raises(BudgetExceededError):
        truncated_wightman_table(["loc", "in"], [20, 3], 5, float_propagators, 4)


def test_mismatched_points_are_rejected(float_propagators):
    with pytest.raises(ConfigError):
        truncated_wightman(["loc", "in"], [20], 1, float_propagators, 4)


def test_graph_views():
    (_, graph), *_ = enumerate_graphs([FieldType.OUT] * 4, 1, 4)
    view = graph_to_networkx(graph)
    assert view.number_of_nodes() == 5
    assert view.number_of_edges() == len(graph.edges)
    dot = graph_to_dot(graph)
    assert dot.startswith("digraph graph {")
    assert '[label="D"]' in dot


def test_switching_profiles(small_lattice):
    assert np.all(switching_profile(small_lattice) == 1.0)
    chi = switching_profile(small_lattice, "adiabatic").reshape(small_lattice.nt, small_lattice.nx)
    assert np.allclose(chi[:, 0], np.kaiser(small_lattice.nt, adiabatic_beta(small_lattice)))
    assert np.allclose(chi, chi[::-1])
    assert np.all(chi[0] < chi[small_lattice.nt // 2])
    assert np.allclose(switching_profile(small_lattice, "adiabatic", beta=0.0), 1.0)
    weights = interaction_weights(small_lattice, "adiabatic")
    assert np.allclose(weights, 0.5 * chi.reshape(-1))
    with pytest.raises(ConfigError):
        switching_profile(small_lattice, "gauss")
    with pytest.raises(ConfigError):
        switching_profile(small_lattice, "hann")


def test_adiabatic_beta_follows_the_frequency_gap(caplog):
    lattice = build_lattice(LatticeConfig(nt=24, nx=8, dt=0.5, dx=1.0, mass=1.0))
    # 4 theta_max = 4 arccos(3/8) is the sum closest to 2 pi
    assert adiabatic_beta(lattice) == pytest.approx(12.0 * (2.0 * np.pi - 4.0 * np.arccos(0.375)), rel=1e-12)
    light = build_lattice(LatticeConfig(nt=24, nx=8, dt=0.5, dx=1.0, mass=0.5))
    assert adiabatic_beta(light) == pytest.approx(96.0 * np.arcsin(0.125), rel=1e-12)
    massless = build_lattice(LatticeConfig(nt=24, nx=8, dt=0.5, dx=1.0, mass=0.0))
    assert adiabatic_beta(massless) == pytest.approx(12.0)
    assert "reach 2*pi" in caplog.text


def test_switched_vertices_match_switched_oracle(float_propagators):
    weights = interaction_weights(float_propagators.lattice, "adiabatic")
    algebra = CCRAlgebra(float_propagators, switching="adiabatic")
    types, points = ["loc", "in"], [21, 2]
    graph = truncated_wightman(types, points, 1, float_propagators, 4, vertex_weights=weights).value
    oracle = _oracle_truncated(algebra, types, points, 1, 4)
    assert abs(graph - oracle) <= 1e-10 * max(1.0, abs(oracle))


@pytest.mark.parametrize(
    "types,points,sigma,p",
    [
        (["loc", "loc"], [21, 14], 1, 4),
        (["out", "in", "loc"], [22, 1, 17], 1, 3),
        (["loc", "out", "in", "loc"], [16, 21, 2, 13], 1, 4),
        (["loc", "out"], [19, 10], 2, 3),
    ],
)
def test_truncated_functions_are_hermitian(float_propagators, types, points, sigma, p):
    forward = truncated_wightman(types, points, sigma, float_propagators, p).value
    backward = truncated_wightman(types[::-1], points[::-1], sigma, float_propagators, p).value
    assert abs(forward.conjugate() - backward) <= 1e-12 * max(1.0, abs(forward))


@pytest.mark.parametrize("sigma", [1, 2])
def test_interacting_two_point_function_commutes_at_spacelike_separation(float_propagators, sigma):
    pairs = spacelike_pairs(float_propagators.lattice)
    late = [(x, y) for x, y in pairs if x >= 8 and y >= 8]
    assert late
    for x, y in late:
        forward = truncated_wightman(["loc", "loc"], [x, y], sigma, float_propagators, 4).value
        backward = truncated_wightman(["loc", "loc"], [y, x], sigma, float_propagators, 4).value
        assert abs(forward - backward) <= 1e-10 * max(1.0, abs(forward))


@pytest.mark.acceptance
def test_graph_sums_match_the_oracle_on_the_full_lattice():
    lattice = build_lattice(LatticeConfig(nt=12, nx=6, dt=0.5, dx=1.0, mass=1.0))
    propagators = build_propagators(lattice)
    algebra = CCRAlgebra(propagators)
    rng = np.random.default_rng(12)
    names = [a.value for a in FieldType]
    # (p, sigma, n) with n + sigma * (p - 2) even
    shapes = [(4, 1, 2), (4, 1, 4), (3, 1, 3), (3, 2, 2), (4, 0, 2)]
    for k in range(50):
        p, sigma, n = shapes[k % len(shapes)]
        types = [names[i] for i in rng.integers(0, len(names), size=n)]
        points = [int(s) for s in rng.choice(lattice.n_sites, size=n, replace=False)]
        graph = truncated_wightman(types, points, sigma, propagators, p).value
        oracle = _oracle_truncated(algebra, types, points, sigma, p)
        assert abs(graph - oracle) <= 1e-10 * max(1.0, abs(oracle)), (types, points, sigma, p)
