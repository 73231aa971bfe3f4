import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from yangfeldman_mcp.api.ccr_algebra import CCRAlgebra
from yangfeldman_mcp.api.errors import BudgetExceededError
from yangfeldman_mcp.api.lattice import build_lattice, spacelike_pairs
from yangfeldman_mcp.api.propagators import build_propagators
from yangfeldman_mcp.api.types import FieldType, LatticeConfig, LocalOperator

site_lists = st.lists(st.integers(min_value=0, max_value=15), min_size=1, max_size=2)


def phi(algebra, site):
    return LocalOperator(algebra.generator(site), site)


def test_generators_commute_to_the_commutator_function(exact_algebra):
    for x, y in [(0, 5), (5, 0), (2, 14), (7, 7)]:
        residual = exact_algebra.commutator(exact_algebra.generator(x), exact_algebra.generator(y))
        assert (residual - exact_algebra.constant(exact_algebra.i_d(x, y))).is_zero


def test_exact_cancellation_leaves_no_terms(exact_algebra):
    poly = exact_algebra.normal_form([3, 9, 6])
    assert len(poly - poly) == 0
    assert len(poly.scale(exact_algebra.backend.zero)) == 0
    assert exact_algebra.constant(exact_algebra.backend.zero).is_zero
    residual = exact_algebra.commutator(exact_algebra.generator(0), exact_algebra.generator(5))
    assert (residual - exact_algebra.constant(exact_algebra.i_d(0, 5))).terms == {}


@settings(max_examples=25, deadline=None)
@given(site_lists, site_lists, site_lists)
def test_jacobi_identity(exact_algebra, first, second, third):
    a, b, c = (exact_algebra.normal_form(sites) for sites in (first, second, third))
    com = exact_algebra.commutator
    total = com(a, com(b, c)) + com(b, com(c, a)) + com(c, com(a, b))
    assert total.is_zero


def test_adjoint_reverses_products(exact_algebra):
    forward = exact_algebra.normal_form([3, 9, 6])
    backward = exact_algebra.normal_form([6, 9, 3])
    assert (exact_algebra.adjoint(forward) - backward).is_zero


@pytest.mark.parametrize("p", [3, 4])
def test_tree_expansion_equals_retarded_series_at_first_order(exact_algebra, p):
    for x in range(exact_algebra.lattice.n_sites):
        difference = exact_algebra.interacting_field(x, 1, p) - exact_algebra.retarded_expansion(x, 1, p)
        assert difference.is_zero


def test_tree_expansion_equals_retarded_series_at_second_order(exact_algebra):
    for x in (9, 14):
        difference = exact_algebra.interacting_field(x, 2, 3) - exact_algebra.retarded_expansion(x, 2, 3)
        assert difference.is_zero


@pytest.mark.parametrize("sigma", [1, 2])
def test_interacting_field_is_local(exact_algebra, sigma):
    pairs = spacelike_pairs(exact_algebra.lattice)
    assert any(x // 4 != y // 4 for x, y in pairs)
    for x, y in pairs[:12]:
        assert exact_algebra.check_locality(x, y, sigma, 3).is_zero


def test_first_order_commutator_as_propagator_chains(exact_algebra):
    for x, y in [(13, 2), (6, 9), (15, 15)]:
        difference = exact_algebra.field_commutator(FieldType.LOC, x, y, 1, 4) - exact_algebra.first_order_chains(x, y, 4)
        assert difference.is_zero


def test_timelike_first_order_commutator_does_not_vanish(exact_algebra):
    assert not exact_algebra.first_order_chains(13, 1, 3).is_zero


@pytest.mark.parametrize("sigma,p", [(0, 4), (1, 3), (1, 4), (2, 3)])
def test_outgoing_field_obeys_free_commutation_relations(exact_algebra, sigma, p):
    for x, y in [(12, 14), (13, 4), (1, 15)]:
        assert exact_algebra.check_out_ccr(x, y, sigma, p).is_zero


def test_outgoing_commutator_pieces_sum_to_the_full_commutator(exact_algebra):
    parts = exact_algebra.out_ccr_parts(13, 4, 1, 3)
    combined = parts["I"] - parts["II"] - parts["III"] + parts["IV"]
    assert (combined - exact_algebra.field_commutator(FieldType.OUT, 13, 4, 1, 3)).is_zero


@pytest.mark.parametrize("sites", [(9, 2), (14, 5, 1), (3, 15, 8, 10)])
def test_glz_relation(exact_algebra, sites):
    a, c, *bs = sites
    residual = exact_algebra.check_glz(phi(exact_algebra, a), phi(exact_algebra, c), [phi(exact_algebra, b) for b in bs])
    assert residual.is_zero


@pytest.mark.parametrize("sites", [(11, 3), (14, 6, 1), (15, 2, 9, 4)])
def test_retarded_recursion(exact_algebra, sites):
    b0, *bs = sites
    operators = [LocalOperator(exact_algebra.power(b, 2), b) for b in bs]
    assert exact_algebra.check_retrecursion(phi(exact_algebra, b0), operators).is_zero


def test_retarded_product_of_a_later_insertion_vanishes(exact_algebra):
    assert exact_algebra.retarded_product(phi(exact_algebra, 1), [phi(exact_algebra, 14)]).is_zero


@pytest.mark.parametrize("x,y", [(13, 4), (10, 2)])
def test_retarded_propagator_pulls_out_on_both_sides(exact_algebra, x, y):
    first, second = exact_algebra.check_retpull(1, x, y, 3)
    assert first.is_zero
    assert second.is_zero


def test_order_budgets(exact_algebra):
    with pytest.raises(BudgetExceededError):
        exact_algebra.interacting_field(0, 4, 3)
    with pytest.raises(BudgetExceededError):
        exact_algebra.retarded_expansion(0, 3, 3)
    with pytest.raises(BudgetExceededError):
        exact_algebra.check_out_ccr(0, 1, 3, 3)


def test_field_series(exact_algebra):
    series = exact_algebra.field_series("out", 14, 2, 3)
    assert series.max_order == 2
    assert (series[0] - exact_algebra.generator(14)).is_zero
    assert series[1].degree == 2
    assert exact_algebra.field("in", 14, 1, 3).is_zero


def test_vacuum_expectation_sums_ordered_pairings(float_algebra, float_propagators):
    dplus = float_propagators.dplus
    x, y, z, w = 17, 3, 22, 9
    expected = dplus[x, y] * dplus[z, w] + dplus[x, z] * dplus[y, w] + dplus[x, w] * dplus[y, z]
    value = float_algebra.vacuum_expectation(float_algebra.normal_form([x, y, z, w]))
    assert value == pytest.approx(expected, abs=1e-12)


def test_truncated_vev_of_free_fields(float_algebra, float_propagators):
    gens = [float_algebra.generator(site) for site in (17, 3, 22, 9)]
    assert float_algebra.truncated_vev(gens[:2]) == pytest.approx(float_propagators.dplus[17, 3])
    assert abs(float_algebra.truncated_vev(gens)) <= 1e-12


def test_gram_matrix_of_field_vectors(float_algebra, float_propagators):
    sites = [20, 21, 22, 23, 16]
    gram = float_algebra.gram_matrix([float_algebra.generator(site) for site in sites])
    assert np.allclose(gram, float_propagators.dplus[np.ix_(sites, sites)], atol=1e-12)
    assert np.linalg.eigvalsh(gram).min() >= -1e-10


@pytest.mark.parametrize("j,sigma", [(2, 1), (3, 1), (2, 2)])
def test_retarded_action_on_a_power_is_the_power_of_the_field(exact_algebra, j, sigma):
    for x in (9, 14):
        difference = exact_algebra.retarded_power(x, j, sigma, 3) - exact_algebra.power_expansion(x, j, sigma, 3)
        assert difference.is_zero


@pytest.mark.parametrize("sigma", [1, 2])
def test_interacting_field_is_hermitian(exact_algebra, sigma):
    for x in (10, 14, 15):
        field = exact_algebra.interacting_field(x, sigma, 3)
        assert not field.is_zero
        assert (exact_algebra.adjoint(field) - field).is_zero


def test_smeared_field_is_the_zeroth_order_vector(float_algebra, rng):
    f = rng.normal(size=float_algebra.lattice.n_sites)
    smeared = float_algebra.smeared_field(f)
    for field_type in ("in", "loc", "out"):
        vector = float_algebra.truncated_field_vector(field_type, f, 0, 0.5, 4)
        assert (vector - smeared).max_abs() <= 1e-14
    assert (float_algebra.truncated_field_vector("in", f, 1, 0.5, 4) - smeared).max_abs() <= 1e-14


def test_perturbative_field_vectors_have_a_positive_gram_matrix(float_algebra, rng):
    n_sites = float_algebra.lattice.n_sites
    vectors = []
    for _ in range(4):
        f = np.zeros(n_sites)
        f[rng.choice(n_sites, size=3, replace=False)] = rng.normal(size=3)
        vectors.append(float_algebra.truncated_field_vector(FieldType.LOC, f, 1, 0.5, 4))
    gram = float_algebra.gram_matrix(vectors)
    assert np.allclose(gram, gram.conj().T, atol=1e-12)
    assert np.linalg.eigvalsh(gram).min() >= -1e-10 * np.abs(gram).max()
    unit = float_algebra.constant()
    for k, vector in enumerate(vectors):
        assert float_algebra.state_expectation(vector, unit) == pytest.approx(gram[k, k], abs=1e-12)
        assert gram[k, k].real > 0


def test_state_expectation_of_a_field_square(float_algebra, float_propagators):
    x, y = 21, 6
    creator = float_algebra.generator(y)
    square = float_algebra.normal_form([x, x])
    dplus = float_propagators.dplus
    expected = dplus[y, x] * dplus[x, y] * 2 + dplus[x, x] * dplus[y, y]
    assert float_algebra.state_expectation(creator, square) == pytest.approx(expected, abs=1e-12)


def test_equal_time_insertions_nest_in_either_order(exact_algebra):
    # 5 and 6 share a slice; the time-major key puts 6 first
    b0, b5, b6 = (LocalOperator(exact_algebra.power(site, 2), site) for site in (13, 5, 6))
    com = exact_algebra.commutator
    product = exact_algebra.retarded_product(b0, [b5, b6])
    assert not product.is_zero
    assert (product - com(com(b0.poly, b6.poly), b5.poly)).is_zero
    assert (product - com(com(b0.poly, b5.poly), b6.poly)).is_zero


@pytest.mark.acceptance
def test_interacting_field_is_local_on_the_full_lattice():
    lattice = build_lattice(LatticeConfig(nt=10, nx=6, dt=0.5, dx=1.0, mass=1.0))
    algebra = CCRAlgebra(build_propagators(lattice, "exact", with_modes=False))
    pairs = spacelike_pairs(lattice)
    for x, y in pairs:
        assert algebra.check_locality(x, y, 1, 3).is_zero, (x, y)
    rng = np.random.default_rng(10)
    for index in rng.choice(len(pairs), size=20, replace=False):
        x, y = pairs[index]
        assert algebra.check_locality(x, y, 2, 3).is_zero, (x, y)
