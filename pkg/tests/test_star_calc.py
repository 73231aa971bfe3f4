import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from yangfeldman_mcp.api.errors import CompatibilityError, DegreeCapError, DomainError
from yangfeldman_mcp.api.star_calc import (
    add,
    chain_rule_series,
    cluster_expand,
    derive_left,
    derive_right,
    functional_from_json,
    functional_to_json,
    involution,
    is_hermitian,
    is_symmetric,
    make_functional,
    max_abs_difference,
    pairing_count,
    partition_count,
    quasifree_functional,
    scale,
    star_exp,
    star_log,
    star_power,
    star_product,
    truncate,
    truncate_direct,
    unit,
    with_degree_cap,
)

N_SITES = 3
WEIGHTS = np.random.default_rng(2024).uniform(0.5, 1.5, size=N_SITES)
seeds = st.integers(min_value=0, max_value=2**16)


def random_tensor(rng, rank):
    shape = (N_SITES,) * rank
    return rng.normal(size=shape) + 1j * rng.normal(size=shape)


def random_truncated(seed, cap=4, amplitude=0.5):
    rng = np.random.default_rng(seed)
    components = [np.asarray(0j)] + [amplitude * random_tensor(rng, n) for n in range(1, cap + 1)]
    return make_functional(components, WEIGHTS)


def random_state(seed, cap=4):
    T = random_truncated(seed, cap)
    return star_exp(T)


def close(W, V, tol=1e-9):
    scale_ = max(max(float(np.max(np.abs(c))) for c in W.components), 1.0)
    return max_abs_difference(W, V) <= tol * scale_


@settings(max_examples=15, deadline=None)
@given(seeds)
def test_log_inverts_exp(seed):
    T = random_truncated(seed)
    assert close(star_log(star_exp(T)), T)


@settings(max_examples=15, deadline=None)
@given(seeds)
def test_exp_inverts_log(seed):
    W = random_state(seed)
    assert close(star_exp(star_log(W)), W)


@settings(max_examples=10, deadline=None)
@given(seeds)
def test_series_exponential_matches_partition_sum(seed):
    T = random_truncated(seed)
    assert close(star_exp(T), cluster_expand(T))


@settings(max_examples=10, deadline=None)
@given(seeds)
def test_series_truncation_matches_partition_recursion(seed):
    W = random_state(seed)
    assert close(truncate(W), truncate_direct(W))


@settings(max_examples=10, deadline=None)
@given(seeds, seeds, seeds)
def test_star_product_is_associative_and_commutative(a, b, c):
    W, V, U = random_state(a, 3), random_state(b, 3), random_state(c, 3)
    assert close(star_product(star_product(W, V), U), star_product(W, star_product(V, U)))
    assert close(star_product(W, V), star_product(V, W))


@settings(max_examples=10, deadline=None)
@given(seeds, seeds)
def test_derivation_obeys_leibniz_rule(a, b):
    W, V = random_state(a), random_state(b)
    f = random_tensor(np.random.default_rng(a + 1), 1)
    lhs = derive_left(f, star_product(W, V))
    rhs = add(
        star_product(derive_left(f, W), with_degree_cap(V, 3)),
        star_product(with_degree_cap(W, 3), derive_left(f, V)),
    )
    assert close(lhs, rhs)


def test_exp_turns_sums_into_products():
    S, T = random_truncated(1, 4), random_truncated(2, 4)
    assert close(star_exp(add(S, T)), star_product(star_exp(S), star_exp(T)))


def test_unit_is_neutral():
    W = random_state(3)
    assert close(star_product(unit(N_SITES, 4, W.weights), W), W)
    assert close(star_power(W, 0), unit(N_SITES, 4, W.weights))
    assert close(star_power(W, 2), star_product(W, W))


@pytest.mark.parametrize("seed", [5, 6])
def test_chain_rule_for_one_sided_insertions(seed):
    cap = 4
    T = random_truncated(seed, cap)
    E = star_exp(T)
    rng = np.random.default_rng(seed)
    f, g = random_tensor(rng, 1), random_tensor(rng, 1)
    lhs = derive_left(f, derive_right(g, E))
    rhs = star_product(with_degree_cap(E, cap - 2), chain_rule_series(T, f, g, cap - 2))
    assert close(lhs, rhs)


def test_chain_rule_with_rank_two_and_scalar_insertions():
    cap = 4
    T = random_truncated(7, cap)
    E = star_exp(T)
    f2 = random_tensor(np.random.default_rng(8), 2)
    lhs = scale(derive_left(f2, E), 2.0)
    rhs = star_product(with_degree_cap(E, cap - 2), chain_rule_series(T, f2, np.asarray(2.0), cap - 2))
    assert close(lhs, rhs)


def test_chain_rule_needs_higher_truncated_components():
    T = random_truncated(9, 2)
    f = random_tensor(np.random.default_rng(9), 2)
    with pytest.raises(DegreeCapError):
        chain_rule_series(T, f, f, 2)
    relaxed = chain_rule_series(T, f, f, 2, assume_vanishing=True)
    assert relaxed.degree_cap == 2


def test_domain_errors():
    T = random_truncated(10)
    shifted = make_functional([np.asarray(0.5 + 0j)] + T.components[1:], T.weights)
    with pytest.raises(DomainError):
        star_exp(shifted)
    with pytest.raises(DomainError):
        star_log(T)
    with pytest.raises(DomainError):
        truncate_direct(T)


def test_mismatched_caps_are_rejected():
    with pytest.raises(DegreeCapError):
        star_product(random_state(1, 3), random_state(2, 4))
    with pytest.raises(DegreeCapError):
        derive_left(random_tensor(np.random.default_rng(0), 3), random_state(1, 2))


def test_mismatched_weights_are_rejected():
    W = random_state(1, 3)
    V = make_functional(random_state(2, 3).components, 2.0 * WEIGHTS)
    with pytest.raises(CompatibilityError):
        star_product(W, V)
    with pytest.raises(CompatibilityError):
        add(W, V)
    with pytest.raises(CompatibilityError):
        max_abs_difference(W, V)


def test_quasifree_functional_is_hermitian_and_truncates_to_its_two_point_function(float_propagators):
    sites = [16, 17, 18, 19, 20]
    dplus = float_propagators.dplus[np.ix_(sites, sites)]
    W = quasifree_functional(dplus, np.full(len(sites), 0.5), 4)
    assert is_hermitian(W)
    T = truncate(W)
    assert np.allclose(T[2], dplus, atol=1e-12)
    assert np.allclose(T[1], 0.0) and np.allclose(T[3], 0.0) and np.allclose(T[4], 0.0, atol=1e-12)
    assert np.allclose(W[4].reshape(-1).sum(), 3 * dplus.sum() ** 2)


def test_involution_and_symmetry():
    f = random_tensor(np.random.default_rng(11), 3)
    assert np.allclose(involution(involution(f)), f)
    symmetric = f + f.transpose(1, 0, 2) + f.transpose(2, 1, 0) + f.transpose(0, 2, 1) + f.transpose(1, 2, 0) + f.transpose(2, 0, 1)
    assert is_symmetric(symmetric)
    assert not is_symmetric(f)


def test_json_form_preserves_the_functional():
    W = random_state(12, 3)
    data = functional_to_json(W)
    assert len(data["components"]) == 4
    assert close(functional_from_json(data), W, tol=0.0)
    data["degree_cap"] = 5
    with pytest.raises(DegreeCapError):
        functional_from_json(data)


@pytest.mark.parametrize("n,partitions,pairings", [(0, 1, 1), (2, 2, 1), (4, 15, 3), (5, 52, 0), (6, 203, 15)])
def test_partition_and_pairing_counts(n, partitions, pairings):
    assert partition_count(n) == partitions
    assert pairing_count(n) == pairings
