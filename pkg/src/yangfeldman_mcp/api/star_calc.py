"""
The star algebra of degree-truncated Wightman functionals.

A functional is the sequence (W_0, ..., W_N) of complex tensors over lattice
sites. The product splits the arguments of every component into an ordered
subset and its complement; it is commutative, its unit is (1, 0, ..., 0) and
power series converge on functionals with vanishing degree-0 component.
"""

import logging
from itertools import combinations, product
from math import factorial
from typing import Iterable, Iterator, List, Optional, Sequence, Tuple

import numpy as np
from sympy.utilities.iterables import multiset_partitions

from .errors import CompatibilityError, DegreeCapError, DomainError
from .types import Functional

logger = logging.getLogger(__name__)

DOMAIN_TOLERANCE = 1e-12


def _component(value, n_sites: int, degree: int) -> np.ndarray:
    array = np.asarray(value, dtype=complex)
    expected = (n_sites,) * degree
    if array.shape != expected:
        raise ValueError(f"Degree-{degree} component must have shape {expected}, got {array.shape}")
    return array


def make_functional(components: Sequence, weights: np.ndarray) -> Functional:
    """Wrap components (W_0 first) into a Functional, checking every shape."""
    weights = np.asarray(weights, dtype=float)
    n_sites = len(weights)
    arrays = [_component(c, n_sites, n) for n, c in enumerate(components)]
    return Functional(components=arrays, degree_cap=len(arrays) - 1, weights=weights)


def zero(n_sites: int, degree_cap: int, weights: Optional[np.ndarray] = None) -> Functional:
    weights = np.ones(n_sites) if weights is None else np.asarray(weights, dtype=float)
    components = [np.zeros((n_sites,) * n, dtype=complex) for n in range(degree_cap + 1)]
    return Functional(components=components, degree_cap=degree_cap, weights=weights)


def unit(n_sites: int, degree_cap: int, weights: Optional[np.ndarray] = None) -> Functional:
    """The unit 1 = (1, 0, 0, ...)."""
    result = zero(n_sites, degree_cap, weights)
    result.components[0] = np.asarray(1.0 + 0j)
    return result


def like(W: Functional, components: List[np.ndarray]) -> Functional:
    return Functional(components=components, degree_cap=len(components) - 1, weights=W.weights)


def _check_compatible(W: Functional, V: Functional) -> None:
    if W.degree_cap != V.degree_cap:
        raise DegreeCapError(f"Functionals have different degree caps {W.degree_cap} and {V.degree_cap}")
    if W.n_sites != V.n_sites:
        raise DegreeCapError(f"Functionals live on {W.n_sites} and {V.n_sites} sites")
    if not np.array_equal(W.weights, V.weights):
        raise CompatibilityError("Functionals carry different volume weights")


def add(W: Functional, V: Functional) -> Functional:
    _check_compatible(W, V)
    return like(W, [a + b for a, b in zip(W.components, V.components)])


def subtract(W: Functional, V: Functional) -> Functional:
    _check_compatible(W, V)
    return like(W, [a - b for a, b in zip(W.components, V.components)])


def scale(W: Functional, factor: complex) -> Functional:
    return like(W, [factor * a for a in W.components])


def linear_combination(terms: Iterable[Tuple[complex, Functional]]) -> Functional:
    result = None
    for factor, W in terms:
        result = scale(W, factor) if result is None else add(result, scale(W, factor))
    if result is None:
        raise ValueError("linear_combination needs at least one term")
    return result


def with_degree_cap(W: Functional, degree_cap: int) -> Functional:
    """Explicitly drop components above degree_cap, or pad with zeros up to it."""
    if degree_cap < 0:
        raise DegreeCapError(f"Degree cap must be nonnegative, got {degree_cap}")
    components = list(W.components[: degree_cap + 1])
    for n in range(len(components), degree_cap + 1):
        components.append(np.zeros((W.n_sites,) * n, dtype=complex))
    return like(W, components)


def max_abs_difference(W: Functional, V: Functional) -> float:
    _check_compatible(W, V)
    return max(float(np.max(np.abs(a - b))) if a.size else 0.0 for a, b in zip(W.components, V.components))


def _place(tensor: np.ndarray, slots: Sequence[int]) -> np.ndarray:
    """Move axis k of tensor to position slots[k]."""
    return np.transpose(tensor, np.argsort(slots))


def star_product(W: Functional, V: Functional) -> Functional:
    """
    (W * V)_n(x_1..x_n) = sum over S of W_|S|(x_S) V_{n-|S|}(x_{S^c}), both in
    their original order.

    Raises:
        DegreeCapError: If the degree caps differ.
        CompatibilityError: If the volume weights differ.
    """
    _check_compatible(W, V)
    components = []
    for n in range(W.degree_cap + 1):
        total = np.zeros((W.n_sites,) * n, dtype=complex)
        for k in range(n + 1):
            left, right = W.components[k], V.components[n - k]
            if not left.any() or not right.any():
                continue
            outer = np.multiply.outer(left, right)
            for subset in combinations(range(n), k):
                rest = [i for i in range(n) if i not in subset]
                total += _place(outer, list(subset) + rest)
        components.append(total)
    return like(W, components)


def star_power(W: Functional, k: int) -> Functional:
    result = unit(W.n_sites, W.degree_cap, W.weights)
    for _ in range(k):
        result = star_product(result, W)
    return result


def star_exp(W: Functional) -> Functional:
    """
    exp_*(W) = sum_k W^{*k} / k!, finite because W_0 = 0.

    Raises:
        DomainError: If |W_0| exceeds the domain tolerance.
    """
    if abs(W.w0) > DOMAIN_TOLERANCE:
        raise DomainError(f"star_exp needs W_0 = 0, got {W.w0}")
    x = like(W, [np.asarray(0j)] + list(W.components[1:]))
    result = unit(W.n_sites, W.degree_cap, W.weights)
    term = result
    for k in range(1, W.degree_cap + 1):
        term = scale(star_product(term, x), 1.0 / k)
        result = add(result, term)
    return result


def star_log(W: Functional) -> Functional:
    """
    log_*(W) = sum_k (-1)^(k+1) (W - 1)^{*k} / k.

    Raises:
        DomainError: If |W_0 - 1| exceeds the domain tolerance.
    """
    if abs(W.w0 - 1.0) > DOMAIN_TOLERANCE:
        raise DomainError(f"star_log needs W_0 = 1, got {W.w0}")
    x = like(W, [np.asarray(0j)] + list(W.components[1:]))
    result = zero(W.n_sites, W.degree_cap, W.weights)
    power = unit(W.n_sites, W.degree_cap, W.weights)
    for k in range(1, W.degree_cap + 1):
        power = star_product(power, x)
        result = add(result, scale(power, (-1) ** (k + 1) / k))
    return result


def truncate(W: Functional) -> Functional:
    """Truncated functional W^T = log_*(W)."""
    return star_log(W)


def set_partitions(slots: Sequence[int]) -> Iterator[List[List[int]]]:
    """Set partitions of distinct slots, blocks sorted; the empty set has one."""
    slots = list(slots)
    if not slots:
        yield []
        return
    for partition in multiset_partitions(slots):
        yield [sorted(block) for block in partition]


def _partition_tensor(T: Functional, blocks: List[List[int]], n: int) -> np.ndarray:
    outer = np.asarray(1.0 + 0j)
    slots: List[int] = []
    for block in blocks:
        outer = np.multiply.outer(outer, T.components[len(block)])
        slots += block
    return _place(outer, slots) if n else outer


def cluster_expand(T: Functional) -> Functional:
    """
    W_n(x_1..x_n) = sum over partitions P of {1..n} of prod_{B in P} T_|B|(x_B);
    the direct partition sum, independent of the series in star_exp.
    """
    components = [np.asarray(1.0 + 0j)]
    for n in range(1, T.degree_cap + 1):
        total = np.zeros((T.n_sites,) * n, dtype=complex)
        for blocks in set_partitions(range(n)):
            total += _partition_tensor(T, blocks, n)
        components.append(total)
    return like(T, components)


def truncate_direct(W: Functional) -> Functional:
    """
    W^T by recursion on the cluster expansion: W^T_n = W_n minus the sum over
    partitions with at least two blocks.
    """
    if abs(W.w0 - 1.0) > DOMAIN_TOLERANCE:
        raise DomainError(f"truncate needs W_0 = 1, got {W.w0}")
    T = zero(W.n_sites, W.degree_cap, W.weights)
    for n in range(1, W.degree_cap + 1):
        total = np.array(W.components[n], dtype=complex)
        for blocks in set_partitions(range(n)):
            if len(blocks) > 1:
                total -= _partition_tensor(T, blocks, n)
        T.components[n] = total
    return T


def _contract_slots(tensor: np.ndarray, f: np.ndarray, weights: np.ndarray, leading: bool) -> np.ndarray:
    k = f.ndim
    weighted = np.asarray(f, dtype=complex)
    for axis in range(k):
        shape = [1] * k
        shape[axis] = len(weights)
        weighted = weighted * weights.reshape(shape)
    if k == 0:
        return tensor * weighted
    axes = list(range(k)) if leading else list(range(tensor.ndim - k, tensor.ndim))
    return np.tensordot(tensor, weighted, axes=(axes, list(range(k))))


def _derive(f: np.ndarray, W: Functional, leading: bool) -> Functional:
    f = np.asarray(f, dtype=complex)
    k = f.ndim
    if k > W.degree_cap:
        raise DegreeCapError(f"Cannot insert a rank-{k} function into a functional of degree cap {W.degree_cap}")
    components = []
    for n in range(W.degree_cap - k + 1):
        contracted = _contract_slots(W.components[n + k], f, W.weights, leading)
        components.append(np.asarray(contracted, dtype=complex))
    return like(W, components)


def derive_left(f: np.ndarray, W: Functional) -> Functional:
    """
    (D_f W)_n(x) = sum_y w(y) f(y_1..y_k) W_{n+k}(y_1..y_k, x_1..x_n).

    The result has degree cap W.degree_cap - k.
    """
    return _derive(f, W, leading=True)


def derive_right(f: np.ndarray, W: Functional) -> Functional:
    """(W D_f)_n(x) = sum_y w(y) W_{n+k}(x_1..x_n, y_1..y_k) f(y_1..y_k)."""
    return _derive(f, W, leading=False)


def is_hermitian(W: Functional, tol: float = 1e-10) -> bool:
    """conj(W_n(x_1..x_n)) == W_n(x_n..x_1) for every degree."""
    for n, component in enumerate(W.components):
        reversed_axes = tuple(range(n - 1, -1, -1))
        if np.max(np.abs(np.conj(component) - np.transpose(component, reversed_axes)), initial=0.0) > tol:
            return False
    return True


def involution(f: np.ndarray) -> np.ndarray:
    """f*(x_1..x_n) = conj(f(x_n..x_1))."""
    f = np.asarray(f, dtype=complex)
    return np.conj(np.transpose(f, tuple(range(f.ndim - 1, -1, -1))))


def is_symmetric(tensor: np.ndarray, tol: float = 1e-10) -> bool:
    tensor = np.asarray(tensor)
    if tensor.ndim < 2:
        return True
    scale_ = max(float(np.max(np.abs(tensor))), 1.0)
    for k in range(tensor.ndim - 1):
        axes = list(range(tensor.ndim))
        axes[k], axes[k + 1] = axes[k + 1], axes[k]
        if np.max(np.abs(tensor - np.transpose(tensor, axes))) > tol * scale_:
            return False
    return True


def quasifree_functional(dplus: np.ndarray, weights: np.ndarray, degree_cap: int) -> Functional:
    """exp_* of the functional whose only component is W^T_2 = D+."""
    T = zero(len(weights), degree_cap, weights)
    if degree_cap >= 2:
        T.components[2] = np.asarray(dplus, dtype=complex)
    return star_exp(T)


def _weighted(f: np.ndarray, weights: np.ndarray) -> np.ndarray:
    out = np.asarray(f, dtype=complex)
    for axis in range(out.ndim):
        shape = [1] * out.ndim
        shape[axis] = len(weights)
        out = out * weights.reshape(shape)
    return out


def chain_rule_series(T: Functional, left: np.ndarray, right: np.ndarray, degree_cap: int,
                      assume_vanishing: bool = False) -> Functional:
    """
    The functional Z with D_left (exp_* T) D_right = exp_*(T) * Z.

    Z_r(x_1..x_r) sums, over set partitions of the k + j inserted slots and over
    assignments of the free points to the blocks, the product of T_{|B|+r_B}
    evaluated with the block's left slots first, then its free points, then its
    right slots.

    Args:
        T: Truncated functional (T_0 ignored).
        left: Rank-k function inserted into the first k arguments.
        right: Rank-j function inserted into the last j arguments.
        degree_cap: Degree cap of Z.
        assume_vanishing: Treat T_n above T.degree_cap as zero instead of raising.

    Raises:
        DegreeCapError: If a block needs a component above T.degree_cap.
    """
    left = np.asarray(left, dtype=complex)
    right = np.asarray(right, dtype=complex)
    k, j = left.ndim, right.ndim
    n_sites = T.n_sites
    result = zero(n_sites, degree_cap, T.weights)
    # rank-0 insertions are plain factors
    factor = (left if k == 0 else 1.0) * (right if j == 0 else 1.0)
    if k + j == 0:
        result.components[0] = np.asarray(factor, dtype=complex)
        return result

    left_w = _weighted(left, T.weights)
    right_w = _weighted(right, T.weights)
    inserted = list(range(k + j))
    partitions = list(set_partitions(inserted))

    def block_tensor(size: int) -> Optional[np.ndarray]:
        if size > T.degree_cap:
            if assume_vanishing:
                return None
            raise DegreeCapError(f"Needs truncated component of degree {size} above cap {T.degree_cap}")
        component = T.components[size]
        return component if component.any() else None

    for r in range(degree_cap + 1):
        total = np.zeros((n_sites,) * r, dtype=complex)
        free = [k + j + i for i in range(r)]
        for blocks in partitions:
            allowed = [[c for c in range(r + 1) if block_tensor(len(block) + c) is not None] for block in blocks]
            for counts in product(*allowed):
                if sum(counts) != r:
                    continue
                for attachment in _distribute(free, counts):
                    operands: list = []
                    if k:
                        operands += [left_w, list(range(k))]
                    if j:
                        operands += [right_w, list(range(k, k + j))]
                    for block, attached in zip(blocks, attachment):
                        lefts = [s for s in block if s < k]
                        rights = [s for s in block if s >= k]
                        operands += [T.components[len(block) + len(attached)], lefts + list(attached) + rights]
                    total += np.einsum(*operands, free, optimize="greedy")
        result.components[r] = factor * total
    return result


def _distribute(points: Sequence[int], counts: Sequence[int]) -> Iterator[List[Tuple[int, ...]]]:
    """Every way to hand counts[b] of the points to block b, each subset in order."""
    if not counts:
        if not points:
            yield []
        return
    for chosen in combinations(points, counts[0]):
        rest = [x for x in points if x not in chosen]
        for tail in _distribute(rest, counts[1:]):
            yield [chosen] + tail


def functional_to_json(W: Functional) -> dict:
    """Nested lists with a trailing [re, im] axis."""
    return {
        "degree_cap": W.degree_cap,
        "weights": W.weights.tolist(),
        "components": [np.stack([c.real, c.imag], axis=-1).tolist() for c in W.components],
    }


def functional_from_json(data: dict) -> Functional:
    weights = np.asarray(data["weights"], dtype=float)
    components = []
    for raw in data["components"]:
        array = np.asarray(raw, dtype=float)
        components.append(array[..., 0] + 1j * array[..., 1])
    if len(components) != int(data["degree_cap"]) + 1:
        raise DegreeCapError(
            f"JSON functional declares degree cap {data['degree_cap']} but has {len(components)} components"
        )
    return make_functional(components, weights)


def partition_count(n: int) -> int:
    """Number of set partitions of n points."""
    return sum(1 for _ in set_partitions(range(n)))


def pairing_count(n: int) -> int:
    """Number of perfect pairings of n points, (n-1)!! for even n."""
    if n % 2:
        return 0
    return factorial(n) // (2 ** (n // 2) * factorial(n // 2))
