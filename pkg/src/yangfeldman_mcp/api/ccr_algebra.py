"""
Operator algebra of in-field polynomials with c-number commutators.

Products are brought to canonical (site-sorted) order with
[phi_in(x), phi_in(y)] = i D(x, y). On top of that the algebra builds the
interacting and outgoing fields, retarded products and the identity checks
relating them.
"""

import logging
from bisect import bisect_right
from itertools import combinations, permutations, product
from math import factorial
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from sympy.polys.domains import QQ, QQ_I
from sympy.utilities.iterables import multiset_partitions

from .errors import BudgetExceededError, ConfigError
from .graphs import switching_profile
from .lattice import causal_matrix, time_order_key
from .trees import compositions
from .types import FieldSeries, FieldType, LocalOperator, Monomial, PropagatorSet, WickPolynomial

logger = logging.getLogger(__name__)

FIELD_BUDGET = 3


def _accumulate(out: Dict[Monomial, object], mono: Monomial, value) -> None:
    current = out.get(mono)
    value = value if current is None else current + value
    if not value:
        out.pop(mono, None)
    else:
        out[mono] = value


class CCRAlgebra:
    """
    Polynomials in phi_in over the sites of one PropagatorSet.

    Coefficients live in the number backend of the propagators: Python complex
    for the float backend, Gaussian rationals for the exact backend, in which
    case every identity below holds with an exactly zero residual.
    """

    def __init__(self, propagators: PropagatorSet, switching: str = "none", budget: int = FIELD_BUDGET):
        self.propagators = propagators
        self.lattice = propagators.lattice
        self.backend = propagators.backend
        self.budget = budget
        self.d = propagators.d
        self.gr = propagators.gr
        self.ga = propagators.ga
        self.vertex_weights = propagators.weights * self.backend.real_array(
            switching_profile(self.lattice, switching)
        )
        self.causal = causal_matrix(self.lattice)
        self._i_d: Dict[Tuple[int, int], object] = {}
        self._fields: Dict[tuple, WickPolynomial] = {}
        self._vev_cache: Dict[Monomial, complex] = {}

    # -- construction --------------------------------------------------------

    def zero(self) -> WickPolynomial:
        return WickPolynomial({}, self.backend)

    def constant(self, value=None) -> WickPolynomial:
        value = self.backend.one if value is None else value
        return WickPolynomial({(): value} if value else {}, self.backend)

    def generator(self, site: int) -> WickPolynomial:
        return WickPolynomial({(site,): self.backend.one}, self.backend)

    def power(self, site: int, j: int) -> WickPolynomial:
        return WickPolynomial({(site,) * j: self.backend.one}, self.backend)

    def interaction(self, site: int, p: int) -> WickPolynomial:
        """L_int(x) = phi_in(x)^p / p."""
        return self.power(site, p).scale(self._rational(1, p))

    def _rational(self, num: int, den: int = 1):
        if self.backend.exact:
            return QQ(num, den)
        return num / den

    def _neg_i_power(self, sigma: int):
        if self.backend.exact:
            out = QQ_I.one
            for _ in range(sigma):
                out = out * QQ_I(QQ(0), QQ(-1))
            return out
        return (-1j) ** sigma

    def i_d(self, a: int, b: int):
        key = (a, b)
        if key not in self._i_d:
            self._i_d[key] = self.backend.i_times(self.d[a, b])
        return self._i_d[key]

    # -- products ------------------------------------------------------------

    def _times_generator(self, terms: Dict[Monomial, object], site: int) -> Dict[Monomial, object]:
        out: Dict[Monomial, object] = {}
        for mono, coeff in terms.items():
            pos = bisect_right(mono, site)
            _accumulate(out, mono[:pos] + (site,) + mono[pos:], coeff)
            for i in range(pos, len(mono)):
                contraction = self.i_d(mono[i], site)
                if contraction:
                    _accumulate(out, mono[:i] + mono[i + 1:], coeff * contraction)
        return out

    def normal_form(self, sites: Sequence[int], coefficient=None) -> WickPolynomial:
        """Canonical form of coefficient * phi_in(s_1)...phi_in(s_k) in the given order."""
        coefficient = self.backend.one if coefficient is None else coefficient
        terms: Dict[Monomial, object] = {(): coefficient} if coefficient else {}
        for site in sites:
            terms = self._times_generator(terms, site)
        return WickPolynomial(terms, self.backend)

    def product(self, a: WickPolynomial, b: WickPolynomial) -> WickPolynomial:
        out: Dict[Monomial, object] = {}
        for mono_b, coeff_b in b.terms.items():
            terms = {}
            for mono_a, coeff_a in a.terms.items():
                value = coeff_a * coeff_b
                if value:
                    terms[mono_a] = value
            for site in mono_b:
                terms = self._times_generator(terms, site)
            for mono, value in terms.items():
                _accumulate(out, mono, value)
        return WickPolynomial(out, self.backend)

    def product_all(self, factors: Iterable[WickPolynomial]) -> WickPolynomial:
        result = self.constant()
        for factor in factors:
            result = self.product(result, factor)
            if result.is_zero:
                break
        return result

    def commutator(self, a: WickPolynomial, b: WickPolynomial) -> WickPolynomial:
        if a.is_zero or b.is_zero:
            return self.zero()
        return self.product(a, b) - self.product(b, a)

    def adjoint(self, a: WickPolynomial) -> WickPolynomial:
        """Hermitian conjugate; phi_in is self-adjoint, so monomials are reversed."""
        result = self.zero()
        for mono, coeff in a.terms.items():
            result = result + self.normal_form(tuple(reversed(mono)), self.backend.conjugate(coeff))
        return result

    def combine(self, pairs: Iterable[Tuple[WickPolynomial, object]]) -> WickPolynomial:
        """sum_k factor_k * poly_k, accumulated in a single term table."""
        out: Dict[Monomial, object] = {}
        for poly, factor in pairs:
            if not factor:
                continue
            for mono, coeff in poly.terms.items():
                _accumulate(out, mono, coeff * factor)
        return WickPolynomial(out, self.backend)

    def smeared(self, polys: Sequence[WickPolynomial], weights: Sequence) -> WickPolynomial:
        """sum_x weights[x] * polys[x]."""
        return self.combine(zip(polys, weights))

    def smeared_field(self, f: np.ndarray) -> WickPolynomial:
        """phi_in(f) = sum_x w(x) f(x) phi_in(x)."""
        weights = self.propagators.weights_float()
        terms = {}
        for site, value in enumerate(np.asarray(f)):
            coeff = self.backend.coefficient(complex(value) * weights[site])
            if coeff:
                terms[(site,)] = coeff
        return WickPolynomial(terms, self.backend)

    # -- perturbative fields -------------------------------------------------

    def _check_budget(self, sigma: int) -> None:
        if sigma > self.budget:
            raise BudgetExceededError(f"Order {sigma} exceeds the field budget {self.budget}")

    def _vertex_sum(self, kernel_row, sigma: int, p: int) -> WickPolynomial:
        return self.combine(
            (self.power_expansion(y, p - 1, sigma, p), g * self.vertex_weights[y])
            for y, g in enumerate(kernel_row)
            if g
        )

    def interacting_field(self, site: int, sigma: int, p: int) -> WickPolynomial:
        """
        Coefficient of (-lambda)^sigma of the interacting field phi(x), summed over
        all trees with Gr along every branch and the vertex measure at every vertex.

        Raises:
            BudgetExceededError: If sigma exceeds the budget.
        """
        self._check_budget(sigma)
        key = ("loc", site, sigma, p)
        if key not in self._fields:
            if sigma == 0:
                value = self.generator(site)
            else:
                value = self._vertex_sum(self.gr[site], sigma - 1, p)
            self._fields[key] = value
        return self._fields[key]

    def power_expansion(self, site: int, j: int, sigma: int, p: int) -> WickPolynomial:
        """phi(x)^j at order sigma: sum over sigma_1+...+sigma_j = sigma of ordered products."""
        key = ("pow", site, j, sigma, p)
        if key not in self._fields:
            if j == 0:
                value = self.constant() if sigma == 0 else self.zero()
            elif sigma == 0:
                value = self.power(site, j)
            else:
                value = self.zero()
                for orders in compositions(sigma, j):
                    value = value + self.product_all(self.interacting_field(site, s, p) for s in orders)
            self._fields[key] = value
        return self._fields[key]

    def out_field(self, site: int, sigma: int, p: int) -> WickPolynomial:
        """Like interacting_field with the commutator function D on the trunk."""
        self._check_budget(sigma)
        key = ("out", site, sigma, p)
        if key not in self._fields:
            if sigma == 0:
                value = self.generator(site)
            else:
                value = self._vertex_sum(self.d[site], sigma - 1, p)
            self._fields[key] = value
        return self._fields[key]

    def advanced_current(self, site: int, sigma: int, p: int) -> WickPolynomial:
        """sum_y w(y) Ga(x, y) [phi(y)^{p-1}]_sigma."""
        key = ("adv", site, sigma, p)
        if key not in self._fields:
            self._fields[key] = self._vertex_sum(self.ga[site], sigma, p)
        return self._fields[key]

    def field(self, field_type, site: int, sigma: int, p: int) -> WickPolynomial:
        field_type = FieldType(field_type)
        if field_type == FieldType.IN:
            return self.generator(site) if sigma == 0 else self.zero()
        if field_type == FieldType.LOC:
            return self.interacting_field(site, sigma, p)
        return self.out_field(site, sigma, p)

    def field_series(self, field_type, site: int, max_order: int, p: int) -> FieldSeries:
        """All coefficients of (-lambda)^sigma, sigma <= max_order, of one field at one site."""
        field_type = FieldType(field_type)
        series = FieldSeries(field_type=field_type.value, site=site)
        for sigma in range(max_order + 1):
            series.coefficients[sigma] = self.field(field_type, site, sigma, p)
        return series

    # -- retarded products ---------------------------------------------------

    def retarded_product(self, b0: LocalOperator, bs: Sequence[LocalOperator]) -> WickPolynomial:
        """
        R_{1,n}(B0 | B1..Bn): nested commutators [[B0, B_pi1], B_pi2]... over all
        permutations with x0 >= x_pi1 >= ... >= x_pin in the time-major site order.

        Raises:
            BudgetExceededError: If more than 3 operators are inserted.
        """
        if len(bs) > 3:
            raise BudgetExceededError(f"Retarded products are limited to n <= 3, got n={len(bs)}")
        if not bs:
            return b0.poly
        key = self._order_key
        result = self.zero()
        for perm in permutations(range(len(bs))):
            chain = [key(b0.site)] + [key(bs[k].site) for k in perm]
            if any(chain[i] < chain[i + 1] for i in range(len(chain) - 1)):
                continue
            acc = b0.poly
            for k in perm:
                acc = self.commutator(acc, bs[k].poly)
                if acc.is_zero:
                    break
            result = result + acc
        return result

    def _order_key(self, site: int) -> int:
        return time_order_key(self.lattice, site)

    def _past(self, site: int) -> List[int]:
        return [y for y in range(self.lattice.n_sites) if self.causal[site, y] and self.vertex_weights[y]]

    def _retarded_series(self, b0: LocalOperator, extra: Sequence[LocalOperator], sigma: int, p: int) -> WickPolynomial:
        """(-i)^sigma / sigma! sum_{y_1..y_sigma} prod w R(B0 | extra, L(y_1), ..., L(y_sigma))."""
        if sigma + len(extra) > 3:
            raise BudgetExceededError(f"Retarded series limited to 3 insertions, got {sigma + len(extra)}")

        def terms():
            for ys in product(self._past(b0.site), repeat=sigma):
                weight = self.backend.real(1)
                for y in ys:
                    weight = weight * self.vertex_weights[y]
                insertions = list(extra) + [LocalOperator(self.interaction(y, p), y) for y in ys]
                yield self.retarded_product(b0, insertions), weight

        return self.combine(terms()).scale(self._neg_i_power(sigma) * self._rational(1, factorial(sigma)))

    def retarded_expansion(self, site: int, sigma: int, p: int) -> WickPolynomial:
        """(-i)^sigma / sigma! * sum w R_{1,sigma}(phi_in(x) | L_int, ..., L_int)."""
        if sigma > 2:
            raise BudgetExceededError(f"retarded_expansion is limited to sigma <= 2, got {sigma}")
        return self._retarded_series(LocalOperator(self.generator(site), site), [], sigma, p)

    def retarded_power(self, site: int, j: int, sigma: int, p: int) -> WickPolynomial:
        """The sigma-fold retarded action on phi_in(x)^j."""
        if sigma > 2:
            raise BudgetExceededError(f"retarded_power is limited to sigma <= 2, got {sigma}")
        return self._retarded_series(LocalOperator(self.power(site, j), site), [], sigma, p)

    def check_retrecursion(self, b0: LocalOperator, bs: Sequence[LocalOperator]) -> WickPolynomial:
        """
        R_n(B0|B) + sum_j [B_j, R_{n-1}(B0|B without B_j)] 1(x_j earliest); zero when
        the recursion holds.
        """
        lhs = self.retarded_product(b0, bs)
        earliest = min(self._order_key(b.site) for b in [b0] + list(bs))
        rhs = self.zero()
        for j, bj in enumerate(bs):
            if self._order_key(bj.site) > earliest:
                continue
            rest = list(bs[:j]) + list(bs[j + 1:])
            rhs = rhs - self.commutator(bj.poly, self.retarded_product(b0, rest))
        return lhs - rhs

    def check_glz(self, a: LocalOperator, c: LocalOperator, bs: Sequence[LocalOperator]) -> WickPolynomial:
        """
        R(A | C, B) - R(C | A, B) - sum_{I subset N} [R(A | B_I), R(C | B_{N-I})].

        Raises:
            BudgetExceededError: If more than two B are given.
        """
        if len(bs) > 2:
            raise BudgetExceededError(f"check_glz is limited to n <= 2, got {len(bs)}")
        lhs = self.retarded_product(a, [c] + list(bs)) - self.retarded_product(c, [a] + list(bs))
        rhs = self.zero()
        indices = range(len(bs))
        for size in range(len(bs) + 1):
            for subset in combinations(indices, size):
                inside = [bs[i] for i in subset]
                outside = [bs[i] for i in indices if i not in subset]
                rhs = rhs + self.commutator(self.retarded_product(a, inside), self.retarded_product(c, outside))
        return lhs - rhs

    def retarded_insertion(self, x: int, y: int, sigma: int, p: int) -> WickPolynomial:
        """(-i)^sigma / sigma! sum w R_{1,sigma+1}(phi_in(x) | phi_in(y), L_int^sigma)."""
        key = ("ret", x, y, sigma, p)
        if key not in self._fields:
            self._fields[key] = self._retarded_series(
                LocalOperator(self.generator(x), x), [LocalOperator(self.generator(y), y)], sigma, p
            )
        return self._fields[key]

    def _retpull_sum(self, x1: int, inner_pair: Tuple[int, int], n: int, p: int) -> WickPolynomial:
        total = self.zero()
        for s1, s2, s3 in compositions(n - 1, 3):
            middle = self.retarded_insertion(inner_pair[0], inner_pair[1], s2, p)
            if middle.is_zero:
                continue
            for j in range(p - 1):
                left = self.power_expansion(x1, j, s1, p)
                right = self.power_expansion(x1, p - 2 - j, s3, p)
                total = total + self.product_all([left, middle, right])
        return total

    def check_retpull(self, n: int, x: int, y: int, p: int) -> Tuple[WickPolynomial, WickPolynomial]:
        """
        Residuals of the two identities that pull one Gr out of
        (-i)^n/n! R_{1,n+1}(phi_in(x) | phi_in(y), L_int^n): on the x side and on the y side.
        """
        if not 1 <= n <= 2:
            raise BudgetExceededError(f"check_retpull supports n in (1, 2), got {n}")
        lhs = self.retarded_insertion(x, y, n, p)
        sites = range(self.lattice.n_sites)
        first = self.combine(
            (self._retpull_sum(x1, (x1, y), n, p), self.vertex_weights[x1] * self.gr[x, x1])
            for x1 in sites
            if self.gr[x, x1]
        )
        second = self.combine(
            (self._retpull_sum(x1, (x, x1), n, p), self.vertex_weights[x1] * self.gr[x1, y])
            for x1 in sites
            if self.gr[x1, y]
        )
        return lhs - first, lhs - second

    # -- commutator identities -----------------------------------------------

    def field_commutator(self, field_type, x: int, y: int, sigma: int, p: int) -> WickPolynomial:
        """Order-sigma part of [phi^a(x), phi^a(y)]."""
        result = self.zero()
        for s1 in range(sigma + 1):
            result = result + self.commutator(self.field(field_type, x, s1, p), self.field(field_type, y, sigma - s1, p))
        return result

    def check_locality(self, x: int, y: int, sigma: int, p: int) -> WickPolynomial:
        """[phi(x), phi(y)] at order sigma; zero for spacelike x, y."""
        return self.field_commutator(FieldType.LOC, x, y, sigma, p)

    def first_order_chains(self, x: int, y: int, p: int) -> WickPolynomial:
        """(p-1) i sum_z w(z) (Gr(x,z)Gr(z,y) - Ga(x,z)Ga(z,y)) phi_in(z)^{p-2}."""
        pairs = []
        for z in range(self.lattice.n_sites):
            chain = (self.gr[x, z] * self.gr[z, y] - self.ga[x, z] * self.ga[z, y]) * self.vertex_weights[z]
            if chain:
                pairs.append((self.power(z, p - 2), self.backend.i_times(chain * (p - 1))))
        return self.combine(pairs)

    def out_ccr_parts(self, x: int, y: int, sigma: int, p: int) -> Dict[str, WickPolynomial]:
        """
        The four pieces of [phi_out(x), phi_out(y)] with phi_out = phi - Ga j:
        I = [phi, phi], II = [phi(x), Ga j(y)], III = [Ga j(x), phi(y)], IV = [Ga j, Ga j].
        """

        def current(site, order):
            return self.advanced_current(site, order - 1, p) if order > 0 else self.zero()

        parts = {name: self.zero() for name in ("I", "II", "III", "IV")}
        for s1 in range(sigma + 1):
            s2 = sigma - s1
            phi_x, phi_y = self.interacting_field(x, s1, p), self.interacting_field(y, s2, p)
            cur_x, cur_y = current(x, s1), current(y, s2)
            parts["I"] = parts["I"] + self.commutator(phi_x, phi_y)
            parts["II"] = parts["II"] + self.commutator(phi_x, cur_y)
            parts["III"] = parts["III"] + self.commutator(cur_x, phi_y)
            parts["IV"] = parts["IV"] + self.commutator(cur_x, cur_y)
        return parts

    def check_out_ccr(self, x: int, y: int, sigma: int, p: int) -> WickPolynomial:
        """[phi_out(x), phi_out(y)]_sigma minus i D(x, y) at sigma = 0; zero when the CCR hold."""
        if sigma > 2:
            raise BudgetExceededError(f"check_out_ccr is limited to sigma <= 2, got {sigma}")
        residual = self.field_commutator(FieldType.OUT, x, y, sigma, p)
        if sigma == 0:
            residual = residual - self.constant(self.i_d(x, y))
        return residual

    # -- expectation values --------------------------------------------------

    def _vev_monomial(self, mono: Monomial) -> complex:
        if len(mono) % 2:
            return 0j
        if not mono:
            return 1 + 0j
        if mono not in self._vev_cache:
            dplus = self.propagators.dplus
            first = mono[0]
            total = 0j
            for k in range(1, len(mono)):
                total += dplus[first, mono[k]] * self._vev_monomial(mono[1:k] + mono[k + 1:])
            self._vev_cache[mono] = total
        return self._vev_cache[mono]

    def vacuum_expectation(self, poly: WickPolynomial) -> complex:
        """Quasifree expectation: pairings with D+ taken left to right in each monomial."""
        if self.propagators.dplus is None:
            raise ConfigError("vacuum_expectation needs a PropagatorSet built with a mode basis")
        total = 0j
        for mono, coeff in poly.terms.items():
            total += self.backend.to_complex(coeff) * self._vev_monomial(mono)
        return total

    def truncated_vev(self, polys: Sequence[WickPolynomial]) -> complex:
        """Connected expectation of an ordered product, by Moebius inversion over set partitions."""
        n = len(polys)
        if n == 0:
            return 0j
        total = 0j
        for partition in multiset_partitions(list(range(n))):
            k = len(partition)
            term = (-1) ** (k - 1) * factorial(k - 1) + 0j
            for block in partition:
                term *= self.vacuum_expectation(self.product_all(polys[i] for i in sorted(block)))
                if term == 0:
                    break
            total += term
        return total

    def state_expectation(self, creator: WickPolynomial, poly: WickPolynomial) -> complex:
        """<Q Omega, P Q Omega> for Q = creator."""
        return self.vacuum_expectation(self.product_all([self.adjoint(creator), poly, creator]))

    def gram_matrix(self, vectors: Sequence[WickPolynomial]) -> np.ndarray:
        """G_ij = <V_i Omega, V_j Omega>."""
        size = len(vectors)
        gram = np.zeros((size, size), dtype=complex)
        adjoints = [self.adjoint(v) for v in vectors]
        for i in range(size):
            for j in range(size):
                gram[i, j] = self.vacuum_expectation(self.product(adjoints[i], vectors[j]))
        return gram

    def truncated_field_vector(self, field_type, f: np.ndarray, order: int, coupling: float, p: int) -> WickPolynomial:
        """sum_{sigma <= order} (-lambda)^sigma phi^a_sigma(f) as a polynomial."""
        weights = self.propagators.weights_float()
        pairs = []
        for sigma in range(order + 1):
            scale = (-coupling) ** sigma
            for site, value in enumerate(np.asarray(f)):
                if value:
                    coeff = self.backend.coefficient(complex(value) * weights[site] * scale)
                    pairs.append((self.field(field_type, site, sigma, p), coeff))
        return self.combine(pairs)
