"""
Recovery of the particle content of a non-quasifree state.

Given W' sharing its commutator with a quasifree reference W, the state
Psi = sum_n a^dagger(S f_n) Omega is recovered from E = exp_*(W'^T - W^T):
E is a triangular combination of the solution parts of the symmetrized
z_r = sum_n f*_n (x) f_{r-n}, which is inverted degree by degree, and the
amplitudes are read off the positive-frequency and mixed-frequency blocks.
"""

import logging
from functools import lru_cache
from itertools import combinations, permutations
from math import factorial, sqrt
from typing import Dict, List, Optional, Sequence

import numpy as np
import sympy

from .errors import CompatibilityError, DegreeCapError, ReconstructionError
from .graphs import interaction_weights, truncated_wightman_table
from .lattice import build_lattice, volume_weights
from .propagators import build_propagators, mode_basis, positive_duals, quasifree_two_point, tensor_coordinates
from .star_calc import (
    add,
    chain_rule_series,
    involution,
    is_hermitian,
    is_symmetric,
    like,
    quasifree_functional,
    scale,
    star_exp,
    star_product,
    subtract,
    truncate,
    with_degree_cap,
    zero,
)
from .types import (
    FockStateAmplitudes,
    Functional,
    LatticeConfig,
    LatticeSpacetime,
    ModeBasis,
    ReconstructionResult,
    TriangularSystem,
)

logger = logging.getLogger(__name__)

THRESHOLD = 1e-8
COMPATIBILITY_TOLERANCE = 1e-8


def _check_parity(s: int, r: int) -> None:
    if s < 0 or s > r or (r - s) % 2:
        raise ValueError(f"c_(s,r) needs 0 <= s <= r with r - s even, got s={s}, r={r}")


@lru_cache(maxsize=None)
def combinatorial_factor(s: int, r: int) -> sympy.Integer:
    """
    Number of ways to route s of r symmetric legs to the outer points and pair
    the remaining r - s legs into loops: r! / (2^((r-s)/2) ((r-s)/2)!).

    Raises:
        ValueError: If r - s is odd or s is out of range.
    """
    _check_parity(s, r)
    half = (r - s) // 2
    return sympy.Integer(factorial(r)) / (sympy.Integer(2) ** half * factorial(half))


@lru_cache(maxsize=None)
def combinatorial_factor_symbolic(s: int, r: int) -> sympy.Integer:
    """
    c_(s,r) from the Wick re-expansion of the r legs of z_r.

    Every leg of z_r either reaches an outer argument through the kernel
    ``leg`` or is contracted with another leg through the kernel ``loop``.
    With indeterminate kernels the r-th coefficient of exp(a leg g + a^2 loop / 2)
    is the Fock projection of the degree r part; s! times its g^s coefficient,
    stripped of leg^s loop^((r-s)/2), is c_(s,r).
    """
    _check_parity(s, r)
    a, g, leg, loop = sympy.symbols("a g leg loop")
    generating = sympy.exp(a * leg * g + a**2 * loop / 2)
    degree_r = sympy.expand(generating.series(a, 0, r + 1).removeO()).coeff(a, r) * factorial(r)
    outer = sympy.Poly(degree_r, g).coeff_monomial(g**s)
    value = sympy.simplify(factorial(s) * outer / (leg**s * loop ** ((r - s) // 2)))
    if not value.is_Integer:
        raise ValueError(f"Symbolic expansion left kernels in c_({s},{r}): {value}")
    return sympy.Integer(value)


def _pairings(items: Sequence[int]):
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for k, partner in enumerate(rest):
        for tail in _pairings(rest[:k] + rest[k + 1:]):
            yield [(first, partner)] + tail


def combinatorial_factor_enumerated(s: int, r: int) -> int:
    """Counts (outer subset, bijection to the outer points, pairing of the rest) one by one."""
    _check_parity(s, r)
    count = 0
    for subset in combinations(range(r), s):
        rest = [i for i in range(r) if i not in subset]
        n_pairings = sum(1 for _ in _pairings(rest))
        for _ in permutations(subset):
            count += n_pairings
    return count


def closed_form_product(s: int, r: int) -> sympy.Rational:
    """The product r! 2^(s-r) / ((r-s)/2)!, kept for comparison with the enumeration."""
    _check_parity(s, r)
    return sympy.Integer(factorial(r)) * sympy.Integer(2) ** (s - r) / factorial((r - s) // 2)


def closed_form_table(r_max: int) -> List[Dict[str, object]]:
    rows = []
    for r in range(r_max + 1):
        for s in range(r % 2, r + 1, 2):
            enumerated = combinatorial_factor_enumerated(s, r)
            symbolic = combinatorial_factor_symbolic(s, r)
            closed = closed_form_product(s, r)
            rows.append({
                "s": s,
                "r": r,
                "enumerated": enumerated,
                "symbolic": int(symbolic),
                "closed_form": str(closed),
                "match": bool(closed == enumerated),
                "symbolic_match": bool(symbolic == enumerated),
            })
    return rows


def build_triangular_system(parity: int, r_max: int) -> TriangularSystem:
    """
    Upper triangular c_(s,r) over degrees of one parity up to r_max and its exact inverse.

    Raises:
        ValueError: If parity is not 0 or 1.
    """
    if parity not in (0, 1):
        raise ValueError(f"Parity must be 0 or 1, got {parity}")
    degrees = list(range(parity, r_max + 1, 2))
    size = len(degrees)
    c = sympy.zeros(size, size)
    for a, s in enumerate(degrees):
        for b, r in enumerate(degrees):
            if s <= r:
                c[a, b] = combinatorial_factor_symbolic(s, r)
    d_inv = c.inv() if size else sympy.zeros(0, 0)
    return TriangularSystem(parity=parity, r_max=r_max, degrees=degrees, c=c, d_inv=d_inv)


def symmetrize(tensor: np.ndarray) -> np.ndarray:
    tensor = np.asarray(tensor, dtype=complex)
    if tensor.ndim < 2:
        return tensor
    total = np.zeros_like(tensor)
    for perm in permutations(range(tensor.ndim)):
        total += np.transpose(tensor, perm)
    return total / factorial(tensor.ndim)


def _expand(coefficients: np.ndarray, rows: np.ndarray) -> np.ndarray:
    """Replace every mode axis of coefficients by rows (M, n_sites)."""
    out = np.asarray(coefficients, dtype=complex)
    for axis in range(out.ndim):
        moved = np.tensordot(rows.T, np.moveaxis(out, axis, 0), axes=(1, 0))
        out = np.moveaxis(moved, 0, axis)
    return out


def fock_norm(coefficients: Sequence[np.ndarray]) -> float:
    """||Psi||^2 = sum_n n! ||c_n||^2."""
    return float(sum(factorial(n) * np.sum(np.abs(c) ** 2) for n, c in enumerate(coefficients)))


def amplitudes_from_coefficients(coefficients: Sequence[np.ndarray], basis: ModeBasis,
                                 weights: np.ndarray, normalized: bool = True) -> FockStateAmplitudes:
    """
    Build purely positive-frequency f_n from mode coefficients.

    Args:
        coefficients: c_0 scalar, c_n of shape (M,)*n; symmetrized here.
        basis: Mode basis of the reference representation.
        weights: Volume weights.
        normalized: Rescale so that sum_n n! ||c_n||^2 = 1.

    Returns:
        FockStateAmplitudes with coefficients, test functions and solution parts.
    """
    cs = [symmetrize(c) for c in coefficients]
    if normalized:
        norm = fock_norm(cs)
        if norm == 0.0:
            raise ValueError("Cannot normalize the zero state")
        cs = [c / sqrt(norm) for c in cs]
    duals = positive_duals(basis, np.asarray(weights, dtype=float))
    f = [_expand(c, duals) for c in cs]
    solutions = [_expand(c, basis.modes) for c in cs]
    return FockStateAmplitudes(coefficients=cs, f=f, solutions=solutions)


def vacuum_amplitudes(basis: ModeBasis, weights: np.ndarray) -> FockStateAmplitudes:
    return amplitudes_from_coefficients([np.asarray(1.0 + 0j)], basis, weights)


def random_coefficients(n_modes: int, degrees: Sequence[int], seed: int = 0,
                        active_modes: Optional[int] = None) -> List[np.ndarray]:
    """Random complex symmetric c_n for the listed degrees, zero elsewhere, up to max(degrees)."""
    rng = np.random.default_rng(seed)
    active = n_modes if active_modes is None else min(active_modes, n_modes)
    n_max = max(degrees)
    cs = []
    for n in range(n_max + 1):
        c = np.zeros((n_modes,) * n, dtype=complex)
        if n in degrees:
            block = rng.normal(size=(active,) * n) + 1j * rng.normal(size=(active,) * n)
            c[(slice(0, active),) * n] = block
        cs.append(symmetrize(c))
    return cs


def z_tilde(amplitudes: FockStateAmplitudes, r: int) -> np.ndarray:
    """sum_n f*_n (x) f_{r-n} over the available degrees."""
    f = amplitudes.f
    total = None
    for n in range(r + 1):
        if n >= len(f) or r - n >= len(f):
            continue
        term = np.multiply.outer(involution(f[n]), f[r - n])
        total = term if total is None else total + term
    if total is None:
        return np.zeros((_site_count(amplitudes),) * r, dtype=complex)
    return total


def _site_count(amplitudes: FockStateAmplitudes) -> int:
    for g in amplitudes.f[1:]:
        return g.shape[0]
    raise ValueError("Amplitudes carry no site dimension; build them with amplitudes_from_coefficients")


def forward_map(amplitudes: FockStateAmplitudes, dtilde: np.ndarray, weights: np.ndarray,
                degree_cap: Optional[int] = None, kernel: Optional[np.ndarray] = None) -> Functional:
    """
    E_s = sum_r c_(s,r) (Dtilde legs on s arguments, w Dtilde w loops on the rest) z_r.

    Args:
        amplitudes: The state.
        dtilde: Symmetric part D+ + D- of the reference two-point function.
        weights: Volume weights.
        degree_cap: Cap of E; 2 * n_max when omitted.
        kernel: Replacement for dtilde on every leg and loop.

    Returns:
        The functional E.
    """
    weights = np.asarray(weights, dtype=float)
    kernel = np.asarray(dtilde if kernel is None else kernel)
    n_sites = len(weights)
    cap = 2 * amplitudes.n_max if degree_cap is None else degree_cap
    r_max = 2 * amplitudes.n_max
    leg = kernel * weights[None, :]
    loop = weights[:, None] * kernel * weights[None, :]

    z = [symmetrize(z_tilde(amplitudes, r)) if r else np.asarray(z_tilde(amplitudes, 0), dtype=complex)
         for r in range(r_max + 1)]
    E = zero(n_sites, cap, weights)
    for s in range(cap + 1):
        total = np.zeros((n_sites,) * s, dtype=complex)
        for r in range(s, r_max + 1, 2):
            if not z[r].any():
                continue
            t = z[r]
            for _ in range((r - s) // 2):
                t = np.tensordot(t, loop, axes=([t.ndim - 2, t.ndim - 1], [0, 1]))
            for axis in range(s):
                t = np.moveaxis(np.tensordot(leg, np.moveaxis(t, axis, 0), axes=(1, 0)), 0, axis)
            total += float(combinatorial_factor(s, r)) * t
        E.components[s] = total
    return E


def source_coordinates(basis: ModeBasis, weights: np.ndarray, tensor: np.ndarray) -> np.ndarray:
    """Coordinates of the solution part of a test-function tensor: (<conj u_k, .>_w, <u_k, .>_w) per leg."""
    rows = np.concatenate([basis.modes.conj(), basis.modes], axis=0) * np.asarray(weights)[None, :]
    out = np.asarray(tensor, dtype=complex)
    for axis in range(out.ndim):
        out = np.moveaxis(np.tensordot(rows, np.moveaxis(out, axis, 0), axes=(1, 0)), 0, axis)
    return out


def z_coordinates(amplitudes: FockStateAmplitudes, basis: ModeBasis, weights: np.ndarray,
                  r_max: Optional[int] = None) -> List[np.ndarray]:
    """Coordinates of S^{(x)r} z_r built directly from the amplitudes."""
    r_max = 2 * amplitudes.n_max if r_max is None else r_max
    return [source_coordinates(basis, weights, symmetrize(z_tilde(amplitudes, r))) for r in range(r_max + 1)]


def loop_matrix(n_modes: int) -> np.ndarray:
    """Coordinate form of a w Dtilde w loop: pairs (u_k, conj u_k) in both orders."""
    lam = np.zeros((2 * n_modes, 2 * n_modes))
    for k in range(n_modes):
        lam[k, n_modes + k] = 1.0
        lam[n_modes + k, k] = 1.0
    return lam


def _apply_loops(tensor: np.ndarray, lam: np.ndarray, count: int) -> np.ndarray:
    for _ in range(count):
        tensor = np.tensordot(tensor, lam, axes=([tensor.ndim - 2, tensor.ndim - 1], [0, 1]))
    return tensor


def lhs_functional(W_prime: Functional, W: Functional, tol: float = COMPATIBILITY_TOLERANCE) -> Functional:
    """
    E = exp_*(W'^T - W^T), after validating that both functionals share the
    commutator and that every component of the difference is real and symmetric.

    Raises:
        CompatibilityError: If the validation fails.
        DegreeCapError: If the caps differ.
    """
    tp, t = truncate(W_prime), truncate(W)
    diff = subtract(tp, t)
    if W.degree_cap >= 2:
        scale_ = max(float(np.max(np.abs(t.components[2]))), 1.0)
        gap = float(np.max(np.abs(tp.components[2].imag - t.components[2].imag)))
        if gap > tol * scale_:
            raise CompatibilityError(f"Imaginary parts of the two-point functions differ by {gap:.3e}")
    for n, component in enumerate(diff.components[1:], start=1):
        scale_ = max(float(np.max(np.abs(component))), 1.0)
        imag = float(np.max(np.abs(component.imag)))
        if imag > tol * scale_:
            raise CompatibilityError(f"Truncated difference of degree {n} is not real (imaginary part {imag:.3e})")
        if not is_symmetric(component, tol):
            raise CompatibilityError(f"Truncated difference of degree {n} is not symmetric")
    real = like(diff, [np.asarray(0j)] + [c.real.astype(complex) for c in diff.components[1:]])
    E = star_exp(real)
    logger.debug("lhs functional built at degree cap %d", E.degree_cap)
    return E


def wightman_from_state(amplitudes: FockStateAmplitudes, W: Functional,
                        degree_cap: Optional[int] = None, tol: float = 1e-10) -> Functional:
    """
    W' = D_{f*} W D_f, summed over all pairs of degrees and normalized to W'_0 = 1.

    A quasifree W (truncated components vanish except in degree 2) is extended
    past its cap by those vanishing components, so the output keeps W's cap.
    Otherwise the cap drops by 2 * n_max.

    Raises:
        DegreeCapError: If W's cap cannot carry the insertions.
        ReconstructionError: If the state has zero norm.
    """
    T = truncate(W)
    scale_ = max(float(np.max(np.abs(T.components[2]))) if T.degree_cap >= 2 else 0.0, 1.0)
    quasifree = all(
        float(np.max(np.abs(c), initial=0.0)) <= tol * scale_
        for n, c in enumerate(T.components) if n != 2
    )
    n_max = amplitudes.n_max
    if quasifree:
        out_cap = W.degree_cap if degree_cap is None else degree_cap
        source = zero(W.n_sites, max(2, out_cap), W.weights)
        if W.degree_cap >= 2:
            source.components[2] = T.components[2]
        base = star_exp(with_degree_cap(source, out_cap))
    else:
        out_cap = W.degree_cap - 2 * n_max if degree_cap is None else degree_cap
        if out_cap < 0 or out_cap + 2 * n_max > W.degree_cap:
            raise DegreeCapError(
                f"Degree cap {W.degree_cap} cannot carry {n_max}-particle insertions at output cap {out_cap}"
            )
        source = T
        base = with_degree_cap(W, out_cap)

    Z = zero(W.n_sites, out_cap, W.weights)
    f = amplitudes.f
    for n in range(len(f)):
        if not np.any(f[n]):
            continue
        left = involution(f[n])
        for j in range(len(f)):
            if not np.any(f[j]):
                continue
            Z = add(Z, chain_rule_series(source, left, f[j], out_cap, assume_vanishing=quasifree))
    W_prime = star_product(base, Z)
    norm = W_prime.w0
    if abs(norm) < 1e-300:
        raise ReconstructionError("State has zero norm")
    W_prime = scale(W_prime, 1.0 / norm)
    if not is_hermitian(W_prime, 1e-8 * max(1.0, max(float(np.max(np.abs(c))) for c in W_prime.components))):
        logger.warning("W' from state is not hermitian within tolerance")
    return W_prime


def solve_z(E: Functional, basis: ModeBasis, r_max: Optional[int] = None) -> List[np.ndarray]:
    """
    Invert E_s = sum_r c_(s,r) L^((r-s)/2) zeta_r for the coordinates zeta_r of S^{(x)r} z_r.

    The loop L contracts two legs with the mode pairing; both parities are
    solved with the exact inverse of their triangular system.

    Returns:
        zeta_0..zeta_{r_max}; zeta_r has shape (2M,)*r.
    """
    r_max = E.degree_cap if r_max is None else min(r_max, E.degree_cap)
    m = basis.n_modes
    lam = loop_matrix(m)
    e_hat = [tensor_coordinates(basis, E.components[s]) if s else np.asarray(E.components[0], dtype=complex)
             for s in range(r_max + 1)]
    zeta: List[np.ndarray] = [np.zeros((2 * m,) * r, dtype=complex) for r in range(r_max + 1)]
    for parity in (0, 1):
        system = build_triangular_system(parity, r_max)
        for s in system.degrees:
            total = np.zeros((2 * m,) * s, dtype=complex)
            for r in system.degrees:
                if r < s:
                    continue
                d = system.d_entry(s, r)
                if d == 0:
                    continue
                total += float(d) * _apply_loops(e_hat[r], lam, (r - s) // 2)
            zeta[s] = total
    return zeta


def _positive_block(tensor: np.ndarray, m: int) -> np.ndarray:
    return tensor[(slice(0, m),) * tensor.ndim] if tensor.ndim else tensor


def _solutions(coefficients: List[np.ndarray], basis: ModeBasis) -> List[np.ndarray]:
    return [_expand(c, basis.modes) for c in coefficients]


def recover_f(zeta: Sequence[np.ndarray], basis: ModeBasis, threshold: float = THRESHOLD) -> ReconstructionResult:
    """
    Read the amplitudes off the z coordinates.

    With z_0 > 0 the positive-frequency blocks give c_r = zeta_r[u..u] / sqrt(z_0).
    Otherwise the lowest nonzero degree r0 = 2 n0 fixes a reference point y with
    maximal |S_+ f_n0(y)|^2, read from the mixed block [conj u^n0, u^n0]; the
    global phase makes S_+ f_n0(y) positive.

    Raises:
        ReconstructionError: If every zeta_r is below threshold, r0 is odd or no
            reference point clears the threshold.
    """
    m = basis.n_modes
    r_max = len(zeta) - 1
    magnitudes = [float(np.max(np.abs(z), initial=0.0)) for z in zeta]
    top = max(magnitudes)
    if top == 0.0:
        raise ReconstructionError("All z_r vanish; the state is indistinguishable from the vacuum at this cap")
    cutoff = threshold * top

    z0 = float(np.real(zeta[0]))
    if z0 > cutoff:
        f0 = sqrt(z0)
        coefficients = [np.asarray(f0 + 0j)] + [_positive_block(zeta[r], m) / f0 for r in range(1, r_max + 1)]
        amplitudes = FockStateAmplitudes(coefficients=coefficients, solutions=_solutions(coefficients, basis))
        return ReconstructionResult(amplitudes=amplitudes, branch="z0", details={"z0": z0})

    r0 = next(r for r in range(r_max + 1) if magnitudes[r] > cutoff)
    if r0 % 2:
        raise ReconstructionError(f"Lowest nonzero degree r0={r0} must be even")
    n0 = r0 // 2
    negative = slice(m, 2 * m)
    positive = slice(0, m)
    mixed = zeta[r0][(negative,) * n0 + (positive,) * n0]
    # conj(S_+ f_n0)(y) (x) S_+ f_n0(x) over sites
    over_sites = mixed
    for axis in range(2 * n0):
        rows = basis.modes.conj() if axis < n0 else basis.modes
        over_sites = np.moveaxis(np.tensordot(rows.T, np.moveaxis(over_sites, axis, 0), axes=(1, 0)), 0, axis)
    n_sites = basis.modes.shape[1]
    flat = over_sites.reshape(n_sites ** n0, n_sites ** n0)
    diagonal = np.real(np.diagonal(flat))
    k_diag = factorial(n0) ** 2 / factorial(2 * n0)
    best = int(np.argmax(diagonal))
    if diagonal[best] <= cutoff:
        raise ReconstructionError(
            f"No reference point clears the threshold: max diagonal {diagonal[best]:.3e} <= {cutoff:.3e}"
        )
    reference = tuple(int(v) for v in np.unravel_index(best, (n_sites,) * n0))
    value = sqrt(diagonal[best] / k_diag)

    evaluate = np.ones(1, dtype=complex)
    for site in reference:
        evaluate = np.multiply.outer(evaluate, basis.modes.conj()[:, site]).reshape(-1)
    evaluate = evaluate.reshape((m,) * n0) if n0 else np.asarray(1.0 + 0j)

    coefficients = []
    for n in range(r_max - n0 + 1):
        block = zeta[n0 + n][(negative,) * n0 + (positive,) * n]
        reduced = np.tensordot(evaluate, block, axes=(list(range(n0)), list(range(n0)))) if n0 else block
        k_n = factorial(n0) * factorial(n) / factorial(n0 + n)
        coefficients.append(np.asarray(reduced, dtype=complex) / (k_n * value))
    amplitudes = FockStateAmplitudes(coefficients=coefficients, solutions=_solutions(coefficients, basis))
    return ReconstructionResult(
        amplitudes=amplitudes,
        branch="r0",
        reference=reference,
        details={"r0": r0, "reference_value": value},
    )


def amplitude_distance(recovered: Sequence[np.ndarray], original: Sequence[np.ndarray]) -> float:
    """
    Relative distance between two coefficient sequences after aligning the
    global phase; missing degrees count as zero.
    """
    size = max(len(recovered), len(original))

    def flat(cs):
        parts = []
        for n in range(size):
            if n < len(cs):
                parts.append(np.sqrt(factorial(n)) * np.asarray(cs[n], dtype=complex).reshape(-1))
            else:
                parts.append(None)
        return parts

    a, b = flat(recovered), flat(original)
    for n in range(size):
        if a[n] is None:
            a[n] = np.zeros_like(b[n])
        if b[n] is None:
            b[n] = np.zeros_like(a[n])
    va, vb = np.concatenate(a), np.concatenate(b)
    overlap = np.vdot(va, vb)
    phase = overlap / abs(overlap) if abs(overlap) > 0 else 1.0
    norm = max(np.linalg.norm(vb), 1e-300)
    return float(np.linalg.norm(phase * va - vb) / norm)


def reconstruct(W_prime: Functional, W: Functional, basis: ModeBasis, r_max: Optional[int] = None,
                threshold: float = THRESHOLD) -> ReconstructionResult:
    """lhs_functional, solve_z and recover_f in sequence."""
    E = lhs_functional(W_prime, W)
    zeta = solve_z(E, basis, r_max)
    result = recover_f(zeta, basis, threshold)
    result.details["zeta_norms"] = [float(np.linalg.norm(z)) for z in zeta]
    return result


def out_region_lattice(lattice: LatticeSpacetime) -> LatticeSpacetime:
    """Flat two-slice lattice carrying the last two slices of an epsilon lattice."""
    return build_lattice(
        LatticeConfig(nt=2, nx=lattice.nx, dt=lattice.dt, dx=lattice.dx, mass=lattice.mass)
    )


def scattering_chain(lattice: LatticeSpacetime, p: int = 4, coupling: float = 1.0, sigma_max: int = 1,
                     switching: str = "none", degree_cap: int = 4,
                     threshold: float = THRESHOLD) -> Dict[str, object]:
    """
    Perturbative out-state of the in-vacuum, reconstructed against the flat out vacuum.

    The truncated out-field functions on the last two slices are tabulated
    from graphs up to order sigma_max and summed with weights (-coupling)^sigma;
    they form W'^T on the flat two-slice lattice, whose mode two-point function
    gives the reference W.

    Returns:
        Mapping with the out lattice, E, zeta, the ReconstructionResult and the
        Fock weight n! ||c_n||^2 of every recovered degree.
    """
    propagators = build_propagators(lattice)
    vertex_weights = interaction_weights(lattice, switching)
    out_sites = list(range((lattice.nt - 2) * lattice.nx, lattice.nt * lattice.nx))

    flat = out_region_lattice(lattice)
    weights = volume_weights(flat)
    basis = mode_basis(flat)
    dplus = quasifree_two_point(flat, basis)

    T_prime = zero(flat.n_sites, degree_cap, weights)
    for n in range(1, degree_cap + 1):
        total = np.zeros((flat.n_sites,) * n, dtype=complex)
        for sigma in range(sigma_max + 1):
            if (n + sigma * (p - 2)) % 2:
                continue
            table = truncated_wightman_table(["out"] * n, out_sites, sigma, propagators, p, vertex_weights)
            total += (-coupling) ** sigma * table
        T_prime.components[n] = total
    W_prime = star_exp(T_prime)
    W = quasifree_functional(dplus, weights, degree_cap)

    E = lhs_functional(W_prime, W)
    zeta = solve_z(E, basis)
    result = recover_f(zeta, basis, threshold)
    fock_weights = [float(factorial(n) * np.sum(np.abs(c) ** 2)) for n, c in enumerate(result.amplitudes.coefficients)]
    logger.info("Scattering chain: branch %s, Fock weights %s", result.branch, fock_weights)
    return {
        "lattice": flat,
        "E": E,
        "zeta": zeta,
        "result": result,
        "fock_weights": fock_weights,
    }
