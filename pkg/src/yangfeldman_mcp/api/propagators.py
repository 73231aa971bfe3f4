"""
Retarded/advanced Green functions, commutator function, two-point function and
the positive/negative frequency split on the lattice.
"""

import logging
from dataclasses import replace
from typing import Dict, Optional, Tuple, Union

import numpy as np

from .backends import FLOAT, NumberBackend, get_backend
from .errors import ModeBasisError
from .lattice import lattice_frequencies, volume_weights
from .types import LatticeSpacetime, ModeBasis, PropagatorSet

logger = logging.getLogger(__name__)

TWO_POINT_TOLERANCE = 1e-10


def backend_weights(lattice: LatticeSpacetime, backend: NumberBackend) -> np.ndarray:
    """Volume weights as backend reals; d = 2 keeps them rational."""
    if backend.exact:
        factor = backend.real_array(lattice.conformal_factor())
        return (factor * (backend.real(lattice.dt) * backend.real(lattice.dx))).reshape(-1)
    return volume_weights(lattice)


def _step(lattice, backend, factor, current, previous):
    """One homogeneous leapfrog update of slice data with trailing columns."""
    cx = backend.real(lattice.dt) ** 2 / backend.real(lattice.dx) ** 2
    cm = backend.real(lattice.dt) ** 2 * backend.real(lattice.mass) ** 2
    lap = np.roll(current, -1, axis=0) + np.roll(current, 1, axis=0) - 2 * current
    scaled = factor * cm
    mass_term = scaled[:, None] * current if current.ndim == 2 else scaled * current
    return 2 * current - previous + lap * cx - mass_term


def green_retarded(lattice: LatticeSpacetime, backend: Union[str, NumberBackend] = FLOAT) -> np.ndarray:
    """
    Retarded Green function Gr[x, y] by forward leapfrog stepping.

    A unit source at y (Kronecker delta over the volume weight) enters the update
    that produces slice t_y + 1, so Gr(., y) vanishes on slices <= t_y and has
    support |dx| <= dt - 1 in lattice steps. A source on the last slice produces
    no update and its column is zero.

    Args:
        lattice: The spacetime.
        backend: "float" or "exact"; the exact backend steps in rationals.

    Returns:
        Matrix of shape (n_sites, n_sites) in backend numbers.
    """
    backend = get_backend(backend)
    nt, nx, n = lattice.nt, lattice.nx, lattice.n_sites
    factor = backend.real_array(lattice.conformal_factor())
    weights = backend_weights(lattice, backend)
    dt2 = backend.real(lattice.dt) ** 2

    grid = backend.zeros((nt, nx, n))
    previous = backend.zeros((nx, n))
    for t in range(nt - 1):
        current = grid[t]
        following = _step(lattice, backend, factor[t], current, previous)
        for x in range(nx):
            site = t * nx + x
            following[x, site] = following[x, site] + dt2 * factor[t, x] / weights[site]
        grid[t + 1] = following
        previous = current
    logger.debug("Stepped retarded Green function on %dx%d lattice (%s)", nt, nx, backend.name)
    return grid.reshape(n, n)


def flat_mode_sum_retarded(lattice: LatticeSpacetime) -> np.ndarray:
    """
    Spectral oracle for Gr on a flat periodic lattice.

    Gr(x, y) = 1/(nx dx) sum_k exp(ik dx_xy) dt sin(theta_k n)/sin(theta_k), n = t_x - t_y >= 0.
    """
    nt, nx = lattice.nt, lattice.nx
    thetas = lattice_frequencies(lattice)
    steps = np.arange(nt)
    offsets = np.arange(nx)
    phases = np.exp(2j * np.pi * np.outer(np.arange(nx), offsets) / nx)
    amplitude = lattice.dt * np.sin(np.outer(steps, thetas)) / np.sin(thetas)
    kernel = (amplitude @ phases).real / (nx * lattice.dx)

    t, x = np.divmod(np.arange(lattice.n_sites), nx)
    n_steps = t[:, None] - t[None, :]
    shift = (x[:, None] - x[None, :]) % nx
    return np.where(n_steps >= 0, kernel[np.clip(n_steps, 0, None), shift], 0.0)


def flat_mode_sum_two_point(lattice: LatticeSpacetime) -> np.ndarray:
    """
    Closed-form flat two-point function,
    D+(x, y) = sum_k dt exp(i theta_k (t_x - t_y) + ik (x_x - x_y)) / (2 nx dx sin theta_k).
    """
    nx = lattice.nx
    thetas = lattice_frequencies(lattice)
    t, x = np.divmod(np.arange(lattice.n_sites), nx)
    n_steps = t[:, None] - t[None, :]
    shift = x[:, None] - x[None, :]
    j = np.arange(nx)
    phase = np.exp(1j * (n_steps[..., None] * thetas + 2.0 * np.pi * shift[..., None] * j / nx))
    return (phase * lattice.dt / (2.0 * nx * lattice.dx * np.sin(thetas))).sum(axis=-1)


def mode_basis(lattice: LatticeSpacetime) -> ModeBasis:
    """
    Flat positive-frequency modes on the first two slices, evolved with the exact
    metric stepper over the whole lattice.

    Raises:
        ModeBasisError: If a mode has zero frequency (m = 0).
    """
    nt, nx = lattice.nt, lattice.nx
    thetas = lattice_frequencies(lattice)
    if np.any(np.sin(thetas) <= 1e-12):
        raise ModeBasisError(f"Mode basis needs strictly positive frequencies; mass={lattice.mass} gives a zero mode")

    norms = np.sqrt(lattice.dt / (2.0 * nx * lattice.dx * np.sin(thetas)))
    spatial = np.exp(2j * np.pi * np.outer(np.arange(nx), np.arange(nx)) / nx)
    grid = np.zeros((nt, nx, nx), dtype=complex)
    for t in range(min(2, nt)):
        grid[t] = spatial * (norms * np.exp(1j * thetas * t))[None, :]

    factor = lattice.conformal_factor()
    for t in range(1, nt - 1):
        grid[t + 1] = _step(lattice, FLOAT, factor[t], grid[t], grid[t - 1])
    modes = grid.reshape(nt * nx, nx).T.copy()

    n_modes = nx
    cauchy_sites = np.arange(min(2, nt) * nx)
    basis_rows = np.concatenate([modes, modes.conj()], axis=0)
    cauchy_inverse = np.linalg.inv(basis_rows[:, cauchy_sites].T)

    kplus = np.diag(np.concatenate([np.ones(n_modes), np.zeros(n_modes)])).astype(complex)
    kminus = np.eye(2 * n_modes, dtype=complex) - kplus
    zeros = np.zeros((n_modes, n_modes))
    ident = np.eye(n_modes)
    sigma = np.block([[zeros, -1j * ident], [1j * ident, zeros]])
    return ModeBasis(
        lattice=lattice,
        modes=modes,
        thetas=thetas,
        cauchy_sites=cauchy_sites,
        cauchy_inverse=cauchy_inverse,
        kplus=kplus,
        kminus=kminus,
        j=1j * (kplus - kminus),
        sigma=sigma,
        inner_product=np.eye(2 * n_modes, dtype=complex),
    )


def quasifree_two_point(lattice: LatticeSpacetime, basis: ModeBasis, d: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Two-point function D+(x, y) = sum_k u_k(x) conj(u_k(y)) of the mode basis.

    Args:
        lattice: The spacetime the basis lives on.
        basis: Mode basis from mode_basis().
        d: Optional float commutator function; computed when omitted.

    Returns:
        Complex matrix D+.

    Raises:
        ModeBasisError: If Im D+ deviates from D/2 beyond tolerance.
    """
    dplus = basis.modes.T @ basis.modes.conj()
    if d is None:
        gr = green_retarded(lattice)
        d = gr - gr.T
    scale = max(float(np.max(np.abs(d))), 1.0)
    deviation = float(np.max(np.abs(dplus.imag - 0.5 * d)))
    if deviation > TWO_POINT_TOLERANCE * scale:
        raise ModeBasisError(f"Im D+ deviates from D/2 by {deviation:.3e} (scale {scale:.3e})")
    return dplus


def tensor_coordinates(basis: ModeBasis, tensor: np.ndarray) -> np.ndarray:
    """
    Solution coordinates of every leg of a site tensor whose legs are solutions.

    Each axis of length n_sites is replaced by an axis of length 2M.
    """
    out = np.asarray(tensor, dtype=complex)
    for axis in range(out.ndim):
        moved = np.moveaxis(out, axis, 0)[basis.cauchy_sites]
        moved = np.tensordot(basis.cauchy_inverse, moved, axes=(1, 0))
        out = np.moveaxis(moved, 0, axis)
    return out


def frequency_split(basis: ModeBasis, f: np.ndarray, kind: str = "solution",
                    dtilde: Optional[np.ndarray] = None,
                    weights: Optional[np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    Split a solution (or the solution part of a test function) into its positive
    and negative frequency pieces.

    Args:
        basis: Mode basis.
        f: Values over sites.
        kind: "solution" when f already solves the KG equation, "test" to first
            form the solution part Dtilde f.
        dtilde: Symmetric two-point part, required for kind="test".
        weights: Volume weights, required for kind="test".

    Returns:
        (positive part, negative part) as site functions.
    """
    f = np.asarray(f, dtype=complex)
    if kind == "test":
        if dtilde is None or weights is None:
            raise ValueError("frequency_split of a test function needs dtilde and weights")
        f = dtilde @ (weights * f)
    elif kind != "solution":
        raise ValueError(f"Unknown kind '{kind}'. Use 'solution' or 'test'")
    coords = tensor_coordinates(basis, f)
    m = basis.n_modes
    positive = coords[:m] @ basis.modes
    negative = coords[m:] @ basis.modes.conj()
    return positive, negative


def positive_duals(basis: ModeBasis, weights: np.ndarray) -> np.ndarray:
    """
    Test functions g_k whose solution part is exactly u_k.

    They satisfy sum_x w conj(u_j) g_k = delta_jk and sum_x w u_j g_k = 0.
    """
    m = basis.n_modes
    constraints = np.concatenate([basis.modes.conj(), basis.modes], axis=0) * weights[None, :]
    targets = np.zeros((2 * m, m), dtype=complex)
    targets[:m] = np.eye(m)
    return (np.linalg.pinv(constraints) @ targets).T


def first_order_source(lattice: LatticeSpacetime, grid: np.ndarray) -> np.ndarray:
    """
    Apply (d/2 - 1) eta^{bc} (d_b h) d_c - h m^2 to slice data of shape (nt, nx, ...).
    """
    h = lattice.h.reshape(lattice.h.shape + (1,) * (grid.ndim - 2))
    out = -lattice.mass**2 * h * grid
    coefficient = lattice.dim / 2.0 - 1.0
    if coefficient != 0.0:
        inner = grid[1:-1]
        dt_h = (h[2:] - h[:-2]) / (2.0 * lattice.dt)
        dt_f = (grid[2:] - grid[:-2]) / (2.0 * lattice.dt)
        dx_h = (np.roll(h[1:-1], -1, axis=1) - np.roll(h[1:-1], 1, axis=1)) / (2.0 * lattice.dx)
        dx_f = (np.roll(inner, -1, axis=1) - np.roll(inner, 1, axis=1)) / (2.0 * lattice.dx)
        out[1:-1] = out[1:-1] + coefficient * (-dt_h * dt_f + dx_h * dx_f)
    return out


def epsilon_expand_dminus(lattice: LatticeSpacetime, order: int = 1) -> Dict[str, np.ndarray]:
    """
    First-order epsilon expansion of D-(x, y) = <phi(y) phi(x)>.

    D10minus applies G_{r,0}[source] to the first argument x, D01minus to the
    second argument y; both are multiplied by epsilon in the expansion.

    Raises:
        ValueError: If order is not 0 or 1.
    """
    if order not in (0, 1):
        raise ValueError(f"Only first-order expansion is implemented, got order={order}")
    flat = replace(lattice, epsilon=0.0)
    basis0 = mode_basis(flat)
    gr0 = green_retarded(flat)
    w0 = volume_weights(flat)
    d00 = (basis0.modes.T @ basis0.modes.conj()).T
    result = {"D00minus": d00}
    if order == 0:
        return result

    shape = (lattice.nt, lattice.nx, lattice.n_sites)
    propagate = gr0 * w0[None, :]
    on_first = first_order_source(lattice, d00.reshape(shape)).reshape(lattice.n_sites, -1)
    on_second = first_order_source(lattice, d00.T.reshape(shape)).reshape(lattice.n_sites, -1)
    result["D10minus"] = propagate @ on_first
    result["D01minus"] = (propagate @ on_second).T
    return result


def on_shell_leakage(flat_basis: ModeBasis, kernel: np.ndarray, slot: int = 1) -> float:
    """
    Fraction of a kernel's dependence on one argument, restricted to the last two
    slices, that lies in the negative-frequency flat modes.

    A kernel built from positive-frequency flat solutions in that argument gives
    zero up to rounding.
    """
    lattice = flat_basis.lattice
    matrix = kernel if slot == 1 else kernel.T
    out_sites = np.arange((lattice.nt - 2) * lattice.nx, lattice.nt * lattice.nx)
    rows = flat_basis.solution_basis[:, out_sites]
    coords = matrix[:, out_sites] @ np.linalg.inv(rows)
    m = flat_basis.n_modes
    total = np.linalg.norm(coords)
    if total == 0.0:
        return 0.0
    return float(np.linalg.norm(coords[:, m:]) / total)


def build_propagators(lattice: LatticeSpacetime, backend: Union[str, NumberBackend] = FLOAT,
                      with_modes: bool = True) -> PropagatorSet:
    """
    Build every propagator table for a lattice.

    Args:
        lattice: The spacetime.
        backend: Number backend for Gr, Ga, D and the weights.
        with_modes: Also build the mode basis and the (float) two-point functions.

    Returns:
        The PropagatorSet.
    """
    backend = get_backend(backend)
    gr = green_retarded(lattice, backend)
    ga = gr.T.copy()
    d = gr - ga
    weights = backend_weights(lattice, backend)
    dplus = dminus = dtilde = basis = None
    if with_modes:
        basis = mode_basis(lattice)
        d_float = d if not backend.exact else backend.to_float_array(d)
        dplus = quasifree_two_point(lattice, basis, d_float)
        dminus = dplus.T.copy()
        dtilde = 2.0 * dplus.real
    logger.info("Built propagators for %d sites (%s backend, modes=%s)", lattice.n_sites, backend.name, with_modes)
    return PropagatorSet(
        lattice=lattice,
        backend=backend,
        gr=gr,
        ga=ga,
        d=d,
        weights=weights,
        dplus=dplus,
        dminus=dminus,
        dtilde=dtilde,
        basis=basis,
    )
