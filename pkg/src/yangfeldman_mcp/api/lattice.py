"""
Discretized (1+1)D spacetime with a conformally perturbed metric.
"""

import logging
from dataclasses import asdict
from typing import Mapping, Optional, Union

import numpy as np

from .errors import LatticeConfigError
from .types import CausalRelation, LatticeConfig, LatticeSpacetime

logger = logging.getLogger(__name__)

H_PROFILES = ("none", "time_bump", "spacetime_bump")


def smooth_bump(r: np.ndarray) -> np.ndarray:
    """Compactly supported C-infinity bump on |r| < 1 with peak value 1."""
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    inside = np.abs(r) < 1.0
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - r[inside] ** 2))
    return out


def build_profile(config: LatticeConfig) -> np.ndarray:
    """
    Evaluate the named h profile on the (nt, nx) grid.

    Args:
        config: Lattice parameters; h_center and h_width are physical times.

    Returns:
        Array of shape (nt, nx).

    Raises:
        LatticeConfigError: If the profile is unknown or its width is not positive.
    """
    shape = (config.nt, config.nx)
    if config.h_profile == "none":
        return np.zeros(shape)
    if config.h_profile not in H_PROFILES:
        raise LatticeConfigError(
            f"Unknown h_profile '{config.h_profile}'. Available profiles: {', '.join(H_PROFILES)}"
        )
    if config.h_width <= 0:
        raise LatticeConfigError(f"h_width must be positive for profile '{config.h_profile}', got {config.h_width}")

    times = np.arange(config.nt) * config.dt
    temporal = config.h_amplitude * smooth_bump((times - config.h_center) / config.h_width)
    profile = np.repeat(temporal[:, None], config.nx, axis=1)
    if config.h_profile == "spacetime_bump":
        phase = 2.0 * np.pi * np.arange(config.nx) / config.nx
        profile = profile * 0.5 * (1.0 + np.cos(phase))[None, :]
    return profile


def stability_bound(dt: float, dx: float, mass: float, max_factor: float = 1.0) -> float:
    """dt^2 * (4/dx^2 + max(1+eps*h) * m^2); the leapfrog is stable below 4."""
    return dt * dt * (4.0 / (dx * dx) + max_factor * mass * mass)


def build_lattice(config: Union[LatticeConfig, Mapping], h: Optional[np.ndarray] = None) -> LatticeSpacetime:
    """
    Validate lattice parameters and build the spacetime.

    Args:
        config: A LatticeConfig or a mapping with the same keys.
        h: Optional explicit perturbation profile of shape (nt, nx); overrides h_profile.

    Returns:
        The validated LatticeSpacetime.

    Raises:
        LatticeConfigError: On nonpositive spacings, CFL violation, or an h that does not
            vanish on the first and last two slices.
    """
    if not isinstance(config, LatticeConfig):
        config = LatticeConfig(**dict(config))

    if config.nt < 2 or config.nx < 2:
        raise LatticeConfigError(f"Lattice needs nt >= 2 and nx >= 2, got nt={config.nt}, nx={config.nx}")
    if config.dt <= 0 or config.dx <= 0:
        raise LatticeConfigError(f"Spacings must be positive, got dt={config.dt}, dx={config.dx}")
    if config.mass < 0:
        raise LatticeConfigError(f"Mass must be nonnegative, got {config.mass}")
    if config.dt / config.dx >= 1.0:
        raise LatticeConfigError(f"CFL violated: dt/dx = {config.dt / config.dx:.4g} must be < 1")

    profile = build_profile(config) if h is None else np.asarray(h, dtype=float)
    if profile.shape != (config.nt, config.nx):
        raise LatticeConfigError(f"h must have shape {(config.nt, config.nx)}, got {profile.shape}")
    if config.epsilon != 0.0 and (np.any(profile[:2]) or np.any(profile[-2:])):
        raise LatticeConfigError("h must vanish on the first 2 and last 2 time slices")

    factor = 1.0 + config.epsilon * profile
    if np.any(factor <= 0):
        raise LatticeConfigError(f"Conformal factor 1+eps*h must stay positive, minimum is {factor.min():.4g}")
    bound = stability_bound(config.dt, config.dx, config.mass, float(factor.max()))
    if bound >= 4.0:
        raise LatticeConfigError(f"CFL violated including the mass term: dt^2(4/dx^2 + m^2) = {bound:.4g} must be < 4")

    lattice = LatticeSpacetime(
        nt=config.nt,
        nx=config.nx,
        dt=config.dt,
        dx=config.dx,
        mass=config.mass,
        epsilon=config.epsilon,
        h=profile,
        h_profile=config.h_profile if h is None else "custom",
        config=config,
    )
    logger.info("Built %dx%d lattice (eps=%g, profile=%s)", config.nt, config.nx, config.epsilon, lattice.h_profile)
    return lattice


def lattice_parameters(lattice: LatticeSpacetime) -> dict:
    """Plain dictionary of the scalar parameters, used for hashing and reports."""
    params = asdict(lattice.config) if lattice.config is not None else {}
    params.update({"h_checksum": float(np.sum(lattice.h)), "h_profile": lattice.h_profile})
    return params


def volume_weights(lattice: LatticeSpacetime) -> np.ndarray:
    """(1 + eps*h)^(d/2) * dt * dx for every site, in site order."""
    factor = lattice.conformal_factor() ** (lattice.dim / 2.0)
    return (factor * lattice.dt * lattice.dx).reshape(-1)


def volume_weight(lattice: LatticeSpacetime, site: int) -> float:
    t, x = lattice.site_coords(site)
    factor = 1.0 + lattice.epsilon * lattice.h[t, x]
    return float(factor ** (lattice.dim / 2.0) * lattice.dt * lattice.dx)


def lattice_frequencies(lattice: LatticeSpacetime) -> np.ndarray:
    """
    Dimensionless phase advance per step, theta_k, of the flat stepper.

    Returns an array over k = 2*pi*j/(nx*dx), j = 0..nx-1, solving
    2 - 2 cos(theta) = dt^2 (4/dx^2 sin^2(k dx/2) + m^2).
    """
    k = wave_numbers(lattice)
    omega2 = 4.0 / lattice.dx**2 * np.sin(k * lattice.dx / 2.0) ** 2 + lattice.mass**2
    return np.arccos(1.0 - 0.5 * lattice.dt**2 * omega2)


def wave_numbers(lattice: LatticeSpacetime) -> np.ndarray:
    """Periodic lattice momenta 2*pi*j/(nx*dx), j = 0..nx-1."""
    return 2.0 * np.pi * np.arange(lattice.nx) / (lattice.nx * lattice.dx)


def _box0(lattice: LatticeSpacetime, grid: np.ndarray) -> np.ndarray:
    out = np.zeros_like(grid)
    inner = grid[1:-1]
    d2t = (grid[2:] - 2.0 * inner + grid[:-2]) / lattice.dt**2
    d2x = (np.roll(inner, -1, axis=1) - 2.0 * inner + np.roll(inner, 1, axis=1)) / lattice.dx**2
    out[1:-1] = d2t - d2x
    return out


def _box1(lattice: LatticeSpacetime, grid: np.ndarray) -> np.ndarray:
    h = lattice.h
    out = -h * _box0(lattice, grid)
    coefficient = lattice.dim / 2.0 - 1.0
    if coefficient != 0.0:
        inner = grid[1:-1]
        dt_h = (h[2:] - h[:-2]) / (2.0 * lattice.dt)
        dt_f = (grid[2:] - grid[:-2]) / (2.0 * lattice.dt)
        dx_h = (np.roll(h[1:-1], -1, axis=1) - np.roll(h[1:-1], 1, axis=1)) / (2.0 * lattice.dx)
        dx_f = (np.roll(inner, -1, axis=1) - np.roll(inner, 1, axis=1)) / (2.0 * lattice.dx)
        out[1:-1] += coefficient * (-dt_h * dt_f + dx_h * dx_f)
    return out


def kg_apply(lattice: LatticeSpacetime, field: np.ndarray, part: Optional[str] = None) -> np.ndarray:
    """
    Apply the discrete Klein-Gordon operator.

    Args:
        lattice: The spacetime.
        field: Values over sites, flat (n_sites,) or shaped (nt, nx).
        part: None for the exact operator (box + m^2) of the metric, "box0" for the
            flat wave operator, "box1" for its first-order metric correction.

    Returns:
        Array of the same shape as field; the first and last slices are zero.

    Raises:
        ValueError: If part is not recognised.
    """
    field = np.asarray(field)
    grid = field.reshape(lattice.nt, lattice.nx)
    if part is None:
        result = _box0(lattice, grid) / lattice.conformal_factor() + lattice.mass**2 * grid
        result[0] = 0.0
        result[-1] = 0.0
    elif part == "box0":
        result = _box0(lattice, grid)
    elif part == "box1":
        result = _box1(lattice, grid)
    else:
        raise ValueError(f"Unknown operator part '{part}'. Use None, 'box0' or 'box1'")
    return result.reshape(field.shape)


def causal_order(lattice: LatticeSpacetime, x: int, y: int) -> CausalRelation:
    """
    Causal relation of site x to site y.

    x PRECEDES y when y lies in the closed forward cone of x, widened by one
    spatial site per time step.
    """
    if x == y:
        return CausalRelation.COINCIDENT
    tx, xx = lattice.site_coords(x)
    ty, xy = lattice.site_coords(y)
    distance = lattice.spatial_distance(xx, xy)
    if ty > tx and distance <= ty - tx:
        return CausalRelation.PRECEDES
    if tx > ty and distance <= tx - ty:
        return CausalRelation.SUCCEEDS
    return CausalRelation.SPACELIKE


def causal_matrix(lattice: LatticeSpacetime) -> np.ndarray:
    """
    Boolean matrix R[x, y] = True when y precedes or coincides with x.
    """
    t, xs = np.divmod(np.arange(lattice.n_sites), lattice.nx)
    dt = t[:, None] - t[None, :]
    dist = np.abs(xs[:, None] - xs[None, :]) % lattice.nx
    dist = np.minimum(dist, lattice.nx - dist)
    return (dt > 0) & (dist <= dt) | np.eye(lattice.n_sites, dtype=bool)


def spacelike_pairs(lattice: LatticeSpacetime):
    """All unordered spacelike site pairs (x < y)."""
    related = causal_matrix(lattice)
    related = related | related.T
    xs, ys = np.nonzero(~related)
    return [(int(a), int(b)) for a, b in zip(xs, ys) if a < b]


def time_order_key(lattice: LatticeSpacetime, site: int) -> int:
    """
    Position of a site in the time-major linear extension of the causal order.

    Equal-time sites are ordered by spatial index; they commute, so the tie-break
    never changes a nested commutator.
    """
    t, x = lattice.site_coords(site)
    return t * lattice.nx + x
