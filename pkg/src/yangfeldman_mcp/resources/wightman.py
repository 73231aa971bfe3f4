"""
Tree, field expansion and truncated Wightman function tools for the FastMCP server.
"""

from typing import Any, Dict, List, Optional

from yangfeldman_mcp.app import mcp

from ..api.engine_helper import init_engine
from ..api.errors import ConfigError
from ..api.experiments import default_points, run_field_expansion, run_tree_listing, run_wightman
from ..utils.config_utils import parse_config
from ..utils.io_utils import to_jsonable


@mcp.tool()
def truncated_wightman_function(types: List[str], points: Optional[List[int]] = None,
                                order: Optional[int] = None, breakdown: bool = False,
                                config: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    """
    Computes the truncated Wightman function of interacting fields on the lattice by
    summing all connected graphs glued from labeled trees.

    Args:
        types: Field type of every point in operator order, each one of [in, loc, out]
        points: Optional. Site index of every point (site = t * nx + x). Defaults to
            four points spread over the last time slice when four types are given.
        order: Optional. A single perturbative order; all orders up to sigma_max are
            evaluated and summed with (-lambda)^sigma when omitted.
        breakdown: Include the value of every graph.
        config: Optional. Flat config keys overriding the defaults, e.g.
            {"nt": 8, "nx": 4, "epsilon": 0.05, "h_profile": "time_bump", "p": 4, "lambda": 1.0}

    Returns:
        Report with the value and the number of graphs per order, the config hash
        and the package versions.

    Raises:
        ConfigError: If the config, a field type or a site is invalid.
    """
    cfg = parse_config(config or {}, {"experiment": "wightman"})
    ctx = init_engine(cfg)
    if points is None:
        if len(types) != 4:
            raise ConfigError("points are required unless four field types are given")
        points = default_points(ctx.lattice)
    return to_jsonable(run_wightman(cfg, types, points, breakdown=breakdown, order=order, ctx=ctx))


@mcp.tool()
def expand_interacting_field(field_type: str, site: int, config: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    """
    Expands an interacting, local or outgoing field at one site into Wick polynomials
    of the free in-field, one polynomial per perturbative order up to sigma_max.

    Args:
        field_type: One of [in, loc, out]
        site: Site index (site = t * nx + x)
        config: Optional. Flat config keys; use {"backend": "exact"} for rational coefficients.

    Returns:
        Report with the monomials (sites) and coefficients of every order.
    """
    cfg = parse_config(config or {}, {"experiment": "expand"})
    return to_jsonable(run_field_expansion(cfg, field_type, site))


@mcp.tool()
def list_trees(field_type: str, order: int, p: int = 4, dot: bool = False) -> Dict[str, Any]:
    """
    Lists the labeled trees of a field at a perturbative order.

    Args:
        field_type: One of [in, loc, out]
        order: Number of interaction vertices
        p: Power of the interaction, 3 or 4
        dot: Also return a DOT drawing of every tree

    Returns:
        The tree count and one text rendering per tree.
    """
    return run_tree_listing(field_type, order, p, dot=dot)
