"""
API module initialization.
"""

from yangfeldman_mcp.api.ccr_algebra import CCRAlgebra
from yangfeldman_mcp.api.engine_helper import EngineContext, init_engine
from yangfeldman_mcp.api.graphs import truncated_wightman, truncated_wightman_table
from yangfeldman_mcp.api.lattice import build_lattice
from yangfeldman_mcp.api.propagators import build_propagators
from yangfeldman_mcp.api.reconstruct import reconstruct, wightman_from_state
from yangfeldman_mcp.api.star_calc import star_exp, star_log, star_product, truncate
from yangfeldman_mcp.api.trees import expand_field

__all__ = [
    "CCRAlgebra",
    "EngineContext",
    "init_engine",
    "truncated_wightman",
    "truncated_wightman_table",
    "build_lattice",
    "build_propagators",
    "reconstruct",
    "wightman_from_state",
    "star_exp",
    "star_log",
    "star_product",
    "truncate",
    "expand_field",
]
