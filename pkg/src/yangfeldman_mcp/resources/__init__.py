"""
Resource module initialization.
"""

from yangfeldman_mcp.resources.identities import nonquasifree_demo, run_identity_checks
from yangfeldman_mcp.resources.reconstruction import combinatorial_factors, reconstruct_state
from yangfeldman_mcp.resources.wightman import expand_interacting_field, list_trees, truncated_wightman_function

__all__ = [
    "nonquasifree_demo",
    "run_identity_checks",
    "combinatorial_factors",
    "reconstruct_state",
    "expand_interacting_field",
    "list_trees",
    "truncated_wightman_function",
]
