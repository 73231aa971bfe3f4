"""
State reconstruction tools for the FastMCP server.
"""

from typing import Any, Dict, List, Optional

from yangfeldman_mcp.app import mcp

from ..api.experiments import run_reconstruction_demo
from ..api.reconstruct import closed_form_table
from ..api.star_calc import functional_from_json
from ..utils.config_utils import parse_config
from ..utils.io_utils import to_jsonable


@mcp.tool()
def reconstruct_state(state: Optional[Dict[str, Any]] = None, quasifree: Optional[Dict[str, Any]] = None,
                      scattering: bool = False, config: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    """
    Builds the Wightman functional of a Fock state over the quasifree out vacuum and
    recovers the particle amplitudes from it, up to a global phase.

    Args:
        state: Optional. Either {"coefficients": [...]} with mode coefficients c_n as
            nested lists with a trailing [re, im] axis, or {"degrees": [0, 2], "seed": 1,
            "active_modes": 2} for a random state. Defaults to a random 0+2 particle state.
        quasifree: Optional. Reference functional as {"degree_cap", "weights", "components"}.
        scattering: Also reconstruct the first-order out state of the configured lattice.
        config: Optional. Flat config keys, e.g. {"nx": 3, "dt": 0.5}

    Returns:
        Report with the branch taken (z0 or r0), residuals, the recovered amplitudes
        and the phase convention.
    """
    cfg = parse_config(config or {}, {"experiment": "reconstruct"})
    reference = functional_from_json(quasifree) if quasifree else None
    return to_jsonable(run_reconstruction_demo(cfg, state=state, quasifree=reference, scattering=scattering))


@mcp.tool()
def combinatorial_factors(r_max: int = 6) -> List[Dict[str, Any]]:
    """
    Tabulates the factors c_(s,r) relating the loop-reduced components of E to the
    z coordinates, counted by enumeration, next to the closed-form product.

    Args:
        r_max: Largest degree r

    Returns:
        Rows with s, r, the enumerated value, the closed form and whether they match.
    """
    return to_jsonable(closed_form_table(r_max))
