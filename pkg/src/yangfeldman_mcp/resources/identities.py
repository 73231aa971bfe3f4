"""
Identity suite and non-quasifreeness tools for the FastMCP server.
"""

from typing import Any, Dict, List, Optional

from yangfeldman_mcp.app import mcp

from ..api.experiments import run_identity_suite, run_nonquasifree_demo
from ..utils.config_utils import parse_config
from ..utils.io_utils import to_jsonable


@mcp.tool()
def run_identity_checks(identity: str = "all", order: int = 1, backend: str = "exact",
                        instances: int = 10, config: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    """
    Verifies the operator identities of the perturbative construction on the lattice:
    tree expansion against retarded products, locality, GLZ, retarded propagator pulls,
    the free commutation relations of the outgoing field and the graph sum against
    the Wick oracle. A deliberately corrupted commutator table must fail.

    Args:
        identity: "all" or comma separated names, e.g. "locality,glz,out-ccr"
        order: Highest perturbative order checked (at most 2)
        backend: One of [exact, float]; exact checks require a residual of zero
        instances: Random instances per check
        config: Optional. Flat config keys, e.g. {"nt": 6, "nx": 3, "p": 3}

    Returns:
        Report with instances, max_residual and pass for every check, and an overall pass.
    """
    overrides = {"experiment": "check", "identity": identity, "order": order, "backend": backend,
                 "instances": instances}
    cfg = parse_config(config or {}, overrides)
    return to_jsonable(run_identity_suite(cfg))


@mcp.tool()
def nonquasifree_demo(points: Optional[List[int]] = None, nt_scan: Optional[List[int]] = None,
                      config: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    """
    Computes the first-order truncated 4-point function of the outgoing field with and
    without the metric perturbation, splits the perturbation into its first-order
    pieces and reports whether the out state is distinguishably non-quasifree.

    Args:
        points: Optional. Four site indices; four points on the last slice by default.
        nt_scan: Optional. Lattice heights for the flat baseline decay trend.
        config: Optional. Flat config keys, e.g.
            {"nt": 24, "nx": 8, "epsilon": 0.05, "h_profile": "time_bump", "h_center": 5.5, "h_width": 3.0}

    Returns:
        Report with the value, baseline, ratio, decomposition, multiplicity and verdict.
    """
    cfg = parse_config(config or {}, {"experiment": "demo-nonquasifree"})
    return to_jsonable(run_nonquasifree_demo(cfg, points=points, nt_scan=nt_scan or ()))
