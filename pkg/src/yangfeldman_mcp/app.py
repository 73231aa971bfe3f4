"""
FastMCP server initialization.
"""

from fastmcp import FastMCP


def create_app():
    """Create and configure the MCP application."""
    return FastMCP("YangFeldmanMcp")


mcp = create_app()

from yangfeldman_mcp.resources import identities, reconstruction, wightman  # noqa: E402,F401
