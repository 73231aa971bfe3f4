"""
Entry point for the Yang-Feldman MCP server.
"""

from yangfeldman_mcp.main import main

if __name__ == "__main__":
    main()
