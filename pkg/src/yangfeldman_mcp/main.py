"""
Entry point for the Yang-Feldman MCP server.
"""

import logging
import os

from dotenv import load_dotenv

from yangfeldman_mcp.app import mcp


def main():
    load_dotenv()
    logging.basicConfig(level=getattr(logging, os.getenv("YF_LOG_LEVEL", "WARNING").upper(), logging.WARNING))
    mode = os.getenv("MODE", "stdio").lower()

    if mode == "http":
        mcp.run(transport="streamable-http",
                host=os.getenv("YF_HOST", "127.0.0.1"),
                port=int(os.getenv("YF_PORT", "14101")))
    else:
        # Default stdio transport
        mcp.run()


if __name__ == "__main__":
    main()
