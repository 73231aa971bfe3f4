"""
Yang-Feldman MCP - perturbative Wightman functions, operator identity checks and
state reconstruction on a (1+1)D lattice.
"""

__version__ = "0.1.0"
