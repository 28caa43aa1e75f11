"""
Shared utilities package.
"""