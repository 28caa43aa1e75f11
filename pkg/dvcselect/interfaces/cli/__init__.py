"""
CLI interface package.
"""