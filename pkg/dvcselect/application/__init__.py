"""
Application layer package.
"""