"""
Interface layer package.
"""