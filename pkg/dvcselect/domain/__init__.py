"""
Domain layer package.
"""