"""Dataset parsers for tabular pool files."""

from .tabular_parser import TabularSchema, build_pool, load_tabular

__all__ = [
    'TabularSchema',
    'build_pool',
    'load_tabular',
]
