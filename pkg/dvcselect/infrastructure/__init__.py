"""
Infrastructure layer package.
"""

from .config import get_settings, reload_settings, Settings

__all__ = [
    "get_settings",
    "reload_settings",
    "Settings",
]
