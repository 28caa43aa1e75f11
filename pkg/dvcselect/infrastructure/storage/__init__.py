"""
Storage adapters package.
"""

from .file_repositories import (
    FilePoolRepository,
    FileReportStore,
    JsonlAuditLog,
    dumps_deterministic,
)

__all__ = [
    "FilePoolRepository",
    "FileReportStore",
    "JsonlAuditLog",
    "dumps_deterministic",
]
