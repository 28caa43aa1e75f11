"""
Application services package.
"""

from .experiment_service import ExperimentService, SelectionOutcome

__all__ = [
    "ExperimentService",
    "SelectionOutcome",
]
