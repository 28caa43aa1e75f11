"""
Helpers shared by the CLI commands: settings access, error reporting and
spec assembly.
"""

import json
import sys
from functools import wraps
from typing import Any, Callable, Dict, Optional

import click

from ....infrastructure.config.settings import Settings, get_settings
from ....shared.exceptions import ConfigurationError, DvcSelectError, SchemaError

# Configuration and schema problems exit with 2, everything else with 1
USAGE_ERRORS = (ConfigurationError, SchemaError)


def emit_error(error: Exception) -> int:
    """Print ``{"error", "message"}`` on stderr and return the exit code."""
    error_class = getattr(error, "error_class", "internal_error")
    click.echo(json.dumps({"error": error_class, "message": str(error)}), err=True)
    return 2 if isinstance(error, USAGE_ERRORS) else 1


def guarded(command: Callable) -> Callable:
    """Turn package errors into the JSON error line and a non-zero exit."""

    @wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except DvcSelectError as e:
            sys.exit(emit_error(e))
        except (click.ClickException, click.exceptions.Exit):
            raise
        except Exception as e:  # noqa: BLE001
            sys.exit(emit_error(e))

    return wrapper


def current_settings() -> Settings:
    return get_settings()


def experiment_section(settings: Settings, key: Optional[str] = None) -> Dict[str, Any]:
    """The ``experiment`` config section, or one of its sub-sections."""
    section = dict(settings.experiment)
    if key is None:
        return {k: v for k, v in section.items() if k not in ("scaling", "ablation", "regret")}
    value = section.get(key) or {}
    if not isinstance(value, dict):
        raise ConfigurationError(f"experiment.{key} must be a mapping")
    return dict(value)


def dataset_overrides(data: Optional[str], base: Dict[str, Any]) -> Dict[str, Any]:
    """Point the dataset at a tabular file when ``--data`` is given."""
    dataset = dict(base.get("dataset") or {})
    if data:
        dataset["kind"] = "tabular"
        dataset["path"] = data
    return dataset
