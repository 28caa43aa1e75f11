"""
Main CLI interface for dvcselect.

dvcselect picks training subsets from heterogeneous data sources by scoring
every candidate with a learned data value contribution.

Commands:
- synth: Write a synthetic multi-source pool
- select: Run one selection session
- bench: Run the (method, budget, seed) grid
- scale: Scaling sweep against full-pool training
- regret: Bandit regret simulation
- ablate: Metric ablation study
- config-show: Show the effective configuration
"""

import os
import sys
from pathlib import Path
from typing import Optional

import click
import yaml

from .commands import (
    ablate_command,
    bench_command,
    regret_command,
    scale_command,
    select_command,
    synth_command,
)
from .commands.common import emit_error
from ...infrastructure.config.settings import get_settings, reload_settings
from ...shared.exceptions import ConfigurationError
from ...shared.logging import setup_logging


@click.group()
@click.option(
    "--config",
    type=click.Path(exists=True, path_type=Path),
    help="Path to configuration file (YAML or JSON)"
)
@click.option(
    "--verbose",
    "-v",
    is_flag=True,
    help="Enable verbose logging"
)
@click.version_option(version="0.1.0", prog_name="dvcselect")
def cli(config: Optional[Path] = None, verbose: bool = False):
    """dvcselect: value-driven training subset selection.

    Quick start:
        dvcselect synth --out runs/pool       # Write a synthetic pool
        dvcselect select --budget 0.2         # One selection session
        dvcselect bench --seed 0 --seed 1     # Compare methods across budgets
    """
    if verbose:
        # Read by LoggingSettings when settings are (re)loaded
        os.environ["DVCSELECT_LOG_LEVEL"] = "DEBUG"

    try:
        reload_settings(config)
        setup_logging()
    except ConfigurationError as e:
        sys.exit(emit_error(e))


@cli.command("config-show")
def config_show():
    """Show the effective configuration."""
    settings = get_settings()
    click.echo(yaml.dump(settings.to_dict(), default_flow_style=False, sort_keys=True))


# Add commands to main CLI
cli.add_command(synth_command)     # dvcselect synth
cli.add_command(select_command)    # dvcselect select
cli.add_command(bench_command)     # dvcselect bench
cli.add_command(scale_command)     # dvcselect scale
cli.add_command(regret_command)    # dvcselect regret
cli.add_command(ablate_command)    # dvcselect ablate


if __name__ == "__main__":
    cli()
