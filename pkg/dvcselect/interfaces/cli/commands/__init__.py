"""
CLI commands package.
"""

from .bench import ablate_command, bench_command
from .scale import regret_command, scale_command
from .select import select_command
from .synth import synth_command

__all__ = [
    "ablate_command",
    "bench_command",
    "regret_command",
    "scale_command",
    "select_command",
    "synth_command",
]
