"""
CLI command for writing a synthetic multi-source pool to disk.
"""

import json
from dataclasses import replace
from typing import Optional

import click

from .common import current_settings, guarded
from ....domain.services.pool_synthesis import disagreement_rate, synthesize_pool
from ....infrastructure.container import create_synthesis_spec
from ....infrastructure.observability import trace_execution
from ....infrastructure.storage import FilePoolRepository


@trace_execution("pool.synthesize")
def _synthesize(spec):
    spec.validate()
    return synthesize_pool(spec)


@click.command("synth")
@click.option("--seed", type=int, default=0, show_default=True, help="Generator seed")
@click.option("--pool-size", type=int, help="Training pool size (overrides config)")
@click.option("--out", type=click.Path(), help="Output directory")
@click.option("--name", default="pool.jsonl", show_default=True, help="Pool file name")
@guarded
def synth_command(seed: int, pool_size: Optional[int], out: Optional[str], name: str):
    """
    Synthesize a corrupted multi-source pool.

    Examples:
        dvcselect synth --seed 3 --out runs/pool
        dvcselect synth --pool-size 40000 --name pool-40k.jsonl
    """
    settings = current_settings()
    spec = create_synthesis_spec(settings, seed)
    if pool_size is not None:
        spec = replace(spec, pool_size=pool_size)

    pool = _synthesize(spec)
    repository = FilePoolRepository(out or settings.output.data_directory)
    path = repository.save(pool, name)

    summary = {
        "path": str(path),
        "train": pool.train_size,
        "validation": len(pool.validation),
        "test": len(pool.test),
        "sources": [
            {
                "index": source.index,
                "size": len(source),
                "corruption": source.corruption.to_dict(),
                "disagreement": disagreement_rate(source.samples),
            }
            for source in pool.sources
        ],
    }
    click.echo(json.dumps(summary, indent=2, sort_keys=True))
