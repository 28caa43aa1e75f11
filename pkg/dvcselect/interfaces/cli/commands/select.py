"""
CLI command for a single DVC selection run.
"""

from contextlib import nullcontext
from pathlib import Path
from typing import Optional

import click

from .common import current_settings, dataset_overrides, experiment_section, guarded
from ....application.dto import DatasetSpec, parse_spec
from ....infrastructure.container import create_experiment_service, create_report_store
from ....infrastructure.storage import JsonlAuditLog


@click.command("select")
@click.option("--data", type=click.Path(exists=True), help="CSV or JSONL dataset (default: synthetic)")
@click.option("--seed", type=int, default=0, show_default=True, help="Session seed")
@click.option("--budget", type=float, default=0.2, show_default=True,
              help="Budget as a fraction of the training pool")
@click.option("--out", type=click.Path(), help="Output directory")
@click.option("--audit/--no-audit", default=False, help="Write per-candidate valuations as JSONL")
@click.option("--time-full", is_flag=True, help="Also time full-pool training for the efficiency ratio")
@guarded
def select_command(data: Optional[str], seed: int, budget: float, out: Optional[str],
                   audit: bool, time_full: bool):
    """
    Run one selection session and write its report.

    The dataset comes from `experiment.dataset` in the config unless --data is given.

    Examples:
        dvcselect select --budget 0.2 --seed 1
        dvcselect select --data pool.csv --audit --out runs/one
    """
    settings = current_settings()
    dataset = parse_spec(DatasetSpec, dataset_overrides(data, experiment_section(settings)))
    service = create_experiment_service(settings)
    store = create_report_store(settings, out)

    pool = service.load_pool(dataset, seed)
    audit_path = settings.output.audit_log or str(Path(store.storage_dir) / "audit.jsonl")
    sink = JsonlAuditLog(audit_path) if audit else nullcontext()
    with sink as audit_sink:
        report = service.run_selection_report(
            pool, budget, seed, audit_sink=audit_sink, time_full_training=time_full,
        )

    path = store.save("selection_report.json", report.to_dict())
    click.echo(f"Selected {len(report.selected_ids)} of {report.budget} samples "
               f"in {len(report.rounds)} rounds")
    if report.final_accuracy is not None:
        click.echo(f"Accuracy: {report.final_accuracy:.4f}  Macro-F1: {report.final_f1:.4f}")
    if report.alpha_ratio is not None:
        click.echo(f"Select/full-train time ratio: {report.alpha_ratio:.3f}")
    click.echo(f"Report saved to: {path}")
