"""
CLI commands for the experiment grid and the ablation study.
"""

from typing import Optional, Tuple

import click

from .common import current_settings, dataset_overrides, experiment_section, guarded
from ....application.dto import AblationSpec, ExperimentSpec, parse_spec
from ....infrastructure.container import create_experiment_service, create_report_store


@click.command("bench")
@click.option("--data", type=click.Path(exists=True), help="CSV or JSONL dataset (default: synthetic)")
@click.option("--seed", "seeds", type=int, multiple=True, help="Seed (repeatable)")
@click.option("--budget", "budgets", type=float, multiple=True, help="Budget fraction (repeatable)")
@click.option("--method", "methods", type=click.Choice(["dvc", "random", "uncertainty", "full"]),
              multiple=True, help="Method (repeatable)")
@click.option("--disable", "disabled", multiple=True, help="Metric to disable for dvc (repeatable)")
@click.option("--out", type=click.Path(), help="Output directory")
@guarded
def bench_command(data: Optional[str], seeds: Tuple[int, ...], budgets: Tuple[float, ...],
                  methods: Tuple[str, ...], disabled: Tuple[str, ...], out: Optional[str]):
    """
    Run every (method, budget, seed) cell and write bench.json and bench.txt.

    Command-line flags override the ``experiment`` config section.

    Examples:
        dvcselect bench --budget 0.1 --budget 0.2 --seed 0 --seed 1
        dvcselect --config exp.yaml bench --out runs/bench
    """
    settings = current_settings()
    raw = experiment_section(settings)
    raw["dataset"] = dataset_overrides(data, raw)
    if seeds:
        raw["seeds"] = list(seeds)
    if budgets:
        raw["budgets"] = list(budgets)
    if methods:
        raw["methods"] = list(methods)
    if disabled:
        raw["disabled_metrics"] = list(disabled)
    spec = parse_spec(ExperimentSpec, raw)

    service = create_experiment_service(settings)
    result = service.run_experiment(spec)
    table = service.format_table(result.rows)

    store = create_report_store(settings, out or spec.output_dir)
    path = store.save("bench.json", result.to_dict(include_timings=False))
    store.save_text("bench.txt", table)
    click.echo(table)
    click.echo(f"Report saved to: {path}")


@click.command("ablate")
@click.option("--data", type=click.Path(exists=True), help="CSV or JSONL dataset (default: synthetic)")
@click.option("--seed", "seeds", type=int, multiple=True, help="Seed (repeatable)")
@click.option("--budget", type=float, help="Budget fraction")
@click.option("--variant", "variants", multiple=True, help="Ablation variant (repeatable)")
@click.option("--out", type=click.Path(), help="Output directory")
@guarded
def ablate_command(data: Optional[str], seeds: Tuple[int, ...], budget: Optional[float],
                   variants: Tuple[str, ...], out: Optional[str]):
    """
    Compare DVC accuracy with individual metrics or metric groups disabled.

    Examples:
        dvcselect ablate --seed 0 --seed 1
        dvcselect ablate --variant full --variant no_diversity --budget 0.3
    """
    settings = current_settings()
    raw = experiment_section(settings, "ablation")
    raw["dataset"] = dataset_overrides(data, raw)
    if seeds:
        raw["seeds"] = list(seeds)
    if budget is not None:
        raw["budget"] = budget
    if variants:
        raw["variants"] = list(variants)
    spec = parse_spec(AblationSpec, raw)

    result = create_experiment_service(settings).run_ablation(spec)

    store = create_report_store(settings, out)
    path = store.save("ablation.json", result.to_dict())
    for row in result.rows:
        accuracy = "n/a" if row.accuracy_mean is None else f"{row.accuracy_mean:.4f}"
        delta = "" if row.delta_vs_full is None else f"  ({row.delta_vs_full:+.4f})"
        click.echo(f"{row.variant.ljust(20)} {accuracy}{delta}")
    click.echo(f"Report saved to: {path}")
