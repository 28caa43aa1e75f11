"""
CLI commands for the scaling sweep and the bandit regret simulation.
"""

from typing import Optional, Tuple

import click

from .common import current_settings, experiment_section, guarded
from ....application.dto import RegretSpec, ScalingSpec, parse_spec
from ....infrastructure.container import create_experiment_service, create_report_store


@click.command("scale")
@click.option("--size", "sizes", type=int, multiple=True, help="Pool size (repeatable)")
@click.option("--budget", type=float, help="Budget fraction")
@click.option("--seed", "seeds", type=int, multiple=True, help="Seed (repeatable)")
@click.option("--out", type=click.Path(), help="Output directory")
@guarded
def scale_command(sizes: Tuple[int, ...], budget: Optional[float], seeds: Tuple[int, ...],
                  out: Optional[str]):
    """
    Time selection against full-pool training across pool sizes.

    Examples:
        dvcselect scale --size 20000 --size 40000 --size 80000 --budget 0.1
    """
    settings = current_settings()
    raw = experiment_section(settings, "scaling")
    if sizes:
        raw["pool_sizes"] = list(sizes)
    if budget is not None:
        raw["budget"] = budget
    if seeds:
        raw["seeds"] = list(seeds)
    spec = parse_spec(ScalingSpec, raw)

    result = create_experiment_service(settings).scaling_sweep(spec)

    store = create_report_store(settings, out)
    path = store.save("scaling.json", result.to_dict())
    for row in result.rows:
        verdict = "PASS" if row.proximity_pass else "FAIL"
        click.echo(f"n={row.pool_size:<8} select {row.select_seconds:8.2f}s  "
                   f"speedup {row.speedup:6.2f}x  proximity {verdict}")
    if result.select_time_slope is not None:
        click.echo(f"Select-time log-log slope: {result.select_time_slope:.3f}")
    click.echo(f"Report saved to: {path}")


@click.command("regret")
@click.option("--mean", "means", type=float, multiple=True, help="Arm mean (repeatable)")
@click.option("--horizon", "horizons", type=int, multiple=True, help="Horizon (repeatable)")
@click.option("--seed", type=int, default=0, show_default=True, help="First seed")
@click.option("--repeats", type=int, help="Number of consecutive seeds")
@click.option("--out", type=click.Path(), help="Output directory")
@guarded
def regret_command(means: Tuple[float, ...], horizons: Tuple[int, ...], seed: int,
                   repeats: Optional[int], out: Optional[str]):
    """
    Simulate UCB on Bernoulli arms and compare regret with the analytic bound.

    Examples:
        dvcselect regret --mean 0.9 --mean 0.8 --horizon 2000 --horizon 20000 --repeats 20
    """
    settings = current_settings()
    raw = experiment_section(settings, "regret")
    if means:
        raw["means"] = list(means)
    if horizons:
        raw["horizons"] = list(horizons)
    if repeats is not None:
        raw["seeds"] = list(range(seed, seed + repeats))
    spec = parse_spec(RegretSpec, raw)

    result = create_experiment_service(settings).simulate_regret(spec)

    store = create_report_store(settings, out)
    path = store.save("regret.json", result.to_dict())
    for row in result.rows:
        click.echo(f"T={row.horizon:<8} regret {row.mean_regret:9.2f} ± {row.std_regret:7.2f}  "
                   f"bound {row.analytic_bound:9.2f}  per-round {row.regret_per_round:.5f}")
    click.echo(f"Report saved to: {path}")
