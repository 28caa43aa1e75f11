"""
Application service for selection experiments.

Runs the benchmark grid, the scaling sweep, the ablation study and the bandit
regret simulation on top of the domain services. Every method shares the
same final-training recipe and the same clean test split.
"""

import math
import time
from contextlib import nullcontext
from dataclasses import dataclass, replace
from typing import Callable, ContextManager, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..dto import (
    AblationResult, AblationRow, AblationSpec, AggregateRow, CellResult, DatasetSpec,
    ExperimentResult, ExperimentSpec, RegretResult, RegretRow, RegretSpec, ScalingResult,
    ScalingRow, ScalingSpec,
)
from ...domain.models.network import MlpModel
from ...domain.models.selection import SelectionConfig, SelectionReport
from ...domain.models.sources import Sample, SourcePool
from ...domain.models.valuation import ABLATION_VARIANTS, AblationMask
from ...domain.services.baselines import baseline_random, baseline_uncertainty
from ...domain.services.evaluation import (
    FinalTrainingConfig, evaluate_model, train_final_model,
)
from ...domain.services.pool_synthesis import SynthesisSpec, synthesize_pool
from ...domain.services.selection_engine import AuditSink, SelectionEngine
from ...domain.services.source_bandit import analytic_regret_bound, simulate_bernoulli
from ...shared.exceptions import ConfigurationError
from ...shared.logging import get_logger, run_context

logger = get_logger("dvcselect.experiments")

ConfigFactory = Callable[[float, int, Optional[AblationMask]], SelectionConfig]
ModelFactory = Callable[[SourcePool, int], MlpModel]
EngineFactory = Callable[[SourcePool, MlpModel, SelectionConfig, Optional[AuditSink]], SelectionEngine]
TabularLoader = Callable[[DatasetSpec, int], SourcePool]
CellContext = Callable[[str, float, int], ContextManager]


def _no_context(method: str, budget: float, seed: int) -> ContextManager:
    return nullcontext()


@dataclass
class SelectionOutcome:
    """Samples picked by one method, how long picking took, and the DVC report if any."""
    method: str
    samples: List[Sample]
    select_seconds: float
    report: Optional[SelectionReport] = None


def _mean_std(values: Sequence[float]) -> Tuple[Optional[float], Optional[float]]:
    if not values:
        return None, None
    array = np.asarray(values, dtype=np.float64)
    return float(array.mean()), float(array.std())


def log_log_slope(xs: Sequence[float], ys: Sequence[float]) -> Optional[float]:
    """Least-squares slope of log(y) against log(x); None without two usable points."""
    points = [(x, y) for x, y in zip(xs, ys) if x > 0 and y > 0]
    if len(points) < 2 or len({x for x, _ in points}) < 2:
        return None
    log_x = np.log([x for x, _ in points])
    log_y = np.log([y for _, y in points])
    slope, _ = np.polyfit(log_x, log_y, 1)
    return float(slope)


class ExperimentService:
    """Application service for benchmark, scaling, ablation and regret runs."""

    def __init__(self, config_factory: ConfigFactory,
                 model_factory: ModelFactory,
                 engine_factory: EngineFactory = SelectionEngine,
                 final_training: FinalTrainingConfig = FinalTrainingConfig(),
                 synthesis: SynthesisSpec = SynthesisSpec(),
                 tabular_loader: Optional[TabularLoader] = None,
                 cell_context: CellContext = _no_context):
        self._config_factory = config_factory
        self._model_factory = model_factory
        self._engine_factory = engine_factory
        self._final_training = final_training
        self._synthesis = synthesis
        self._tabular_loader = tabular_loader
        self._cell_context = cell_context

    # ------------------------------------------------------------------
    # Building blocks
    # ------------------------------------------------------------------

    def load_pool(self, dataset: DatasetSpec, seed: int, pool_size: Optional[int] = None) -> SourcePool:
        """Synthesize or read the pool a run works on."""
        if dataset.kind == "tabular":
            if self._tabular_loader is None:
                raise ConfigurationError("no tabular loader is configured")
            return self._tabular_loader(dataset, seed)
        spec = replace(
            self._synthesis,
            seed=seed,
            pool_size=pool_size or dataset.pool_size or self._synthesis.pool_size,
        )
        spec.validate()
        return synthesize_pool(spec)

    def select(self, method: str, pool: SourcePool, budget: float, seed: int,
               mask: Optional[AblationMask] = None,
               audit_sink: Optional[AuditSink] = None) -> SelectionOutcome:
        """
        Run one selector.

        Args:
            method: dvc, random, uncertainty or full
            pool: Source pool
            budget: Fraction of the training pool in (0, 1]
            seed: Seed for the selector and its model
            mask: Metrics disabled for the dvc method

        Returns:
            SelectionOutcome: Chosen samples and select-phase time
        """
        config = self._config_factory(budget, seed, mask)
        count = config.resolve_budget(pool.train_size)
        started = time.perf_counter()
        report = None
        if method == "dvc":
            model = self._model_factory(pool, seed)
            engine = self._engine_factory(pool, model, config, audit_sink)
            report = engine.run()
            samples = list(engine.selected)
        elif method == "random":
            samples = baseline_random(pool, count, seed)
        elif method == "uncertainty":
            samples = baseline_uncertainty(
                pool, self._model_factory(pool, seed), count,
                config.batch_size, config.learning_rate, seed,
            )
        elif method == "full":
            samples = pool.train_samples
        else:
            raise ConfigurationError(f"unknown selection method '{method}'")
        elapsed = time.perf_counter() - started
        logger.debug(f"{method} selected {len(samples)} samples in {elapsed:.2f}s")
        return SelectionOutcome(method, samples, elapsed, report)

    def train_and_score(self, samples: Sequence[Sample], pool: SourcePool,
                        seed: int) -> Tuple[float, float, float]:
        """(accuracy, macro-F1, training seconds) of a fresh final model."""
        started = time.perf_counter()
        model = train_final_model(
            samples, pool.feature_dim, pool.num_classes,
            replace(self._final_training, seed=seed),
        )
        train_seconds = time.perf_counter() - started
        accuracy, f1 = evaluate_model(model, pool.test)
        return accuracy, f1, train_seconds

    def run_selection_report(self, pool: SourcePool, budget: float, seed: int,
                             audit_sink: Optional[AuditSink] = None,
                             mask: Optional[AblationMask] = None,
                             time_full_training: bool = False) -> SelectionReport:
        """One DVC run with final-model scores attached to its report."""
        outcome = self.select("dvc", pool, budget, seed, mask, audit_sink)
        report = outcome.report
        if pool.test:
            accuracy, f1, train_seconds = self.train_and_score(outcome.samples, pool, seed)
            report.final_accuracy = accuracy
            report.final_f1 = f1
            report.train_seconds = train_seconds
        if time_full_training:
            started = time.perf_counter()
            train_final_model(
                pool.train_samples, pool.feature_dim, pool.num_classes,
                replace(self._final_training, seed=seed),
            )
            report.full_train_seconds = time.perf_counter() - started
        return report

    # ------------------------------------------------------------------
    # Benchmark grid
    # ------------------------------------------------------------------

    def _run_cell(self, method: str, budget: float, seed: int, pool: SourcePool,
                  mask: Optional[AblationMask]) -> CellResult:
        cell = CellResult(method=method, budget=budget, seed=seed)
        try:
            with run_context(method=method, budget=budget, seed=seed), \
                    self._cell_context(method, budget, seed):
                outcome = self.select(method, pool, budget, seed, mask)
                accuracy, f1, train_seconds = self.train_and_score(outcome.samples, pool, seed)
            cell.accuracy = accuracy
            cell.macro_f1 = f1
            cell.selected = len(outcome.samples)
            cell.select_seconds = outcome.select_seconds
            cell.train_seconds = train_seconds
        except Exception as e:
            cell.error = str(e)
            cell.error_class = getattr(e, "error_class", type(e).__name__)
            logger.error(f"Cell {method}@{budget} seed {seed} failed: {e}")
        return cell

    def run_experiment(self, spec: ExperimentSpec) -> ExperimentResult:
        """
        Run every (method, budget, seed) cell and aggregate across seeds.

        The full-pool method ignores the budget and runs once per seed at
        budget 1.0. A failing cell is recorded and the run continues.
        """
        mask = AblationMask.from_names(spec.disabled_metrics) if spec.disabled_metrics else None
        pools: Dict[int, SourcePool] = {}
        pool_errors: Dict[int, Exception] = {}
        for seed in spec.seeds:
            try:
                pools[seed] = self.load_pool(spec.dataset, seed)
            except Exception as e:
                pool_errors[seed] = e
                logger.error(f"Pool for seed {seed} could not be built: {e}")

        result = ExperimentResult()
        for method in spec.methods:
            budgets = [1.0] if method == "full" else spec.budgets
            for budget in budgets:
                for seed in spec.seeds:
                    if seed in pool_errors:
                        error = pool_errors[seed]
                        result.cells.append(CellResult(
                            method=method, budget=budget, seed=seed, error=str(error),
                            error_class=getattr(error, "error_class", type(error).__name__),
                        ))
                        continue
                    result.cells.append(self._run_cell(method, budget, seed, pools[seed], mask))

        result.rows = self.aggregate(result.cells)
        failures = sum(1 for c in result.cells if not c.ok)
        logger.info(f"Experiment finished: {len(result.cells)} cells, {failures} failed")
        return result

    @staticmethod
    def aggregate(cells: Sequence[CellResult]) -> List[AggregateRow]:
        """Mean and population std per (method, budget), in first-seen order."""
        groups: Dict[Tuple[str, float], List[CellResult]] = {}
        for cell in cells:
            groups.setdefault((cell.method, cell.budget), []).append(cell)
        rows = []
        for (method, budget), group in groups.items():
            ok = [c for c in group if c.ok]
            acc_mean, acc_std = _mean_std([c.accuracy for c in ok])
            f1_mean, f1_std = _mean_std([c.macro_f1 for c in ok])
            rows.append(AggregateRow(
                method=method, budget=budget,
                accuracy_mean=acc_mean, accuracy_std=acc_std,
                f1_mean=f1_mean, f1_std=f1_std,
                cells=len(group), failures=len(group) - len(ok),
            ))
        return rows

    @staticmethod
    def format_table(rows: Sequence[AggregateRow]) -> str:
        """Aligned plain-text table of aggregate rows."""

        def pm(mean: Optional[float], std: Optional[float]) -> str:
            return "n/a" if mean is None else f"{mean:.4f} ± {std:.4f}"

        header = ["method", "budget", "accuracy", "macro_f1", "cells", "failures"]
        body = [
            [r.method, f"{r.budget:.0%}", pm(r.accuracy_mean, r.accuracy_std),
             pm(r.f1_mean, r.f1_std), str(r.cells), str(r.failures)]
            for r in rows
        ]
        widths = [max(len(row[i]) for row in [header] + body) for i in range(len(header))]
        lines = ["  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip()
                 for row in [header] + body]
        lines.insert(1, "  ".join("-" * w for w in widths))
        return "\n".join(lines) + "\n"

    # ------------------------------------------------------------------
    # Scaling, ablation, regret
    # ------------------------------------------------------------------

    def scaling_sweep(self, spec: ScalingSpec) -> ScalingResult:
        """Select and train times against full-pool training across pool sizes."""
        result = ScalingResult()
        for size in spec.pool_sizes:
            measured = []
            for seed in spec.seeds:
                pool = self.load_pool(DatasetSpec(), seed, pool_size=size)
                outcome = self.select("dvc", pool, spec.budget, seed)
                acc_dvc, _, train_seconds = self.train_and_score(outcome.samples, pool, seed)
                acc_full, _, full_seconds = self.train_and_score(pool.train_samples, pool, seed)
                measured.append((outcome.select_seconds, train_seconds, full_seconds, acc_dvc, acc_full))
            means = np.mean(np.asarray(measured, dtype=np.float64), axis=0)
            row = ScalingRow(size, *(float(v) for v in means))
            logger.info(
                f"n={size}: select {row.select_seconds:.2f}s, speedup {row.speedup:.2f}x, "
                f"proximity {'PASS' if row.proximity_pass else 'FAIL'}"
            )
            result.rows.append(row)
        result.select_time_slope = log_log_slope(
            [r.pool_size for r in result.rows], [r.select_seconds for r in result.rows]
        )
        return result

    def run_ablation(self, spec: AblationSpec) -> AblationResult:
        """DVC accuracy per ablation variant, with its gap to the full metric set."""
        pools = {seed: self.load_pool(spec.dataset, seed) for seed in spec.seeds}
        result = AblationResult(budget=spec.budget)
        for variant in spec.variants:
            mask = ABLATION_VARIANTS[variant]
            scores = []
            failures = 0
            for seed in spec.seeds:
                cell = self._run_cell("dvc", spec.budget, seed, pools[seed],
                                      mask if mask.disabled else None)
                if cell.ok:
                    scores.append(cell.accuracy)
                else:
                    failures += 1
            mean, std = _mean_std(scores)
            result.rows.append(AblationRow(
                variant=variant, disabled=list(mask.names()),
                accuracy_mean=mean, accuracy_std=std, delta_vs_full=None, failures=failures,
            ))
        full = next((r for r in result.rows if r.variant == "full"), None)
        if full is not None and full.accuracy_mean is not None:
            for row in result.rows:
                if row.accuracy_mean is not None:
                    row.delta_vs_full = row.accuracy_mean - full.accuracy_mean
        return result

    def simulate_regret(self, spec: RegretSpec) -> RegretResult:
        """Mean UCB regret over seeds per horizon, against the analytic bound."""
        result = RegretResult()
        for horizon in spec.horizons:
            finals = [
                simulate_bernoulli(spec.means, horizon, seed, spec.exploration).final
                for seed in spec.seeds
            ]
            mean, std = _mean_std(finals)
            result.rows.append(RegretRow(
                horizon=horizon, mean_regret=mean, std_regret=std,
                analytic_bound=analytic_regret_bound(spec.means, horizon),
            ))
        result.log_log_slope = log_log_slope(
            [r.horizon for r in result.rows], [r.mean_regret for r in result.rows]
        )
        if result.log_log_slope is not None and not math.isfinite(result.log_log_slope):
            result.log_log_slope = None
        return result
