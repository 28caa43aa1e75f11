"""
Tests for CLI commands.
"""

import json
import shutil
import tempfile
from pathlib import Path

import yaml
from click.testing import CliRunner

from dvcselect.interfaces.cli.main import cli

SMALL_CONFIG = {
    "model": {"hidden_dims": [8]},
    "lsh": {"num_bits": 4, "num_tables": 4},
    "weights": {"probe_epochs": 1, "dirichlet_candidates": 16, "local_perturbations": 4},
    "training": {"epochs": 2},
    "synthesis": {
        "num_classes": 3,
        "num_features": 6,
        "num_sources": 2,
        "pool_size": 120,
        "validation_size": 20,
        "test_size": 30,
        "flip_rates": [0.0, 0.3],
    },
    "logging": {"level": "WARNING"},
}


class CliTestCase:
    """Shared fixtures: a runner, a temp directory and a small config file."""

    def setup_method(self):
        """Set up test fixtures."""
        self.runner = CliRunner()
        self.temp_dir = tempfile.mkdtemp()
        self.config_path = self.write_config(SMALL_CONFIG)

    def teardown_method(self):
        """Clean up test fixtures."""
        shutil.rmtree(self.temp_dir)

    def write_config(self, data, name: str = "config.yaml") -> Path:
        path = Path(self.temp_dir) / name
        with open(path, 'w') as f:
            yaml.safe_dump(data, f)
        return path

    def invoke(self, *args):
        return self.runner.invoke(cli, ['--config', str(self.config_path), *args])


class TestMainGroup(CliTestCase):
    """Test the top-level group."""

    def test_version(self):
        """Test that --version prints the program version."""
        result = self.runner.invoke(cli, ['--version'])
        assert result.exit_code == 0
        assert '0.1.0' in result.output

    def test_config_show(self):
        """Test that config-show prints the effective settings."""
        result = self.invoke('config-show')
        assert result.exit_code == 0
        shown = yaml.safe_load(result.output)
        assert shown['synthesis']['num_sources'] == 2
        assert shown['selection']['batch_size'] == 8

    def test_bad_config_exits_with_usage_code(self):
        """Test that an invalid config file exits 2 with a JSON error line."""
        self.config_path = self.write_config({"database": {"backend": "sqlite"}}, "bad.yaml")
        result = self.invoke('config-show')
        assert result.exit_code == 2
        assert '"error": "configuration_error"' in result.output


class TestSynthCommand(CliTestCase):
    """Test the synth command."""

    def test_synth_writes_pool(self):
        """Test that synth saves the pool and prints a per-source summary."""
        out = Path(self.temp_dir) / "pool"
        result = self.invoke('synth', '--pool-size', '60', '--out', str(out))

        assert result.exit_code == 0
        summary = json.loads(result.output)
        assert summary['train'] == 60
        assert summary['validation'] == 20
        assert summary['test'] == 30
        assert [s['size'] for s in summary['sources']] == [30, 30]
        assert summary['sources'][0]['disagreement'] == 0.0
        assert Path(summary['path']).exists()

    def test_invalid_pool_size_exits_with_usage_code(self):
        """Test that a pool smaller than the source count is a configuration error."""
        result = self.invoke('synth', '--pool-size', '1', '--out', self.temp_dir)
        assert result.exit_code == 2
        assert 'configuration_error' in result.output


class TestRegretCommand(CliTestCase):
    """Test the regret command."""

    def test_regret_writes_report(self):
        """Test a small simulation and its saved report."""
        out = Path(self.temp_dir) / "regret"
        result = self.invoke(
            'regret', '--mean', '0.9', '--mean', '0.8',
            '--horizon', '100', '--repeats', '2', '--out', str(out),
        )

        assert result.exit_code == 0
        assert 'T=100' in result.output
        assert 'Report saved to:' in result.output
        report = json.loads((out / "regret.json").read_text())
        assert [row['horizon'] for row in report['rows']] == [100]


class TestBenchCommand(CliTestCase):
    """Test the bench and ablate commands."""

    def test_bench_writes_table_and_report(self):
        """Test a one-budget grid and its saved outputs."""
        out = Path(self.temp_dir) / "bench"
        result = self.invoke('bench', '--budget', '0.2', '--seed', '0', '--out', str(out))

        assert result.exit_code == 0
        assert 'Report saved to:' in result.output
        report = json.loads((out / "bench.json").read_text())
        assert [row['method'] for row in report['rows']] == ['dvc', 'random', 'uncertainty']
        assert all(row['failures'] == 0 for row in report['rows'])
        assert (out / "bench.txt").read_text().startswith('method')

    def test_bench_report_is_byte_identical_across_runs(self):
        """Test that two runs with the same config and seed write the same bench.json."""
        reports = []
        for name in ("first", "second"):
            out = Path(self.temp_dir) / name
            result = self.invoke('bench', '--budget', '0.2', '--seed', '3', '--out', str(out))
            assert result.exit_code == 0
            reports.append((out / "bench.json").read_bytes())
        assert reports[0] == reports[1]

    def test_ablate_reports_deltas(self):
        """Test that ablate compares each variant with the full metric set."""
        out = Path(self.temp_dir) / "ablate"
        result = self.invoke(
            'ablate', '--variant', 'full', '--variant', 'no_diversity',
            '--budget', '0.2', '--seed', '0', '--out', str(out),
        )

        assert result.exit_code == 0
        assert 'no_diversity' in result.output
        report = json.loads((out / "ablation.json").read_text())
        assert [row['variant'] for row in report['rows']] == ['full', 'no_diversity']
        assert report['rows'][0]['delta_vs_full'] == 0.0
        assert report['rows'][1]['disabled'] == ['diversity']


class TestScaleCommand(CliTestCase):
    """Test the scale command."""

    def test_scale_writes_rows_and_slope(self):
        """Test two pool sizes, their verdicts and the fitted slope."""
        out = Path(self.temp_dir) / "scale"
        result = self.invoke(
            'scale', '--size', '120', '--size', '240', '--budget', '0.2',
            '--seed', '0', '--out', str(out),
        )

        assert result.exit_code == 0
        assert 'n=120' in result.output
        assert 'Select-time log-log slope' in result.output
        report = json.loads((out / "scaling.json").read_text())
        assert [row['pool_size'] for row in report['rows']] == [120, 240]
        assert all(row['speedup'] > 0 for row in report['rows'])


class TestSelectCommand(CliTestCase):
    """Test the select command."""

    def test_select_writes_report_and_audit(self):
        """Test one session on the synthetic pool with the audit stream on."""
        out = Path(self.temp_dir) / "select"
        result = self.invoke('select', '--budget', '0.2', '--audit', '--out', str(out))

        assert result.exit_code == 0
        assert 'Selected 24 of 24 samples' in result.output
        report = json.loads((out / "selection_report.json").read_text())
        assert len(report['selected']) == 24
        assert (out / "audit.jsonl").exists()

    def test_dataset_section_of_config_is_used(self):
        """Test that experiment.dataset in the config shapes the pool select works on."""
        self.config_path = self.write_config(
            {**SMALL_CONFIG, "experiment": {"dataset": {"pool_size": 80}}}, "sized.yaml"
        )
        out = Path(self.temp_dir) / "sized"
        result = self.invoke('select', '--budget', '0.2', '--out', str(out))

        assert result.exit_code == 0
        assert 'Selected 16 of 16 samples' in result.output

    def test_budget_below_batch_size_fails(self):
        """Test that a budget below the batch size exits with a usage error."""
        result = self.invoke('select', '--budget', '0.05', '--out', self.temp_dir)
        assert result.exit_code == 2
