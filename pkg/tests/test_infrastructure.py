"""
Tests for infrastructure components.
"""

import json
import logging
import shutil
import tempfile
from pathlib import Path
from unittest.mock import MagicMock, patch

import numpy as np
import pytest
import yaml

from dvcselect.domain.models.selection import RoundRecord
from dvcselect.domain.services.pool_synthesis import SynthesisSpec, synthesize_pool
from dvcselect.infrastructure.config.settings import Settings, reload_settings
from dvcselect.infrastructure.observability import tracing
from dvcselect.infrastructure.observability.tracing import (
    TracingConfig,
    get_current_trace_info,
    record_round_metrics,
    trace_execution,
    trace_selection_round,
)
from dvcselect.infrastructure.storage.file_repositories import (
    FilePoolRepository,
    FileReportStore,
    JsonlAuditLog,
    dumps_deterministic,
)
from dvcselect.shared.exceptions import ConfigurationError, StorageError
from dvcselect.shared.logging import RunContextFilter, get_logger, run_context, setup_logging


class TestSettings:
    """Test settings configuration."""

    def setup_method(self):
        """Set up test fixtures."""
        self.temp_dir = tempfile.mkdtemp()

    def teardown_method(self):
        """Clean up test fixtures."""
        shutil.rmtree(self.temp_dir)

    def _write(self, name: str, data) -> Path:
        path = Path(self.temp_dir) / name
        with open(path, 'w') as f:
            if name.endswith(".json"):
                json.dump(data, f)
            else:
                yaml.safe_dump(data, f)
        return path

    def test_default_settings(self):
        """Test default settings values."""
        settings = Settings.default()
        assert settings.selection.batch_size == 8
        assert settings.selection.diversity_threshold == 0.95
        assert settings.lsh.num_bits == 12
        assert settings.lsh.num_tables == 16
        assert settings.bandit.probability_floor == 0.01
        assert settings.weights.update_frequency == 5
        assert settings.synthesis.flip_rates == [0.0, 0.05, 0.1, 0.2, 0.3, 0.4]

    def test_yaml_file_overrides_defaults(self):
        """Test that a YAML file overrides individual keys only."""
        path = self._write("config.yaml", {"selection": {"batch_size": 16}, "lsh": {"num_bits": 8}})
        settings = Settings.load_from_file(path)
        assert settings.selection.batch_size == 16
        assert settings.lsh.num_bits == 8
        assert settings.selection.relax_step == 0.02

    def test_json_file_is_supported(self):
        """Test loading a JSON configuration."""
        path = self._write("config.json", {"bandit": {"exploration": 0.5}})
        assert Settings.load_from_file(path).bandit.exploration == 0.5

    def test_experiment_section_is_kept(self):
        """Test that the free-form experiment section passes through."""
        path = self._write("config.yaml", {"experiment": {"budgets": [0.1], "seeds": [1, 2]}})
        assert Settings.load_from_file(path).experiment == {"budgets": [0.1], "seeds": [1, 2]}

    def test_unknown_section_raises(self):
        """Test that an unknown top-level section is rejected."""
        path = self._write("config.yaml", {"database": {"backend": "sqlite"}})
        with pytest.raises(ConfigurationError):
            Settings.load_from_file(path)

    def test_unknown_key_raises(self):
        """Test that an unknown key inside a section is rejected."""
        path = self._write("config.yaml", {"selection": {"batch": 4}})
        with pytest.raises(ConfigurationError):
            Settings.load_from_file(path)

    def test_invalid_values_raise(self):
        """Test cross-field validation."""
        path = self._write("config.yaml", {"selection": {"diversity_threshold": 1.5}})
        with pytest.raises(ConfigurationError):
            Settings.load_from_file(path)

    def test_unknown_log_stream_raises(self):
        """Test that logging.stream only accepts stderr or stdout."""
        path = self._write("config.yaml", {"logging": {"stream": "syslog"}})
        with pytest.raises(ConfigurationError):
            Settings.load_from_file(path)

    def test_missing_file_raises(self):
        """Test that an explicit missing path is an error."""
        with pytest.raises(ConfigurationError):
            Settings.load_from_file(Path(self.temp_dir) / "missing.yaml")

    def test_save_and_reload(self):
        """Test that saved settings load back unchanged."""
        settings = Settings.default()
        settings.cache.capacity = 128
        path = Path(self.temp_dir) / "saved.yaml"
        settings.save_to_file(path)
        assert reload_settings(path).cache.capacity == 128

    def test_log_level_from_environment(self, monkeypatch):
        """Test that DVCSELECT_LOG_LEVEL overrides the logging level."""
        monkeypatch.setenv("DVCSELECT_LOG_LEVEL", "DEBUG")
        assert Settings.default().logging.level == "DEBUG"


class TestFileReportStore:
    """Test JSON report storage."""

    def setup_method(self):
        """Set up test fixtures."""
        self.temp_dir = tempfile.mkdtemp()
        self.store = FileReportStore(Path(self.temp_dir) / "out")

    def teardown_method(self):
        """Clean up test fixtures."""
        shutil.rmtree(self.temp_dir)

    def test_save_and_load(self):
        """Test a report round trip including numpy scalars."""
        self.store.save("report.json", {"accuracy": np.float64(0.5), "count": np.int64(3)})
        assert self.store.load("report.json") == {"accuracy": 0.5, "count": 3}

    def test_output_is_deterministic(self):
        """Test that key order does not change the written bytes."""
        assert dumps_deterministic({"b": 1, "a": 2}) == dumps_deterministic({"a": 2, "b": 1})

    def test_missing_report_is_none(self):
        """Test that loading an absent report returns None."""
        assert self.store.load("absent.json") is None

    def test_unserialisable_value_raises(self):
        """Test that non-JSON values raise StorageError."""
        with pytest.raises(StorageError):
            self.store.save("bad.json", {"value": object()})

    def test_save_text(self):
        """Test that tables are written with a trailing newline."""
        path = self.store.save_text("table.txt", "a  b")
        assert path.read_text() == "a  b\n"


class TestJsonlAuditLog:
    """Test the audit stream."""

    def test_records_are_appended(self):
        """Test that every record becomes one JSON line."""
        with tempfile.TemporaryDirectory() as temp_dir:
            log = JsonlAuditLog(Path(temp_dir) / "audit.jsonl")
            with log:
                log({"sample_id": 1, "dvc": np.float64(0.25)})
                log({"sample_id": 2, "dvc": 0.75})
            assert log.records_written == 2
            assert [r["sample_id"] for r in log.read()] == [1, 2]


class TestFilePoolRepository:
    """Test pool persistence."""

    def test_save_and_load_preserves_samples(self):
        """Test that a saved pool loads back with the same samples and splits."""
        pool = synthesize_pool(SynthesisSpec(
            num_classes=2, num_features=3, num_sources=2, pool_size=40,
            validation_size=6, test_size=8, flip_rates=(0.0, 0.5), seed=0,
        ))
        with tempfile.TemporaryDirectory() as temp_dir:
            repository = FilePoolRepository(temp_dir)
            repository.save(pool)
            loaded = repository.load()
            assert repository.list() == ["pool.jsonl"]

        assert loaded.num_sources == 2
        assert [len(s) for s in loaded.sources] == [20, 20]
        assert len(loaded.validation) == 6
        assert len(loaded.test) == 8
        assert sorted(s.digest for s in loaded.train_samples) == sorted(
            s.digest for s in pool.train_samples
        )
        corrupted = sum(s.is_corrupted for s in loaded.sources[1].samples)
        assert corrupted == sum(s.is_corrupted for s in pool.sources[1].samples)

    def test_missing_pool_raises(self):
        """Test that loading an absent pool raises StorageError."""
        with tempfile.TemporaryDirectory() as temp_dir:
            with pytest.raises(StorageError):
                FilePoolRepository(temp_dir).load()


class TestTracing:
    """Test tracing helpers with tracing disabled."""

    def setup_method(self):
        """Set up test fixtures."""
        tracing.shutdown_tracing()
        tracing.init_tracing(TracingConfig(enabled=False))

    def teardown_method(self):
        """Clean up test fixtures."""
        tracing.shutdown_tracing()

    def test_config_from_settings(self, monkeypatch):
        """Test that OTEL_* variables reach the tracing config through settings."""
        monkeypatch.setenv("OTEL_ENABLED", "true")
        monkeypatch.setenv("OTEL_SERVICE_NAME", "selector")
        config = TracingConfig.from_settings(Settings.default().observability)
        assert config.enabled is True
        assert config.service_name == "selector"

    def test_round_metrics_are_recorded(self):
        """Test that a round record is copied onto its span."""
        record = RoundRecord(
            round_index=2, sources_chosen=[0, 1], probabilities=[0.5, 0.5],
            candidates_valued=12, selected_ids=[3, 4], dvc_mean=0.6, dvc_min=0.4,
            dvc_max=0.8, final_threshold=0.95, model_version=7,
        )
        span = MagicMock()
        record_round_metrics(span, record)
        span.set_attribute.assert_any_call("selection.selected", 2)
        span.set_attribute.assert_any_call("selection.model_version", 7)

    def test_trace_execution_returns_value(self):
        """Test that the decorator is transparent."""
        @trace_execution("test.op")
        def add(a, b):
            return a + b

        assert add(2, 3) == 5

    def test_trace_execution_propagates_errors(self):
        """Test that exceptions pass through the span."""
        @trace_execution("test.fail")
        def fail():
            raise ConfigurationError("boom")

        with pytest.raises(ConfigurationError):
            fail()

    def test_round_span_without_provider(self):
        """Test that a round span works and records nothing when disabled."""
        with trace_selection_round(0, 10) as span:
            assert span is not None
            assert get_current_trace_info() == {"trace_id": None, "span_id": None}

    def test_init_is_idempotent(self):
        """Test that a second init call does not install a provider."""
        with patch.object(tracing.trace, "set_tracer_provider") as mock_set:
            tracing.init_tracing(TracingConfig(enabled=True))
            mock_set.assert_not_called()


class TestLogging:
    """Test logger naming and run-context tagging."""

    def _record(self):
        return logging.LogRecord("dvcselect.test", logging.INFO, __file__, 1, "msg", None, None)

    def test_get_logger_is_namespaced(self):
        """Test that module loggers live under the package root."""
        assert get_logger("dvcselect.selection").name == "dvcselect.selection"
        assert get_logger("custom").name == "dvcselect.custom"

    def test_record_outside_run_is_dash(self):
        """Test the placeholder outside any run context."""
        record = self._record()
        RunContextFilter().filter(record)
        assert record.run == "-"

    def test_nested_run_context(self):
        """Test that nested contexts merge and unwind."""
        run_filter = RunContextFilter()
        with run_context(method="dvc", seed=1):
            with run_context(budget=0.2):
                inner = self._record()
                run_filter.filter(inner)
            outer = self._record()
            run_filter.filter(outer)
        assert inner.run == "method=dvc seed=1 budget=0.2"
        assert outer.run == "method=dvc seed=1"

    def test_unknown_level_raises(self):
        """Test that a bad level is reported as a configuration error."""
        settings = Settings.default()
        settings.logging.level = "LOUD"
        with patch("dvcselect.shared.logging.get_settings", return_value=settings):
            with pytest.raises(ConfigurationError):
                setup_logging("dvcselect.test_unknown_level")

    def test_file_handler_is_added(self):
        """Test that a configured file path adds a rotating file handler."""
        settings = Settings.default()
        with tempfile.TemporaryDirectory() as temp_dir:
            settings.logging.file_path = str(Path(temp_dir) / "logs" / "run.log")
            with patch("dvcselect.shared.logging.get_settings", return_value=settings):
                logger = setup_logging("dvcselect.test_file_handler")
            try:
                assert len(logger.handlers) == 2
                with run_context(seed=3):
                    logger.warning("written")
                for handler in logger.handlers:
                    handler.flush()
                assert "[seed=3] written" in Path(settings.logging.file_path).read_text()
            finally:
                for handler in logger.handlers:
                    handler.close()
                logger.handlers.clear()
