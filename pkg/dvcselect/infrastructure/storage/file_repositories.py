"""
File-based storage for reports, audit streams and pools.
"""

import json
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Union

import numpy as np

from ...domain.models.sources import Sample, SourcePool
from ...shared.exceptions import StorageError
from ..parsers.tabular_parser import TabularSchema, load_tabular


def _json_default(value: Any):
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"{type(value).__name__} is not JSON serialisable")


def dumps_deterministic(data: Dict[str, Any]) -> str:
    """Sorted-key, indent-2 JSON; identical input gives identical bytes."""
    return json.dumps(data, indent=2, sort_keys=True, ensure_ascii=False, default=_json_default) + "\n"


class FileReportStore:
    """JSON reports and plain-text tables under one output directory."""

    def __init__(self, storage_dir: Union[str, Path]):
        self.storage_dir = Path(storage_dir)

    def _path(self, name: str) -> Path:
        return self.storage_dir / name

    def save(self, name: str, data: Dict[str, Any]) -> Path:
        """Write ``data`` as ``<name>``; returns the written path."""
        path = self._path(name)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            with open(path, 'w', encoding='utf-8') as f:
                f.write(dumps_deterministic(data))
        except (OSError, TypeError) as e:
            raise StorageError(f"Failed to save report {path}: {e}")
        return path

    def save_text(self, name: str, text: str) -> Path:
        path = self._path(name)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            with open(path, 'w', encoding='utf-8') as f:
                f.write(text if text.endswith("\n") else text + "\n")
        except OSError as e:
            raise StorageError(f"Failed to save table {path}: {e}")
        return path

    def load(self, name: str) -> Optional[Dict[str, Any]]:
        path = self._path(name)
        if not path.exists():
            return None
        try:
            with open(path, 'r', encoding='utf-8') as f:
                return json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            raise StorageError(f"Failed to load report {path}: {e}")


class JsonlAuditLog:
    """Append-only JSONL stream of per-candidate valuations."""

    def __init__(self, path: Union[str, Path]):
        self.path = Path(path)
        self._handle = None
        self.records_written = 0

    def open(self) -> 'JsonlAuditLog':
        try:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self._handle = open(self.path, 'w', encoding='utf-8')
        except OSError as e:
            raise StorageError(f"Failed to open audit log {self.path}: {e}")
        return self

    def __call__(self, record: Dict[str, Any]) -> None:
        if self._handle is None:
            self.open()
        self._handle.write(json.dumps(record, sort_keys=True, default=_json_default) + "\n")
        self.records_written += 1

    def close(self) -> None:
        if self._handle is not None:
            self._handle.close()
            self._handle = None

    def __enter__(self) -> 'JsonlAuditLog':
        return self.open()

    def __exit__(self, *exc) -> None:
        self.close()

    def read(self) -> Iterator[Dict[str, Any]]:
        with open(self.path, 'r', encoding='utf-8') as f:
            for line in f:
                if line.strip():
                    yield json.loads(line)


class FilePoolRepository:
    """Pools as JSONL in the tabular format, with split and clean-label fields."""

    def __init__(self, storage_dir: Union[str, Path]):
        self.storage_dir = Path(storage_dir)

    @staticmethod
    def _row(sample: Sample) -> Dict[str, Any]:
        label = sample.label
        row: Dict[str, Any] = {
            "features": np.asarray(sample.features, dtype=np.float64).tolist(),
            "label": label.tolist() if isinstance(label, np.ndarray) else int(label),
            "split": sample.split.value,
        }
        row["source"] = sample.source
        if sample.clean_label is not None:
            row["clean_label"] = int(sample.clean_label)
        return row

    def save(self, pool: SourcePool, name: str = "pool.jsonl") -> Path:
        path = self.storage_dir / name
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            with open(path, 'w', encoding='utf-8') as f:
                for sample in pool.all_samples():
                    f.write(json.dumps(self._row(sample)) + "\n")
        except OSError as e:
            raise StorageError(f"Failed to save pool {path}: {e}")
        return path

    def load(self, name: str = "pool.jsonl", seed: int = 0) -> SourcePool:
        """Read a saved pool back; features are taken as stored."""
        path = self.storage_dir / name
        if not path.exists():
            raise StorageError(f"pool file not found: {path}")
        return load_tabular(path, TabularSchema(seed=seed, standardize=False))

    def list(self) -> List[str]:
        if not self.storage_dir.exists():
            return []
        return sorted(p.name for p in self.storage_dir.glob("*.jsonl"))
