"""
CSV / JSONL ingestion into a SourcePool.

CSV files need a header row and a label column; every column that is not a
reserved field is a numeric feature. JSONL lines are objects with
``features`` and ``label`` plus optional ``source``, ``split`` and
``clean_label`` fields.
"""

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from ...domain.models.sources import DataSource, Sample, SourcePool, Split
from ...shared.exceptions import SchemaError
from ...shared.logging import get_logger

logger = get_logger("dvcselect.parsers")

RESERVED_COLUMNS = ("source", "split", "clean_label")


@dataclass(frozen=True)
class TabularSchema:
    """How to read a tabular file and how to split it when it does not say."""
    label_column: str = "label"
    source_column: str = "source"
    num_sources: int = 6
    validation_fraction: float = 0.1
    test_fraction: float = 0.2
    seed: int = 0
    standardize: bool = True


@dataclass
class _Record:
    line: int
    features: List[float]
    label: object
    source: Optional[int] = None
    split: Optional[str] = None
    clean_label: Optional[object] = None


def _label_key(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value).strip()


# =============================================================================
# Readers
# =============================================================================

def _read_csv(path: Path, schema: TabularSchema) -> List[_Record]:
    try:
        frame = pd.read_csv(path, float_precision="round_trip", keep_default_na=False)
    except pd.errors.ParserError as e:
        raise SchemaError(f"malformed CSV row: {e}")
    except pd.errors.EmptyDataError:
        raise SchemaError("CSV file has no header")

    if schema.label_column not in frame.columns:
        raise SchemaError(f"missing label column {schema.label_column!r}", column=schema.label_column)
    reserved = {schema.label_column, schema.source_column, *RESERVED_COLUMNS}
    feature_columns = [c for c in frame.columns if c not in reserved]
    if not feature_columns:
        raise SchemaError("no feature columns found")

    for column in feature_columns:
        values = frame[column]
        if not pd.api.types.is_numeric_dtype(values):
            coerced = pd.to_numeric(values.astype(str).str.strip().replace("", "nan"), errors="coerce")
            bad = [int(i) + 2 for i in np.flatnonzero(coerced.isna().to_numpy())]
            raise SchemaError(
                f"non-numeric values in feature column {column!r}",
                line_numbers=bad, column=column,
            )
    features = frame[feature_columns].to_numpy(dtype=np.float64)
    if not np.all(np.isfinite(features)):
        bad_rows = np.flatnonzero(~np.all(np.isfinite(features), axis=1))
        raise SchemaError("non-finite feature values", line_numbers=[int(i) + 2 for i in bad_rows])

    # read per column so that integer labels are not upcast alongside float features
    def column(name: str) -> List[object]:
        return frame[name].tolist() if name in frame.columns else [None] * len(frame)

    return [
        _Record(line=i + 2, features=features[i].tolist(), label=label,
                source=source, split=split, clean_label=clean)
        for i, (label, source, split, clean) in enumerate(zip(
            column(schema.label_column), column(schema.source_column),
            column("split"), column("clean_label"),
        ))
    ]


def _read_jsonl(path: Path, schema: TabularSchema) -> List[_Record]:
    records: List[_Record] = []
    malformed: List[int] = []
    missing_label: List[int] = []
    non_numeric: List[int] = []
    with open(path, encoding="utf-8") as f:
        for line_number, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError:
                malformed.append(line_number)
                continue
            if not isinstance(obj, dict) or not isinstance(obj.get("features"), list):
                malformed.append(line_number)
                continue
            if schema.label_column not in obj:
                missing_label.append(line_number)
                continue
            values = obj["features"]
            if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in values):
                non_numeric.append(line_number)
                continue
            records.append(_Record(
                line=line_number,
                features=[float(v) for v in values],
                label=obj[schema.label_column],
                source=obj.get(schema.source_column),
                split=obj.get("split"),
                clean_label=obj.get("clean_label"),
            ))
    if malformed:
        raise SchemaError("malformed JSONL rows", line_numbers=malformed)
    if missing_label:
        raise SchemaError(
            f"missing label column {schema.label_column!r}",
            line_numbers=missing_label, column=schema.label_column,
        )
    if non_numeric:
        raise SchemaError("non-numeric feature values", line_numbers=non_numeric, column="features")
    widths = {len(r.features) for r in records}
    if len(widths) > 1:
        expected = len(records[0].features)
        raise SchemaError(
            f"rows disagree on feature count (first row has {expected})",
            line_numbers=[r.line for r in records if len(r.features) != expected],
            column="features",
        )
    return records


# =============================================================================
# Assembly
# =============================================================================

def _label_mapping(keys: Sequence[str]) -> Dict[str, int]:
    unique = sorted(set(keys))
    try:
        numeric = {key: int(key) for key in unique}
        if all(value >= 0 for value in numeric.values()):
            return numeric
    except ValueError:
        pass
    return {key: index for index, key in enumerate(unique)}


def _assign_splits(records: List[_Record], schema: TabularSchema, rng: np.random.Generator) -> List[Split]:
    if any(r.split not in (None, "") for r in records):
        splits = []
        bad = []
        for r in records:
            try:
                text = str(r.split).strip() if r.split is not None else ""
                splits.append(Split(text or "train"))
            except ValueError:
                bad.append(r.line)
        if bad:
            raise SchemaError("split must be train, validation or test", line_numbers=bad, column="split")
        return splits
    count = len(records)
    order = rng.permutation(count)
    num_test = int(schema.test_fraction * count)
    num_validation = int(schema.validation_fraction * count)
    splits = [Split.TRAIN] * count
    for i in order[:num_test]:
        splits[int(i)] = Split.TEST
    for i in order[num_test:num_test + num_validation]:
        splits[int(i)] = Split.VALIDATION
    return splits


def _assign_sources(records: List[_Record], train_rows: List[int], schema: TabularSchema,
                    rng: np.random.Generator) -> Dict[int, int]:
    if any(records[i].source not in (None, "") for i in train_rows):
        assignment = {}
        bad = []
        for i in train_rows:
            try:
                assignment[i] = int(records[i].source)
            except (TypeError, ValueError):
                bad.append(records[i].line)
        if bad or any(v < 0 for v in assignment.values()):
            bad = bad or [records[i].line for i, v in assignment.items() if v < 0]
            raise SchemaError("source must be a non-negative integer",
                              line_numbers=bad, column=schema.source_column)
        return assignment
    order = rng.permutation(len(train_rows))
    assignment = {}
    for source, chunk in enumerate(np.array_split(order, schema.num_sources)):
        for position in chunk:
            assignment[train_rows[int(position)]] = source
    return assignment


def build_pool(records: List[_Record], schema: TabularSchema) -> SourcePool:
    """SourcePool from parsed rows; ids follow row order."""
    if not records:
        raise SchemaError("no data rows")
    rng = np.random.default_rng(schema.seed)
    mapping = _label_mapping(
        [_label_key(r.label) for r in records]
        + [_label_key(r.clean_label) for r in records if r.clean_label not in (None, "")]
    )
    splits = _assign_splits(records, schema, rng)
    train_rows = [i for i, split in enumerate(splits) if split is Split.TRAIN]
    sources = _assign_sources(records, train_rows, schema, rng)

    features = np.array([r.features for r in records], dtype=np.float64)
    if schema.standardize and train_rows:
        mean = features[train_rows].mean(axis=0)
        std = features[train_rows].std(axis=0)
        std[std == 0.0] = 1.0
        features = (features - mean) / std

    num_sources = max(sources.values()) + 1 if sources else 1
    buckets: List[List[Sample]] = [[] for _ in range(num_sources)]
    validation: List[Sample] = []
    test: List[Sample] = []
    for i, record in enumerate(records):
        label = mapping[_label_key(record.label)]
        if record.clean_label not in (None, ""):
            clean = mapping[_label_key(record.clean_label)]
        else:
            clean = label if splits[i] is not Split.TRAIN else None
        if splits[i] is Split.TRAIN:
            source = sources[i]
            buckets[source].append(Sample(i, features[i], label, source, clean, Split.TRAIN))
        elif splits[i] is Split.VALIDATION:
            validation.append(Sample(i, features[i], label, 0, clean, Split.VALIDATION))
        else:
            test.append(Sample(i, features[i], label, 0, clean, Split.TEST))

    data_sources = [DataSource(index, f"source-{index}", samples) for index, samples in enumerate(buckets)]
    num_classes = max(mapping.values()) + 1
    return SourcePool(data_sources, validation, test, num_classes, features.shape[1])


def load_tabular(path: Union[str, Path], schema: TabularSchema = TabularSchema()) -> SourcePool:
    """Parse a CSV or JSONL file (chosen by suffix) into a SourcePool."""
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"dataset file not found: {path}")
    if path.suffix.lower() in (".jsonl", ".ndjson"):
        records = _read_jsonl(path, schema)
    else:
        records = _read_csv(path, schema)
    pool = build_pool(records, schema)
    logger.info(
        f"Loaded {len(records)} rows from {path} "
        f"({pool.train_size} train across {pool.num_sources} sources)"
    )
    return pool
