"""
Random-hyperplane LSH over layer features.

Each of the h tables hashes a vector to the k-bit sign pattern of k unit-norm
Gaussian projections. Queries take the union of the query's buckets and
re-rank it exactly, so results are a subset of the true neighbourhood.
"""

import math
from typing import Dict, Hashable, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from ...shared.exceptions import DegenerateVectorError, DuplicateIdError, ShapeError


class LshIndex:
    """h tables of k-bit sign codes plus the stored vectors for re-ranking."""

    def __init__(
        self,
        dim: int,
        num_bits: int = 12,
        num_tables: int = 16,
        seed: int = 0,
        density_floor: float = 1e-12,
    ):
        if dim < 1 or num_bits < 1 or num_tables < 1:
            raise ShapeError("dimension, bits and tables must all be positive")
        if num_bits > 62:
            raise ShapeError("codes are stored as 64-bit integers; use at most 62 bits")
        self.dim = dim
        self.num_bits = num_bits
        self.num_tables = num_tables
        self.density_floor = density_floor

        rng = np.random.default_rng(seed)
        projections = rng.standard_normal((num_tables, num_bits, dim))
        projections /= np.linalg.norm(projections, axis=2, keepdims=True)
        self.projections = projections
        self._stacked = projections.reshape(num_tables * num_bits, dim)
        self._powers = np.left_shift(np.int64(1), np.arange(num_bits, dtype=np.int64))

        self.tables: List[Dict[int, List[int]]] = [{} for _ in range(num_tables)]
        self._ids: List[Hashable] = []
        self._positions: Dict[Hashable, int] = {}
        self._vectors = np.empty((0, dim))
        self._norms = np.empty(0)
        self._size = 0

    @classmethod
    def sized_for(
        cls,
        expected_size: int,
        dim: int,
        num_tables: int = 16,
        bucket_target: int = 8,
        seed: int = 0,
    ) -> 'LshIndex':
        """Index whose bit count keeps about ``bucket_target`` ids per bucket."""
        bits = max(1, math.ceil(math.log2(max(expected_size, 2) / bucket_target)))
        return cls(dim, num_bits=min(bits, 62), num_tables=num_tables, seed=seed)

    def __len__(self) -> int:
        return self._size

    def __contains__(self, item_id: Hashable) -> bool:
        return item_id in self._positions

    # -------------------------------------------------------------------------
    # Hashing
    # -------------------------------------------------------------------------

    def codes(self, vectors: np.ndarray) -> np.ndarray:
        """Codes of shape (n, h) for an (n, d) matrix."""
        signs = (vectors @ self._stacked.T) >= 0.0
        signs = signs.reshape(vectors.shape[0], self.num_tables, self.num_bits)
        return signs.astype(np.int64) @ self._powers

    def _check_vector(self, vector) -> np.ndarray:
        v = np.asarray(vector, dtype=np.float64)
        if v.shape != (self.dim,):
            raise ShapeError(f"vector has shape {v.shape}, expected ({self.dim},)")
        return v

    # -------------------------------------------------------------------------
    # Mutation
    # -------------------------------------------------------------------------

    def insert(self, item_id: Hashable, vector) -> None:
        self.insert_many([item_id], self._check_vector(vector)[None, :])

    def insert_many(self, item_ids: Sequence[Hashable], vectors) -> None:
        matrix = np.asarray(vectors, dtype=np.float64)
        if matrix.ndim != 2 or matrix.shape[1] != self.dim:
            raise ShapeError(f"matrix has shape {matrix.shape}, expected (n, {self.dim})")
        if matrix.shape[0] != len(item_ids):
            raise ShapeError("one id per row required")
        seen = set()
        for item_id in item_ids:
            if item_id in self._positions or item_id in seen:
                raise DuplicateIdError(f"id {item_id!r} is already indexed")
            seen.add(item_id)

        self._reserve(matrix.shape[0])
        codes = self.codes(matrix)
        for row, item_id in enumerate(item_ids):
            position = self._size
            self._vectors[position] = matrix[row]
            self._norms[position] = np.linalg.norm(matrix[row])
            self._ids.append(item_id)
            self._positions[item_id] = position
            for table, code in zip(self.tables, codes[row]):
                table.setdefault(int(code), []).append(position)
            self._size += 1

    def _reserve(self, extra: int) -> None:
        needed = self._size + extra
        if needed <= self._vectors.shape[0]:
            return
        capacity = max(needed, 2 * self._vectors.shape[0], 64)
        vectors = np.empty((capacity, self.dim))
        vectors[:self._size] = self._vectors[:self._size]
        norms = np.empty(capacity)
        norms[:self._size] = self._norms[:self._size]
        self._vectors, self._norms = vectors, norms

    # -------------------------------------------------------------------------
    # Queries
    # -------------------------------------------------------------------------

    def _candidate_positions(self, vector: np.ndarray) -> np.ndarray:
        codes = self.codes(vector[None, :])[0]
        positions = set()
        for table, code in zip(self.tables, codes):
            bucket = table.get(int(code))
            if bucket:
                positions.update(bucket)
        return np.array(sorted(positions), dtype=np.int64)

    def candidate_count(self, query) -> int:
        """Number of distinct stored vectors sharing a bucket with ``query``."""
        return int(self._candidate_positions(self._check_vector(query)).size)

    def query(self, query, top_k: int) -> List[Tuple[Hashable, float]]:
        """Up to ``top_k`` (id, cosine) pairs from the query's buckets, best first."""
        q = self._check_vector(query)
        q_norm = float(np.linalg.norm(q))
        if q_norm == 0.0:
            raise DegenerateVectorError("cannot rank by cosine against a zero vector")
        positions = self._candidate_positions(q)
        if positions.size == 0:
            return []
        norms = self._norms[positions]
        dots = self._vectors[positions] @ q
        with np.errstate(divide="ignore", invalid="ignore"):
            sims = np.where(norms > 0.0, dots / (norms * q_norm), 0.0)
        sims = np.clip(sims, -1.0, 1.0)
        order = np.argsort(-sims, kind="stable")[:top_k]
        return [(self._ids[positions[i]], float(sims[i])) for i in order]

    def kernel_density(
        self, query, sigma: float, top_k: int, total_seen: int
    ) -> float:
        """Truncated Gaussian kernel density of ``query`` against the stored set."""
        if sigma <= 0:
            raise ShapeError(f"bandwidth must be positive, got {sigma}")
        q = self._check_vector(query)
        if self._size == 0:
            return self.density_floor
        positions = self._candidate_positions(q)
        if positions.size == 0:
            return self.density_floor
        diffs = self._vectors[positions] - q
        sq_dists = np.einsum("ij,ij->i", diffs, diffs)
        nearest = np.sort(sq_dists, kind="stable")[:top_k]
        total = float(np.sum(np.exp(-nearest / (2.0 * sigma * sigma))))
        density = total / max(total_seen, 1)
        return float(min(max(density, self.density_floor), 1.0))

    def exhaustive_query(self, query, top_k: int) -> List[Tuple[Hashable, float]]:
        """Exact cosine top-k over every stored vector."""
        q = self._check_vector(query)
        q_norm = float(np.linalg.norm(q))
        if q_norm == 0.0:
            raise DegenerateVectorError("cannot rank by cosine against a zero vector")
        if self._size == 0:
            return []
        norms = self._norms[:self._size]
        with np.errstate(divide="ignore", invalid="ignore"):
            sims = np.where(norms > 0.0, (self._vectors[:self._size] @ q) / (norms * q_norm), 0.0)
        order = np.argsort(-sims, kind="stable")[:top_k]
        return [(self._ids[i], float(np.clip(sims[i], -1.0, 1.0))) for i in order]

    def ids(self) -> Iterable[Hashable]:
        return iter(self._ids)

    def bucket_sizes(self, table: int) -> List[int]:
        return [len(bucket) for bucket in self.tables[table].values()]

    def get_vector(self, item_id: Hashable) -> Optional[np.ndarray]:
        position = self._positions.get(item_id)
        return None if position is None else self._vectors[position].copy()
