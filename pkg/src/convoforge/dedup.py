"""Cosine similarity and the accepted-question index.

New questions are rejected when their embedding is too close to one
already in the dataset: strictly greater than the threshold rejects, so
a similarity of exactly 0.8 under the default still passes. The scan is
an exact linear one; at ten thousand entries there is nothing to gain
from approximate search, and exactness keeps the boundary testable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np


@dataclass(frozen=True)
class EmbeddingVector:
    values: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if not self.values:
            raise ValueError("embedding must have at least one component")
        if not all(math.isfinite(v) for v in self.values):
            raise ValueError("embedding components must be finite")

    @property
    def dimension(self) -> int:
        return len(self.values)

    @classmethod
    def from_iterable(cls, values: Iterable[float]) -> "EmbeddingVector":
        return cls(tuple(values))


def _cosine(a: np.ndarray, norm_a: float, b: np.ndarray, norm_b: float) -> float:
    # Single shared expression so the index scan and the standalone
    # function produce bit-identical floats.
    return float(np.dot(a, b) / (norm_a * norm_b))


def cosine_similarity(a: EmbeddingVector, b: EmbeddingVector) -> float:
    if a.dimension != b.dimension:
        raise ValueError(f"dimension mismatch: {a.dimension} vs {b.dimension}")
    arr_a = np.asarray(a.values, dtype=np.float64)
    arr_b = np.asarray(b.values, dtype=np.float64)
    norm_a = float(np.linalg.norm(arr_a))
    norm_b = float(np.linalg.norm(arr_b))
    if norm_a == 0.0 or norm_b == 0.0:
        raise ValueError("cosine similarity is undefined for zero-magnitude vectors")
    return _cosine(arr_a, norm_a, arr_b, norm_b)


@dataclass(frozen=True)
class DedupDecision:
    accepted: bool
    nearest_id: Optional[str] = None
    nearest_similarity: Optional[float] = None


class QuestionIndex:
    """Accepted questions with their embeddings; rejects near-duplicates.

    check_and_insert mutates and must be externally serialized; the
    pipeline funnels all dedup decisions through one ordered stage.
    """

    def __init__(self, threshold: float = 0.8):
        if not 0 < threshold <= 1:
            raise ValueError("threshold must be in (0, 1]")
        self._threshold = threshold
        self._ids: list[str] = []
        self._id_set: set[str] = set()
        self._vectors: list[EmbeddingVector] = []
        self._arrays: list[np.ndarray] = []
        self._norms: list[float] = []
        self._dimension: Optional[int] = None

    @property
    def threshold(self) -> float:
        return self._threshold

    @property
    def dimension(self) -> Optional[int]:
        return self._dimension

    def __len__(self) -> int:
        return len(self._ids)

    def entries(self) -> list[tuple[str, EmbeddingVector]]:
        return list(zip(self._ids, self._vectors))

    def _prepare(self, sample_id: str, vector: EmbeddingVector) -> np.ndarray:
        if sample_id in self._id_set:
            raise ValueError(f"duplicate sample_id {sample_id!r}")
        if self._dimension is not None and vector.dimension != self._dimension:
            raise ValueError(
                f"dimension mismatch: index holds {self._dimension}, got {vector.dimension}"
            )
        arr = np.asarray(vector.values, dtype=np.float64)
        if float(np.linalg.norm(arr)) == 0.0:
            raise ValueError("zero-magnitude vectors cannot be indexed")
        return arr

    def _insert(self, sample_id: str, vector: EmbeddingVector, arr: np.ndarray) -> None:
        self._ids.append(sample_id)
        self._id_set.add(sample_id)
        self._vectors.append(vector)
        self._arrays.append(arr)
        self._norms.append(float(np.linalg.norm(arr)))
        self._dimension = vector.dimension

    def add_unchecked(self, sample_id: str, vector: EmbeddingVector) -> None:
        """Insert without a similarity check (bulk loads, snapshots)."""
        arr = self._prepare(sample_id, vector)
        self._insert(sample_id, vector, arr)

    def check_and_insert(self, sample_id: str, vector: EmbeddingVector) -> DedupDecision:
        """Insert unless a stored entry is strictly closer than threshold.

        Returns the nearest entry either way; on a similarity tie the
        earliest-inserted entry is reported. Rejected vectors are not
        inserted.
        """
        arr = self._prepare(sample_id, vector)
        norm = float(np.linalg.norm(arr))
        nearest_id: Optional[str] = None
        nearest_sim = -math.inf
        for existing_id, existing_arr, existing_norm in zip(
            self._ids, self._arrays, self._norms
        ):
            sim = _cosine(existing_arr, existing_norm, arr, norm)
            if sim > nearest_sim:
                nearest_sim = sim
                nearest_id = existing_id
        if nearest_id is None:
            self._insert(sample_id, vector, arr)
            return DedupDecision(accepted=True)
        if nearest_sim > self._threshold:
            return DedupDecision(
                accepted=False, nearest_id=nearest_id, nearest_similarity=nearest_sim
            )
        self._insert(sample_id, vector, arr)
        return DedupDecision(
            accepted=True, nearest_id=nearest_id, nearest_similarity=nearest_sim
        )


def save_index(index: QuestionIndex, path) -> None:
    """One entry per line: sample_id, tab, space-separated decimals."""
    with open(path, "w", encoding="utf-8") as fh:
        for sample_id, vector in index.entries():
            decimals = " ".join(repr(v) for v in vector.values)
            fh.write(f"{sample_id}\t{decimals}\n")


def load_index(path, threshold: float = 0.8) -> QuestionIndex:
    index = QuestionIndex(threshold=threshold)
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            try:
                sample_id, decimals = line.split("\t")
                vector = EmbeddingVector.from_iterable(
                    float(v) for v in decimals.split(" ")
                )
            except ValueError as exc:
                raise ValueError(f"{path}:{line_no}: malformed index line") from exc
            index.add_unchecked(sample_id, vector)
    return index


def find_violations(
    index: QuestionIndex, threshold: Optional[float] = None
) -> list[tuple[str, str, float]]:
    """Brute-force pairwise scan; lists pairs whose similarity exceeds threshold."""
    limit = index.threshold if threshold is None else threshold
    entries = index.entries()
    violations = []
    for i in range(len(entries)):
        for j in range(i + 1, len(entries)):
            sim = cosine_similarity(entries[i][1], entries[j][1])
            if sim > limit:
                violations.append((entries[i][0], entries[j][0], sim))
    return violations
