"""Recall@K evaluation over score matrices.

A search succeeds for a query when any of its relevant gallery items appears
among the top-k ranked columns of its score row. Ranking ties are broken by
the lower gallery index, via :func:`rankfuse.matrix_ops.topk_rows`, so
evaluation and fusion always agree on orderings.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .errors import ParameterError, ValidationError
from .matrix_ops import ScoreMatrix, topk_rows

__all__ = ["GroundTruth", "RetrievalMetrics", "recall_at_k", "metrics_report"]


@dataclass(frozen=True)
class GroundTruth:
    """Per-query sets of relevant gallery indices.

    ``relevant[i]`` is the non-empty set of gallery items that count as a
    correct retrieval for query i; every index must be in
    [0, gallery_size).
    """

    relevant: tuple
    gallery_size: int

    def __post_init__(self):
        if self.gallery_size < 1:
            raise ParameterError(f"gallery_size must be >= 1, got {self.gallery_size}")
        sets = []
        for q, rel in enumerate(self.relevant):
            items = frozenset(int(i) for i in rel)
            if not items:
                raise ValidationError(f"query {q} has an empty relevant set")
            for i in items:
                if not 0 <= i < self.gallery_size:
                    raise ValidationError(
                        f"query {q} references gallery index {i}, outside [0, {self.gallery_size})"
                    )
            sets.append(items)
        if not sets:
            raise ValidationError("ground truth covers no queries")
        object.__setattr__(self, "relevant", tuple(sets))

    @property
    def n_queries(self) -> int:
        return len(self.relevant)

    @classmethod
    def identity(cls, n: int) -> "GroundTruth":
        """Query i matches gallery item i."""
        return cls(relevant=tuple({i} for i in range(n)), gallery_size=n)

    @classmethod
    def from_mapping(cls, mapping: Mapping, n_queries: int, gallery_size: int) -> "GroundTruth":
        """Build from {query_index: iterable_of_gallery_indices}."""
        rows = []
        for q in range(n_queries):
            if q not in mapping:
                raise ValidationError(f"ground truth missing query {q}")
            rows.append(mapping[q])
        return cls(relevant=tuple(rows), gallery_size=gallery_size)


@dataclass(frozen=True)
class RetrievalMetrics:
    """Recall at each requested k, plus the query count."""

    r_at: dict
    n_queries: int

    def __post_init__(self):
        ks = sorted(self.r_at)
        for k in ks:
            v = self.r_at[k]
            if not 0.0 <= v <= 1.0:
                raise ValidationError(f"R@{k} is {v!r}, outside [0, 1]")
        for lo, hi in zip(ks, ks[1:]):
            if self.r_at[lo] > self.r_at[hi]:
                raise ValidationError(
                    f"R@{lo}={self.r_at[lo]} exceeds R@{hi}={self.r_at[hi]}; recall must be monotone in k"
                )
        object.__setattr__(self, "r_at", dict(self.r_at))

    def __str__(self) -> str:
        return " ".join(f"R@{k}={self.r_at[k]:.4f}" for k in sorted(self.r_at))


def _check_gt(s: ScoreMatrix, gt: GroundTruth) -> None:
    if gt.n_queries != s.n_queries:
        raise ValidationError(
            f"ground truth covers {gt.n_queries} queries but score matrix has {s.n_queries} rows"
        )
    if gt.gallery_size != s.n_gallery:
        raise ValidationError(
            f"ground truth gallery size {gt.gallery_size} != score matrix columns {s.n_gallery}"
        )


def recall_at_k(s: ScoreMatrix, gt: GroundTruth, k: int) -> float:
    """Fraction of queries whose top-k ranked items intersect the relevant set."""
    _check_gt(s, gt)
    if not 1 <= k <= s.n_gallery:
        raise ParameterError(f"k must be in [1, {s.n_gallery}], got {k}")
    top = topk_rows(s, k).indices
    hits = sum(
        1 for q in range(s.n_queries) if not gt.relevant[q].isdisjoint(map(int, top[q]))
    )
    return hits / s.n_queries


def metrics_report(s: ScoreMatrix, gt: GroundTruth, ks: Sequence[int] | Iterable[int]) -> RetrievalMetrics:
    """Recall at every k in ``ks``.

    A single ranking pass at max(ks) serves all requested cutoffs.
    """
    ks = sorted(set(int(k) for k in ks))
    if not ks:
        raise ParameterError("ks must be non-empty")
    _check_gt(s, gt)
    if ks[0] < 1 or ks[-1] > s.n_gallery:
        raise ParameterError(f"every k must be in [1, {s.n_gallery}], got {ks}")
    top = topk_rows(s, ks[-1]).indices
    r_at = {}
    for k in ks:
        hits = sum(
            1 for q in range(s.n_queries) if not gt.relevant[q].isdisjoint(map(int, top[q, :k]))
        )
        r_at[k] = hits / s.n_queries
    return RetrievalMetrics(r_at=r_at, n_queries=s.n_queries)
