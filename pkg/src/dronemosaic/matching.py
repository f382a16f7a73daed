"""Exhaustive nearest-neighbour descriptor association with a ratio test."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .errors import EmptyInput
from .features import is_matchable


@dataclass(frozen=True)
class Match:
    query_index: int
    train_index: int
    distance: float
    ratio: float

    def to_dict(self) -> dict:
        return {
            "query_index": self.query_index,
            "train_index": self.train_index,
            "distance": self.distance,
            "ratio": self.ratio,
        }


@dataclass(frozen=True)
class MatchParams:
    ratio_threshold: float = 0.8
    use_laplacian_prefilter: bool = True
    cross_check: bool = False

    def __post_init__(self):
        if not 0.0 < self.ratio_threshold <= 1.0:
            raise ValueError(f"ratio_threshold must lie in (0, 1], got {self.ratio_threshold}")


def brute_force_nn(query_descriptor, train) -> tuple[int, float, float]:
    """Exact nearest and second-nearest train descriptors.

    With a single train descriptor the second distance is ``inf``.  Equal
    distances resolve to the lower index.

    Raises:
        EmptyInput: ``train`` is empty.
    """
    train = np.atleast_2d(np.asarray(train, dtype=np.float64))
    if train.shape[0] == 0 or train.size == 0:
        raise EmptyInput("train descriptor set is empty")
    q = np.asarray(query_descriptor, dtype=np.float64)
    dist = np.sqrt(np.sum((train - q) ** 2, axis=1))
    best = int(np.argmin(dist))
    if len(dist) == 1:
        return best, float(dist[best]), math.inf
    second = float(np.min(np.delete(dist, best)))
    return best, float(dist[best]), second


def _ratio(best: float, second: float) -> float:
    if math.isinf(second):
        return 0.0
    if second == 0.0:
        # two exact duplicates in train: ambiguous
        return 1.0
    return best / second


def _signs(points, n):
    if points is None:
        return np.zeros(n, dtype=np.int8)
    return np.array([getattr(p, "laplacian_sign", 0) for p in points], dtype=np.int8)


def _best_two(dist: np.ndarray):
    """Per-row index of the minimum plus the two smallest values (inf padded)."""
    n, m = dist.shape
    if m == 0:
        return np.full(n, -1), np.full(n, np.inf), np.full(n, np.inf)
    best = np.argmin(dist, axis=1)
    rows = np.arange(n)
    best_d = dist[rows, best]
    if m == 1:
        return best, best_d, np.full(n, np.inf)
    masked = dist.copy()
    masked[rows, best] = np.inf
    return best, best_d, masked.min(axis=1)


def match_descriptors(query_points, query_desc, train_points, train_desc, params: MatchParams | None = None) -> list[Match]:
    """Associate query descriptors with train descriptors.

    A query keeps its nearest train descriptor when ``best / second_best`` is
    below the ratio threshold.  With the Laplacian prefilter only candidates
    of equal Laplacian sign are compared; all-zero (flat) descriptors on either
    side are skipped.  Cross-checking keeps only mutual nearest neighbours
    that pass the ratio test in both directions, reporting the larger ratio.

    Returns:
        Matches sorted by ascending distance, ties by (query, train) index.

    Raises:
        EmptyInput: either descriptor set is empty.
    """
    params = params or MatchParams()
    q = np.atleast_2d(np.asarray(query_desc, dtype=np.float64))
    t = np.atleast_2d(np.asarray(train_desc, dtype=np.float64))
    if q.size == 0 or t.size == 0 or len(q) == 0 or len(t) == 0:
        raise EmptyInput("both descriptor sets must be non-empty")

    dist = cdist(q, t)
    blocked = ~is_matchable(q)[:, None] | ~is_matchable(t)[None, :]
    if params.use_laplacian_prefilter:
        qs = _signs(query_points, len(q))
        ts = _signs(train_points, len(t))
        blocked |= qs[:, None] != ts[None, :]
    dist = np.where(blocked, np.inf, dist)

    best, best_d, second_d = _best_two(dist)
    if params.cross_check:
        rev_best, rev_best_d, rev_second_d = _best_two(dist.T)

    matches = []
    for qi in range(len(q)):
        if not np.isfinite(best_d[qi]):
            continue
        ti = int(best[qi])
        ratio = _ratio(float(best_d[qi]), float(second_d[qi]))
        if not ratio < params.ratio_threshold:
            continue
        if params.cross_check:
            if int(rev_best[ti]) != qi:
                continue
            # ratio must pass both ways so swapping the inputs gives the same set
            ratio = max(ratio, _ratio(float(rev_best_d[ti]), float(rev_second_d[ti])))
            if not ratio < params.ratio_threshold:
                continue
        matches.append(Match(qi, ti, float(best_d[qi]), ratio))
    matches.sort(key=lambda m: (m.distance, m.query_index, m.train_index))
    return matches
