"""Robust translation between two frames from putative point matches.

One match fully determines a translation, so RANSAC draws single matches.
Sampling uses a 64-bit linear congruential generator (Knuth's MMIX constants)
so that a seed gives the same hypotheses on every platform:

    state <- (6364136223846793005 * state + 1442695040888963407) mod 2**64
    index  = (state >> 33) mod n_matches
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import IndexOutOfRange, InsufficientMatches, NoConsensus

_LCG_MULTIPLIER = 6364136223846793005
_LCG_INCREMENT = 1442695040888963407
_MASK64 = (1 << 64) - 1


class Lcg64:
    """Minimal seeded 64-bit LCG used for RANSAC sampling."""

    def __init__(self, seed: int):
        self.state = int(seed) & _MASK64

    def next_u64(self) -> int:
        self.state = (_LCG_MULTIPLIER * self.state + _LCG_INCREMENT) & _MASK64
        return self.state

    def randrange(self, n: int) -> int:
        return (self.next_u64() >> 33) % n


@dataclass(frozen=True)
class Translation2D:
    """Position of frame B's origin in frame A's coordinates."""

    tx: float
    ty: float

    def __post_init__(self):
        if not (math.isfinite(self.tx) and math.isfinite(self.ty)):
            raise ValueError("translation components must be finite")

    def __add__(self, other: "Translation2D") -> "Translation2D":
        return Translation2D(self.tx + other.tx, self.ty + other.ty)

    def __neg__(self) -> "Translation2D":
        return Translation2D(-self.tx, -self.ty)

    def rounded(self) -> tuple[int, int]:
        """Components rounded half away from zero."""
        return _round_away(self.tx), _round_away(self.ty)


def _round_away(v: float) -> int:
    return int(math.copysign(math.floor(abs(v) + 0.5), v))


@dataclass(frozen=True)
class RansacParams:
    iterations: int = 200
    inlier_tolerance: float = 2.0
    min_matches: int = 4
    min_inlier_fraction: float = 0.25
    rng_seed: int = 0

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if not self.inlier_tolerance > 0:
            raise ValueError("inlier_tolerance must be > 0")
        if self.min_matches < 1:
            raise ValueError("min_matches must be >= 1")
        if not 0.0 <= self.min_inlier_fraction <= 1.0:
            raise ValueError("min_inlier_fraction must lie in [0, 1]")
        if not 0 <= self.rng_seed < 2**64:
            raise ValueError("rng_seed must be an unsigned 64-bit integer")


@dataclass(frozen=True)
class TransformEstimate:
    translation: Translation2D
    inlier_indices: tuple[int, ...]
    inlier_rms: float

    def to_dict(self) -> dict:
        return {
            "tx": self.translation.tx,
            "ty": self.translation.ty,
            "inliers": list(self.inlier_indices),
            "inlier_rms": self.inlier_rms,
        }


def _xy(points) -> np.ndarray:
    if isinstance(points, np.ndarray):
        return np.asarray(points, dtype=np.float64).reshape(-1, 2)
    return np.array([(p.x, p.y) if hasattr(p, "x") else tuple(p) for p in points], dtype=np.float64).reshape(-1, 2)


def _match_pairs(matches) -> np.ndarray:
    if isinstance(matches, np.ndarray):
        return matches.astype(np.int64).reshape(-1, 2)
    return np.array(
        [(m.query_index, m.train_index) if hasattr(m, "query_index") else tuple(m) for m in matches],
        dtype=np.int64,
    ).reshape(-1, 2)


def match_displacements(points_a, points_b, matches) -> np.ndarray:
    """``p_a - p_b`` for every match, as an ``(n, 2)`` array.

    Matches index ``points_a`` with their query index and ``points_b`` with
    their train index.

    Raises:
        IndexOutOfRange: a match refers to a missing point.
    """
    a = _xy(points_a)
    b = _xy(points_b)
    pairs = _match_pairs(matches)
    if len(pairs) and (
        pairs[:, 0].min() < 0 or pairs[:, 1].min() < 0 or pairs[:, 0].max() >= len(a) or pairs[:, 1].max() >= len(b)
    ):
        raise IndexOutOfRange("match index outside the point lists")
    return a[pairs[:, 0]] - b[pairs[:, 1]]


def displacement_residuals(points_a, points_b, matches, t: Translation2D) -> np.ndarray:
    """Per-match Euclidean norm of ``(p_a - p_b) - t``."""
    d = match_displacements(points_a, points_b, matches)
    return np.hypot(d[:, 0] - t.tx, d[:, 1] - t.ty)


def _mean_about(disp: np.ndarray, anchor: np.ndarray) -> np.ndarray:
    # averaging offsets from the anchor returns the anchor exactly when all
    # displacements coincide with it
    return anchor + np.mean(disp - anchor, axis=0)


def estimate_translation(points_a, points_b, matches, params: RansacParams | None = None) -> TransformEstimate:
    """RANSAC over single-match translation hypotheses.

    The winner has the most inliers (ties: lower inlier RMS, then earlier
    draw).  Its inliers are averaged into the refined translation and the
    inlier set is recomputed once against it.

    Raises:
        InsufficientMatches: fewer matches than ``min_matches``.
        NoConsensus: the refined inlier set is smaller than ``min_matches``
            or covers less than ``min_inlier_fraction`` of the matches.
    """
    params = params or RansacParams()
    disp = match_displacements(points_a, points_b, matches)
    n = len(disp)
    if n < params.min_matches:
        raise InsufficientMatches(f"{n} matches, need at least {params.min_matches}")

    tol = params.inlier_tolerance
    rng = Lcg64(params.rng_seed)
    best = None  # (count, rms, draw, index)
    for draw in range(params.iterations):
        i = rng.randrange(n)
        resid = np.hypot(disp[:, 0] - disp[i, 0], disp[:, 1] - disp[i, 1])
        inl = resid <= tol
        count = int(inl.sum())
        rms = float(np.sqrt(np.mean(resid[inl] ** 2)))
        if best is None or count > best[0] or (count == best[0] and rms < best[1]):
            best = (count, rms, draw, i)

    seed_idx = best[3]
    resid = np.hypot(disp[:, 0] - disp[seed_idx, 0], disp[:, 1] - disp[seed_idx, 1])
    t = _mean_about(disp[resid <= tol], disp[seed_idx])
    resid = np.hypot(disp[:, 0] - t[0], disp[:, 1] - t[1])
    inliers = np.nonzero(resid <= tol)[0]
    if len(inliers) < params.min_matches or len(inliers) < params.min_inlier_fraction * n:
        raise NoConsensus(
            f"best translation ({t[0]:.2f}, {t[1]:.2f}) has {len(inliers)} inliers out of {n} matches"
        )
    rms = float(np.sqrt(np.mean(resid[inliers] ** 2)))
    return TransformEstimate(
        translation=Translation2D(float(t[0]), float(t[1])),
        inlier_indices=tuple(int(i) for i in inliers),
        inlier_rms=rms,
    )
