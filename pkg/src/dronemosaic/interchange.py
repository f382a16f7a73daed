"""JSON interchange for keypoints, matches, estimates, plans, reports and poses.

Reals are written with 12 significant digits and keys keep a fixed order,
so a rerun with the same inputs produces byte-identical files.  Rounding is
idempotent: loading a file and writing it again reproduces it exactly.
Non-finite reals become ``null``.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .errors import CorruptFile
from .features import InterestPoint
from .flightsim import GroundTruthPose
from .matching import Match

SIGNIFICANT_DIGITS = 12


def _real(v: float):
    v = float(v)
    if not math.isfinite(v):
        return None
    return float(f"{v:.{SIGNIFICANT_DIGITS}g}")


def canonical(obj):
    """Recursively convert to plain JSON types, rounding every real."""
    if isinstance(obj, dict):
        return {str(k): canonical(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [canonical(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [canonical(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _real(obj)
    if hasattr(obj, "value") and isinstance(obj.value, str):  # enums
        return obj.value
    return obj


def dumps(obj) -> str:
    return json.dumps(canonical(obj), indent=2, allow_nan=False) + "\n"


def write_json(obj, path) -> Path:
    path = Path(path)
    path.write_text(dumps(obj), encoding="utf-8")
    return path


def read_json(path):
    """Parse a JSON file.

    Raises:
        OSError: the file cannot be read.
        CorruptFile: the content is not valid JSON.
    """
    text = Path(path).read_text(encoding="utf-8")
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise CorruptFile(f"{path}: invalid JSON ({exc})") from exc


def keypoints_to_json(points, descriptors) -> list:
    if len(points) == 0:
        return []
    descriptors = np.asarray(descriptors, dtype=np.float64).reshape(len(points), -1)
    return [dict(p.to_dict(), descriptor=descriptors[i]) for i, p in enumerate(points)]


def keypoints_from_json(data) -> tuple[list[InterestPoint], np.ndarray]:
    try:
        points = [
            InterestPoint(float(d["x"]), float(d["y"]), float(d["scale"]), float(d["response"]), int(d["laplacian_sign"]))
            for d in data
        ]
        desc = np.array([d["descriptor"] for d in data], dtype=np.float64).reshape(len(points), 64)
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptFile(f"malformed keypoint record: {exc}") from exc
    return points, desc


def matches_to_json(matches) -> list:
    return [m.to_dict() for m in matches]


def matches_from_json(data) -> list[Match]:
    return [Match(int(d["query_index"]), int(d["train_index"]), float(d["distance"]), float(d["ratio"])) for d in data]


def poses_to_json(poses) -> list:
    return [p.to_dict() for p in poses]


def poses_from_json(data) -> list[GroundTruthPose]:
    try:
        return [GroundTruthPose.from_dict(d) for d in data]
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptFile(f"malformed pose record: {exc}") from exc
