"""Crop-and-concatenate stitching of frame pairs, flight legs and grids.

Joining a pair works like this:

1. Estimate where the newer frame B sits relative to the older image A.
2. Cut the intersection out of A.
3. Keep B whole and butt the rest of A against it.

No pixel is resampled or invented, so the result stays rectangular with a
hard seam at each join.  A flight leg is a left fold of pair stitches.  A
grid is a set of legs that get rotated a quarter turn so that joining
neighbouring columns becomes a vertical stitch too.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ExcessiveDrift, NoOverlap, StitchError
from .features import DetectorParams, detect_and_describe
from .image import (
    Rect,
    StitchDirection,
    concat,
    image_size,
    integral_image,
    rotate_quarter,
    rotate_rect,
    to_grayscale,
)
from .matching import MatchParams, match_descriptors
from .transform import RansacParams, TransformEstimate, Translation2D, estimate_translation

logger = logging.getLogger(__name__)

_TRANSPOSED = {
    StitchDirection.LeftToRight: StitchDirection.TopToBottom,
    StitchDirection.RightToLeft: StitchDirection.BottomToTop,
}


@dataclass(frozen=True)
class StitchParams:
    detector: DetectorParams = field(default_factory=DetectorParams)
    matcher: MatchParams = field(default_factory=MatchParams)
    ransac: RansacParams = field(default_factory=RansacParams)
    max_perpendicular_drift: int = 8
    band_factor: float = 1.5
    feather: bool = False

    def __post_init__(self):
        if self.max_perpendicular_drift < 0:
            raise ValueError("max_perpendicular_drift must be >= 0")
        if not self.band_factor >= 1.0:
            raise ValueError("band_factor must be >= 1")


@dataclass(frozen=True)
class OverlapRegions:
    rect_in_a: Rect
    rect_in_b: Rect
    translation: Translation2D


@dataclass(frozen=True)
class MosaicPlan:
    """Grid survey layout; ``frame_refs`` is row-major, row 0 at the top."""

    columns: int
    rows: int
    traversal: str = "serpentine"
    leg_direction: StitchDirection = StitchDirection.BottomToTop
    frame_refs: tuple = ()

    def __post_init__(self):
        if self.columns < 1 or self.rows < 1:
            raise ValueError("plan needs at least one column and one row")
        if self.traversal not in ("serpentine", "parallel"):
            raise ValueError(f"unknown traversal {self.traversal!r}")
        object.__setattr__(self, "leg_direction", StitchDirection(self.leg_direction))
        if self.leg_direction.axis != 0:
            raise ValueError("leg_direction must be BottomToTop or TopToBottom")
        object.__setattr__(self, "frame_refs", tuple(self.frame_refs))
        if len(self.frame_refs) != self.columns * self.rows:
            raise ValueError(
                f"plan lists {len(self.frame_refs)} frames for a {self.columns}x{self.rows} grid"
            )

    def column_refs(self, col: int) -> list:
        """Frames of one column ordered along the leg direction.

        Frames are keyed by grid cell, so legs flown the opposite way are
        normalized simply by reading the column in the common order.
        """
        refs = [self.frame_refs[row * self.columns + col] for row in range(self.rows)]
        if self.leg_direction is StitchDirection.BottomToTop:
            refs.reverse()
        return refs

    def to_dict(self) -> dict:
        return {
            "columns": self.columns,
            "rows": self.rows,
            "traversal": self.traversal,
            "leg_direction": self.leg_direction.value,
            "frames": list(self.frame_refs),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MosaicPlan":
        return cls(
            columns=int(data["columns"]),
            rows=int(data["rows"]),
            traversal=data.get("traversal", "serpentine"),
            leg_direction=data.get("leg_direction", StitchDirection.BottomToTop),
            frame_refs=tuple(data["frames"]),
        )


@dataclass
class PairRecord:
    """What happened when one pair was joined.

    ``translation`` is the position of B's reference frame in A's reference
    frame (scene orientation); ``offset`` is the rounded image-level shift
    actually applied, which is what a replay needs.
    """

    pair: tuple
    ref_frames: tuple
    matches: int
    inliers: int
    translation: tuple[float, float] | None
    offset: tuple[int, int] | None
    seam: int | None
    inlier_rms: float | None = None
    stage: str = ""

    @property
    def ref_pair(self):
        return self.ref_frames

    def to_dict(self) -> dict:
        tx, ty = self.translation if self.translation is not None else (None, None)
        return {
            "pair": list(self.pair),
            "matches": self.matches,
            "inliers": self.inliers,
            "tx": tx,
            "ty": ty,
            "seam": self.seam,
            "stage": self.stage,
            "ref_frames": list(self.ref_frames),
            "offset": list(self.offset) if self.offset is not None else None,
            "inlier_rms": self.inlier_rms,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PairRecord":
        tx, ty = data.get("tx"), data.get("ty")
        offset = data.get("offset")
        return cls(
            pair=tuple(data["pair"]),
            ref_frames=tuple(data.get("ref_frames", data["pair"])),
            matches=int(data.get("matches", 0)),
            inliers=int(data.get("inliers", 0)),
            translation=(tx, ty) if tx is not None else None,
            offset=tuple(int(v) for v in offset) if offset is not None else None,
            seam=data.get("seam"),
            inlier_rms=data.get("inlier_rms"),
            stage=data.get("stage", ""),
        )


@dataclass
class StitchReport:
    pairs: list = field(default_factory=list)
    width: int = 0
    height: int = 0
    failures: list = field(default_factory=list)
    anchor: tuple | None = None
    frame_size: tuple | None = None

    @property
    def complete(self) -> bool:
        return not self.failures

    def to_dict(self) -> dict:
        return {
            "pairs": [p.to_dict() for p in self.pairs],
            "overall": {
                "width": self.width,
                "height": self.height,
                "failures": list(self.failures),
                "anchor": list(self.anchor) if self.anchor is not None else None,
                "frame_size": list(self.frame_size) if self.frame_size is not None else None,
            },
        }

    @classmethod
    def from_dict(cls, data: dict) -> "StitchReport":
        overall = data.get("overall", {})
        anchor = overall.get("anchor")
        frame_size = overall.get("frame_size")
        return cls(
            pairs=[PairRecord.from_dict(p) for p in data.get("pairs", [])],
            width=int(overall.get("width", 0)),
            height=int(overall.get("height", 0)),
            failures=list(overall.get("failures", [])),
            anchor=tuple(anchor) if anchor is not None else None,
            frame_size=tuple(frame_size) if frame_size is not None else None,
        )


@dataclass
class _Strip:
    """An accumulated image plus where its newest frame sits inside it."""

    image: np.ndarray
    ref: object
    ref_rect: Rect

    @classmethod
    def of_frame(cls, frame, ref) -> "_Strip":
        w, h = image_size(frame)
        return cls(frame, ref, Rect(0, 0, w, h))

    def rotated(self, turns: int) -> "_Strip":
        w, h = image_size(self.image)
        return _Strip(rotate_quarter(self.image, turns), self.ref, rotate_rect(self.ref_rect, w, h, turns))


def _check_direction(t_round, dims_a, dims_b, direction):
    tx, ty = t_round
    wa, ha = dims_a
    wb, hb = dims_b
    ok = {
        StitchDirection.BottomToTop: ty <= 0,
        StitchDirection.TopToBottom: ty + hb >= ha,
        StitchDirection.RightToLeft: tx <= 0,
        StitchDirection.LeftToRight: tx + wb >= wa,
    }[direction]
    if not ok:
        raise NoOverlap(
            f"translation ({tx}, {ty}) does not place the new frame {direction.value.replace('To', ' to ')} "
            "of the accumulated image"
        )


def compute_overlap(dims_a, dims_b, t: Translation2D, direction: StitchDirection) -> OverlapRegions:
    """Intersection of frame A with frame B placed at ``t``.

    Both rectangles describe the same scene area: ``rect_in_a`` in A's pixel
    coordinates, ``rect_in_b`` in B's.  The translation is rounded half away
    from zero first.

    Raises:
        NoOverlap: the frames do not intersect, or B does not lie on the side
            of A that ``direction`` implies.
    """
    direction = StitchDirection(direction)
    tx, ty = t.rounded()
    wa, ha = dims_a
    wb, hb = dims_b
    inter = Rect(0, 0, wa, ha).intersect(Rect(tx, ty, wb, hb))
    if inter.area == 0:
        raise NoOverlap(f"frames {wa}x{ha} and {wb}x{hb} at offset ({tx}, {ty}) do not overlap")
    _check_direction((tx, ty), dims_a, dims_b, direction)
    return OverlapRegions(rect_in_a=inter, rect_in_b=inter.shift(-tx, -ty), translation=t)


def _feather(b_part, a_overlap, start, towards_end):
    """Blend B's overlap rows linearly into A's pixels at the seam.

    ``a_overlap`` covers B rows ``start:start + len(a_overlap)``; A's weight
    grows towards the seam, which is at the end of that range when
    ``towards_end`` is true.
    """
    n = a_overlap.shape[0]
    if n == 0:
        return b_part
    ramp = (np.arange(n, dtype=np.float64) + 0.5) / n
    if not towards_end:
        ramp = ramp[::-1]
    ramp = ramp.reshape((n,) + (1,) * (b_part.ndim - 1))
    blended = b_part.astype(np.float64)
    rows = slice(start, start + n)
    blended[rows] = (1.0 - ramp) * blended[rows] + ramp * a_overlap.astype(np.float64)
    if np.issubdtype(b_part.dtype, np.integer):
        info = np.iinfo(b_part.dtype)
        blended = np.clip(np.rint(blended), info.min, info.max)
    return blended.astype(b_part.dtype)


def compose_pair(a, b, offset, direction, max_drift=None, feather=False):
    """Join ``a`` and ``b`` given B's rounded offset in A's coordinates.

    Returns:
        ``(image, a_shift, b_shift, seam)`` where the shifts map A and B
        pixel coordinates into the output and ``seam`` is the output row (or
        column) where A's remainder begins.

    Raises:
        NoOverlap, ExcessiveDrift
    """
    direction = StitchDirection(direction)
    if direction.axis == 1:
        out, a_shift, b_shift, seam = compose_pair(
            np.swapaxes(a, 0, 1),
            np.swapaxes(b, 0, 1),
            (offset[1], offset[0]),
            _TRANSPOSED[direction],
            max_drift,
            feather,
        )
        return np.swapaxes(out, 0, 1), a_shift[::-1], b_shift[::-1], seam

    tx, ty = int(offset[0]), int(offset[1])
    wa, ha = image_size(a)
    wb, hb = image_size(b)
    compute_overlap((wa, ha), (wb, hb), Translation2D(tx, ty), direction)
    if max_drift is not None and abs(tx) > max_drift:
        raise ExcessiveDrift(f"perpendicular drift of {abs(tx)} px exceeds the {max_drift} px limit")
    c0 = max(0, tx)
    c1 = min(wa, tx + wb)
    b_part = b[:, c0 - tx : c1 - tx]
    if direction is StitchDirection.BottomToTop:
        r0 = min(max(ty + hb, 0), ha)
        a_rest = a[r0:, c0:c1]
        if feather:
            top = max(0, ty)
            b_part = _feather(b_part, a[top:r0, c0:c1], top - ty, True)
        out = concat(b_part, a_rest, direction)
        origin_y = ty
        seam = hb
    else:
        r1 = min(max(ty, 0), ha)
        a_rest = a[:r1, c0:c1]
        if feather:
            b_part = _feather(b_part, a[r1 : min(ha, ty + hb), c0:c1], r1 - ty, False)
        out = concat(a_rest, b_part, direction)
        origin_y = min(0, ty)
        seam = r1
    a_shift = (-c0, -origin_y)
    b_shift = (tx - c0, ty - origin_y)
    return out, a_shift, b_shift, seam


def _band(strip_img, extent, direction, factor):
    """Slice of the accumulated image where the new frame can overlap it."""
    axis = direction.axis
    size = strip_img.shape[axis]
    band = min(size, int(math.ceil(factor * extent)))
    start = 0 if direction.newer_first else size - band
    index = [slice(None), slice(None)]
    index[axis] = slice(start, start + band)
    offset = (start, 0) if axis == 1 else (0, start)
    return strip_img[tuple(index)], offset


def _features(img, params: DetectorParams):
    return detect_and_describe(integral_image(to_grayscale(img)), params)


def estimate_pair_translation(a, b, direction, params: StitchParams | None = None):
    """Detect, describe, match and robustly fit B's position in A.

    Detection in A is restricted to the band facing B.

    Returns:
        ``(estimate, n_matches)``

    Raises:
        InsufficientMatches, NoConsensus
    """
    params = params or StitchParams()
    direction = StitchDirection(direction)
    extent = b.shape[direction.axis]
    band, (bx, by) = _band(a, extent, direction, params.band_factor)
    pts_a, desc_a = _features(band, params.detector)
    pts_b, desc_b = _features(b, params.detector)
    if len(pts_a) == 0 or len(pts_b) == 0:
        matches = []
    else:
        matches = match_descriptors(pts_a, desc_a, pts_b, desc_b, params.matcher)
    xy_a = np.array([(p.x + bx, p.y + by) for p in pts_a], dtype=np.float64).reshape(-1, 2)
    xy_b = np.array([(p.x, p.y) for p in pts_b], dtype=np.float64).reshape(-1, 2)
    est = estimate_translation(xy_a, xy_b, matches, params.ransac)
    return est, len(matches)


def _join(acc: _Strip, new: _Strip, direction, params: StitchParams, pair, stage, offset=None, turned=False):
    """Stitch ``new`` onto ``acc``; returns the new strip and its record.

    ``turned`` marks strips rotated a quarter turn clockwise; the recorded
    translation is turned back into scene orientation.
    """
    est: TransformEstimate | None = None
    n_matches = 0
    if offset is None:
        est, n_matches = estimate_pair_translation(acc.image, new.image, direction, params)
        t = est.translation
        offset = t.rounded()
    else:
        t = Translation2D(*offset)
    # B's reference frame relative to A's reference frame, in strip coordinates
    rel = (
        t.tx + new.ref_rect.x - acc.ref_rect.x,
        t.ty + new.ref_rect.y - acc.ref_rect.y,
    )
    # rows-axis stitches drift along x and vice versa: (x, y)[axis] is the perpendicular
    perp = direction.axis
    drift = abs(offset[perp] + (new.ref_rect.x, new.ref_rect.y)[perp] - (acc.ref_rect.x, acc.ref_rect.y)[perp])
    if drift > params.max_perpendicular_drift:
        raise ExcessiveDrift(
            f"frame drifted {drift} px across the stitch axis, limit is {params.max_perpendicular_drift} px"
        )
    out, a_shift, b_shift, seam = compose_pair(acc.image, new.image, offset, direction, None, params.feather)
    if turned:
        rel = (rel[1], -rel[0])
    record = PairRecord(
        pair=pair,
        ref_frames=(acc.ref, new.ref),
        matches=n_matches,
        inliers=len(est.inlier_indices) if est is not None else 0,
        translation=(float(rel[0]), float(rel[1])),
        offset=(int(offset[0]), int(offset[1])),
        seam=int(seam),
        inlier_rms=est.inlier_rms if est is not None else None,
        stage=stage,
    )
    ref_rect = new.ref_rect.shift(*b_shift)
    return _Strip(out, new.ref, ref_rect), record


def stitch_pair(a, b, direction, params: StitchParams | None = None, offset=None):
    """Join two frames: crop A's overlap away, keep B whole, concatenate.

    Args:
        a: older image (a single frame or an accumulated strip).
        b: newer frame; all of its pixels survive unchanged unless the two
            frames disagree across the stitch axis, in which case both are
            trimmed to their common extent.
        direction: where B lies relative to A.
        params: detection, matching and estimation settings.
        offset: skip estimation and use this rounded ``(tx, ty)`` instead.

    Returns:
        ``(image, record)``

    Raises:
        InsufficientMatches, NoConsensus, NoOverlap, ExcessiveDrift
    """
    params = params or StitchParams()
    direction = StitchDirection(direction)
    strip, record = _join(_Strip.of_frame(a, 0), _Strip.of_frame(b, 1), direction, params, (0, 1), "pair", offset)
    return strip.image, record


def _fail(exc: StitchError, pair, acc: _Strip | None, report: StitchReport, stage: str):
    report.failures.append(
        {"pair": list(pair), "stage": stage, "error": type(exc).__name__, "message": str(exc)}
    )
    if acc is not None:
        _finish(report, acc)
    exc.pair = tuple(pair)
    exc.partial = acc.image if acc is not None else None
    exc.report = report
    return exc


def _finish(report: StitchReport, strip: _Strip):
    w, h = image_size(strip.image)
    report.width, report.height = w, h
    report.anchor = (strip.ref, strip.ref_rect.x, strip.ref_rect.y)


def _fold(strips, labels, direction, params, report, stage, replay=None, turned=False):
    acc = strips[0]
    for i in range(1, len(strips)):
        pair = (labels[i - 1], labels[i])
        offset = replay.pop(0).offset if replay else None
        try:
            acc, record = _join(acc, strips[i], direction, params, pair, stage, offset, turned)
        except StitchError as exc:
            logger.warning("stitching %s -> %s failed: %s", pair[0], pair[1], exc)
            raise _fail(exc, pair, acc, report, stage) from None
        logger.debug(
            "%s %s->%s: %d matches, %d inliers, offset %s",
            stage, pair[0], pair[1], record.matches, record.inliers, record.offset,
        )
        report.pairs.append(record)
    return acc


def stitch_sequence(frames, direction, params: StitchParams | None = None, labels=None, replay: StitchReport | None = None):
    """Fold a flight leg into one image, oldest frame first.

    Raises:
        StitchError: the first pair that fails; the exception's ``pair``
            names it (by label, default the frame index), ``partial`` holds the
            image stitched so far and ``report`` the records up to it.
    """
    params = params or StitchParams()
    direction = StitchDirection(direction)
    frames = list(frames)
    if not frames:
        raise ValueError("stitch_sequence needs at least one frame")
    labels = list(labels) if labels is not None else list(range(len(frames)))
    report = StitchReport(frame_size=image_size(frames[0]))
    strips = [_Strip.of_frame(f, lab) for f, lab in zip(frames, labels)]
    queue = list(replay.pairs) if replay is not None else None
    acc = _fold(strips, labels, direction, params, report, "sequence", queue)
    _finish(report, acc)
    return acc.image, report


def build_mosaic(plan: MosaicPlan, frames, params: StitchParams | None = None, replay: StitchReport | None = None):
    """Assemble a grid survey: stitch each column, then join the columns.

    ``frames`` maps every entry of ``plan.frame_refs`` to an image (a list
    indexed by integer refs works).  Columns are stitched along the plan's
    leg direction, turned a quarter clockwise so that left-to-right
    neighbours become top-to-bottom neighbours, joined, and turned back.

    Raises:
        StitchError: first failing pair, with ``pair`` given as grid labels
            and ``partial``/``report`` as in :func:`stitch_sequence`.
    """
    params = params or StitchParams()
    report = StitchReport(frame_size=image_size(frames[plan.frame_refs[0]]))
    queue = list(replay.pairs) if replay is not None else None
    columns = []
    for col in range(plan.columns):
        refs = plan.column_refs(col)
        strips = [_Strip.of_frame(frames[r], r) for r in refs]
        labels = [_cell_label(plan, r) for r in refs]
        columns.append(_fold(strips, labels, plan.leg_direction, params, report, f"column {col}", queue))

    turned = [c.rotated(1) for c in columns]
    labels = [f"column {c}" for c in range(plan.columns)]
    try:
        joined = _fold(turned, labels, StitchDirection.TopToBottom, params, report, "join", queue, turned=True)
    except StitchError as exc:
        if exc.partial is not None:
            exc.partial = rotate_quarter(exc.partial, 3)
            w, h = image_size(exc.partial)
            report.width, report.height = w, h
            report.anchor = None
        raise
    mosaic = joined.rotated(3)
    _finish(report, mosaic)
    return mosaic.image, report


def _cell_label(plan: MosaicPlan, ref):
    idx = plan.frame_refs.index(ref)
    row, col = divmod(idx, plan.columns)
    return f"r{row}c{col}"
