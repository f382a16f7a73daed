"""Synthetic serpentine survey flights over a ground-truth scene.

The camera looks straight down and never rotates, so a frame is simply a
crop of the scene at the drone's (jittered) position.  Because every pose is
known exactly, reconstructed mosaics can be scored pixel by pixel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import RegionMismatch, SceneTooSmall
from .image import Rect, StitchDirection, crop, image_size
from .stitcher import MosaicPlan, StitchReport


@dataclass(frozen=True)
class CameraConfig:
    """Frame geometry of the simulated camera.

    The defaults are the 640x480 front camera; :meth:`bottom` gives the
    176x144 downward camera.  Field of view is kept as metadata only.
    """

    frame_width: int = 640
    frame_height: int = 480
    fov_degrees: tuple[float, float] = (75.0, 60.0)

    def __post_init__(self):
        if self.frame_width < 1 or self.frame_height < 1:
            raise ValueError("frame dimensions must be positive")

    @classmethod
    def bottom(cls) -> "CameraConfig":
        return cls(176, 144, (45.0, 35.0))


@dataclass(frozen=True)
class FlightConfig:
    columns: int = 4
    rows: int = 4
    overlap_x: float = 0.3
    overlap_y: float = 0.3
    jitter_sigma: float = 0.0
    brightness_drift: float = 0.0
    rng_seed: int = 0
    leg_direction: StitchDirection = StitchDirection.BottomToTop

    def __post_init__(self):
        if self.columns < 1 or self.rows < 1:
            raise ValueError("grid must have at least one column and one row")
        for name in ("overlap_x", "overlap_y"):
            value = getattr(self, name)
            if not 0.0 < value <= 0.9:
                raise ValueError(f"{name} must lie in (0, 0.9], got {value}")
        if self.jitter_sigma < 0:
            raise ValueError("jitter_sigma must be >= 0")
        if not 0 <= self.rng_seed < 2**64:
            raise ValueError("rng_seed must be an unsigned 64-bit integer")
        object.__setattr__(self, "leg_direction", StitchDirection(self.leg_direction))
        if self.leg_direction.axis != 0:
            raise ValueError("flight legs run along columns: leg_direction must be vertical")


@dataclass(frozen=True)
class GroundTruthPose:
    index: int
    x: int
    y: int
    frame: str | None = None

    def to_dict(self) -> dict:
        out = {"index": self.index, "x": self.x, "y": self.y}
        if self.frame is not None:
            out["frame"] = self.frame
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "GroundTruthPose":
        return cls(int(data["index"]), int(data["x"]), int(data["y"]), data.get("frame"))


@dataclass
class Flight:
    frames: list
    poses: list
    plan: MosaicPlan
    flight_order: list = field(default_factory=list)


@dataclass
class Metrics:
    rmse: float
    mae: float
    coverage: float
    rmse_per_channel: list
    mae_per_channel: list
    seam_errors: list
    interior_mae: float
    origin: tuple[int, int]

    def to_dict(self) -> dict:
        return {
            "rmse": self.rmse,
            "mae": self.mae,
            "coverage": self.coverage,
            "seam_errors": list(self.seam_errors),
            "rmse_per_channel": list(self.rmse_per_channel),
            "mae_per_channel": list(self.mae_per_channel),
            "interior_mae": self.interior_mae,
            "origin": list(self.origin),
        }


def make_scene(width: int = 2200, height: int = 1700, seed: int = 0) -> np.ndarray:
    """Procedural parking-lot-like texture with structure at many scales.

    Smooth multi-octave noise forms the background; random rectangles and
    disks of random color stand in for cars, markings and vegetation.
    """
    rng = np.random.default_rng(seed)
    scene = np.full((height, width, 3), 128.0)
    for sigma, amp in ((64, 60.0), (16, 35.0), (4, 20.0), (1.2, 10.0)):
        scene += amp * _smooth_noise(rng, height, width, sigma)

    yy, xx = np.mgrid[0:height, 0:width]
    n_shapes = int(width * height / 900)
    for _ in range(n_shapes):
        color = rng.uniform(0, 255, size=3)
        cx = rng.uniform(0, width)
        cy = rng.uniform(0, height)
        size = rng.uniform(3, 22)
        if rng.random() < 0.5:
            w = size * rng.uniform(0.5, 2.5)
            h = size * rng.uniform(0.5, 2.5)
            x0, x1 = int(max(0, cx - w)), int(min(width, cx + w))
            y0, y1 = int(max(0, cy - h)), int(min(height, cy + h))
            scene[y0:y1, x0:x1] = 0.5 * scene[y0:y1, x0:x1] + 0.5 * color
        else:
            r = int(math.ceil(size))
            x0, x1 = int(max(0, cx - r)), int(min(width, cx + r + 1))
            y0, y1 = int(max(0, cy - r)), int(min(height, cy + r + 1))
            mask = (xx[y0:y1, x0:x1] - cx) ** 2 + (yy[y0:y1, x0:x1] - cy) ** 2 <= size**2
            scene[y0:y1, x0:x1][mask] = color
    return np.clip(np.rint(scene), 0, 255).astype(np.uint8)


def _smooth_noise(rng, height, width, sigma):
    """Unit-variance Gaussian-filtered noise; wide kernels run on a coarse grid."""
    factor = max(1, int(sigma // 4))
    small = rng.standard_normal((height // factor + 2, width // factor + 2, 3))
    small = ndimage.gaussian_filter(small, sigma=(sigma / factor, sigma / factor, 0))
    if factor > 1:
        small = ndimage.zoom(small, (factor, factor, 1), order=1)
    noise = small[:height, :width]
    return noise / (noise.std() + 1e-12)


def grid_spacing(cam: CameraConfig, flight: FlightConfig) -> tuple[float, float]:
    """Nominal distance between neighbouring poses along x and y."""
    return (
        cam.frame_width * (1.0 - flight.overlap_x),
        cam.frame_height * (1.0 - flight.overlap_y),
    )


def required_scene_size(cam: CameraConfig, flight: FlightConfig, margin: int = 0) -> tuple[int, int]:
    """Smallest scene (width, height) holding the nominal grid plus ``margin`` on every side."""
    sx, sy = grid_spacing(cam, flight)
    width = cam.frame_width + (flight.columns - 1) * sx
    height = cam.frame_height + (flight.rows - 1) * sy
    return int(math.ceil(width - 1e-9)) + 2 * margin, int(math.ceil(height - 1e-9)) + 2 * margin


def jitter_margin(flight: FlightConfig) -> int:
    """Border kept free around the nominal grid so jittered frames stay in the scene."""
    return int(math.ceil(4.0 * flight.jitter_sigma))


def _flight_order(flight: FlightConfig) -> list[tuple[int, int]]:
    """(row, column) grid cells in the order the drone visits them."""
    order = []
    up_first = flight.leg_direction is StitchDirection.BottomToTop
    for col in range(flight.columns):
        rows = list(range(flight.rows))
        # even columns fly the leg direction, odd columns come back
        forward = up_first if col % 2 == 0 else not up_first
        if forward:
            rows.reverse()
        order.extend((row, col) for row in rows)
    return order


def generate_flight(scene: np.ndarray, cam: CameraConfig | None = None, flight: FlightConfig | None = None) -> Flight:
    """Fly the serpentine grid over ``scene`` and capture one frame per cell.

    Nominal poses are laid out on a grid centered in the scene, then each is
    perturbed by seeded Gaussian jitter, rounded to whole pixels and clamped
    to the scene.  Frames get an additive brightness offset growing linearly
    with flight order.

    Returns:
        A :class:`Flight` whose ``frames`` and ``poses`` are in flight order
        and whose ``plan`` references them by flight index, row-major by grid
        cell.

    Raises:
        SceneTooSmall: the grid (plus jitter margin) does not fit the scene.
    """
    cam = cam or CameraConfig()
    flight = flight or FlightConfig()
    scene = np.asarray(scene)
    width, height = image_size(scene)
    margin = jitter_margin(flight)
    need_w, need_h = required_scene_size(cam, flight, margin)
    if need_w > width or need_h > height:
        raise SceneTooSmall(
            f"a {flight.columns}x{flight.rows} grid of {cam.frame_width}x{cam.frame_height} frames "
            f"at overlap ({flight.overlap_x}, {flight.overlap_y}) needs {need_w}x{need_h}, "
            f"scene is {width}x{height}"
        )
    sx, sy = grid_spacing(cam, flight)
    base_w, base_h = required_scene_size(cam, flight)
    x0 = (width - base_w) / 2.0
    y0 = (height - base_h) / 2.0

    rng = np.random.default_rng(flight.rng_seed)
    order = _flight_order(flight)
    frames, poses = [], []
    frame_refs = [None] * (flight.columns * flight.rows)
    for index, (row, col) in enumerate(order):
        nx = x0 + col * sx
        ny = y0 + row * sy
        if flight.jitter_sigma > 0:
            jx, jy = rng.normal(0.0, flight.jitter_sigma, size=2)
        else:
            jx = jy = 0.0
        px = int(np.clip(np.floor(nx + jx + 0.5), 0, width - cam.frame_width))
        py = int(np.clip(np.floor(ny + jy + 0.5), 0, height - cam.frame_height))
        frame = crop(scene, Rect(px, py, cam.frame_width, cam.frame_height))
        if flight.brightness_drift:
            shifted = frame.astype(np.float64) + flight.brightness_drift * index
            frame = np.clip(np.rint(shifted), 0, 255).astype(np.uint8)
        frames.append(frame)
        poses.append(GroundTruthPose(index, px, py))
        frame_refs[row * flight.columns + col] = index

    plan = MosaicPlan(
        columns=flight.columns,
        rows=flight.rows,
        traversal="serpentine",
        leg_direction=flight.leg_direction,
        frame_refs=frame_refs,
    )
    return Flight(frames=frames, poses=poses, plan=plan, flight_order=order)


class _PoseTable(dict):
    """Poses addressable by flight index or by the frame file they were saved to."""

    def __getitem__(self, ref):
        if isinstance(ref, str) and dict.__contains__(self, ref):
            return dict.__getitem__(self, ref)
        return dict.__getitem__(self, int(ref))


def _pose_lookup(poses) -> dict:
    table = _PoseTable()
    for p in poses:
        dict.__setitem__(table, int(p.index), p)
        if getattr(p, "frame", None) is not None:
            dict.__setitem__(table, str(p.frame), p)
    return table


def mosaic_origin(poses, plan: MosaicPlan, report: StitchReport | None = None) -> tuple[int, int]:
    """Scene coordinates of the mosaic's top-left pixel.

    With a report, the anchor frame it records pins the mosaic to that
    frame's true pose; otherwise the top-left grid cell's pose is used, which
    is exact for jitter-free flights.
    """
    lookup = _pose_lookup(poses)
    if report is not None and report.anchor is not None:
        ref, ax, ay = report.anchor
        pose = lookup[ref]
        return pose.x - ax, pose.y - ay
    pose = lookup[plan.frame_refs[0]]
    return pose.x, pose.y


def evaluate_mosaic(
    mosaic: np.ndarray,
    scene: np.ndarray,
    poses,
    plan: MosaicPlan,
    report: StitchReport | None = None,
    frame_size: tuple[int, int] | None = None,
    seam_margin: int = 3,
) -> Metrics:
    """Score a mosaic against the scene it was flown over.

    Errors are measured over the part of the mosaic that lies inside the
    region covered by the frames.  ``interior_mae`` additionally excludes
    ``seam_margin`` pixels around every frame boundary.  Seam errors compare
    each pair translation in the report with the difference of the true
    poses.

    Raises:
        RegionMismatch: the aligned mosaic does not intersect the covered
            region or leaves the scene.
    """
    mosaic = np.asarray(mosaic)
    scene = np.asarray(scene)
    lookup = _pose_lookup(poses)
    if frame_size is None:
        frame_size = _infer_frame_size(plan, report, mosaic)
    fw, fh = frame_size
    ox, oy = mosaic_origin(poses, plan, report)
    mw, mh = image_size(mosaic)
    sw, sh = image_size(scene)
    if ox < 0 or oy < 0 or ox + mw > sw or oy + mh > sh:
        raise RegionMismatch(f"mosaic placed at ({ox}, {oy}) with size {mw}x{mh} leaves the {sw}x{sh} scene")

    used = [lookup[ref] for ref in plan.frame_refs]
    cx0 = min(p.x for p in used)
    cy0 = min(p.y for p in used)
    cx1 = max(p.x for p in used) + fw
    cy1 = max(p.y for p in used) + fh
    covered = Rect(cx0, cy0, cx1 - cx0, cy1 - cy0)
    placed = Rect(ox, oy, mw, mh)
    common = covered.intersect(placed)
    if common.area == 0:
        raise RegionMismatch("mosaic does not overlap the region covered by the flight")

    truth = crop(scene, common).astype(np.float64)
    got = crop(mosaic, common.shift(-ox, -oy)).astype(np.float64)
    if truth.ndim == 3 and got.ndim == 2:
        got = np.repeat(got[:, :, None], truth.shape[2], axis=2)
    diff = got - truth
    if diff.ndim == 2:
        diff = diff[:, :, None]
    rmse_c = np.sqrt(np.mean(diff**2, axis=(0, 1)))
    mae_c = np.mean(np.abs(diff), axis=(0, 1))

    interior = np.ones(diff.shape[:2], dtype=bool)
    for p in used:
        for edge_x in (p.x, p.x + fw):
            lo, hi = edge_x - seam_margin - common.x, edge_x + seam_margin - common.x
            interior[:, max(0, lo) : max(0, hi)] &= ~_span_rows(interior.shape[0], p.y - common.y, fh, seam_margin)[:, None]
        for edge_y in (p.y, p.y + fh):
            lo, hi = edge_y - seam_margin - common.y, edge_y + seam_margin - common.y
            interior[max(0, lo) : max(0, hi), :] &= ~_span_rows(interior.shape[1], p.x - common.x, fw, seam_margin)[None, :]
    interior_mae = float(np.mean(np.abs(diff[interior]))) if interior.any() else float("nan")

    seam_errors = []
    if report is not None:
        for entry in report.pairs:
            if entry.translation is None or entry.ref_pair is None:
                continue
            a, b = (lookup[i] for i in entry.ref_pair)
            tx, ty = entry.translation
            seam_errors.append(float(math.hypot(tx - (b.x - a.x), ty - (b.y - a.y))))

    return Metrics(
        rmse=float(np.sqrt(np.mean(diff**2))),
        mae=float(np.mean(np.abs(diff))),
        coverage=common.area / covered.area,
        rmse_per_channel=[float(v) for v in rmse_c],
        mae_per_channel=[float(v) for v in mae_c],
        seam_errors=seam_errors,
        interior_mae=interior_mae,
        origin=(int(ox), int(oy)),
    )


def _span_rows(n: int, start: int, length: int, margin: int) -> np.ndarray:
    """Boolean mask of indices in [start - margin, start + length + margin)."""
    mask = np.zeros(n, dtype=bool)
    mask[max(0, start - margin) : max(0, start + length + margin)] = True
    return mask


def _infer_frame_size(plan, report, mosaic):
    if report is not None and report.frame_size is not None:
        return tuple(report.frame_size)
    raise RegionMismatch("frame size unknown: pass frame_size or a report that records it")
