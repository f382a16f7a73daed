"""Raster containers and geometric operations.

Images are plain numpy arrays addressed ``img[y, x]`` with the origin at the
top-left corner, x growing right and y growing down.  Color frames are
``(H, W, 3)`` ``uint8`` arrays, luminance images are ``(H, W)`` ``float64``
arrays with values in [0, 255].  The geometric operations (crop, rotate,
concat) only move pixels around, so they accept any array whose first two
axes are rows and columns, including label images used for provenance
tracking.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, OutOfBounds

LUMA_WEIGHTS = (0.299, 0.587, 0.114)


class StitchDirection(str, enum.Enum):
    """Direction in which new frames are appended to the accumulated image.

    ``BottomToTop`` means the newer frame lies above the older one, which is
    what a downward-looking camera sees while flying forward (towards -y).
    """

    BottomToTop = "BottomToTop"
    TopToBottom = "TopToBottom"
    LeftToRight = "LeftToRight"
    RightToLeft = "RightToLeft"

    @property
    def axis(self) -> int:
        """Array axis along which frames are stacked (0 = rows, 1 = columns)."""
        return 0 if self in (StitchDirection.BottomToTop, StitchDirection.TopToBottom) else 1

    @property
    def newer_first(self) -> bool:
        """True when the newer frame ends up at the low-coordinate end."""
        return self in (StitchDirection.BottomToTop, StitchDirection.RightToLeft)

    @property
    def opposite(self) -> "StitchDirection":
        return _OPPOSITE[self]


_OPPOSITE = {
    StitchDirection.BottomToTop: StitchDirection.TopToBottom,
    StitchDirection.TopToBottom: StitchDirection.BottomToTop,
    StitchDirection.LeftToRight: StitchDirection.RightToLeft,
    StitchDirection.RightToLeft: StitchDirection.LeftToRight,
}


@dataclass(frozen=True)
class Rect:
    """Axis-aligned pixel rectangle: top-left ``(x, y)`` and extent ``(w, h)``."""

    x: int
    y: int
    w: int
    h: int

    def __post_init__(self):
        if self.w < 0 or self.h < 0:
            raise ValueError(f"negative rect extent: {self}")

    @property
    def area(self) -> int:
        return self.w * self.h

    def intersect(self, other: "Rect") -> "Rect":
        x0 = max(self.x, other.x)
        y0 = max(self.y, other.y)
        x1 = min(self.x + self.w, other.x + other.w)
        y1 = min(self.y + self.h, other.y + other.h)
        return Rect(x0, y0, max(0, x1 - x0), max(0, y1 - y0))

    def shift(self, dx: int, dy: int) -> "Rect":
        return Rect(self.x + dx, self.y + dy, self.w, self.h)

    def to_dict(self) -> dict:
        return {"x": self.x, "y": self.y, "w": self.w, "h": self.h}


def image_size(img: np.ndarray) -> tuple[int, int]:
    """Return ``(width, height)`` of an image array."""
    return int(img.shape[1]), int(img.shape[0])


def to_grayscale(img: np.ndarray) -> np.ndarray:
    """Convert an RGB frame to luminance with weights (0.299, 0.587, 0.114).

    A 2-D input is taken to be grayscale already and returned as float64.
    """
    img = np.asarray(img)
    if img.ndim == 2:
        return img.astype(np.float64)
    rgb = img[..., :3].astype(np.float64)
    # integer per-mille weights keep gray inputs (R = G = B) exact
    gray = (299.0 * rgb[..., 0] + 587.0 * rgb[..., 1] + 114.0 * rgb[..., 2]) / 1000.0
    return np.clip(gray, 0.0, 255.0)


@dataclass(frozen=True, eq=False)
class IntegralImage:
    """Summed-area table of a grayscale image.

    ``sums[y, x]`` holds the total intensity over the inclusive rectangle
    from (0, 0) to (x, y).  A zero-padded copy is kept for branch-free
    four-corner lookups.
    """

    sums: np.ndarray
    padded: np.ndarray

    @property
    def width(self) -> int:
        return int(self.sums.shape[1])

    @property
    def height(self) -> int:
        return int(self.sums.shape[0])

    @classmethod
    def from_image(cls, img: np.ndarray) -> "IntegralImage":
        return integral_image(img)


def integral_image(img: np.ndarray) -> IntegralImage:
    """Build the summed-area table of ``img`` in float64.

    Color input is converted to luminance first.
    """
    gray = to_grayscale(img)
    padded = np.zeros((gray.shape[0] + 1, gray.shape[1] + 1), dtype=np.float64)
    np.cumsum(np.cumsum(gray, axis=0), axis=1, out=padded[1:, 1:])
    padded.setflags(write=False)
    return IntegralImage(sums=padded[1:, 1:], padded=padded)


def box_sums(ii: IntegralImage, x, y, w, h) -> np.ndarray:
    """Vectorized box sums; arguments broadcast against each other.

    Rectangles are clamped to the image, so any part outside contributes
    nothing and a rectangle entirely outside sums to zero.
    """
    x0 = np.clip(np.asarray(x), 0, ii.width)
    y0 = np.clip(np.asarray(y), 0, ii.height)
    x1 = np.clip(np.asarray(x) + np.asarray(w), 0, ii.width)
    y1 = np.clip(np.asarray(y) + np.asarray(h), 0, ii.height)
    x1 = np.maximum(x1, x0)
    y1 = np.maximum(y1, y0)
    p = ii.padded
    return p[y1, x1] - p[y0, x1] - p[y1, x0] + p[y0, x0]


def box_sum(ii: IntegralImage, r: Rect) -> float:
    """Sum of intensities over ``r`` using four table lookups.

    Portions of ``r`` outside the image are clamped away; zero-area
    rectangles sum to 0.
    """
    if r.w == 0 or r.h == 0:
        return 0.0
    return float(box_sums(ii, r.x, r.y, r.w, r.h))


def crop(img: np.ndarray, r: Rect) -> np.ndarray:
    """Copy out the pixels of ``img`` covered by ``r``.

    Raises:
        OutOfBounds: if ``r`` is not fully inside the image.
    """
    width, height = image_size(img)
    if r.x < 0 or r.y < 0 or r.x + r.w > width or r.y + r.h > height:
        raise OutOfBounds(f"{r} exceeds image extent {width}x{height}")
    return img[r.y : r.y + r.h, r.x : r.x + r.w].copy()


def rotate_quarter(img: np.ndarray, turns: int) -> np.ndarray:
    """Rotate by ``turns`` quarter turns clockwise.

    For one turn, source pixel (x, y) lands at (H - 1 - y, x).
    """
    if turns not in (0, 1, 2, 3):
        raise ValueError(f"turns must be in 0..3, got {turns}")
    # np.rot90 with positive k is counter-clockwise in (row, col) display order
    return np.ascontiguousarray(np.rot90(img, k=-turns, axes=(0, 1)))


def rotate_rect(r: Rect, img_width: int, img_height: int, turns: int) -> Rect:
    """Where ``r`` ends up after ``rotate_quarter`` of a ``img_width x img_height`` image."""
    for _ in range(turns % 4):
        r = Rect(img_height - (r.y + r.h), r.x, r.h, r.w)
        img_width, img_height = img_height, img_width
    return r


def concat(first: np.ndarray, second: np.ndarray, direction: StitchDirection) -> np.ndarray:
    """Place ``first`` above ``second`` (vertical) or left of it (horizontal).

    ``direction`` only selects the axis here; which operand goes where is the
    caller's decision.  Every output pixel comes from exactly one input.

    Raises:
        DimensionMismatch: if the extents across the stitch axis differ.
    """
    direction = StitchDirection(direction)
    axis = direction.axis
    other = 1 - axis
    if first.shape[other] != second.shape[other] or first.shape[2:] != second.shape[2:]:
        raise DimensionMismatch(
            f"cannot concatenate {first.shape} and {second.shape} along axis {axis}"
        )
    return np.concatenate([first, second], axis=axis)
