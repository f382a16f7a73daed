"""Input checks shared by the estimators and the command-line front end."""

from __future__ import annotations

import numpy as np

from .errors import DimensionMismatch


def check_image(img, name: str = "image", allow_labels: bool = False) -> np.ndarray:
    """Validate a raster and return it as an ndarray.

    Accepts ``(H, W)`` grayscale and ``(H, W, 3)`` color arrays with at least
    one pixel and finite values.  With ``allow_labels`` any trailing channel
    count is fine (provenance label images).
    """
    arr = np.asarray(img)
    if arr.ndim not in (2, 3):
        raise DimensionMismatch(f"{name} must be 2-D or 3-D, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DimensionMismatch(f"{name} must have at least one pixel, got shape {arr.shape}")
    if arr.ndim == 3 and arr.shape[2] != 3 and not allow_labels:
        raise DimensionMismatch(f"{name} must have 3 channels, got {arr.shape[2]}")
    if arr.dtype.kind not in "uif" and not (allow_labels and arr.dtype.kind == "b"):
        raise TypeError(f"{name} must be numeric, got dtype {arr.dtype}")
    if arr.dtype.kind == "f" and not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_rgb(img, name: str = "image") -> np.ndarray:
    """Validate an 8-bit color frame."""
    arr = check_image(img, name)
    if arr.ndim != 3:
        raise DimensionMismatch(f"{name} must be an (H, W, 3) color frame, got shape {arr.shape}")
    if arr.dtype != np.uint8:
        raise TypeError(f"{name} must be uint8, got {arr.dtype}")
    return arr


def check_gray(img, name: str = "image") -> np.ndarray:
    """Validate a luminance image with values in [0, 255]."""
    arr = check_image(img, name)
    if arr.ndim != 2:
        raise DimensionMismatch(f"{name} must be 2-D, got shape {arr.shape}")
    arr = arr.astype(np.float64)
    if arr.min() < 0 or arr.max() > 255:
        raise ValueError(f"{name} intensities must lie in [0, 255]")
    return arr


def check_frames(frames, name: str = "frames", allow_labels: bool = False) -> list:
    """Validate a non-empty sequence of images with a common channel layout."""
    if isinstance(frames, np.ndarray) and frames.ndim in (2, 3) and frames.dtype != object:
        frames = [frames]
    frames = [check_image(f, f"{name}[{i}]", allow_labels) for i, f in enumerate(frames)]
    if not frames:
        raise ValueError(f"{name} must contain at least one image")
    layouts = {f.shape[2:] for f in frames}
    if len(layouts) > 1:
        raise DimensionMismatch(f"{name} mix channel layouts {sorted(layouts)}")
    return frames


def check_points(xy, name: str = "points") -> np.ndarray:
    """Validate an ``(n, 2)`` array of finite coordinates."""
    arr = np.asarray(xy, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise DimensionMismatch(f"{name} must have shape (n, 2), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite coordinates")
    return arr
