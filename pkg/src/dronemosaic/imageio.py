"""Lossless 8-bit image file I/O: binary PPM (P6), PGM (P5) and PNG.

PPM/PGM are parsed here directly; PNG goes through Pillow.  Grayscale files
load as ``(H, W, 3)`` frames with equal channels so the rest of the pipeline
only ever sees one frame layout.
"""

from __future__ import annotations

import os

import numpy as np

from .errors import CorruptFile, ImageIOError, UnsupportedFormat

_PNM_SUFFIXES = {".ppm": b"P6", ".pgm": b"P5", ".pnm": b"P6"}
_PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"


def _as_rgb(pixels: np.ndarray) -> np.ndarray:
    if pixels.ndim == 2:
        pixels = np.repeat(pixels[:, :, None], 3, axis=2)
    return np.ascontiguousarray(pixels, dtype=np.uint8)


def _read_pnm(data: bytes, path) -> np.ndarray:
    magic = data[:2]
    if magic not in (b"P5", b"P6"):
        raise UnsupportedFormat(f"{path}: not a binary PGM/PPM file")
    # header: magic, width, height, maxval, then exactly one whitespace byte
    fields = []
    pos = 2
    while len(fields) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            end = data.find(b"\n", pos)
            if end < 0:
                raise CorruptFile(f"{path}: unterminated header comment")
            pos = end + 1
            continue
        start = pos
        while pos < len(data) and data[pos : pos + 1].isdigit():
            pos += 1
        if start == pos:
            raise CorruptFile(f"{path}: malformed header")
        fields.append(int(data[start:pos]))
    if pos >= len(data) or not data[pos : pos + 1].isspace():
        raise CorruptFile(f"{path}: malformed header")
    pos += 1
    width, height, maxval = fields
    if width < 1 or height < 1:
        raise CorruptFile(f"{path}: invalid dimensions {width}x{height}")
    if maxval != 255:
        raise UnsupportedFormat(f"{path}: only maxval 255 is supported, got {maxval}")
    channels = 3 if magic == b"P6" else 1
    expected = width * height * channels
    body = data[pos : pos + expected]
    if len(body) < expected:
        raise CorruptFile(f"{path}: pixel data truncated ({len(body)} of {expected} bytes)")
    pixels = np.frombuffer(body, dtype=np.uint8)
    if channels == 3:
        return pixels.reshape(height, width, 3).copy()
    return _as_rgb(pixels.reshape(height, width))


def _write_pnm(img: np.ndarray, path, gray: bool):
    height, width = img.shape[:2]
    if gray:
        body = np.ascontiguousarray(img[..., 0] if img.ndim == 3 else img)
        magic = b"P5"
    else:
        body = _as_rgb(img)
        magic = b"P6"
    with open(path, "wb") as fh:
        fh.write(magic + b"\n%d %d\n255\n" % (width, height))
        fh.write(body.astype(np.uint8).tobytes())


def _read_png(path) -> np.ndarray:
    from PIL import Image, UnidentifiedImageError

    try:
        with Image.open(path) as im:
            im.load()
            if im.mode not in ("RGB", "L"):
                if im.mode in ("RGBA", "P", "LA", "1"):
                    im = im.convert("RGB")
                else:
                    raise UnsupportedFormat(f"{path}: unsupported PNG mode {im.mode}")
            return _as_rgb(np.asarray(im))
    except UnidentifiedImageError as exc:
        raise CorruptFile(f"{path}: {exc}") from exc
    except (OSError, SyntaxError, ValueError) as exc:
        if isinstance(exc, ImageIOError):
            raise
        raise CorruptFile(f"{path}: {exc}") from exc


def load_image(path) -> np.ndarray:
    """Read a PNG, PPM or PGM file into an ``(H, W, 3)`` uint8 array.

    Raises:
        ImageIOError: the file cannot be read.
        UnsupportedFormat: unknown format or a bit depth other than 8.
        CorruptFile: truncated or malformed content.
    """
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise ImageIOError(f"{path}: {exc.strerror or exc}") from exc
    if data.startswith(_PNG_SIGNATURE):
        return _read_png(path)
    if data[:2] in (b"P5", b"P6"):
        return _read_pnm(data, path)
    if data[:1] == b"P" and data[1:2].isdigit():
        raise UnsupportedFormat(f"{path}: only binary PGM (P5) and PPM (P6) are supported")
    if len(data) < len(_PNG_SIGNATURE) and _PNG_SIGNATURE.startswith(data) and data:
        raise CorruptFile(f"{path}: truncated PNG signature")
    raise UnsupportedFormat(f"{path}: unrecognized image format")


def save_image(img: np.ndarray, path):
    """Write ``img`` losslessly; the format follows the file suffix.

    ``.png`` uses PNG, ``.ppm``/``.pnm`` binary PPM, ``.pgm`` binary PGM (the
    first channel of a color frame).
    """
    img = np.asarray(img)
    if img.dtype != np.uint8:
        if np.issubdtype(img.dtype, np.floating):
            img = np.clip(np.rint(img), 0, 255)
        img = img.astype(np.uint8)
    suffix = os.path.splitext(str(path))[1].lower()
    try:
        if suffix in _PNM_SUFFIXES:
            _write_pnm(img, path, gray=suffix == ".pgm")
        elif suffix == ".png":
            from PIL import Image

            arr = img if img.ndim == 2 else _as_rgb(img)
            Image.fromarray(arr).save(path, format="PNG")
        else:
            raise UnsupportedFormat(f"{path}: unsupported output suffix {suffix!r}")
    except ImageIOError:
        raise
    except OSError as exc:
        raise ImageIOError(f"{path}: {exc.strerror or exc}") from exc
