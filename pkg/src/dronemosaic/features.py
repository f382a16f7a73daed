"""Fast-Hessian interest points and upright 64-D Haar descriptors.

The Hessian determinant is approximated with box filters evaluated on an
integral image, so every filter size costs the same per sample.  Octave ``o``
layer ``k`` uses lobe length ``2**o * (l0 - 1) * (k + 1) + 1`` where ``l0`` is
a third of the initial filter size; with the default initial size of 9 this
gives the usual ladder {9, 15, 21, 27}, {15, 27, 39, 51}, {27, 51, 75, 99}...
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import FilterTooLarge, WindowOutOfBounds
from .image import IntegralImage, box_sums

DXY_WEIGHT = 0.9
# responses are in (gray levels / pixel^2)^2; +-1 level noise peaks near 0.06,
# textured 640x480 aerial frames give a few hundred points at this level
DEFAULT_RESPONSE_THRESHOLD = 50.0
DESCRIPTOR_SIZE = 64
DESCRIPTOR_SIGMA = 3.3
MAX_WINDOW_OVERFLOW = 0.2


@dataclass(frozen=True)
class DetectorParams:
    octaves: int = 4
    layers_per_octave: int = 4
    initial_filter_size: int = 9
    response_threshold: float = DEFAULT_RESPONSE_THRESHOLD
    sampling_step: int = 1
    octave_step_doubling: bool = False

    def __post_init__(self):
        if self.octaves < 1:
            raise ValueError("octaves must be >= 1")
        if self.layers_per_octave < 3:
            raise ValueError("layers_per_octave must be >= 3 for scale-space suppression")
        if self.initial_filter_size < 9 or self.initial_filter_size % 6 != 3:
            raise ValueError("initial_filter_size must be >= 9 and congruent to 3 mod 6")
        if not self.response_threshold >= 0:
            raise ValueError("response_threshold must be >= 0")
        if self.sampling_step < 1:
            raise ValueError("sampling_step must be >= 1")

    def filter_sizes(self, octave: int) -> list[int]:
        lobe0 = self.initial_filter_size // 3
        return [3 * (2**octave * (lobe0 - 1) * (k + 1) + 1) for k in range(self.layers_per_octave)]

    def step(self, octave: int) -> int:
        return self.sampling_step * 2**octave if self.octave_step_doubling else self.sampling_step


@dataclass(frozen=True, eq=False)
class HessianResponseMap:
    """Box-filter Hessian at one filter size, sampled every ``step`` pixels.

    Samples whose filter does not fit inside the image carry a zero response,
    a zero Laplacian sign and ``valid == False``.
    """

    filter_size: int
    step: int
    responses: np.ndarray
    laplacian_signs: np.ndarray
    dxx: np.ndarray
    dyy: np.ndarray
    dxy: np.ndarray
    valid: np.ndarray

    @property
    def width(self) -> int:
        return int(self.responses.shape[1])

    @property
    def height(self) -> int:
        return int(self.responses.shape[0])


@dataclass(frozen=True)
class InterestPoint:
    x: float
    y: float
    scale: float
    response: float
    laplacian_sign: int

    def to_dict(self) -> dict:
        return {
            "x": self.x,
            "y": self.y,
            "scale": self.scale,
            "response": self.response,
            "laplacian_sign": self.laplacian_sign,
        }


def _clamped_table(ii: IntegralImage, pad: int) -> np.ndarray:
    """Padded summed-area table extended by ``pad`` entries on every side.

    Entry ``[i, j]`` equals ``ii.padded[clip(i - pad), clip(j - pad)]``, so a
    box sum with clamping to the image becomes four strided slices.
    """
    rows = np.clip(np.arange(-pad, ii.height + 1 + pad), 0, ii.height)
    cols = np.clip(np.arange(-pad, ii.width + 1 + pad), 0, ii.width)
    return ii.padded[np.ix_(rows, cols)]


def _grid_box(table, pad, n_rows, n_cols, step, dy, dx, h, w):
    """Box sums for every sample of an ``n_rows x n_cols`` grid.

    The box for the sample at pixel (y, x) spans rows [y + dy, y + dy + h)
    and columns [x + dx, x + dx + w), clamped to the image.
    """

    def view(oy, ox):
        r0 = pad + oy
        c0 = pad + ox
        return table[r0 : r0 + step * (n_rows - 1) + 1 : step, c0 : c0 + step * (n_cols - 1) + 1 : step]

    return view(dy + h, dx + w) - view(dy, dx + w) - view(dy + h, dx) + view(dy, dx)


def hessian_response(ii: IntegralImage, filter_size: int, step: int = 1, _table=None) -> HessianResponseMap:
    """Approximate det(H) with box filters of side ``filter_size``.

    Each second derivative is divided by the filter area, so the determinant
    ``Dxx * Dyy - (0.9 * Dxy)**2`` is normalized by the area squared and
    responses from different filter sizes are comparable.

    Raises:
        FilterTooLarge: the filter does not fit inside the image.
    """
    if filter_size < 9 or filter_size % 2 == 0 or filter_size % 3 != 0:
        raise ValueError(f"filter size must be an odd multiple of 3 >= 9, got {filter_size}")
    if filter_size > min(ii.width, ii.height):
        raise FilterTooLarge(
            f"filter size {filter_size} exceeds image extent {ii.width}x{ii.height}"
        )
    lobe = filter_size // 3
    border = (filter_size - 1) // 2
    half_lobe = lobe // 2
    rows = np.arange(0, ii.height, step)
    cols = np.arange(0, ii.width, step)
    if _table is None:
        _table = (_clamped_table(ii, filter_size + 1), filter_size + 1)
    table, pad = _table
    nr, nc = len(rows), len(cols)

    def box(dy, dx, h, w):
        return _grid_box(table, pad, nr, nc, step, dy, dx, h, w)

    # second derivative along x: three lobes (+1, -2, +1) of width `lobe`
    dxx = box(-lobe + 1, -border, 2 * lobe - 1, filter_size) - 3.0 * box(
        -lobe + 1, -half_lobe, 2 * lobe - 1, lobe
    )
    dyy = box(-border, -lobe + 1, filter_size, 2 * lobe - 1) - 3.0 * box(
        -half_lobe, -lobe + 1, lobe, 2 * lobe - 1
    )
    dxy = (
        box(-lobe, -lobe, lobe, lobe)
        + box(1, 1, lobe, lobe)
        - box(-lobe, 1, lobe, lobe)
        - box(1, -lobe, lobe, lobe)
    )
    area = float(filter_size * filter_size)
    dxx /= area
    dyy /= area
    dxy /= area

    valid = np.outer(
        (rows >= border) & (rows + border < ii.height),
        (cols >= border) & (cols + border < ii.width),
    )
    responses = np.where(valid, dxx * dyy - (DXY_WEIGHT * dxy) ** 2, 0.0)
    signs = np.where(valid, np.sign(dxx + dyy), 0.0).astype(np.int8)
    for arr in (dxx, dyy, dxy):
        arr[~valid] = 0.0
    return HessianResponseMap(
        filter_size=filter_size,
        step=step,
        responses=responses,
        laplacian_signs=signs,
        dxx=dxx,
        dyy=dyy,
        dxy=dxy,
        valid=valid,
    )


_NEIGHBOUR_OFFSETS = [
    (dk, dr, dc)
    for dk in (-1, 0, 1)
    for dr in (-1, 0, 1)
    for dc in (-1, 0, 1)
    if (dk, dr, dc) != (0, 0, 0)
]


def _interpolate(stack, ks, rs, cs):
    """Quadratic refinement of scale-space maxima.

    Returns (offsets, keep) where offsets is ``(n, 3)`` in (x, y, layer)
    sample units and keep marks fits whose offset stays under one sample on
    every axis.
    """
    v = stack[ks, rs, cs]

    def at(dk, dr, dc):
        return stack[ks + dk, rs + dr, cs + dc]

    grad = np.stack(
        [
            (at(0, 0, 1) - at(0, 0, -1)) / 2.0,
            (at(0, 1, 0) - at(0, -1, 0)) / 2.0,
            (at(1, 0, 0) - at(-1, 0, 0)) / 2.0,
        ],
        axis=-1,
    )
    hxx = at(0, 0, 1) + at(0, 0, -1) - 2.0 * v
    hyy = at(0, 1, 0) + at(0, -1, 0) - 2.0 * v
    hss = at(1, 0, 0) + at(-1, 0, 0) - 2.0 * v
    hxy = (at(0, 1, 1) - at(0, 1, -1) - at(0, -1, 1) + at(0, -1, -1)) / 4.0
    hxs = (at(1, 0, 1) - at(1, 0, -1) - at(-1, 0, 1) + at(-1, 0, -1)) / 4.0
    hys = (at(1, 1, 0) - at(1, -1, 0) - at(-1, 1, 0) + at(-1, -1, 0)) / 4.0
    hess = np.stack(
        [
            np.stack([hxx, hxy, hxs], axis=-1),
            np.stack([hxy, hyy, hys], axis=-1),
            np.stack([hxs, hys, hss], axis=-1),
        ],
        axis=-2,
    )
    det = np.linalg.det(hess) if len(v) else np.zeros(0)
    solvable = np.abs(det) > 1e-300
    offsets = np.full((len(v), 3), np.inf)
    if solvable.any():
        offsets[solvable] = -np.linalg.solve(hess[solvable], grad[solvable][..., None])[..., 0]
    keep = solvable & np.all(np.abs(offsets) < 1.0, axis=1)
    return offsets, keep


def detect_interest_points(ii: IntegralImage, params: DetectorParams | None = None) -> list[InterestPoint]:
    """Scale-space maxima of the box-filter Hessian determinant.

    A sample becomes a point when its response exceeds the threshold, beats
    all 26 neighbours in its 3x3x3 scale-space neighbourhood and its
    quadratic refinement moves less than one sample along x, y and scale.
    Octaves whose largest filter no longer fits the image are skipped.

    Returns:
        Points sorted by descending response, ties by (y, x, scale).
    """
    params = params or DetectorParams()
    xs, ys, scales, resp, signs, octs = [], [], [], [], [], []
    pad = None
    cache = {}
    for octave in range(params.octaves):
        sizes = params.filter_sizes(octave)
        if sizes[-1] > min(ii.width, ii.height):
            break
        if pad is None:
            largest = [params.filter_sizes(o)[-1] for o in range(params.octaves)]
            pad = max(size for size in largest if size <= min(ii.width, ii.height)) + 1
            table = (_clamped_table(ii, pad), pad)
        step = params.step(octave)
        maps = []
        for size in sizes:
            # without step doubling, neighbouring octaves share filter sizes
            if (size, step) not in cache:
                cache[(size, step)] = hessian_response(ii, size, step, table)
            maps.append(cache[(size, step)])
        stack = np.stack([m.responses for m in maps])
        valid = np.stack([m.valid for m in maps])
        above = np.zeros(stack.shape, dtype=bool)
        inner = stack[1:-1, 1:-1, 1:-1]
        cand = inner > params.response_threshold
        # cheap in-plane pass first; the full 26-neighbour test runs on survivors
        for dr in (-1, 0, 1):
            for dc in (-1, 0, 1):
                if dr or dc:
                    cand &= inner > stack[1:-1, 1 + dr : stack.shape[1] - 1 + dr, 1 + dc : stack.shape[2] - 1 + dc]
        above[1:-1, 1:-1, 1:-1] = cand
        ks, rs, cs = np.nonzero(above)
        # strict maximum over the 26 neighbours, all from filters that fit
        center = stack[ks, rs, cs]
        keep = valid[ks, rs, cs].copy()
        for dk, dr, dc in _NEIGHBOUR_OFFSETS:
            keep &= valid[ks + dk, rs + dr, cs + dc]
            keep &= center > stack[ks + dk, rs + dr, cs + dc]
        ks, rs, cs = ks[keep], rs[keep], cs[keep]
        if len(ks) == 0:
            continue
        offsets, keep = _interpolate(stack, ks, rs, cs)
        ks, rs, cs, offsets = ks[keep], rs[keep], cs[keep], offsets[keep]
        size_arr = np.asarray(sizes, dtype=np.float64)
        size_step = size_arr[1] - size_arr[0]
        xs.append((cs + offsets[:, 0]) * step)
        ys.append((rs + offsets[:, 1]) * step)
        scales.append(1.2 * (size_arr[ks] + offsets[:, 2] * size_step) / 9.0)
        resp.append(stack[ks, rs, cs])
        signs.append(np.stack([m.laplacian_signs for m in maps])[ks, rs, cs])
        octs.append(np.full(len(ks), octave))

    if not xs:
        return []
    x = np.concatenate(xs)
    y = np.concatenate(ys)
    s = np.concatenate(scales)
    r = np.concatenate(resp)
    sg = np.concatenate(signs)
    oc = np.concatenate(octs)
    inside = (x >= 0) & (x <= ii.width - 1) & (y >= 0) & (y <= ii.height - 1) & (s > 0)
    x, y, s, r, sg, oc = x[inside], y[inside], s[inside], r[inside], sg[inside], oc[inside]
    order = np.lexsort((s, x, y, -r))
    order = order[_cross_octave_keep(x[order], y[order], s[order], oc[order])]
    return [
        InterestPoint(float(x[i]), float(y[i]), float(s[i]), float(r[i]), int(sg[i]) or 1)
        for i in order
    ]


def _cross_octave_keep(x, y, s, octave):
    """Drop points re-detected by a neighbouring octave.

    Octaves share filter sizes, so one blob can win the 3x3x3 test in two of
    them.  Inputs are sorted strongest first; a point is dropped when a
    stronger point from another octave sits within its scale and within a
    factor of two in scale.
    """
    keep = np.ones(len(x), dtype=bool)
    if len(x) < 2 or len(np.unique(octave)) < 2:
        return keep
    tree = cKDTree(np.column_stack([x, y]))
    pairs = tree.query_pairs(r=float(s.max()), output_type="ndarray")
    if len(pairs) == 0:
        return keep
    i, j = np.sort(pairs, axis=1).T
    dist = np.hypot(x[i] - x[j], y[i] - y[j])
    ratio = np.maximum(s[i], s[j]) / np.minimum(s[i], s[j])
    close = (octave[i] != octave[j]) & (dist < np.minimum(s[i], s[j])) & (ratio < 2.0)
    stronger = {}
    for a, b in zip(i[close], j[close]):
        stronger.setdefault(int(b), []).append(int(a))
    # greedy in strength order: only surviving points suppress weaker ones
    for b in sorted(stronger):
        if any(keep[a] for a in stronger[b]):
            keep[b] = False
    return keep


def _round_half_up(v):
    return np.floor(np.asarray(v) + 0.5).astype(np.int64)


def _window_overflow(ii: IntegralImage, x, y, scale):
    half = 10.0 * scale
    return np.max(
        np.stack(
            [
                half - x,
                x + half - (ii.width - 1),
                half - y,
                y + half - (ii.height - 1),
                np.zeros_like(x),
            ]
        ),
        axis=0,
    )


def describe_points(ii: IntegralImage, points) -> tuple[list[InterestPoint], np.ndarray]:
    """Describe every point whose window fits after border clamping.

    Points whose 20*scale window sticks out of the image by more than 20% of
    its side are dropped; the rest have their sample positions clamped to the
    image.  Flat patches produce an all-zero row (see :func:`is_matchable`).

    Returns:
        The kept points, in input order, and a ``(n, 64)`` descriptor array.
    """
    points = list(points)
    if not points:
        return [], np.zeros((0, DESCRIPTOR_SIZE))
    x = np.array([p.x for p in points], dtype=np.float64)
    y = np.array([p.y for p in points], dtype=np.float64)
    s = np.array([p.scale for p in points], dtype=np.float64)
    overflow = _window_overflow(ii, x, y, s)
    keep = overflow <= MAX_WINDOW_OVERFLOW * 20.0 * s
    idx = np.nonzero(keep)[0]
    if len(idx) == 0:
        return [], np.zeros((0, DESCRIPTOR_SIZE))
    desc = _haar_descriptors(ii, x[idx], y[idx], s[idx])
    return [points[i] for i in idx], desc


def _haar_descriptors(ii: IntegralImage, x, y, s) -> np.ndarray:
    n = len(x)
    # 20 sample offsets per axis, in units of scale, centred on the point
    grid = np.arange(20, dtype=np.float64) - 9.5
    u = grid[None, :] * s[:, None]  # (n, 20) x offsets
    sx = np.clip(_round_half_up(x[:, None] + u), 0, ii.width - 1)
    sy = np.clip(_round_half_up(y[:, None] + u), 0, ii.height - 1)
    half = np.maximum(1, _round_half_up(s))[:, None, None]  # wavelet is 2*half wide

    px = sx[:, None, :]  # (n, 1, 20) columns
    py = sy[:, :, None]  # (n, 20, 1) rows
    dx = box_sums(ii, px, py - half, half, 2 * half) - box_sums(ii, px - half, py - half, half, 2 * half)
    dy = box_sums(ii, px - half, py, 2 * half, half) - box_sums(ii, px - half, py - half, 2 * half, half)

    sigma = DESCRIPTOR_SIGMA * s[:, None, None]
    weight = np.exp(-(u[:, None, :] ** 2 + u[:, :, None] ** 2) / (2.0 * sigma**2))
    dx = dx * weight
    dy = dy * weight

    # (n, 20, 20) -> (n, 4, 5, 4, 5): subregion row, sample row, subregion col, sample col
    dx = dx.reshape(n, 4, 5, 4, 5)
    dy = dy.reshape(n, 4, 5, 4, 5)
    feats = np.stack(
        [
            dx.sum(axis=(2, 4)),
            dy.sum(axis=(2, 4)),
            np.abs(dx).sum(axis=(2, 4)),
            np.abs(dy).sum(axis=(2, 4)),
        ],
        axis=-1,
    ).reshape(n, DESCRIPTOR_SIZE)

    norms = np.linalg.norm(feats, axis=1)
    flat = norms <= 1e-6 * (half[:, 0, 0].astype(np.float64) ** 2)
    out = np.zeros_like(feats)
    ok = ~flat
    out[ok] = feats[ok] / norms[ok, None]
    return out


def compute_descriptor(ii: IntegralImage, p: InterestPoint) -> np.ndarray:
    """64-D upright descriptor of a single point.

    Raises:
        WindowOutOfBounds: the descriptor window overflows the image by more
            than 20% of its side.
    """
    kept, desc = describe_points(ii, [p])
    if not kept:
        raise WindowOutOfBounds(
            f"descriptor window of point ({p.x:.2f}, {p.y:.2f}) at scale {p.scale:.2f} "
            f"leaves the {ii.width}x{ii.height} image"
        )
    return desc[0]


def is_matchable(descriptors: np.ndarray) -> np.ndarray:
    """Rows that are not the all-zero flat-patch descriptor."""
    return np.any(np.asarray(descriptors) != 0.0, axis=-1)


def detect_and_describe(
    ii: IntegralImage, params: DetectorParams | None = None
) -> tuple[list[InterestPoint], np.ndarray]:
    """Detection followed by description; points without a descriptor are dropped."""
    return describe_points(ii, detect_interest_points(ii, params))
