"""scikit-learn style wrappers around the functional pipeline.

Each stage is exposed as an estimator with constructor hyper-parameters, so
``get_params``/``set_params``/``clone`` and parameter grids work as usual:

- :class:`SurfDetector` turns images into (points, descriptors).
- :class:`DescriptorMatcher` is fitted on train descriptors and matches queries.
- :class:`RansacTranslation` regresses A-frame coordinates from B-frame ones.
- :class:`SequenceStitcher` and :class:`GridMosaicker` estimate the frame
  offsets in ``fit`` and render in ``transform``, so a fitted stitcher can
  re-render any arrays of the same geometry (label images, other channels).
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .features import DEFAULT_RESPONSE_THRESHOLD, DetectorParams, detect_and_describe
from .image import StitchDirection, integral_image
from .matching import MatchParams, match_descriptors
from .stitcher import MosaicPlan, StitchParams, build_mosaic, stitch_sequence
from .transform import RansacParams, estimate_translation
from .validation import check_frames, check_image, check_points


class SurfDetector(TransformerMixin, BaseEstimator):
    """Fast-Hessian detection plus upright descriptors.

    ``transform`` maps a list of images to a list of ``(points, descriptors)``
    tuples.  There is nothing to learn; ``fit`` only validates parameters.
    """

    def __init__(
        self,
        octaves=4,
        layers_per_octave=4,
        initial_filter_size=9,
        response_threshold=DEFAULT_RESPONSE_THRESHOLD,
        sampling_step=1,
        octave_step_doubling=False,
    ):
        self.octaves = octaves
        self.layers_per_octave = layers_per_octave
        self.initial_filter_size = initial_filter_size
        self.response_threshold = response_threshold
        self.sampling_step = sampling_step
        self.octave_step_doubling = octave_step_doubling

    def _params(self) -> DetectorParams:
        return DetectorParams(
            octaves=self.octaves,
            layers_per_octave=self.layers_per_octave,
            initial_filter_size=self.initial_filter_size,
            response_threshold=self.response_threshold,
            sampling_step=self.sampling_step,
            octave_step_doubling=self.octave_step_doubling,
        )

    def fit(self, X=None, y=None):
        self.params_ = self._params()
        return self

    def detect(self, image):
        check_is_fitted(self, "params_")
        img = check_image(image)
        return detect_and_describe(integral_image(img), self.params_)

    def transform(self, X):
        check_is_fitted(self, "params_")
        return [self.detect(img) for img in check_frames(X)]


class DescriptorMatcher(BaseEstimator):
    """Ratio-test matcher holding the train set, in the spirit of NearestNeighbors."""

    def __init__(self, ratio_threshold=0.8, use_laplacian_prefilter=True, cross_check=False):
        self.ratio_threshold = ratio_threshold
        self.use_laplacian_prefilter = use_laplacian_prefilter
        self.cross_check = cross_check

    def fit(self, descriptors, points=None):
        self.params_ = MatchParams(self.ratio_threshold, self.use_laplacian_prefilter, self.cross_check)
        self.train_descriptors_ = np.atleast_2d(np.asarray(descriptors, dtype=np.float64))
        self.train_points_ = None if points is None else list(points)
        return self

    def match(self, descriptors, points=None):
        check_is_fitted(self, "train_descriptors_")
        return match_descriptors(points, descriptors, self.train_points_, self.train_descriptors_, self.params_)


class RansacTranslation(RegressorMixin, BaseEstimator):
    """Translation-only RANSAC as a regressor: ``predict(X) = X + t``.

    ``X`` holds matched coordinates in frame B and ``y`` the corresponding
    coordinates in frame A, one row per match.
    """

    def __init__(self, iterations=200, inlier_tolerance=2.0, min_matches=4, min_inlier_fraction=0.25, rng_seed=0):
        self.iterations = iterations
        self.inlier_tolerance = inlier_tolerance
        self.min_matches = min_matches
        self.min_inlier_fraction = min_inlier_fraction
        self.rng_seed = rng_seed

    def fit(self, X, y):
        xb = check_points(X, "X")
        ya = check_points(y, "y")
        if len(xb) != len(ya):
            raise ValueError(f"X and y disagree in length: {len(xb)} != {len(ya)}")
        params = RansacParams(
            self.iterations, self.inlier_tolerance, self.min_matches, self.min_inlier_fraction, self.rng_seed
        )
        pairs = np.repeat(np.arange(len(xb))[:, None], 2, axis=1)
        est = estimate_translation(ya, xb, pairs, params)
        self.estimate_ = est
        self.translation_ = np.array([est.translation.tx, est.translation.ty])
        mask = np.zeros(len(xb), dtype=bool)
        mask[list(est.inlier_indices)] = True
        self.inlier_mask_ = mask
        self.inlier_rms_ = est.inlier_rms
        return self

    def predict(self, X):
        check_is_fitted(self, "translation_")
        return check_points(X, "X") + self.translation_


def _stitch_params(est) -> StitchParams:
    return StitchParams(
        detector=DetectorParams(response_threshold=est.response_threshold),
        matcher=MatchParams(ratio_threshold=est.ratio_threshold),
        ransac=RansacParams(
            iterations=est.ransac_iterations,
            inlier_tolerance=est.inlier_tolerance,
            rng_seed=est.rng_seed,
        ),
        max_perpendicular_drift=est.max_perpendicular_drift,
        feather=est.feather,
    )


class SequenceStitcher(TransformerMixin, BaseEstimator):
    """Stitch one flight leg.

    ``fit(frames)`` estimates every pair offset and keeps the mosaic as
    ``mosaic_``; ``transform(frames)`` renders any same-shaped frames with
    the fitted offsets.
    """

    def __init__(
        self,
        direction=StitchDirection.BottomToTop,
        response_threshold=DEFAULT_RESPONSE_THRESHOLD,
        ratio_threshold=0.8,
        ransac_iterations=200,
        inlier_tolerance=2.0,
        rng_seed=0,
        max_perpendicular_drift=8,
        feather=False,
    ):
        self.direction = direction
        self.response_threshold = response_threshold
        self.ratio_threshold = ratio_threshold
        self.ransac_iterations = ransac_iterations
        self.inlier_tolerance = inlier_tolerance
        self.rng_seed = rng_seed
        self.max_perpendicular_drift = max_perpendicular_drift
        self.feather = feather

    def fit(self, X, y=None):
        frames = check_frames(X)
        self.mosaic_, self.report_ = stitch_sequence(frames, StitchDirection(self.direction), _stitch_params(self))
        return self

    def transform(self, X):
        check_is_fitted(self, "report_")
        frames = check_frames(X, allow_labels=True)
        params = StitchParams(feather=False, max_perpendicular_drift=10**9)
        out, _ = stitch_sequence(frames, StitchDirection(self.direction), params, replay=self.report_)
        return out

    def fit_transform(self, X, y=None, **fit_params):
        return self.fit(X, y).mosaic_


class GridMosaicker(TransformerMixin, BaseEstimator):
    """Stitch a serpentine grid survey; frames are row-major by grid cell."""

    def __init__(
        self,
        columns=4,
        rows=4,
        leg_direction=StitchDirection.BottomToTop,
        response_threshold=DEFAULT_RESPONSE_THRESHOLD,
        ratio_threshold=0.8,
        ransac_iterations=200,
        inlier_tolerance=2.0,
        rng_seed=0,
        max_perpendicular_drift=8,
        feather=False,
    ):
        self.columns = columns
        self.rows = rows
        self.leg_direction = leg_direction
        self.response_threshold = response_threshold
        self.ratio_threshold = ratio_threshold
        self.ransac_iterations = ransac_iterations
        self.inlier_tolerance = inlier_tolerance
        self.rng_seed = rng_seed
        self.max_perpendicular_drift = max_perpendicular_drift
        self.feather = feather

    def _plan(self, n):
        return MosaicPlan(self.columns, self.rows, "serpentine", self.leg_direction, tuple(range(n)))

    def fit(self, X, y=None):
        frames = check_frames(X)
        self.plan_ = self._plan(len(frames))
        self.mosaic_, self.report_ = build_mosaic(self.plan_, frames, _stitch_params(self))
        return self

    def transform(self, X):
        check_is_fitted(self, "report_")
        frames = check_frames(X, allow_labels=True)
        params = StitchParams(feather=False, max_perpendicular_drift=10**9)
        out, _ = build_mosaic(self._plan(len(frames)), frames, params, replay=self.report_)
        return out

    def fit_transform(self, X, y=None, **fit_params):
        return self.fit(X, y).mosaic_
