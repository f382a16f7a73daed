"""Run configuration: every tunable of the pipeline in one validated object.

A config file is JSON with optional groups ``detector``, ``matcher``,
``ransac``, ``stitcher``, ``camera`` and ``flight``; keys mirror the
parameter dataclasses of the owning modules.  Missing keys keep module
defaults, unknown keys are rejected.  Example::

    {"detector": {"response_threshold": 80.0},
     "flight": {"jitter_sigma": 3.0, "rng_seed": 7}}

Detector response threshold
    The default of 50.0 sits far above what faint noise can produce: a
    flat field with uniform +/-1 gray-level noise peaks near 0.06 (see the
    calibration test), while a textured 640x480 frame still yields several
    hundred points.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

from .errors import ConfigError
from .features import DetectorParams
from .flightsim import CameraConfig, FlightConfig
from .image import StitchDirection
from .interchange import read_json
from .matching import MatchParams
from .stitcher import StitchParams
from .transform import RansacParams

_STITCH_KEYS = ("max_perpendicular_drift", "band_factor", "feather")


@dataclass(frozen=True)
class RunConfig:
    detector: DetectorParams = field(default_factory=DetectorParams)
    matcher: MatchParams = field(default_factory=MatchParams)
    ransac: RansacParams = field(default_factory=RansacParams)
    stitcher: dict = field(default_factory=dict)
    camera: CameraConfig = field(default_factory=CameraConfig)
    flight: FlightConfig = field(default_factory=FlightConfig)

    @property
    def stitch_params(self) -> StitchParams:
        return StitchParams(detector=self.detector, matcher=self.matcher, ransac=self.ransac, **self.stitcher)

    def to_dict(self) -> dict:
        return {
            "detector": dataclasses.asdict(self.detector),
            "matcher": dataclasses.asdict(self.matcher),
            "ransac": dataclasses.asdict(self.ransac),
            "stitcher": {k: getattr(self.stitch_params, k) for k in _STITCH_KEYS},
            "camera": {"frame_width": self.camera.frame_width, "frame_height": self.camera.frame_height},
            "flight": {
                **{k: v for k, v in dataclasses.asdict(self.flight).items() if k != "leg_direction"},
                "leg_direction": self.flight.leg_direction.value,
            },
        }

    @classmethod
    def from_dict(cls, data: dict | None = None, overrides: dict | None = None) -> "RunConfig":
        """Build and validate a config.

        ``overrides`` maps ``"group.key"`` to a value and wins over ``data``;
        ``None`` values are ignored so unset command-line flags pass through.

        Raises:
            ConfigError: unknown group or key, or a value rejected by the
                owning module.
        """
        groups = {k: dict(v) for k, v in (data or {}).items()}
        unknown = set(groups) - {"detector", "matcher", "ransac", "stitcher", "camera", "flight"}
        if unknown:
            raise ConfigError(f"unknown config group(s): {sorted(unknown)}")
        for dotted, value in (overrides or {}).items():
            if value is None:
                continue
            group, key = dotted.split(".", 1)
            groups.setdefault(group, {})[key] = value
        try:
            detector = _build(DetectorParams, groups.get("detector"))
            matcher = _build(MatchParams, groups.get("matcher"))
            ransac = _build(RansacParams, groups.get("ransac"))
            stitcher = dict(groups.get("stitcher") or {})
            bad = set(stitcher) - set(_STITCH_KEYS)
            if bad:
                raise ConfigError(f"unknown stitcher key(s): {sorted(bad)}")
            camera = _build(CameraConfig, groups.get("camera"))
            flight_data = dict(groups.get("flight") or {})
            if "leg_direction" in flight_data:
                flight_data["leg_direction"] = StitchDirection(flight_data["leg_direction"])
            flight = _build(FlightConfig, flight_data)
            cfg = cls(detector, matcher, ransac, stitcher, camera, flight)
            cfg.stitch_params  # validates the stitcher group
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        return cfg

    @classmethod
    def load(cls, path=None, overrides: dict | None = None) -> "RunConfig":
        """Read a JSON config file (or defaults when ``path`` is None)."""
        data = None
        if path is not None:
            try:
                data = read_json(path)
            except OSError as exc:
                raise ConfigError(f"cannot read config {path}: {exc}") from exc
            if not isinstance(data, dict):
                raise ConfigError(f"config {path} must hold a JSON object")
        return cls.from_dict(data, overrides)


def _build(kind, values):
    values = dict(values or {})
    names = {f.name for f in dataclasses.fields(kind)}
    bad = set(values) - names
    if bad:
        raise ConfigError(f"unknown {kind.__name__} key(s): {sorted(bad)}")
    if kind is CameraConfig and "fov_degrees" in values:
        values["fov_degrees"] = tuple(values["fov_degrees"])
    return kind(**values)
