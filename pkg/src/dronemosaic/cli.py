"""Command-line front end: ``dronemosaic {detect,match,stitch,simulate,evaluate}``.

Every command writes its results into ``--out`` (default: current
directory) and returns a process exit code:

    0  success
    1  any other package error
    2  file could not be read or written
    3  invalid configuration
    4  stitching failed part-way; the stitched prefix and report are written
    5  stitching failed before any pair was joined (no consensus, no overlap,
       too much drift) or the mosaic does not overlap the scene

``cmd_simulate`` writes ``plan.json`` and ``poses.json`` next to a
``frames/`` directory, so simulate, stitch and evaluate chain directly::

    dronemosaic simulate --out run --jitter 3
    dronemosaic stitch --plan run/plan.json --out run
    dronemosaic evaluate run/mosaic.png run/scene.png run/poses.json \\
        --plan run/plan.json --report run/report.json --out run
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from .config import RunConfig
from .errors import ConfigError, DroneMosaicError, RegionMismatch, SceneTooSmall, StitchError
from .features import detect_and_describe
from .flightsim import (
    CameraConfig,
    GroundTruthPose,
    evaluate_mosaic,
    generate_flight,
    jitter_margin,
    make_scene,
    required_scene_size,
)
from .image import StitchDirection, image_size, integral_image
from .imageio import load_image, save_image
from .interchange import (
    keypoints_from_json,
    keypoints_to_json,
    matches_to_json,
    poses_from_json,
    poses_to_json,
    read_json,
    write_json,
)
from .matching import match_descriptors
from .stitcher import MosaicPlan, StitchReport, build_mosaic, stitch_sequence

logger = logging.getLogger("dronemosaic")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_IO = 2
EXIT_CONFIG = 3
EXIT_PARTIAL = 4
EXIT_NO_ALIGNMENT = 5

_DIRECTIONS = [d.value for d in StitchDirection]


class _Formatter(logging.Formatter):
    _COLORS = {"WARNING": "\033[33m", "ERROR": "\033[31m", "DEBUG": "\033[2m"}

    def __init__(self, color: bool):
        super().__init__("%(levelname)s %(message)s")
        self.color = color

    def format(self, record):
        text = super().format(record)
        code = self._COLORS.get(record.levelname) if self.color else None
        return f"{code}{text}\033[0m" if code else text


def _setup_logging(verbose: int, plain: bool):
    color = not plain and "NO_COLOR" not in os.environ and sys.stderr.isatty()
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(_Formatter(color))
    root = logging.getLogger("dronemosaic")
    root.handlers[:] = [handler]
    root.propagate = False
    root.setLevel(logging.DEBUG if verbose > 1 else logging.INFO if verbose else logging.WARNING)


def _config(args, **overrides) -> RunConfig:
    if args.seed is not None:
        overrides.setdefault("ransac.rng_seed", args.seed)
        overrides.setdefault("flight.rng_seed", args.seed)
    return RunConfig.load(args.config, overrides)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _detect(img, cfg: RunConfig):
    return detect_and_describe(integral_image(img), cfg.detector)


def cmd_detect(args) -> int:
    cfg = _config(args, **{"detector.response_threshold": args.threshold})
    img = load_image(args.image)
    points, desc = _detect(img, cfg)
    out = _out_dir(args)
    write_json(keypoints_to_json(points, desc), out / "keypoints.json")
    logger.info("%d keypoints in %s", len(points), args.image)
    if args.viz:
        from .viz import draw_keypoints

        save_image(draw_keypoints(img, points), out / "keypoints.png")
    return EXIT_OK


def _keypoints(path_img, path_json, cfg):
    img = load_image(path_img)
    if path_json is not None:
        points, desc = keypoints_from_json(read_json(path_json))
    else:
        points, desc = _detect(img, cfg)
    return img, points, desc


def cmd_match(args) -> int:
    cfg = _config(
        args,
        **{
            "detector.response_threshold": args.threshold,
            "matcher.ratio_threshold": args.ratio,
            "matcher.cross_check": True if args.cross_check else None,
        },
    )
    img_a, pts_a, desc_a = _keypoints(args.image_a, args.keypoints_a, cfg)
    img_b, pts_b, desc_b = _keypoints(args.image_b, args.keypoints_b, cfg)
    out = _out_dir(args)
    matches = []
    if pts_a and pts_b:
        matches = match_descriptors(pts_a, desc_a, pts_b, desc_b, cfg.matcher)
    else:
        logger.warning("no keypoints on one side, nothing to match")
    write_json(keypoints_to_json(pts_a, desc_a), out / "keypoints_a.json")
    write_json(keypoints_to_json(pts_b, desc_b), out / "keypoints_b.json")
    write_json(matches_to_json(matches), out / "matches.json")
    logger.info("%d matches between %d and %d keypoints", len(matches), len(pts_a), len(pts_b))
    if args.viz:
        from .viz import draw_matches

        save_image(draw_matches(img_a, pts_a, img_b, pts_b, matches), out / "matches.png")
    return EXIT_OK


def _load_plan(path):
    path = Path(path)
    try:
        plan = MosaicPlan.from_dict(read_json(path))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid plan {path}: {exc}") from exc
    frames = {ref: load_image(path.parent / ref) for ref in plan.frame_refs}
    return plan, frames


def cmd_stitch(args) -> int:
    cfg = _config(
        args,
        **{
            "detector.response_threshold": args.threshold,
            "stitcher.max_perpendicular_drift": args.max_drift,
            "stitcher.feather": True if args.feather else None,
        },
    )
    if (args.plan is None) == (not args.frames):
        raise ConfigError("give either --plan or a list of frames")
    params = cfg.stitch_params
    if args.plan is not None:
        plan, frames = _load_plan(args.plan)
        run = lambda: build_mosaic(plan, frames, params)  # noqa: E731
    else:
        frames = [load_image(p) for p in args.frames]
        labels = [Path(p).name for p in args.frames]
        run = lambda: stitch_sequence(frames, StitchDirection(args.direction), params, labels)  # noqa: E731
    out = _out_dir(args)
    try:
        mosaic, report = run()
    except StitchError as exc:
        logger.error("stitch failed at %s: %s", exc.pair, exc)
        if exc.partial is not None:
            save_image(exc.partial, out / "mosaic.png")
        report = exc.report or StitchReport()
        write_json(report.to_dict(), out / "report.json")
        return EXIT_PARTIAL if report.pairs else EXIT_NO_ALIGNMENT
    save_image(mosaic, out / "mosaic.png")
    write_json(report.to_dict(), out / "report.json")
    logger.info("mosaic %dx%d from %d joins", report.width, report.height, len(report.pairs))
    return EXIT_OK


def _parse_size(text):
    try:
        w, h = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected WIDTHxHEIGHT, got {text!r}") from None
    return w, h


def cmd_simulate(args) -> int:
    overrides = {
        "flight.columns": args.columns,
        "flight.rows": args.rows,
        "flight.overlap_x": args.overlap_x if args.overlap_x is not None else args.overlap,
        "flight.overlap_y": args.overlap_y if args.overlap_y is not None else args.overlap,
        "flight.jitter_sigma": args.jitter,
        "flight.brightness_drift": args.drift,
        "flight.leg_direction": args.leg_direction,
    }
    if args.camera == "bottom":
        bottom = CameraConfig.bottom()
        overrides["camera.frame_width"] = bottom.frame_width
        overrides["camera.frame_height"] = bottom.frame_height
    cfg = _config(args, **overrides)
    out = _out_dir(args)
    if args.scene is not None:
        scene = load_image(args.scene)
        scene_name = args.scene
    else:
        if args.scene_size is not None:
            w, h = args.scene_size
        else:
            w, h = required_scene_size(cfg.camera, cfg.flight, margin=jitter_margin(cfg.flight) + 16)
        scene = make_scene(w, h, seed=cfg.flight.rng_seed)
        scene_name = "scene.png"
        save_image(scene, out / scene_name)
    flight = generate_flight(scene, cfg.camera, cfg.flight)

    frames_dir = out / "frames"
    frames_dir.mkdir(exist_ok=True)
    names = {}
    for idx, frame in enumerate(flight.frames):
        names[idx] = f"frames/frame_{idx:03d}.png"
        save_image(frame, out / names[idx])
    poses = [GroundTruthPose(p.index, p.x, p.y, names[p.index]) for p in flight.poses]
    plan = MosaicPlan(
        flight.plan.columns,
        flight.plan.rows,
        flight.plan.traversal,
        flight.plan.leg_direction,
        tuple(names[int(r)] for r in flight.plan.frame_refs),
    )
    write_json(poses_to_json(poses), out / "poses.json")
    write_json(plan.to_dict(), out / "plan.json")
    logger.info("%d frames written to %s (scene %s)", len(flight.frames), frames_dir, scene_name)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    _config(args)
    mosaic = load_image(args.mosaic)
    scene = load_image(args.scene)
    poses = poses_from_json(read_json(args.poses))
    if args.plan is not None:
        plan = MosaicPlan.from_dict(read_json(args.plan))
    else:
        # poses alone describe a single leg in flight order
        plan = MosaicPlan(1, len(poses), "serpentine", StitchDirection.TopToBottom, tuple(p.index for p in poses))
    report = StitchReport.from_dict(read_json(args.report)) if args.report is not None else None
    frame_size = args.frame_size
    if frame_size is None and (report is None or report.frame_size is None):
        first = poses[0].frame
        if first is None:
            raise ConfigError("frame size unknown: pass --frame-size or --report")
        frame_size = image_size(load_image(Path(args.poses).parent / first))
    metrics = evaluate_mosaic(mosaic, scene, poses, plan, report=report, frame_size=frame_size)
    out = _out_dir(args)
    write_json(metrics.to_dict(), out / "metrics.json")
    logger.info("rmse %.3f mae %.3f coverage %.4f", metrics.rmse, metrics.mae, metrics.coverage)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--seed", type=int, help="seed for every random choice (RANSAC sampling, flight jitter, scene)")
    common.add_argument("--out", default=".", help="output directory (created if missing)")
    common.add_argument("--viz", action="store_true", help="also write annotated images")
    common.add_argument("--plain", action="store_true", help="no ANSI colors in log output (NO_COLOR also works)")
    common.add_argument("-v", "--verbose", action="count", default=0)

    parser = argparse.ArgumentParser(prog="dronemosaic", description="Feature-based mosaicking of drone survey frames.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("detect", parents=[common], help="detect and describe keypoints")
    p.add_argument("image")
    p.add_argument("--threshold", type=float, help="detector response threshold")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("match", parents=[common], help="match keypoints of two images")
    p.add_argument("image_a")
    p.add_argument("image_b")
    p.add_argument("--keypoints-a", help="reuse keypoints JSON for image A instead of detecting")
    p.add_argument("--keypoints-b", help="reuse keypoints JSON for image B instead of detecting")
    p.add_argument("--threshold", type=float)
    p.add_argument("--ratio", type=float, help="ratio-test threshold")
    p.add_argument("--cross-check", action="store_true")
    p.set_defaults(func=cmd_match)

    p = sub.add_parser("stitch", parents=[common], help="stitch a flight leg or a grid plan")
    p.add_argument("frames", nargs="*", help="frames in flight order")
    p.add_argument("--plan", help="MosaicPlan JSON; frame paths are relative to it")
    p.add_argument("--direction", choices=_DIRECTIONS, default="BottomToTop")
    p.add_argument("--threshold", type=float)
    p.add_argument("--max-drift", type=int, help="largest tolerated perpendicular drift in px")
    p.add_argument("--feather", action="store_true", help="blend across seams instead of hard cuts")
    p.set_defaults(func=cmd_stitch)

    p = sub.add_parser("simulate", parents=[common], help="render a synthetic survey flight")
    p.add_argument("scene", nargs="?", help="scene image; a procedural scene is generated when omitted")
    p.add_argument("--scene-size", type=_parse_size, help="procedural scene size, WIDTHxHEIGHT")
    p.add_argument("--camera", choices=["front", "bottom"], default="front")
    p.add_argument("--columns", type=int)
    p.add_argument("--rows", type=int)
    p.add_argument("--overlap", type=float, help="overlap fraction on both axes")
    p.add_argument("--overlap-x", type=float)
    p.add_argument("--overlap-y", type=float)
    p.add_argument("--jitter", type=float, help="pose jitter sigma in px")
    p.add_argument("--drift", type=float, help="brightness drift per frame in gray levels")
    p.add_argument("--leg-direction", choices=["BottomToTop", "TopToBottom"])
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("evaluate", parents=[common], help="score a mosaic against its scene")
    p.add_argument("mosaic")
    p.add_argument("scene")
    p.add_argument("poses")
    p.add_argument("--plan")
    p.add_argument("--report")
    p.add_argument("--frame-size", type=_parse_size)
    p.set_defaults(func=cmd_evaluate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _setup_logging(args.verbose, args.plain)
    try:
        return args.func(args)
    except ConfigError as exc:
        logger.error("config: %s", exc)
        return EXIT_CONFIG
    except SceneTooSmall as exc:
        logger.error("config: %s", exc)
        return EXIT_CONFIG
    except OSError as exc:
        logger.error("i/o: %s", exc)
        return EXIT_IO
    except (StitchError, RegionMismatch) as exc:
        logger.error("%s", exc)
        return EXIT_NO_ALIGNMENT
    except DroneMosaicError as exc:
        logger.error("%s: %s", type(exc).__name__, exc)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
