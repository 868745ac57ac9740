from __future__ import annotations

import argparse
import logging
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Sequence

from . import rng
from .bench import DEFAULT_SIZES, run_bench
from .clients import create_object_storage_client, create_oci_config
from .collectors import FrameCollector
from .config import PipelineConfig, PublishConfig, load_pose
from .curation import LEFT, RIGHT, CurationOptions, adjust_intensity, curate, estimate_normals, occlusion_curl
from .curation import move_points, sample_shift_direction, shift_pose
from .dropout import apply_mask, compensate, roi_mask, sample_mask
from .errors import ConfigValidationError, InputFormatError, LidarEvsError, UploadError
from .fixtures import corridor_frames, gaussian_grid, sphere_frame, two_plane_frame
from .geom import Pose, compose, invert
from .helpers import ObjectStorageUploader, format_metrics_table, write_json_report, write_markdown_report
from .helpers.binary_formats import (
    LEVP_MAGIC,
    LEVR_MAGIC,
    detect_kind,
    read_frame,
    read_gaussians,
    read_range_map,
    write_ascii_cloud,
    write_dropout_mask,
    write_frame,
    write_gaussians,
    write_pseudo_scan,
    write_range_map,
)
from .metrics import evaluate_clouds, evaluate_range_maps
from .models import LidarFrame, PseudoScan, RoiSpec
from .sensor import range_map_to_points, rasterize
from .splat import render_range_map

logger = logging.getLogger(__name__)

DIRECTIONS = {"left": LEFT, "right": RIGHT}


def parse_args(argv: Sequence[str] | None = None) -> argparse.Namespace:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON pipeline configuration file.")
    common.add_argument("--sensor", type=Path, help="SensorModel JSON (overrides the config).")
    common.add_argument("--out", type=Path, help="Output directory (default: LIDAR_EVS_OUTPUT_DIR or ./output).")
    common.add_argument("--threads", type=int, help="Worker threads for KD-tree queries (default: LIDAR_EVS_THREADS or 1).")
    common.add_argument("--seed", type=int, help="Run seed (unsigned 64-bit).")
    common.add_argument("--ascii", action="store_true", help="Also write x y z intensity text clouds.")
    common.add_argument("--upload", action="store_true", help="Upload outputs to OCI Object Storage.")
    common.add_argument("--verbose", action="store_true", help="Debug logging.")

    shift = argparse.ArgumentParser(add_help=False)
    shift.add_argument("--delta", type=float, help="Lateral shift in meters (default 4).")
    shift.add_argument("--direction", choices=["left", "right", "random", "both"], default="random")

    dropout = argparse.ArgumentParser(add_help=False)
    dropout.add_argument("--pose", type=Path, help="Sensor pose JSON (default identity).")
    dropout.add_argument("--drop-rate", type=float, help="Dropout rate in [0, 1).")
    dropout.add_argument("--drop-seed", type=int, help="Seed of the dropout mask.")

    parser = argparse.ArgumentParser(
        prog="lidar-evs",
        description="Curate pseudo-LiDAR for extrapolated views, render Gaussian range maps and score them.",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    p = commands.add_parser("curate", parents=[common, shift], help="Pseudo scans for shifted views of recorded frames.")
    p.add_argument("frames_dir", type=Path, nargs="?", help="Directory of LEVP frames (default: config paths.frames_dir).")
    p.add_argument("--window", type=int, help="Fusion window in frames (default 10).")
    p.add_argument("--frame-index", type=int, action="append", help="Frame to curate; repeatable (default all).")
    p.add_argument("--normal-k", type=int, help="Neighbours per normal fit (default 16).")
    p.add_argument("--no-intensity-adjust", action="store_true", help="Keep source intensities.")

    p = commands.add_parser("shift-pose", parents=[common, shift], help="Extrapolated pose for a recorded pose.")
    p.add_argument("--pose", type=Path, help="Base pose JSON (default identity).")

    p = commands.add_parser("curl", parents=[common], help="Occlusion-curl a frame from a target view.")
    p.add_argument("frame", type=Path)
    p.add_argument("--pose", type=Path, help="Target pose JSON (default: the frame's own pose).")

    p = commands.add_parser("adjust-intensity", parents=[common], help="Re-light a frame for a target view.")
    p.add_argument("frame", type=Path)
    p.add_argument("--pose", type=Path, help="Target pose JSON (default identity).")
    p.add_argument("--normal-k", type=int, help="Neighbours per normal fit (default 16).")

    p = commands.add_parser("dropout-mask", parents=[common, dropout], help="Sample a dropout mask for a Gaussian set.")
    p.add_argument("gaussians", type=Path)

    p = commands.add_parser("render", parents=[common, dropout], help="Render a Gaussian set into a range map.")
    p.add_argument("gaussians", type=Path, nargs="?", help="LEVG file (default: config paths.gaussians).")
    p.add_argument("--compensate", action="store_true", help="Scale in-ROI opacities by 1 - drop rate.")

    p = commands.add_parser("eval", parents=[common], help="Score a prediction against ground truth.")
    p.add_argument("pred", type=Path)
    p.add_argument("gt", type=Path)

    p = commands.add_parser("bench", parents=[common], help="Time fuse, raycast, curl and render.")
    p.add_argument("--points", type=int, action="append", help=f"Scene size; repeatable (default {list(DEFAULT_SIZES)}).")

    commands.add_parser("gen-fixtures", parents=[common], help="Write the canonical synthetic scenes.")

    return parser.parse_args(argv)


def configure_logging(verbose: bool) -> None:
    logging.addLevelName(logging.WARNING, "WARN")
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="[%(levelname)s] %(message)s",
        force=True,
    )


def load_config(args: argparse.Namespace) -> PipelineConfig:
    adjust = False if getattr(args, "no_intensity_adjust", False) else None
    overrides = {
        "sensor_path": args.sensor,
        "window": getattr(args, "window", None),
        "normal_k": getattr(args, "normal_k", None),
        "adjust_intensity": adjust,
        "drop_rate": getattr(args, "drop_rate", None),
        "delta_m": getattr(args, "delta", None),
        "seed": args.seed,
        "threads": args.threads,
        "frames_dir": getattr(args, "frames_dir", None),
        "output_dir": args.out,
        "gaussians_path": getattr(args, "gaussians", None),
    }
    return PipelineConfig.load(args.config, overrides)


def shift_directions(direction: str, seed: int, frame_index: int) -> list[tuple[str, int]]:
    """(label, sign) pairs; ``random`` draws one sign per frame from the run seed."""
    if direction == "both":
        return [("left", LEFT), ("right", RIGHT)]
    if direction == "random":
        sign = sample_shift_direction(rng.stream(seed, rng.SHIFT_DIRECTION, frame_index))
        return [("left" if sign == LEFT else "right", sign)]
    return [(direction, DIRECTIONS[direction])]


def cmd_curate(args: argparse.Namespace, config: PipelineConfig) -> list[Path]:
    if config.frames_dir is None:
        raise ConfigValidationError("no frame directory given (positional argument or paths.frames_dir)")
    collector = FrameCollector(config.frames_dir)
    frame_paths = collector.list_frame_paths()
    frames = collector.load_frames()
    if not frames:
        raise ConfigValidationError(f"no .levp frames in {config.frames_dir}")

    indices = sorted(set(args.frame_index)) if args.frame_index else list(range(len(frames)))
    for index in indices:
        if not 0 <= index < len(frames):
            raise ConfigValidationError(f"frame index {index} outside 0..{len(frames) - 1}")

    options = CurationOptions(
        normal_k=config.curation.normal_k,
        adjust_intensity=config.curation.adjust_intensity,
        workers=config.threads,
    )
    written: list[Path] = []
    for position, index in enumerate(indices, start=1):
        for label, sign in shift_directions(args.direction, config.seed, index):
            logger.info("[%d/%d] Curating %s shifted %s by %.2f m.", position, len(indices), frame_paths[index].name, label, config.delta_m)
            target = shift_pose(frames[index].pose, sign * config.delta_m)
            scan = curate(frames, index, config.sensor, config.fusion, target, options)
            stem = config.output_dir / f"frame_{index:04d}_{label}"
            written.extend(write_scan_outputs(stem, scan, config, args.ascii))
            written.append(
                write_sidecar(
                    stem,
                    {
                        "command": "curate",
                        "input": frame_paths[index].name,
                        "direction": label,
                        "delta_m": config.delta_m,
                        "seed": config.seed,
                        "pose": target.to_dict(),
                        "config": config.to_dict(),
                        **scan.provenance,
                    },
                )
            )
    return written


def write_scan_outputs(stem: Path, scan: PseudoScan, config: PipelineConfig, ascii_export: bool) -> list[Path]:
    scan_path = stem.with_suffix(".levp")
    map_path = stem.with_suffix(".levr")
    write_pseudo_scan(scan_path, scan)
    write_range_map(map_path, rasterize(scan.points, scan.intensities, config.sensor))
    written = [scan_path, map_path]
    if ascii_export:
        ascii_path = stem.with_suffix(".xyz")
        write_ascii_cloud(ascii_path, scan.points, scan.intensities)
        written.append(ascii_path)
    logger.info("Pseudo scan written: %s (%d points)", scan_path, len(scan))
    return written


def write_sidecar(stem: Path, provenance: dict[str, Any]) -> Path:
    path = stem.parent / f"{stem.name}.provenance.json"
    write_json_report(provenance, path)
    return path


def cmd_shift_pose(args: argparse.Namespace, config: PipelineConfig) -> list[Path]:
    base = load_pose(args.pose)
    written = []
    for label, sign in shift_directions(args.direction, config.seed, 0):
        shifted = shift_pose(base, sign * config.delta_m)
        path = config.output_dir / f"pose_{label}.json"
        write_json_report({"direction": label, "delta_m": config.delta_m, "seed": config.seed, **shifted.to_dict()}, path)
        logger.info("Shifted pose (%s): translation %s", label, [round(v, 6) for v in shifted.translation.tolist()])
        written.append(path)
    return written


def cmd_curl(args: argparse.Namespace, config: PipelineConfig) -> list[Path]:
    frame = read_frame(args.frame)
    target = load_pose(args.pose) if args.pose else frame.pose
    local = move_points(frame.points, compose(invert(target), frame.pose))
    moved = PseudoScan(local, frame.intensities, [0] * len(frame), pose=target, timestamp=frame.timestamp)
    curled = occlusion_curl(moved, config.sensor)
    logger.info("Curling kept %d of %d points.", len(curled), len(frame))

    stem = config.output_dir / f"{args.frame.stem}_curled"
    written = write_scan_outputs(stem, curled, config, args.ascii)
    written.append(
        write_sidecar(
            stem,
            {"command": "curl", "input": args.frame.name, "pose": target.to_dict(), "input_points": len(frame), "survivor_count": len(curled)},
        )
    )
    return written


def cmd_adjust_intensity(args: argparse.Namespace, config: PipelineConfig) -> list[Path]:
    frame = read_frame(args.frame)
    target = load_pose(args.pose)
    world = frame.pose.apply(frame.points)
    estimate = estimate_normals(world, frame.pose.translation, k=config.curation.normal_k, workers=config.threads)
    intensities, passthrough = adjust_intensity(
        frame.intensities, estimate.normals, world - frame.pose.translation, world - target.translation
    )
    if passthrough.any():
        logger.warning("%d points were grazing in the source view; intensity kept.", int(passthrough.sum()))

    adjusted = LidarFrame(frame.points, intensities, frame.dynamic_flags, frame.pose, frame.timestamp)
    stem = config.output_dir / f"{args.frame.stem}_adjusted"
    path = stem.with_suffix(".levp")
    write_frame(path, adjusted)
    written = [path]
    if args.ascii:
        written.append(stem.with_suffix(".xyz"))
        write_ascii_cloud(written[-1], adjusted.points, adjusted.intensities)
    written.append(
        write_sidecar(
            stem,
            {
                "command": "adjust-intensity",
                "input": args.frame.name,
                "pose": target.to_dict(),
                "normal_k": config.curation.normal_k,
                "degenerate_normal_count": estimate.degenerate_count,
                "grazing_passthrough_count": int(passthrough.sum()),
            },
        )
    )
    return written


def _drop_seed(args: argparse.Namespace, config: PipelineConfig) -> int:
    return config.seed if args.drop_seed is None else int(args.drop_seed)


def cmd_dropout_mask(args: argparse.Namespace, config: PipelineConfig) -> list[Path]:
    gaussians = read_gaussians(args.gaussians)
    pose = load_pose(args.pose)
    roi = roi_mask(gaussians.means, pose, config.dropout)
    mask = sample_mask(roi, config.dropout.drop_rate, _drop_seed(args, config))
    logger.info("Dropout mask: %d in ROI, %d dropped of %d Gaussians.", int(mask.roi.sum()), int(mask.drop.sum()), len(mask))
    return list(write_dropout_mask(config.output_dir / f"{args.gaussians.stem}_mask", mask, config.dropout))


def cmd_render(args: argparse.Namespace, config: PipelineConfig) -> list[Path]:
    if config.gaussians_path is None:
        raise ConfigValidationError("no Gaussian set given (positional argument or paths.gaussians)")
    if args.compensate and args.drop_seed is not None:
        raise ConfigValidationError("--compensate and --drop-seed are mutually exclusive")

    gaussians = read_gaussians(config.gaussians_path)
    pose = load_pose(args.pose)
    spec: RoiSpec = config.dropout
    dropout: dict[str, Any] = {"mode": "none"}
    if args.compensate:
        gaussians = compensate(gaussians, pose, spec)
        dropout = {"mode": "compensate", "roi": spec.to_dict()}
    elif args.drop_seed is not None:
        mask = sample_mask(roi_mask(gaussians.means, pose, spec), spec.drop_rate, args.drop_seed)
        gaussians = apply_mask(gaussians, mask)
        dropout = {"mode": "sample", "seed": mask.seed, "roi": spec.to_dict(), "dropped": int(mask.drop.sum())}

    result = render_range_map(gaussians, pose, config.sensor)
    if len(result.skipped):
        logger.warning("%d Gaussians sit on the elevation poles and were skipped.", len(result.skipped))

    stem = config.output_dir / config.gaussians_path.stem
    map_path = stem.with_suffix(".levr")
    write_range_map(map_path, result.range_map)
    logger.info("Range map written: %s (%d occupied cells)", map_path, result.range_map.occupied_count)
    written = [map_path]
    if args.ascii:
        points, intensities = range_map_to_points(result.range_map, config.sensor)
        written.append(stem.with_suffix(".xyz"))
        write_ascii_cloud(written[-1], points, intensities)
    written.append(
        write_sidecar(
            stem,
            {
                "command": "render",
                "input": config.gaussians_path.name,
                "pose": pose.to_dict(),
                "sensor": config.sensor.to_dict(),
                "dropout": dropout,
                "occupied_cells": result.range_map.occupied_count,
                "skipped_gaussians": result.skipped.tolist(),
            },
        )
    )
    return written


def cmd_eval(args: argparse.Namespace, config: PipelineConfig) -> list[Path]:
    pred_kind, gt_kind = detect_kind(args.pred), detect_kind(args.gt)
    if pred_kind != gt_kind:
        raise InputFormatError(args.gt, 0, f"expected {pred_kind} like {args.pred.name}, found {gt_kind}")

    if pred_kind == LEVR_MAGIC.decode("ascii"):
        metrics = evaluate_range_maps(read_range_map(args.pred), read_range_map(args.gt), config.sensor, workers=config.threads)
    elif pred_kind == LEVP_MAGIC.decode("ascii"):
        pred, gt = read_frame(args.pred), read_frame(args.gt)
        metrics = evaluate_clouds(pred.pose.apply(pred.points), gt.pose.apply(gt.points), workers=config.threads)
    else:
        raise InputFormatError(args.pred, 0, f"cannot evaluate {pred_kind} files")

    report = metrics.to_dict()
    path = config.output_dir / "metrics.json"
    write_json_report(report, path)
    logger.info("Metrics for %s vs %s:\n%s", args.pred.name, args.gt.name, format_metrics_table(report))
    logger.info("Metrics written: %s", path)
    return [path]


def cmd_bench(args: argparse.Namespace, config: PipelineConfig) -> list[Path]:
    sizes = args.points if args.points else list(DEFAULT_SIZES)
    if any(size < 0 for size in sizes):
        raise ConfigValidationError(f"benchmark sizes must be >= 0, got {sizes}")
    report = run_bench(config.sensor, sizes, threads=config.threads, seed=config.seed)

    timestamp = datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%SZ")
    json_path = config.output_dir / f"bench_{timestamp}.json"
    markdown_path = config.output_dir / f"bench_{timestamp}.md"
    write_json_report(report, json_path)
    write_markdown_report(report, markdown_path)
    logger.info("JSON report written: %s", json_path)
    logger.info("Markdown report written: %s", markdown_path)
    return [json_path, markdown_path]


def cmd_gen_fixtures(args: argparse.Namespace, config: PipelineConfig) -> list[Path]:
    out = config.output_dir
    sensor = config.sensor
    written = [out / "sensor.json", out / "two_plane" / "frame_0000.levp", out / "sphere" / "frame_0000.levp"]
    write_json_report(sensor.to_dict(), written[0])

    two_plane, covered = two_plane_frame(sensor)
    write_frame(written[1], two_plane)
    write_frame(written[2], sphere_frame(seed=config.seed))

    for index, frame in enumerate(corridor_frames(sensor)):
        path = out / "corridor" / f"frame_{index:04d}.levp"
        write_frame(path, frame)
        written.append(path)

    grid_path, pose_path = out / "gaussian_grid.levg", out / "pose.json"
    write_gaussians(grid_path, gaussian_grid(sensor, seed=config.seed))
    write_json_report(Pose.identity().to_dict(), pose_path)
    written.extend([grid_path, pose_path])
    logger.info("Wrote %d fixture files to %s (near plane covers %d columns).", len(written), out, covered)
    return written


COMMANDS: dict[str, Callable[[argparse.Namespace, PipelineConfig], list[Path]]] = {
    "curate": cmd_curate,
    "shift-pose": cmd_shift_pose,
    "curl": cmd_curl,
    "adjust-intensity": cmd_adjust_intensity,
    "dropout-mask": cmd_dropout_mask,
    "render": cmd_render,
    "eval": cmd_eval,
    "bench": cmd_bench,
    "gen-fixtures": cmd_gen_fixtures,
}


def publish_outputs(paths: Sequence[Path], publish: PublishConfig, run_id: str) -> int:
    """Upload ``paths``; returns the exit code the upload outcome implies."""
    failure_code = UploadError.exit_code if publish.fail_on_upload_error else 0
    try:
        client = create_object_storage_client(create_oci_config(publish))
        namespace = publish.object_storage_namespace or client.get_namespace().data
    except Exception as exc:  # noqa: BLE001
        logger.error("Could not resolve Object Storage namespace: %s", exc)
        return failure_code

    if not publish.object_storage_bucket:
        logger.error("No bucket configured for upload.")
        logger.error("Set LIDAR_EVS_OBJECT_STORAGE_BUCKET.")
        return failure_code

    uploader = ObjectStorageUploader(
        object_storage_client=client,
        namespace=namespace,
        bucket=publish.object_storage_bucket,
        prefix=publish.object_storage_prefix,
    )
    logger.info("Attempting artifact upload to bucket: %s", publish.object_storage_bucket)
    try:
        uploader.upload_artifacts(paths, run_id)
    except Exception as exc:  # noqa: BLE001
        logger.warning("Upload attempt failed for bucket %s: %s", publish.object_storage_bucket, exc)
        logger.error("Upload failed.")
        return failure_code
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    args = parse_args(argv)
    configure_logging(args.verbose)

    try:
        config = load_config(args)
        written = COMMANDS[args.command](args, config)
    except LidarEvsError as exc:
        logger.error("%s", exc)
        return exc.exit_code
    except Exception as exc:  # noqa: BLE001
        logger.error("Unexpected failure in %s: %s", args.command, exc)
        return 1

    if not args.upload:
        return 0

    run_id = f"{args.command}-{datetime.now(timezone.utc).strftime('%Y%m%dT%H%M%SZ')}"
    return publish_outputs(written, config.publish, run_id)


if __name__ == "__main__":
    raise SystemExit(main())
