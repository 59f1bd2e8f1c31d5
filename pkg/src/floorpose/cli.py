"""Command-line surface: one subcommand per pipeline stage.

Exit codes: 0 success, 2 usage or config error, 3 parse error, 4 numerical
or registration failure, 5 external executor failure. Output files are
written to a temp name and renamed into place, so failed runs leave no
partial artifacts.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import sys
from pathlib import Path

from . import colmap_io as cio
from . import evaluation as ev
from . import georeg, poi
from . import pipeline as pl
from .config import Config, load_config
from .errors import ConfigError, FloorposeError, ParseError
from .geometry import Pose6DoF
from .pipeline import atomic_write_text

VIDEO_SUFFIXES = (".MOV", ".MP4", ".mov", ".mp4")


def _formatter(prog):
    return argparse.HelpFormatter(prog, width=96)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="floorpose",
        description="Build, register, export, and evaluate floor-plan camera-pose datasets.",
        formatter_class=_formatter,
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text, formatter_class=_formatter)
        p.add_argument("--config", help="TOML config file")
        p.add_argument(
            "--set",
            dest="overrides",
            action="append",
            default=[],
            metavar="KEY=VALUE",
            help="override a config key",
        )
        return p

    p = add("sample", "compute the sampled frame indices for a video")
    p.add_argument("--fps", type=float, required=True, help="video frame rate")
    p.add_argument("--duration", type=float, required=True, help="video length in seconds")
    p.add_argument("--interval", type=int, help="frame interval (default from config)")
    p.add_argument("--out", help="write indices here instead of stdout")

    p = add("annotate", "reconstruct, densify, and geo-register project videos")
    p.add_argument("--project", nargs="+", required=True, help="project directories")
    p.add_argument("--fps", type=float, required=True, help="video frame rate")
    p.add_argument("--duration", type=float, required=True, help="video length in seconds")
    p.add_argument("--geo-coord", default="geo_coord.txt", help="anchor file name inside each project")
    p.add_argument("--executor", help="SfM command template with {image_dir} and {output_dir}")
    p.add_argument("--jobs", type=int, help="parallel project workers (default from config)")
    p.add_argument("--seed", type=int, help="RANSAC seed (default from config)")

    p = add("export", "aggregate registered projects into train/test pose files")
    p.add_argument("--projects", nargs="+", required=True, help="registered project directories")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--floor", help="floor name for the file banner (default from config)")
    p.add_argument("--geometric-archive", help="also write the geometric-data archive here")
    p.add_argument("--jobs", type=int, help="parallel model readers (default from config)")

    p = add("evaluate", "score a predictions file against ground truth")
    p.add_argument("--predictions", required=True, help="9-column pose file with predictions")
    p.add_argument("--ground-truth", required=True, help="9-column pose file with ground truth")
    p.add_argument("--meters-per-pixel", type=float, help="plan scale (default from config)")
    p.add_argument("--out-dir", help="write summary.csv and CDF CSVs here")

    p = add("poi-query", "report PoIs near a pose")
    p.add_argument("--plan-meta", help="floor-plan meta JSON (default from config)")
    p.add_argument("--x", type=float, required=True, help="plan x (column pixels)")
    p.add_argument("--y", type=float, required=True, help="plan y (row pixels)")
    p.add_argument("--z", type=float, default=0.0, help="floor height")
    p.add_argument("--qw", type=float, required=True, help="orientation w (camera-to-world)")
    p.add_argument("--qx", type=float, required=True, help="orientation x")
    p.add_argument("--qy", type=float, required=True, help="orientation y")
    p.add_argument("--qz", type=float, required=True, help="orientation z")
    p.add_argument("--radius", type=float, required=True, help="search radius in meters")
    p.add_argument("--fov", type=float, default=360.0, help="field of view in degrees")

    p = add("plot-path", "emit the plot-ready path CSV of a registered project")
    p.add_argument("--project", required=True, help="registered project directory")
    p.add_argument("--plan-meta", help="floor-plan meta JSON for the bounds check")
    p.add_argument("--out", help="write CSV here instead of stdout")

    p = add("inspect", "dump a sparse model in human-readable form")
    p.add_argument("--model", required=True, help="directory holding the .bin files")

    return parser


def _config_from(args) -> Config:
    return load_config(args.config, args.overrides)


def _find_video(project: Path) -> Path:
    candidates = [p for p in sorted(project.iterdir()) if p.suffix in VIDEO_SUFFIXES]
    if len(candidates) != 1:
        raise ConfigError(
            f"{project} must contain exactly one video file, found {len(candidates)}"
        )
    return candidates[0]


def cmd_sample(args, cfg: Config) -> int:
    interval = args.interval if args.interval is not None else cfg.frame_interval
    job = pl.VideoJob("video", fps=args.fps, duration=args.duration, frame_interval=interval)
    text = "\n".join(str(k) for k in pl.sample_frames(job)) + "\n"
    if args.out:
        atomic_write_text(Path(args.out), text)
    else:
        sys.stdout.write(text)
    return 0


def _annotate_one(project: Path, args, cfg: Config) -> str:
    video = _find_video(project)
    anchors = cio.parse_geo_coord((project / args.geo_coord).read_text())
    template = args.executor if args.executor else cfg.executor
    if not template:
        raise ConfigError("no executor command template configured")
    job = pl.VideoJob(
        video_path=str(video),
        fps=args.fps,
        duration=args.duration,
        frame_interval=cfg.frame_interval,
    )
    executor = pl.CommandExecutor(template)
    _, report = pl.annotate_video(
        job,
        anchors,
        executor,
        project,
        alignment_threshold=cfg.alignment_threshold,
        robust=cfg.robust,
        ransac_threshold=cfg.ransac_threshold,
        seed=args.seed if args.seed is not None else cfg.seed,
    )
    return f"{project.name}: rms residual {report.rms_residual:.4f} plan px"


def cmd_annotate(args, cfg: Config) -> int:
    projects = [Path(p) for p in args.project]
    for project in projects:
        if not project.is_dir():
            raise ConfigError(f"project directory not found: {project}")
    jobs = args.jobs if args.jobs is not None else cfg.jobs
    if jobs == 1 or len(projects) == 1:
        for project in projects:
            print(_annotate_one(project, args, cfg))
        return 0
    with concurrent.futures.ThreadPoolExecutor(max_workers=jobs) as pool:
        futures = {pool.submit(_annotate_one, p, args, cfg): p for p in projects}
        for fut in concurrent.futures.as_completed(futures):
            print(fut.result())
    return 0


def _project_prefix(project: Path, model: cio.SparseModel) -> str:
    if not model.images:
        return f"{project.name}/"
    name = next(iter(model.images.values())).name
    stem = name.split("_frame_")[0]
    return f"{project.name}/{stem}/"


def _load_registered(project: Path) -> tuple[cio.SparseModel, str]:
    geo_dir = project / "sparse" / "geo"
    if not geo_dir.is_dir():
        raise ConfigError(f"{project} has no sparse/geo model; run annotate first")
    model = cio.read_model(geo_dir)
    return model, _project_prefix(project, model)


def cmd_export(args, cfg: Config) -> int:
    split = pl.DatasetSplit(train_cutoff=cfg.train_cutoff, test_start=cfg.test_start)
    projects = [Path(raw) for raw in args.projects]
    jobs = args.jobs if args.jobs is not None else cfg.jobs
    if jobs > 1 and len(projects) > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=jobs) as pool:
            loaded = list(pool.map(_load_registered, projects))
    else:
        loaded = [_load_registered(p) for p in projects]
    models = [m for m, _ in loaded]
    prefixes = [p for _, p in loaded]
    train, test = pl.build_floor_dataset(models, split, prefixes=prefixes)
    floor = args.floor if args.floor else cfg.floor
    banner = f"{floor} (exported by floorpose)"
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    atomic_write_text(out / "image_train_all.txt", cio.write_pose_records(train, banner))
    atomic_write_text(out / "image_test_all.txt", cio.write_pose_records(test, banner))
    if args.geometric_archive:
        cio.export_geometric_dataset(
            models, split, Path(args.geometric_archive), prefixes=prefixes
        )
    print(f"train: {len(train)} records, test: {len(test)} records")
    return 0


def cmd_evaluate(args, cfg: Config) -> int:
    preds = cio.read_pose_records(Path(args.predictions).read_text())
    gts = cio.read_pose_records(Path(args.ground_truth).read_text())
    mpp = args.meters_per_pixel if args.meters_per_pixel is not None else cfg.meters_per_pixel
    samples = ev.compare_poses(preds, gts, ev.PlanScale(mpp))
    summary = ev.summarize(samples)
    print(f"n: {summary.n}")
    print(f"mean: {summary.mean_trans:.2f}m, {summary.mean_rot:.2f}\N{DEGREE SIGN}")
    print(f"median: {summary.median_trans:.2f}m, {summary.median_rot:.2f}\N{DEGREE SIGN}")
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        atomic_write_text(out / "summary.csv", ev.summary_csv(summary))
        for axis in ("trans", "rot"):
            atomic_write_text(
                out / f"cdf_{axis}.csv", ev.cdf_csv(ev.cdf(samples, axis), axis)
            )
    return 0


def cmd_poi_query(args, cfg: Config) -> int:
    meta = args.plan_meta if args.plan_meta else cfg.plan_meta
    if not meta:
        raise ConfigError("no plan meta file given (flag --plan-meta or config plan_meta)")
    plan = poi.load_floorplan_from_meta(meta)
    pose = Pose6DoF(position=[args.x, args.y, args.z], orientation=[args.qw, args.qx, args.qy, args.qz])
    hits = poi.pois_near(plan, pose, radius=args.radius, fov=args.fov)
    print(f"{'poi_id':>6}  {'name':<24}  {'distance_m':>10}  {'bearing_deg':>11}")
    for h in hits:
        print(f"{h.poi_id:>6}  {h.name:<24}  {h.distance:>10.3f}  {h.bearing:>11.1f}")
    if not hits:
        print("(no PoIs in range)")
    return 0


def cmd_plot_path(args, cfg: Config) -> int:
    project = Path(args.project)
    model = cio.read_model(project / "sparse" / "geo")
    points = georeg.path_points(model)
    if args.plan_meta:
        plan = poi.load_floorplan_from_meta(args.plan_meta)
        validation = georeg.validate_path(model, plan)
        print(f"in-bounds fraction: {validation.in_bounds_fraction:.4f}", file=sys.stderr)
    text = georeg.write_path_csv(points)
    if args.out:
        atomic_write_text(Path(args.out), text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_inspect(args, cfg: Config) -> int:
    model = cio.read_model(Path(args.model))
    print(f"cameras: {len(model.cameras)}")
    for cam in model.cameras.values():
        params = " ".join(f"{p:g}" for p in cam.params)
        print(
            f"  camera {cam.camera_id}: {cam.model_name} width {cam.width} "
            f"height {cam.height} params [{params}]"
        )
    print(f"images: {len(model.images)}")
    for image_id in sorted(model.images):
        img = model.images[image_id]
        c = img.camera_center()
        print(
            f"  image {image_id}: {img.name} center "
            f"({c[0]:.3f}, {c[1]:.3f}, {c[2]:.3f}) observations {len(img.xys)}"
        )
    print(f"points3D: {len(model.points3D)}")
    return 0


_COMMANDS = {
    "sample": cmd_sample,
    "annotate": cmd_annotate,
    "export": cmd_export,
    "evaluate": cmd_evaluate,
    "poi-query": cmd_poi_query,
    "plot-path": cmd_plot_path,
    "inspect": cmd_inspect,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _config_from(args)
        return _COMMANDS[args.command](args, cfg)
    except FloorposeError as e:
        print(f"error[{type(e).__name__}]: {e}", file=sys.stderr)
        return e.exit_code
    except FileNotFoundError as e:
        print(f"error[{ParseError.__name__}]: {e}", file=sys.stderr)
        return ParseError.exit_code
    except ValueError as e:
        print(f"error[ValueError]: {e}", file=sys.stderr)
        return ConfigError.exit_code


if __name__ == "__main__":
    sys.exit(main())
