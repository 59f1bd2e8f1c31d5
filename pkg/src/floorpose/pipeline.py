"""End-to-end per-video annotation: sample, reconstruct, densify, register.

The SfM tool is injected as an executor callable taking ``(image_dir,
output_dir)``: it must populate ``output_dir/<k>/`` with sparse-model
binaries for each reconstructed component and exit cleanly. The pipeline
writes the sampled frame names to ``<image_dir>/frames.txt`` before each
invocation so the executor (or the frame-dump step in its command line)
knows exactly which frames the current round uses.

The annotation loop samples every ``frame_interval`` frames, reconstructs,
and, while the point clouds do not align into one dominant component,
resamples the breaking gaps at a third of the interval. Alignment is
operationalized as a single component holding at least ``threshold`` of the
sampled frames (default 0.95).
"""

from __future__ import annotations

import logging
import os
import shlex
import shutil
import subprocess
import tempfile
from dataclasses import dataclass, replace
from datetime import datetime
from pathlib import Path

from . import colmap_io as cio
from . import georeg
from .errors import (
    DensificationExhaustedError,
    InsufficientAnchorsError,
    ParseError,
    ReconstructionFailedError,
)
from .geometry import quat_conjugate

logger = logging.getLogger(__name__)

DEFAULT_FRAME_INTERVAL = 16
DEFAULT_ALIGNMENT_THRESHOLD = 0.95
DEFAULT_MAX_DENSIFY_ROUNDS = 3
TRAIN_CUTOFF_DEFAULT = datetime(2024, 4, 15)
TEST_START_DEFAULT = datetime(2024, 5, 1)


@dataclass(frozen=True)
class VideoJob:
    video_path: str
    fps: float
    duration: float  # seconds
    frame_interval: int = DEFAULT_FRAME_INTERVAL
    sampled_frames: tuple[int, ...] = ()

    def __post_init__(self):
        if self.fps <= 0 or self.duration <= 0:
            raise ValueError("fps and duration must be positive")
        if self.frame_interval < 1:
            raise ValueError("frame interval must be >= 1")
        frames = self.sampled_frames
        if any(b <= a for a, b in zip(frames, frames[1:])):
            raise ValueError("sampled frames must be strictly increasing")
        if frames and not (0 <= frames[0] and frames[-1] < self.n_frames):
            raise ValueError("sampled frames must lie in [0, fps*duration)")

    @property
    def stem(self) -> str:
        return Path(self.video_path).stem

    @property
    def n_frames(self) -> int:
        return int(self.fps * self.duration)


@dataclass(frozen=True)
class ReconstructionOutcome:
    components: list[tuple[frozenset, cio.SparseModel]]  # (image names, model)
    component_frames: list[frozenset]  # parallel: frame indices per component
    sampled: tuple[int, ...]
    registered_fraction: float
    break_points: list[tuple[int, int]]


@dataclass(frozen=True)
class DatasetSplit:
    train_cutoff: datetime = TRAIN_CUTOFF_DEFAULT
    test_start: datetime = TEST_START_DEFAULT

    def __post_init__(self):
        if not self.train_cutoff < self.test_start:
            raise ValueError("train_cutoff must precede test_start")


def frame_name(job: VideoJob, index: int) -> str:
    return f"{job.stem}_frame_{index / job.fps:05.1f}s.jpg"


def frame_name_map(job: VideoJob, frames) -> dict[str, int]:
    """Image name per sampled frame; rejects collisions in the 1-decimal naming."""
    names = {frame_name(job, k): k for k in frames}
    if len(names) != len(frames):
        raise ValueError(
            "frame spacing is too fine for the 1-decimal frame naming; "
            "two sampled indices map to the same name"
        )
    return names


def sample_frames(job: VideoJob) -> list[int]:
    """Every frame_interval-th frame index, starting at 0, below fps*duration."""
    return list(range(0, job.n_frames, job.frame_interval))


def check_alignment(outcome: ReconstructionOutcome, threshold: float = DEFAULT_ALIGNMENT_THRESHOLD) -> bool:
    """True iff exactly one component holds >= threshold of the sampled frames."""
    n = len(outcome.sampled)
    if n == 0:
        return False
    dominant = [c for c in outcome.component_frames if len(c) >= threshold * n]
    return len(dominant) == 1


def densify_at_breaks(job: VideoJob, outcome: ReconstructionOutcome) -> list[int]:
    """New frame indices inside each break gap, every floor(interval/3) frames.

    Already-sampled indices are excluded, so re-running over the same gaps
    is idempotent. Raises once the interval cannot shrink below one frame
    while breaks persist; at that point only re-recording can help.
    """
    if not outcome.break_points:
        return []
    if job.frame_interval <= 1:
        raise DensificationExhaustedError(
            "frame interval is already 1 but the reconstruction still breaks"
        )
    step = max(1, job.frame_interval // 3)
    sampled = set(job.sampled_frames)
    new: set[int] = set()
    for a, b in outcome.break_points:
        new.update(range(a + step, b, step))
    return sorted(new - sampled)


class CommandExecutor:
    """Runs an external SfM command from a template with {image_dir}/{output_dir}.

    stdout and stderr are captured into a log file next to the output
    directory; a nonzero exit raises ReconstructionFailedError pointing at
    that log.
    """

    def __init__(self, template: str, log_name: str = "log.log"):
        self.template = template
        self.log_name = log_name
        self.last_log_path: Path | None = None

    def __call__(self, image_dir: Path, output_dir: Path) -> None:
        # paths are inserted pre-quoted; templates should use bare {image_dir}
        cmd = shlex.split(
            self.template.format(
                image_dir=shlex.quote(str(image_dir)),
                output_dir=shlex.quote(str(output_dir)),
            )
        )
        log_path = Path(output_dir).parent / self.log_name
        self.last_log_path = log_path
        proc = subprocess.run(cmd, capture_output=True, text=True)
        with open(log_path, "a") as fh:
            fh.write(f"$ {' '.join(cmd)}\n{proc.stdout}{proc.stderr}\n")
        if proc.returncode != 0:
            raise ReconstructionFailedError(
                f"executor exited with code {proc.returncode}", log_path=log_path
            )


def run_reconstruction(job: VideoJob, frames, executor, workdir: Path | str) -> ReconstructionOutcome:
    """Invoke the executor on the sampled frames and split the result into components."""
    frames = sorted(frames)
    if not frames:
        raise ValueError("cannot reconstruct from an empty frame list")
    workdir = Path(workdir)
    image_dir = workdir / job.stem
    image_dir.mkdir(parents=True, exist_ok=True)
    name_to_frame = frame_name_map(job, frames)
    (image_dir / "frames.txt").write_text("\n".join(sorted(name_to_frame)) + "\n")

    output_dir = workdir / "sparse"
    output_dir.mkdir(parents=True, exist_ok=True)
    for stale in output_dir.iterdir():
        if stale.is_dir() and stale.name.isdigit():
            shutil.rmtree(stale)

    rc = executor(image_dir, output_dir)
    if rc not in (None, 0):
        raise ReconstructionFailedError(
            f"executor returned {rc}", log_path=getattr(executor, "last_log_path", None)
        )

    component_dirs = sorted(
        (p for p in output_dir.iterdir() if p.is_dir() and p.name.isdigit()),
        key=lambda p: int(p.name),
    )
    if not component_dirs:
        raise ReconstructionFailedError(
            "executor produced no sparse model",
            log_path=getattr(executor, "last_log_path", None),
        )
    components = []
    component_frames = []
    for comp_dir in component_dirs:
        try:
            model = cio.read_model(comp_dir)
        except (ParseError, OSError) as e:
            raise ReconstructionFailedError(
                f"unparseable model in {comp_dir}: {e}",
                log_path=getattr(executor, "last_log_path", None),
            ) from e
        names = frozenset(img.name for img in model.images.values())
        components.append((names, model))
        component_frames.append(
            frozenset(name_to_frame[n] for n in names if n in name_to_frame)
        )

    assignment = {}
    for idx, comp in enumerate(component_frames):
        for k in comp:
            assignment[k] = idx
    registered = sum(1 for k in frames if k in assignment)
    breaks = []
    for a, b in zip(frames, frames[1:]):
        if assignment.get(a) != assignment.get(b):
            breaks.append((a, b))
    return ReconstructionOutcome(
        components=components,
        component_frames=component_frames,
        sampled=tuple(frames),
        registered_fraction=registered / len(frames),
        break_points=breaks,
    )


def atomic_write_text(path: Path | str, text: str) -> None:
    """Write via a temp file in the target directory, then rename into place."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def annotate_video(
    job: VideoJob,
    anchors,
    executor,
    project_dir: Path | str,
    alignment_threshold: float = DEFAULT_ALIGNMENT_THRESHOLD,
    max_densify_rounds: int = DEFAULT_MAX_DENSIFY_ROUNDS,
    robust: bool = False,
    ransac_threshold: float = georeg.DEFAULT_RANSAC_THRESHOLD,
    seed: int = 0,
) -> tuple[cio.SparseModel, georeg.RegistrationReport]:
    """Sample, reconstruct until aligned, geo-register, and write project outputs.

    Produces ``sparse/geo`` (the registered model), ``camera2world_6DoF.txt``,
    and ``path.csv`` inside the project directory. Returns the registered
    dominant-component model and the registration report.
    """
    if not anchors:
        raise InsufficientAnchorsError("annotate_video needs at least one anchor")
    project_dir = Path(project_dir)
    project_dir.mkdir(parents=True, exist_ok=True)

    frames = sample_frames(job)
    job = replace(job, sampled_frames=tuple(frames))
    rounds = 0
    while True:
        outcome = run_reconstruction(job, frames, executor, project_dir)
        if check_alignment(outcome, alignment_threshold):
            dominant = max(
                range(len(outcome.components)),
                key=lambda i: len(outcome.component_frames[i]),
            )
            model = outcome.components[dominant][1]
            break
        if rounds >= max_densify_rounds:
            raise DensificationExhaustedError(
                f"no alignment after {rounds} densification rounds"
            )
        extra = densify_at_breaks(job, outcome)
        if not extra:
            raise DensificationExhaustedError(
                "breaks persist but densification adds no new frames"
            )
        frames = sorted(set(frames) | set(extra))
        job = replace(
            job,
            frame_interval=max(1, job.frame_interval // 3),
            sampled_frames=tuple(frames),
        )
        try:
            frame_name_map(job, frames)
        except ValueError:
            raise DensificationExhaustedError(
                "densified sampling is finer than the one-decimal frame naming "
                "can express; re-record the video"
            ) from None
        rounds += 1
        logger.info(
            "%s: densified to %d frames (interval %d)", job.stem, len(frames), job.frame_interval
        )

    registered, report = georeg.georegister_model(
        model, anchors, robust=robust, threshold=ransac_threshold, seed=seed
    )
    cio.write_model(registered, project_dir / "sparse" / "geo")
    atomic_write_text(
        project_dir / "camera2world_6DoF.txt", cio.write_camera2world_6dof(registered)
    )
    atomic_write_text(
        project_dir / "path.csv", georeg.write_path_csv(georeg.path_points(registered))
    )
    return registered, report


def build_floor_dataset(
    models, split: DatasetSplit, prefixes=None
) -> tuple[list[cio.PoseRecord], list[cio.PoseRecord]]:
    """Pose records for every registered image, split by recording date.

    Position is the registered camera center; orientation is camera-to-world.
    Images recorded before the train cutoff go to train, at or after the
    test start to test, and those in the gap are dropped. Images whose names
    carry no parseable timestamp are skipped with a logged count. Ids are
    dense and ascending within each split.
    """
    if prefixes is None:
        prefixes = ["" for _ in models]
    train_raw, test_raw = [], []
    skipped = 0
    for model, prefix in zip(models, prefixes):
        entries = []
        for img in model.images.values():
            try:
                info = cio.parse_frame_name(img.name)
            except ParseError:
                skipped += 1
                continue
            entries.append((info.frame_seconds, img.name, info.recording_timestamp, img))
        entries.sort(key=lambda e: (e[0], e[1]))
        for _, _, when, img in entries:
            row = (prefix + img.name, quat_conjugate(img.qvec), img.camera_center())
            if when < split.train_cutoff:
                train_raw.append(row)
            elif when >= split.test_start:
                test_raw.append(row)
    if skipped:
        logger.warning("skipped %d images without parseable frame timestamps", skipped)

    def finalize(rows):
        return [
            cio.PoseRecord(img_path=path, img_id=i, q=q, t=t)
            for i, (path, q, t) in enumerate(rows)
        ]

    return finalize(train_raw), finalize(test_raw)
