"""Bit-exact sparse-model binary I/O and the dataset text formats.

Binary files (``cameras.bin``, ``images.bin``, ``points3D.bin``) follow the
published little-endian sparse-reconstruction layout: an unsigned 64-bit
record count, then fixed-layout records with NUL-terminated names. Writers
emit records in ascending id order so that write(read(bytes)) is
byte-for-byte identical for any well-formed ascending-order input.

Text formats covered here: anchor files (``geo_coord.txt``), 9-column pose
files (``image_train_all.txt`` and ``camera2world_6DoF.txt``), caption CSVs,
and the frame-name convention ``<MODE>[_pad]_<YYYYMMDD>_<HHMMSS>_frame_<SSS.S>s.<ext>``.
"""

from __future__ import annotations

import csv
import io
import json
import re
import struct
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path

import numpy as np

from .errors import (
    BinaryParseError,
    DuplicateIdError,
    ExportError,
    ModelIntegrityError,
    ParseError,
    TextParseError,
    TruncatedStreamError,
    UnknownCameraModelError,
)
from .geometry import camera_center_from_extrinsics, quat_conjugate, quat_to_rotmat

# id sentinel for a 2D keypoint without a triangulated 3D point; stored on
# disk as the unsigned 64-bit maximum, which reads back as -1 when taken
# as a signed int64
INVALID_POINT3D_ID = -1

POSE_HEADER = "IMG_PATH, IMG_ID, QW, QX, QY, QZ, TX, TY, TZ"
CAPTION_COLUMNS = ("image_id", "image_file", "caption")


@dataclass(frozen=True)
class CameraModelSpec:
    model_id: int
    name: str
    num_params: int
    # indices into params for (fx, fy, cx, cy); single-focal models alias fx = fy
    focal_idx: tuple[int, int, int, int]


CAMERA_MODELS = {
    m.model_id: m
    for m in [
        CameraModelSpec(0, "SIMPLE_PINHOLE", 3, (0, 0, 1, 2)),
        CameraModelSpec(1, "PINHOLE", 4, (0, 1, 2, 3)),
        CameraModelSpec(2, "SIMPLE_RADIAL", 4, (0, 0, 1, 2)),
        CameraModelSpec(3, "RADIAL", 5, (0, 0, 1, 2)),
        CameraModelSpec(4, "OPENCV", 8, (0, 1, 2, 3)),
        CameraModelSpec(5, "OPENCV_FISHEYE", 8, (0, 1, 2, 3)),
        CameraModelSpec(6, "FULL_OPENCV", 12, (0, 1, 2, 3)),
        CameraModelSpec(7, "FOV", 5, (0, 1, 2, 3)),
        CameraModelSpec(8, "SIMPLE_RADIAL_FISHEYE", 4, (0, 0, 1, 2)),
        CameraModelSpec(9, "RADIAL_FISHEYE", 5, (0, 0, 1, 2)),
        CameraModelSpec(10, "THIN_PRISM_FISHEYE", 12, (0, 1, 2, 3)),
    ]
}

CAMERA_MODEL_IDS = {m.name: m.model_id for m in CAMERA_MODELS.values()}


@dataclass(frozen=True)
class CameraIntrinsics:
    camera_id: int
    model_id: int
    width: int
    height: int
    params: np.ndarray

    def __post_init__(self):
        if self.model_id not in CAMERA_MODELS:
            raise ValueError(f"unknown camera model id {self.model_id}")
        object.__setattr__(self, "params", np.asarray(self.params, dtype=np.float64))
        spec = CAMERA_MODELS[self.model_id]
        if self.params.shape != (spec.num_params,):
            raise ValueError(
                f"{spec.name} needs {spec.num_params} params, got {self.params.shape}"
            )
        if self.width <= 0 or self.height <= 0:
            raise ValueError("camera dimensions must be positive")

    @property
    def model_name(self) -> str:
        return CAMERA_MODELS[self.model_id].name

    def calibration_matrix(self) -> np.ndarray:
        """3x3 pinhole K built from the model's focal/principal-point params."""
        fx_i, fy_i, cx_i, cy_i = CAMERA_MODELS[self.model_id].focal_idx
        p = self.params
        return np.array(
            [[p[fx_i], 0.0, p[cx_i]], [0.0, p[fy_i], p[cy_i]], [0.0, 0.0, 1.0]]
        )


@dataclass(frozen=True)
class RegisteredImage:
    """Extrinsics (world-to-camera qvec/tvec) plus 2D observations."""

    image_id: int
    qvec: np.ndarray
    tvec: np.ndarray
    camera_id: int
    name: str
    xys: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    point3D_ids: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    def __post_init__(self):
        if not self.name:
            raise ValueError("image name must be nonempty")
        object.__setattr__(self, "qvec", np.asarray(self.qvec, dtype=np.float64))
        object.__setattr__(self, "tvec", np.asarray(self.tvec, dtype=np.float64))
        object.__setattr__(
            self, "xys", np.asarray(self.xys, dtype=np.float64).reshape(-1, 2)
        )
        object.__setattr__(
            self, "point3D_ids", np.asarray(self.point3D_ids, dtype=np.int64)
        )
        if len(self.xys) != len(self.point3D_ids):
            raise ValueError("xys and point3D_ids must have equal length")

    def camera_center(self) -> np.ndarray:
        return camera_center_from_extrinsics(self.qvec, self.tvec)


@dataclass(frozen=True)
class Point3D:
    point3D_id: int
    xyz: np.ndarray
    rgb: np.ndarray
    error: float
    image_ids: np.ndarray
    point2D_idxs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "xyz", np.asarray(self.xyz, dtype=np.float64))
        object.__setattr__(self, "rgb", np.asarray(self.rgb, dtype=np.uint8))
        object.__setattr__(self, "image_ids", np.asarray(self.image_ids, dtype=np.int32))
        object.__setattr__(
            self, "point2D_idxs", np.asarray(self.point2D_idxs, dtype=np.int32)
        )
        if len(self.image_ids) != len(self.point2D_idxs):
            raise ValueError("track image_ids and point2D_idxs must have equal length")


@dataclass(frozen=True)
class SparseModel:
    cameras: dict[int, CameraIntrinsics]
    images: dict[int, RegisteredImage]
    points3D: dict[int, Point3D]

    def validate(self) -> None:
        """Referential-integrity check; raises ModelIntegrityError on violation."""
        for img in self.images.values():
            if img.camera_id not in self.cameras:
                raise ModelIntegrityError(
                    f"image {img.name!r} references missing camera {img.camera_id}"
                )
            bad = set(int(i) for i in img.point3D_ids if i != INVALID_POINT3D_ID)
            bad -= set(self.points3D)
            if bad:
                raise ModelIntegrityError(
                    f"image {img.name!r} observes nonexistent 3D points {sorted(bad)}"
                )
        for pt in self.points3D.values():
            if len(pt.image_ids) == 0:
                raise ModelIntegrityError(f"point {pt.point3D_id} has an empty track")
            missing = set(int(i) for i in pt.image_ids) - set(self.images)
            if missing:
                raise ModelIntegrityError(
                    f"point {pt.point3D_id} tracks nonexistent images {sorted(missing)}"
                )

    def image_by_name(self, name: str) -> RegisteredImage | None:
        for img in self.images.values():
            if img.name == name:
                return img
        return None


@dataclass(frozen=True)
class AnchorCorrespondence:
    """Hand-verified plan position of one image: pixels from the top-left origin."""

    image_name: str
    plan_row: float
    plan_col: float
    plan_z: float


@dataclass(frozen=True)
class PoseRecord:
    img_path: str
    img_id: int
    q: np.ndarray  # camera-to-world, (w, x, y, z)
    t: np.ndarray  # plan units

    def __post_init__(self):
        object.__setattr__(self, "q", np.asarray(self.q, dtype=np.float64))
        object.__setattr__(self, "t", np.asarray(self.t, dtype=np.float64))


@dataclass(frozen=True)
class CaptionRecord:
    image_id: int
    image_file: str
    caption: str


# ---------------------------------------------------------------------------
# binary model files


class _Reader:
    """Cursor over a byte buffer with offset-carrying errors."""

    def __init__(self, data: bytes):
        self.data = data
        self.offset = 0

    def unpack(self, fmt: str):
        size = struct.calcsize("<" + fmt)
        if self.offset + size > len(self.data):
            raise TruncatedStreamError("unexpected end of stream", self.offset)
        out = struct.unpack_from("<" + fmt, self.data, self.offset)
        self.offset += size
        return out

    def cstring(self) -> str:
        end = self.data.find(b"\x00", self.offset)
        if end < 0:
            raise TruncatedStreamError("unterminated name string", self.offset)
        raw = self.data[self.offset : end]
        self.offset = end + 1
        return raw.decode("utf-8")

    def array(self, dtype, count: int) -> np.ndarray:
        dt = np.dtype(dtype)
        size = dt.itemsize * count
        if self.offset + size > len(self.data):
            raise TruncatedStreamError("unexpected end of stream", self.offset)
        out = np.frombuffer(self.data, dtype=dt, count=count, offset=self.offset)
        self.offset += size
        return out

    def expect_end(self):
        if self.offset != len(self.data):
            raise BinaryParseError(
                f"{len(self.data) - self.offset} trailing bytes after last record",
                self.offset,
            )


def read_cameras_bin(data: bytes) -> dict[int, CameraIntrinsics]:
    r = _Reader(data)
    (count,) = r.unpack("Q")
    cameras: dict[int, CameraIntrinsics] = {}
    for _ in range(count):
        record_offset = r.offset
        camera_id, model_id, width, height = r.unpack("iiQQ")
        if model_id not in CAMERA_MODELS:
            raise UnknownCameraModelError(
                f"unknown camera model id {model_id}", record_offset
            )
        params = r.array("<f8", CAMERA_MODELS[model_id].num_params).copy()
        if camera_id in cameras:
            raise DuplicateIdError(f"duplicate camera id {camera_id}", record_offset)
        cameras[camera_id] = CameraIntrinsics(
            camera_id=camera_id,
            model_id=model_id,
            width=int(width),
            height=int(height),
            params=params,
        )
    r.expect_end()
    return cameras


def write_cameras_bin(cameras: dict[int, CameraIntrinsics]) -> bytes:
    parts = [struct.pack("<Q", len(cameras))]
    for cam_id in sorted(cameras):
        cam = cameras[cam_id]
        parts.append(struct.pack("<iiQQ", cam.camera_id, cam.model_id, cam.width, cam.height))
        parts.append(cam.params.astype("<f8").tobytes())
    return b"".join(parts)


def read_images_bin(data: bytes) -> dict[int, RegisteredImage]:
    r = _Reader(data)
    (count,) = r.unpack("Q")
    images: dict[int, RegisteredImage] = {}
    for _ in range(count):
        record_offset = r.offset
        vals = r.unpack("idddddddi")
        image_id = vals[0]
        qvec = np.array(vals[1:5])
        tvec = np.array(vals[5:8])
        camera_id = vals[8]
        name = r.cstring()
        (n_points2d,) = r.unpack("Q")
        block = r.array([("x", "<f8"), ("y", "<f8"), ("p3d", "<i8")], n_points2d)
        if image_id in images:
            raise DuplicateIdError(f"duplicate image id {image_id}", record_offset)
        if abs(np.linalg.norm(qvec) - 1.0) > 1e-6:
            raise BinaryParseError(
                f"image {image_id} quaternion is not unit-norm", record_offset
            )
        images[image_id] = RegisteredImage(
            image_id=image_id,
            qvec=qvec,
            tvec=tvec,
            camera_id=camera_id,
            name=name,
            xys=np.column_stack([block["x"], block["y"]]) if n_points2d else np.zeros((0, 2)),
            point3D_ids=block["p3d"].copy(),
        )
    r.expect_end()
    return images


def write_images_bin(images: dict[int, RegisteredImage]) -> bytes:
    parts = [struct.pack("<Q", len(images))]
    for image_id in sorted(images):
        img = images[image_id]
        parts.append(
            struct.pack(
                "<idddddddi",
                img.image_id,
                *img.qvec.tolist(),
                *img.tvec.tolist(),
                img.camera_id,
            )
        )
        parts.append(img.name.encode("utf-8") + b"\x00")
        parts.append(struct.pack("<Q", len(img.xys)))
        block = np.empty(len(img.xys), dtype=[("x", "<f8"), ("y", "<f8"), ("p3d", "<i8")])
        block["x"] = img.xys[:, 0]
        block["y"] = img.xys[:, 1]
        block["p3d"] = img.point3D_ids
        parts.append(block.tobytes())
    return b"".join(parts)


def read_points3d_bin(data: bytes) -> dict[int, Point3D]:
    r = _Reader(data)
    (count,) = r.unpack("Q")
    points: dict[int, Point3D] = {}
    for _ in range(count):
        record_offset = r.offset
        vals = r.unpack("QdddBBBd")
        point3D_id = vals[0]
        (track_len,) = r.unpack("Q")
        track = r.array([("image_id", "<i4"), ("p2d_idx", "<i4")], track_len)
        if point3D_id in points:
            raise DuplicateIdError(f"duplicate point3D id {point3D_id}", record_offset)
        points[point3D_id] = Point3D(
            point3D_id=int(point3D_id),
            xyz=np.array(vals[1:4]),
            rgb=np.array(vals[4:7], dtype=np.uint8),
            error=vals[7],
            image_ids=track["image_id"].copy(),
            point2D_idxs=track["p2d_idx"].copy(),
        )
    r.expect_end()
    return points


def write_points3d_bin(points3D: dict[int, Point3D]) -> bytes:
    parts = [struct.pack("<Q", len(points3D))]
    for pid in sorted(points3D):
        pt = points3D[pid]
        parts.append(
            struct.pack(
                "<QdddBBBd",
                pt.point3D_id,
                *pt.xyz.tolist(),
                *pt.rgb.tolist(),
                pt.error,
            )
        )
        parts.append(struct.pack("<Q", len(pt.image_ids)))
        track = np.empty(len(pt.image_ids), dtype=[("image_id", "<i4"), ("p2d_idx", "<i4")])
        track["image_id"] = pt.image_ids
        track["p2d_idx"] = pt.point2D_idxs
        parts.append(track.tobytes())
    return b"".join(parts)


def read_model(model_dir: Path | str, validate: bool = True) -> SparseModel:
    model_dir = Path(model_dir)
    model = SparseModel(
        cameras=read_cameras_bin((model_dir / "cameras.bin").read_bytes()),
        images=read_images_bin((model_dir / "images.bin").read_bytes()),
        points3D=read_points3d_bin((model_dir / "points3D.bin").read_bytes()),
    )
    if validate:
        model.validate()
    return model


def write_model(model: SparseModel, model_dir: Path | str) -> None:
    model_dir = Path(model_dir)
    model_dir.mkdir(parents=True, exist_ok=True)
    (model_dir / "cameras.bin").write_bytes(write_cameras_bin(model.cameras))
    (model_dir / "images.bin").write_bytes(write_images_bin(model.images))
    (model_dir / "points3D.bin").write_bytes(write_points3d_bin(model.points3D))


# ---------------------------------------------------------------------------
# anchor file (geo_coord.txt)

_ORDINAL_RE = re.compile(r"^\d+\.$")


def parse_geo_coord(text: str) -> list[AnchorCorrespondence]:
    """Parse anchor lines '<ordinal>. <name> <row> <col> <z>'; ordinal optional."""
    anchors = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        tokens = line.split()
        if not tokens:
            continue
        if _ORDINAL_RE.match(tokens[0]):
            tokens = tokens[1:]
        if len(tokens) != 4:
            raise TextParseError(
                f"expected '<name> <row> <col> <z>', got {len(tokens)} fields", lineno
            )
        name = tokens[0]
        try:
            row, col, z = (float(t) for t in tokens[1:])
        except ValueError:
            raise TextParseError(f"non-numeric coordinate in {tokens[1:]}", lineno) from None
        if row < 0 or col < 0:
            raise TextParseError("plan coordinates must be nonnegative", lineno)
        anchors.append(AnchorCorrespondence(name, row, col, z))
    return anchors


def format_geo_coord(anchors: list[AnchorCorrespondence]) -> str:
    lines = []
    for i, a in enumerate(anchors, start=1):
        lines.append(f"{i}. {a.image_name} {_num(a.plan_row)} {_num(a.plan_col)} {_num(a.plan_z)}")
    return "\n".join(lines) + ("\n" if lines else "")


def _num(x: float) -> str:
    return str(int(x)) if float(x).is_integer() else repr(float(x))


# ---------------------------------------------------------------------------
# 9-column pose files


def _parse_pose_lines(lines, start_lineno: int) -> list[PoseRecord]:
    records = []
    for lineno, line in enumerate(lines, start=start_lineno):
        if not line.strip():
            continue
        fields = [f.strip() for f in line.split(",")]
        if len(fields) != 9:
            raise TextParseError(f"expected 9 comma-separated fields, got {len(fields)}", lineno)
        try:
            img_id = int(fields[1])
            reals = [float(f) for f in fields[2:]]
        except ValueError:
            raise TextParseError(f"non-numeric pose field in {fields[1:]!r}", lineno) from None
        q = np.array(reals[0:4])
        t = np.array(reals[4:7])
        if not np.all(np.isfinite(q)) or not np.all(np.isfinite(t)):
            raise TextParseError("non-finite pose value", lineno)
        if abs(np.linalg.norm(q) - 1.0) > 1e-4:
            raise TextParseError("quaternion is not unit-norm within 1e-4", lineno)
        records.append(PoseRecord(img_path=fields[0], img_id=img_id, q=q, t=t))
    return records


def _check_pose_header(line: str, lineno: int) -> None:
    got = [f.strip() for f in line.split(",")]
    want = [f.strip() for f in POSE_HEADER.split(",")]
    if got != want:
        raise TextParseError(f"bad column header {line!r}", lineno)


def read_pose_records(text: str) -> list[PoseRecord]:
    """Read a pose file: building banner, column header, then records."""
    lines = text.splitlines()
    if len(lines) < 2:
        raise TextParseError("missing building banner and column header", 1)
    _check_pose_header(lines[1], 2)
    return _parse_pose_lines(lines[2:], 3)


def _format_pose_line(rec: PoseRecord) -> str:
    reals = ", ".join(f"{v:.8f}" for v in (*rec.q, *rec.t))
    return f"{rec.img_path}, {rec.img_id}, {reals}"


def write_pose_records(records: list[PoseRecord], building_header: str) -> str:
    lines = [building_header, POSE_HEADER]
    for rec in sorted(records, key=lambda r: r.img_id):
        lines.append(_format_pose_line(rec))
    return "\n".join(lines) + "\n"


def write_camera2world_6dof(model: SparseModel) -> str:
    """Consolidate a registered model into camera-to-world pose lines.

    Position is the world camera center and the quaternion is the
    camera-to-world rotation (conjugate of the stored world-to-camera qvec).
    """
    lines = [POSE_HEADER]
    for image_id in sorted(model.images):
        img = model.images[image_id]
        rec = PoseRecord(
            img_path=img.name,
            img_id=image_id,
            q=quat_conjugate(img.qvec),
            t=img.camera_center(),
        )
        lines.append(_format_pose_line(rec))
    return "\n".join(lines) + "\n"


def read_camera2world_6dof(text: str) -> list[PoseRecord]:
    lines = text.splitlines()
    if not lines:
        raise TextParseError("missing column header", 1)
    _check_pose_header(lines[0], 1)
    return _parse_pose_lines(lines[1:], 2)


# ---------------------------------------------------------------------------
# caption CSVs


def parse_captions_csv(text: str) -> list[CaptionRecord]:
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise TextParseError("empty caption file", 1) from None
    if [h.strip() for h in header] != list(CAPTION_COLUMNS):
        raise TextParseError(f"expected columns {CAPTION_COLUMNS}, got {header}", 1)
    records = []
    for row in reader:
        if not row:
            continue
        if len(row) != 3:
            raise TextParseError(f"expected 3 columns, got {len(row)}", reader.line_num)
        try:
            image_id = int(row[0])
        except ValueError:
            raise TextParseError(f"non-integer image_id {row[0]!r}", reader.line_num) from None
        if not row[1]:
            raise TextParseError("empty image_file", reader.line_num)
        records.append(CaptionRecord(image_id=image_id, image_file=row[1], caption=row[2]))
    return records


def write_captions_csv(records: list[CaptionRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CAPTION_COLUMNS)
    for rec in records:
        writer.writerow([rec.image_id, rec.image_file, rec.caption])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# frame names

_FRAME_NAME_RE = re.compile(
    r"^(?P<mode>HAND|DJI)(?P<pad>_pad)?_(?P<date>\d{8})_(?P<time>\d{6})"
    r"_frame_(?P<seconds>\d+\.\d+)s\.(?P<ext>[A-Za-z0-9]+)$"
)


@dataclass(frozen=True)
class FrameInfo:
    capture_mode: str  # HAND or DJI
    padded: bool
    recording_timestamp: datetime
    frame_seconds: float
    extension: str = "jpg"


def parse_frame_name(name: str) -> FrameInfo:
    m = _FRAME_NAME_RE.match(name)
    if m is None:
        raise ParseError(f"frame name does not match convention: {name!r}")
    try:
        ts = datetime.strptime(m.group("date") + m.group("time"), "%Y%m%d%H%M%S")
    except ValueError:
        raise ParseError(f"invalid timestamp in frame name: {name!r}") from None
    return FrameInfo(
        capture_mode=m.group("mode"),
        padded=m.group("pad") is not None,
        recording_timestamp=ts,
        frame_seconds=float(m.group("seconds")),
        extension=m.group("ext"),
    )


def format_frame_name(info: FrameInfo) -> str:
    pad = "_pad" if info.padded else ""
    stamp = info.recording_timestamp.strftime("%Y%m%d_%H%M%S")
    return f"{info.capture_mode}{pad}_{stamp}_frame_{info.frame_seconds:05.1f}s.{info.extension}"


# ---------------------------------------------------------------------------
# geometric-data archive: index.json plus per-field binary blobs

ARCHIVE_SCHEMA_VERSION = 1

_FIXED_FIELDS = {
    "w_t_c": ("<f8", 3),
    "c_q_w": ("<f8", 4),
    "c_R_w": ("<f8", 9),
    "K": ("<f8", 9),
}


def export_geometric_dataset(
    models,
    split,
    out_dir: Path | str,
    prefixes=None,
) -> Path:
    """Write per-image geometric records into a language-neutral archive.

    ``models`` are geo-registered sparse models; ``split`` carries the
    ``train_cutoff`` / ``test_start`` datetimes used to assign each image by
    its recording timestamp (images in the gap are dropped). The archive is
    a directory holding ``index.json`` and one little-endian blob per field
    and split; ragged fields (``w_P`` observed 3D-point ids and ``c_p``
    matching 2D keypoints) are concatenated, with per-record observation
    counts in the index.
    """
    out_dir = Path(out_dir)
    if prefixes is None:
        prefixes = ["" for _ in models]
    buckets: dict[str, list[dict]] = {"train": [], "test": []}
    for model, prefix in zip(models, prefixes):
        for image_id in sorted(model.images):
            img = model.images[image_id]
            if img.camera_id not in model.cameras:
                raise ExportError(
                    f"image {img.name!r} references missing camera {img.camera_id}"
                )
            cam = model.cameras[img.camera_id]
            when = parse_frame_name(img.name).recording_timestamp
            if when < split.train_cutoff:
                label = "train"
            elif when >= split.test_start:
                label = "test"
            else:
                continue
            observed = img.point3D_ids != INVALID_POINT3D_ID
            buckets[label].append(
                {
                    "image_path": prefix + img.name if prefix else img.name,
                    "w_t_c": img.camera_center(),
                    "c_q_w": img.qvec,
                    "c_R_w": quat_to_rotmat(img.qvec).reshape(-1),
                    "K": cam.calibration_matrix().reshape(-1),
                    "w_P": img.point3D_ids[observed],
                    "c_p": img.xys[observed],
                }
            )

    index = {
        "schema_version": ARCHIVE_SCHEMA_VERSION,
        "fields": {
            **{
                name: {"file": f"{name}.bin", "dtype": dt, "record_shape": [n]}
                for name, (dt, n) in _FIXED_FIELDS.items()
            },
            "w_P": {"file": "w_P.bin", "dtype": "<i8", "ragged": True, "record_shape": [-1]},
            "c_p": {"file": "c_p.bin", "dtype": "<f8", "ragged": True, "record_shape": [-1, 2]},
        },
        "splits": {},
    }
    out_dir.mkdir(parents=True, exist_ok=True)
    for label, records in buckets.items():
        split_dir = out_dir / label
        split_dir.mkdir(exist_ok=True)
        for name, (dt, n) in _FIXED_FIELDS.items():
            stacked = (
                np.stack([r[name] for r in records])
                if records
                else np.zeros((0, n))
            )
            (split_dir / f"{name}.bin").write_bytes(stacked.astype(dt).tobytes())
        w_p = (
            np.concatenate([r["w_P"] for r in records])
            if records
            else np.zeros(0, dtype=np.int64)
        )
        c_p = (
            np.concatenate([r["c_p"] for r in records])
            if records
            else np.zeros((0, 2))
        )
        (split_dir / "w_P.bin").write_bytes(w_p.astype("<i8").tobytes())
        (split_dir / "c_p.bin").write_bytes(c_p.astype("<f8").tobytes())
        index["splits"][label] = {
            "dir": label,
            "records": [
                {"image_path": r["image_path"], "n_obs": int(len(r["w_P"]))}
                for r in records
            ],
        }
    (out_dir / "index.json").write_text(json.dumps(index, indent=2) + "\n")
    return out_dir


def load_geometric_dataset(archive_dir: Path | str) -> dict[str, list[dict]]:
    """Inverse of export_geometric_dataset; returns {split: [record dicts]}."""
    archive_dir = Path(archive_dir)
    index = json.loads((archive_dir / "index.json").read_text())
    if index.get("schema_version") != ARCHIVE_SCHEMA_VERSION:
        raise ParseError(f"unsupported archive schema {index.get('schema_version')}")
    out: dict[str, list[dict]] = {}
    for label, info in index["splits"].items():
        split_dir = archive_dir / info["dir"]
        n = len(info["records"])
        fixed = {}
        for name, (dt, cols) in _FIXED_FIELDS.items():
            raw = np.frombuffer((split_dir / f"{name}.bin").read_bytes(), dtype=dt)
            fixed[name] = raw.reshape(n, cols)
        w_p = np.frombuffer((split_dir / "w_P.bin").read_bytes(), dtype="<i8")
        c_p = np.frombuffer((split_dir / "c_p.bin").read_bytes(), dtype="<f8").reshape(-1, 2)
        records = []
        pos = 0
        for i, rec in enumerate(info["records"]):
            k = rec["n_obs"]
            records.append(
                {
                    "image_path": rec["image_path"],
                    "w_t_c": fixed["w_t_c"][i],
                    "c_q_w": fixed["c_q_w"][i],
                    "c_R_w": fixed["c_R_w"][i].reshape(3, 3),
                    "K": fixed["K"][i].reshape(3, 3),
                    "w_P": w_p[pos : pos + k],
                    "c_p": c_p[pos : pos + k],
                }
            )
            pos += k
        out[label] = records
    return out
