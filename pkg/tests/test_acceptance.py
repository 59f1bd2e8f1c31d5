"""Acceptance gate: one test per criterion, each printing a pass line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the lines.
"""

import math
import struct
import time
from datetime import datetime
import numpy as np

from floorpose import cli
from floorpose import colmap_io as cio
from floorpose import evaluation as ev
from floorpose import geometry as geo
from floorpose import georeg
from floorpose import pipeline as pl
from floorpose import poi as poi_mod

import scene_utils
from conftest import make_synthetic_model
from poi_oracle import brute_force_hits, random_horizontal_pose, random_plan


def report(criterion, elapsed, detail):
    print(f"\nPASS criterion {criterion} ({elapsed:.2f}s): {detail}")


def test_criterion_1_metric_consistency():
    """Engineered error sets reproduce the prescribed mean/median exactly."""
    t0 = time.perf_counter()
    mpp = 0.05
    trans_err = [0.30, 0.40, 0.44, 0.94]  # mean 0.52, median 0.42
    rot_err = [3.00, 4.00, 5.04, 9.96]  # mean 5.50, median 4.52
    gts, preds = [], []
    for i, (te, re_) in enumerate(zip(trans_err, rot_err)):
        path = f"img_{i}.jpg"
        gts.append(cio.PoseRecord(path, i, [1, 0, 0, 0], [0.0, 0.0, 0.0]))
        half = math.radians(re_) / 2
        q = np.array([math.cos(half), 0.0, 0.0, math.sin(half)])
        preds.append(cio.PoseRecord(path, i, q, [te / mpp, 0.0, 0.0]))
    summary = ev.summarize(ev.compare_poses(preds, gts, ev.PlanScale(mpp)))
    assert abs(summary.mean_trans - 0.52) <= 0.01
    assert abs(summary.median_trans - 0.42) <= 0.01
    assert abs(summary.mean_rot - 5.50) <= 0.01
    assert abs(summary.median_rot - 4.52) <= 0.01
    elapsed = time.perf_counter() - t0
    assert elapsed < 1.0
    report(
        1,
        elapsed,
        f"reproduced mean {summary.mean_trans:.2f}m/{summary.mean_rot:.2f}deg, "
        f"median {summary.median_trans:.2f}m/{summary.median_rot:.2f}deg",
    )


def test_criterion_2_similarity_recovery():
    """100 noiseless trials recover (s, R, t) to 1e-9; noisy rms <= 0.03."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(202)
    for _ in range(100):
        s = float(rng.uniform(0.1, 10.0))
        q = geo.normalize_quat(rng.normal(size=4))
        t = rng.uniform(-50, 50, size=3)
        want = geo.SimilarityTransform(scale=s, rotation=q, translation=t)
        src = rng.normal(size=(10, 3))
        got = georeg.estimate_similarity(src, want.apply(src))
        assert abs(got.scale - s) <= 1e-9 * s
        qdev = min(
            np.abs(got.rotation - q).max(), np.abs(got.rotation + q).max()
        )
        assert qdev <= 1e-9
        np.testing.assert_allclose(got.translation, t, rtol=1e-9, atol=1e-9)

    sigma = 0.01
    sq_residuals = []
    for _ in range(100):
        s = float(rng.uniform(0.1, 10.0))
        q = geo.normalize_quat(rng.normal(size=4))
        t = rng.uniform(-50, 50, size=3)
        want = geo.SimilarityTransform(scale=s, rotation=q, translation=t)
        src = rng.normal(size=(10, 3))
        dst = want.apply(src) + rng.normal(scale=sigma, size=(10, 3))
        got = georeg.estimate_similarity(src, dst)
        sq_residuals.extend(np.linalg.norm(dst - got.apply(src), axis=1) ** 2)
    rms = math.sqrt(float(np.mean(sq_residuals)))
    assert rms <= 0.03
    elapsed = time.perf_counter() - t0
    assert elapsed < 1.0
    report(2, elapsed, f"100 exact recoveries; noisy rms {rms:.4f} <= 0.03")


def test_criterion_3_binary_round_trip(tmp_path):
    """write(read(f)) is byte-identical for empty and synthetic models."""
    t0 = time.perf_counter()
    empty = struct.pack("<Q", 0)
    assert cio.write_cameras_bin(cio.read_cameras_bin(empty)) == empty
    assert cio.write_images_bin(cio.read_images_bin(empty)) == empty
    assert cio.write_points3d_bin(cio.read_points3d_bin(empty)) == empty

    model = make_synthetic_model(n_images=3, n_points=50)
    cio.write_model(model, tmp_path / "a")
    cio.write_model(cio.read_model(tmp_path / "a"), tmp_path / "b")
    checked = 0
    for name in ("cameras.bin", "images.bin", "points3D.bin"):
        a = (tmp_path / "a" / name).read_bytes()
        b = (tmp_path / "b" / name).read_bytes()
        assert a == b
        checked += len(a)
    elapsed = time.perf_counter() - t0
    assert elapsed < 1.0
    report(3, elapsed, f"byte-identical round trips over {checked} bytes")


def test_criterion_4_loss_oracles():
    """Hand-computed loss values to 1e-9; analytic gradients vs FD to 1e-6."""
    t0 = time.perf_counter()
    origin = geo.Pose6DoF([0.0, 0.0, 0.0], [1.0, 0.0, 0.0, 0.0])
    assert ev.posenet_loss(origin, origin) == 0.0
    assert abs(ev.posenet_loss(geo.Pose6DoF([3, 4, 0], [1, 0, 0, 0]), origin) - 5.0) < 1e-9
    pred = geo.Pose6DoF([0.0, 0.0, 0.0], [1.0, 0.01, 0.0, 0.0])
    assert abs(ev.posenet_loss(pred, origin) - 0.01 * math.exp(5.0)) < 1e-9

    assert ev.learnable_loss(origin, origin) == -5.0
    pred = geo.Pose6DoF([1.0, 0.0, 0.0], [1.0, 0.1, 0.0, 0.0])
    want = 1.0 + 0.1 * math.exp(5.0) - 5.0
    assert abs(ev.learnable_loss(pred, origin) - want) < 1e-9

    rng = np.random.default_rng(204)
    h = 1e-6
    worst = 0.0
    for _ in range(100):
        gt = geo.Pose6DoF(rng.normal(size=3), geo.normalize_quat(rng.normal(size=4)))
        pos = gt.position + rng.normal(scale=0.5, size=3)
        quat = geo.normalize_quat(rng.normal(size=4))
        params = ev.LossParams(
            s_x=float(rng.normal()), s_q=float(rng.normal()), mode="learnable"
        )
        g = ev.learnable_loss_gradients(geo.Pose6DoF(pos, quat), gt, params)

        def at(ds_x=0.0, ds_q=0.0, dpos=None, dquat=None):
            p = ev.LossParams(s_x=params.s_x + ds_x, s_q=params.s_q + ds_q, mode="learnable")
            pose = geo.Pose6DoF(
                pos + (dpos if dpos is not None else 0.0),
                quat + (dquat if dquat is not None else 0.0),
            )
            return ev.learnable_loss(pose, gt, p)

        worst = max(worst, abs((at(ds_x=h) - at(ds_x=-h)) / (2 * h) - g.d_s_x))
        worst = max(worst, abs((at(ds_q=h) - at(ds_q=-h)) / (2 * h) - g.d_s_q))
        for j in range(3):
            e = np.zeros(3)
            e[j] = h
            worst = max(
                worst, abs((at(dpos=e) - at(dpos=-e)) / (2 * h) - g.d_position[j])
            )
        for j in range(4):
            e = np.zeros(4)
            e[j] = h
            worst = max(
                worst, abs((at(dquat=e) - at(dquat=-e)) / (2 * h) - g.d_orientation[j])
            )
    assert worst < 1e-6
    elapsed = time.perf_counter() - t0
    report(4, elapsed, f"losses exact; worst gradient-FD gap {worst:.2e} < 1e-6")


def test_criterion_5_geometry_suite():
    """Round-trip and metric properties over >= 1000 random samples."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(205)
    quats = rng.normal(size=(1000, 4))
    quats /= np.linalg.norm(quats, axis=1, keepdims=True)

    worst_mat = worst_log = worst_euler = 0.0
    for q in quats:
        q2 = geo.rotmat_to_quat(geo.quat_to_rotmat(q))
        worst_mat = max(worst_mat, min(np.abs(q2 - q).max(), np.abs(q2 + q).max()))
        q3 = geo.exp_quat(geo.log_quat(q))
        worst_log = max(worst_log, min(np.abs(q3 - q).max(), np.abs(q3 + q).max()))
        assert geo.rotation_error_deg(q, -q) == 0.0
        assert geo.rotation_error_deg(q, q) == 0.0
    for _ in range(1000):
        yaw = rng.uniform(-math.pi, math.pi)
        pitch = rng.uniform(-math.pi / 2 + 1e-6, math.pi / 2 - 1e-6)
        roll = rng.uniform(-math.pi, math.pi)
        y2, p2, r2 = geo.quat_to_euler(geo.euler_to_quat(yaw, pitch, roll))
        worst_euler = max(worst_euler, abs(y2 - yaw), abs(p2 - pitch), abs(r2 - roll))
    assert worst_mat < 1e-9 and worst_log < 1e-9 and worst_euler < 1e-9

    for a, b, c in zip(quats[::3], quats[1::3], quats[2::3]):
        assert geo.rotation_error_deg(a, c) <= (
            geo.rotation_error_deg(a, b) + geo.rotation_error_deg(b, c) + 1e-6
        )
    elapsed = time.perf_counter() - t0
    report(
        5,
        elapsed,
        f"1000-sample round trips (mat {worst_mat:.1e}, log {worst_log:.1e}, "
        f"euler {worst_euler:.1e}); sign-flip error exactly 0",
    )


def test_criterion_6_end_to_end_pipeline(tmp_path, capsys):
    """annotate + export on the scripted building, then the NN baseline."""
    t0 = time.perf_counter()
    videos = scene_utils.default_building()
    projects = [scene_utils.make_project(tmp_path, v) for v in videos]
    rc = cli.main(
        [
            "annotate",
            "--project",
            *[str(p) for p in projects],
            "--fps",
            "10",
            "--duration",
            "48",
            "--executor",
            scene_utils.stub_template(),
            "--jobs",
            "3",
        ]
    )
    assert rc == 0
    out = tmp_path / "dataset"
    rc = cli.main(
        ["export", "--projects", *[str(p) for p in projects], "--out", str(out)]
    )
    assert rc == 0
    capsys.readouterr()

    by_stem = {v.stem: v for v in videos}

    def gt_for(record):
        name = record.img_path.rsplit("/", 1)[-1]
        stem = name.split("_frame_")[0]
        video = by_stem[stem]
        return video.gt_position(video.frame_index(name))

    train = cio.read_pose_records((out / "image_train_all.txt").read_text())
    test = cio.read_pose_records((out / "image_test_all.txt").read_text())
    assert len(train) == 63  # 30 + 30 + 3 densified
    assert len(test) == 30
    worst = 0.0
    for rec in train + test:
        worst = max(worst, float(np.abs(rec.t - gt_for(rec)).max()))
    assert worst < 1e-6

    # retrieval baseline over synthetic renders of the train poses
    db = [
        (
            ev.grayscale_grid_descriptor(scene_utils.render_view(rec.t)),
            geo.Pose6DoF(rec.t, rec.q),
        )
        for rec in train
    ]
    queries, gt_records, spacing_px = [], [], 0.0
    for video in videos[:2]:
        frames = list(range(0, video_frames_end(video), 16))
        for i, (a, b) in enumerate(zip(frames, frames[1:])):
            pa, pb = video.gt_position(a), video.gt_position(b)
            spacing_px = max(spacing_px, float(np.linalg.norm(pa - pb)))
            mid = (a + b) // 2
            path = f"heldout/{video.stem}_q{i:03d}.jpg"
            gt_records.append(
                cio.PoseRecord(path, len(gt_records), video.gt_orientation_c2w(), video.gt_position(mid))
            )
            queries.append(path)
    preds = []
    for rec in gt_records:
        view = scene_utils.render_view(rec.t)
        found = ev.baseline_localize(ev.grayscale_grid_descriptor(view), db, k=1)
        preds.append(cio.PoseRecord(rec.img_path, rec.img_id, found.orientation, found.position))

    preds_file = tmp_path / "preds.txt"
    gts_file = tmp_path / "gts.txt"
    preds_file.write_text(cio.write_pose_records(preds, "held-out predictions"))
    gts_file.write_text(cio.write_pose_records(gt_records, "held-out ground truth"))
    report_dir = tmp_path / "report"
    rc = cli.main(
        [
            "evaluate",
            "--predictions",
            str(preds_file),
            "--ground-truth",
            str(gts_file),
            "--meters-per-pixel",
            str(scene_utils.MPP),
            "--out-dir",
            str(report_dir),
        ]
    )
    assert rc == 0
    capsys.readouterr()
    header, row = (report_dir / "summary.csv").read_text().strip().splitlines()
    median_trans = float(dict(zip(header.split(","), row.split(",")))["median_trans_m"])
    spacing_m = spacing_px * scene_utils.MPP
    assert median_trans <= spacing_m
    elapsed = time.perf_counter() - t0
    assert elapsed < 30.0
    report(
        6,
        elapsed,
        f"poses match GT to {worst:.1e} plan units; baseline median "
        f"{median_trans:.3f}m <= frame spacing {spacing_m:.3f}m over {len(preds)} queries",
    )


def video_frames_end(video):
    return int(video.fps * video.duration)


def test_criterion_7_poi_oracle_equivalence():
    """pois_near equals the brute-force labeled-pixel scan on 50 fixtures."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(207)
    total_hits = 0
    for _ in range(50):
        plan = random_plan(rng, size=256)
        pose = random_horizontal_pose(rng, plan)
        radius = float(rng.uniform(0.5, 8.0))
        fov = float(rng.uniform(20.0, 360.0))
        got = poi_mod.pois_near(plan, pose, radius=radius, fov=fov)
        want = brute_force_hits(plan, pose, radius, fov)
        assert [h.poi_id for h in got] == [h.poi_id for h in want]
        for a, b in zip(got, want):
            assert abs(a.distance - b.distance) <= 1e-9
            assert abs(a.bearing - b.bearing) <= 1e-9
        total_hits += len(got)
    elapsed = time.perf_counter() - t0
    assert elapsed < 10.0
    report(7, elapsed, f"50 fixtures, {total_hits} hits, zero discrepancies")


def test_criterion_8_split_correctness():
    """Dates route records to train/test/neither on a 3-project fixture."""
    t0 = time.perf_counter()
    videos = [
        scene_utils.ScriptedVideo(stem="HAND_20231220_141254", warp_seed=1),
        scene_utils.ScriptedVideo(stem="HAND_20240514_085138", warp_seed=2),
        scene_utils.ScriptedVideo(stem="HAND_20240420_120000", warp_seed=3),
    ]
    models = []
    for video in videos:
        frames = list(range(0, video_frames_end(video), 16))
        models.append(scene_utils.plan_frame_model(video, frames))
    train, test = pl.build_floor_dataset(models, pl.DatasetSplit())
    assert len(train) == len(models[0].images)
    assert all("20231220" in r.img_path for r in train)
    assert len(test) == len(models[1].images)
    assert all("20240514" in r.img_path for r in test)
    total = sum(len(m.images) for m in models)
    assert total - len(train) - len(test) == len(models[2].images)
    # boundary documentation: before the cutoff datetime goes to train
    assert datetime(2023, 12, 20) < pl.TRAIN_CUTOFF_DEFAULT
    assert datetime(2024, 5, 14) >= pl.TEST_START_DEFAULT
    elapsed = time.perf_counter() - t0
    report(
        8,
        elapsed,
        f"train {len(train)}, test {len(test)}, dropped {total - len(train) - len(test)}",
    )
