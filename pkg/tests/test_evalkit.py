import csv

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from PIL import Image
from scipy.spatial.transform import Rotation

from radsurf.evalkit import (MetricReport, chamfer_l1, compare_clouds, curve_and_plot, evaluate, evaluate_field,
                             evaluate_mesh, evaluation_box, extract_mesh, nearest_distances, plot_series,
                             precision_recall_fscore, sample_mesh_points, write_reports)
from radsurf.field import analytic_field
from radsurf.geometry import Aabb, PointCloud, TriangleMesh
from radsurf.trainer import init_state, scene_normalization, train

from conftest import small_config


def brute_nearest(a, b):
    return np.sqrt(((a[:, None, :] - b[None, :, :]) ** 2).sum(-1)).min(axis=1)


def brute_metrics(p, g, tau_cm):
    dpg, dgp = brute_nearest(p, g), brute_nearest(g, p)
    cd = 0.5 * (dpg.mean() + dgp.mean()) * 100
    prec = 100 * np.mean(dpg <= tau_cm / 100)
    rec = 100 * np.mean(dgp <= tau_cm / 100)
    f = 2 * prec * rec / (prec + rec) if prec + rec > 0 else 0.0
    return cd, prec, rec, f


def test_sphere_mesh_vertices_near_radius():
    mesh = extract_mesh(analytic_field("sphere", radius=0.5), Aabb.cube(1.0), 128)
    cell = 2.0 / 128
    r = np.linalg.norm(mesh.vertices, axis=1)
    assert np.abs(r - 0.5).max() <= 2 * cell
    assert len(mesh.faces) > 1000


def test_plane_mesh_vertices_near_height():
    mesh = extract_mesh(analytic_field("plane", normal=(0, 0, 1), offset=0.25), Aabb.cube(1.0), 64)
    assert np.abs(mesh.vertices[:, 2] - 0.25).max() <= 2.0 / 64


def test_no_crossing_gives_empty_mesh():
    mesh = extract_mesh(analytic_field("sphere", center=(5.0, 5.0, 5.0), radius=0.5), Aabb.cube(1.0), 16)
    assert mesh.is_empty
    with pytest.raises(ValueError):
        extract_mesh(analytic_field("sphere"), Aabb.cube(1.0), 4)


def test_mesh_is_denormalized_to_meters(small_bundle):
    norm = scene_normalization(small_bundle)
    mesh = extract_mesh(analytic_field("sphere", radius=0.5), Aabb.cube(1.0), 32, norm)
    r = np.linalg.norm(mesh.vertices - norm.center, axis=1)
    assert np.abs(r - 0.5 * norm.scale).max() <= 2 * 2.0 / 32 * norm.scale


def test_single_triangle_sampling_stays_inside():
    tri = TriangleMesh([[0, 0, 0], [2, 0, 0], [0, 1, 0]], [[0, 1, 2]])
    pts = sample_mesh_points(tri, 5000, 0).points
    assert np.allclose(pts[:, 2], 0)
    assert (pts[:, 0] >= -1e-12).all() and (pts[:, 1] >= -1e-12).all()
    assert (pts[:, 0] / 2 + pts[:, 1] <= 1 + 1e-12).all()
    assert len(sample_mesh_points(tri, 1, 0)) == 1
    np.testing.assert_array_equal(sample_mesh_points(tri, 50, 3).points, sample_mesh_points(tri, 50, 3).points)
    with pytest.raises(ValueError):
        sample_mesh_points(TriangleMesh.empty(), 10)


def test_sampling_is_area_weighted():
    # areas 1 and 3
    mesh = TriangleMesh([[0, 0, 0], [2, 0, 0], [0, 1, 0], [10, 0, 0], [13, 0, 0], [10, 2, 0]],
                        [[0, 1, 2], [3, 4, 5]])
    pts = sample_mesh_points(mesh, 100_000, 0).points
    assert np.mean(pts[:, 0] >= 10) == pytest.approx(0.75, abs=0.03)


def test_chamfer_examples():
    pts = np.random.default_rng(0).normal(size=(50, 3))
    assert chamfer_l1(pts, pts) == 0.0
    assert chamfer_l1([[0, 0, 0]], [[1, 0, 0]]) == pytest.approx(100.0)
    with pytest.raises(ValueError):
        chamfer_l1(np.zeros((0, 3)), pts)


def test_prf_examples():
    rng = np.random.default_rng(1)
    gt = rng.uniform(0, 1, (9, 3))
    assert precision_recall_fscore(gt, gt) == (100.0, 100.0, 100.0)
    assert precision_recall_fscore(gt + [10.0, 0, 0], gt, 100.0) == (0.0, 0.0, 0.0)
    pred = np.vstack([gt, [[50.0, 50.0, 50.0]]])
    p, r, f = precision_recall_fscore(pred, gt, 100.0)
    assert p == pytest.approx(90.0) and r == 100.0
    assert f == pytest.approx(2 * 90 * 100 / 190) and f == pytest.approx(94.74, abs=5e-3)
    with pytest.raises(ValueError):
        precision_recall_fscore(gt, gt, 0.0)


def test_default_threshold_is_one_meter():
    gt = np.zeros((1, 3))
    assert precision_recall_fscore([[0.99, 0, 0]], gt)[0] == 100.0
    assert precision_recall_fscore([[1.01, 0, 0]], gt)[0] == 0.0
    assert compare_clouds([[0.5, 0, 0]], gt).tau == 100.0


def test_metrics_match_brute_force_oracle():
    rng = np.random.default_rng(2)
    for _ in range(100):
        n, m = rng.integers(1, 501, 2)
        p = rng.uniform(-3, 3, (n, 3))
        g = rng.uniform(-3, 3, (m, 3))
        tau = float(rng.uniform(10, 300))
        rep = compare_clouds(p, g, tau)
        cd, prec, rec, f = brute_metrics(p, g, tau)
        assert abs(rep.cd_l1 - cd) <= 1e-9
        assert abs(rep.precision - prec) <= 1e-9 and abs(rep.recall - rec) <= 1e-9
        assert abs(rep.fscore - f) <= 1e-9
        assert abs(chamfer_l1(p, g) - cd) <= 1e-9
        np.testing.assert_allclose(nearest_distances(p, g), brute_nearest(p, g), rtol=0, atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(1, 200), st.floats(1, 200))
def test_precision_recall_monotone_in_threshold(seed, t1, t2):
    rng = np.random.default_rng(seed)
    p, g = rng.normal(size=(40, 3)), rng.normal(size=(30, 3))
    lo, hi = sorted((t1, t2))
    a, b = precision_recall_fscore(p, g, lo), precision_recall_fscore(p, g, hi)
    assert a[0] <= b[0] and a[1] <= b[1]


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_metrics_invariant_under_shared_rigid_motion(seed):
    rng = np.random.default_rng(seed)
    p, g = rng.normal(size=(60, 3)), rng.normal(size=(70, 3))
    rot = Rotation.random(random_state=seed % 2**31).as_matrix()
    t = rng.uniform(-100, 100, 3)
    a = compare_clouds(p, g, 50.0)
    b = compare_clouds(p @ rot.T + t, g @ rot.T + t, 50.0)
    assert abs(a.cd_l1 - b.cd_l1) <= 1e-6
    assert abs(a.fscore - b.fscore) <= 1e-6


def test_chamfer_is_symmetric():
    rng = np.random.default_rng(3)
    p, g = rng.normal(size=(80, 3)), rng.normal(size=(50, 3))
    assert chamfer_l1(p, g) == pytest.approx(chamfer_l1(g, p), abs=1e-12)


def test_gt_self_evaluation_and_half_tau_offset(small_bundle):
    gt = small_bundle.mesh
    rep = evaluate_mesh(gt, gt, 20_000, 100.0)
    assert rep.cd_l1 == 0.0 and rep.fscore == 100.0
    shifted = gt.transformed(np.eye(3), np.array([0.3, 0.4, 0.0]) / np.linalg.norm([0.3, 0.4]) * 0.5)
    rep = evaluate_mesh(shifted, gt, 100_000, 100.0)
    assert rep.precision == 100.0 and rep.recall == 100.0


def test_empty_prediction_is_flagged_not_fatal(small_bundle):
    rep = evaluate_mesh(TriangleMesh.empty(), small_bundle.mesh, 1000)
    assert rep.empty_mesh and rep.fscore == 0.0


def test_training_beats_initialization(small_bundle):
    cfg = small_config(iterations=300, rays_per_iter=128, n_samples=24, eikonal_points=64)
    box = evaluation_box(small_bundle)
    tau = 300.0
    state = init_state(cfg, scene_normalization(small_bundle))
    before, _ = evaluate_field(state.field, scene_normalization(small_bundle), small_bundle.mesh, box, 32, 5000, tau)
    ckpt, _ = train(small_bundle, cfg)
    after = evaluate(ckpt, small_bundle, resolution=32, n_samples=5000, tau_cm=tau)
    assert after.fscore > before.fscore


def test_report_csv(tmp_path):
    rep = compare_clouds(np.zeros((3, 3)), np.ones((2, 3)))
    write_reports([{"variant": "full", **rep.row()}], tmp_path / "r.csv")
    rows = list(csv.DictReader((tmp_path / "r.csv").open()))
    assert len(rows) == 1 and rows[0]["variant"] == "full"
    assert float(rows[0]["cd_l1"]) == pytest.approx(rep.cd_l1)


def test_constant_series_plot(tmp_path):
    paths = plot_series({"a": ([0, 1, 2], [1, 1, 1]), "b": ([0, 1, 2], [2, 2, 2])}, tmp_path / "c", "it", "v")
    assert all(p.exists() and p.stat().st_size > 0 for p in paths)
    assert {p.suffix for p in paths} == {".png", ".svg"}
    with pytest.raises(ValueError):
        plot_series({"a": ([0], [1])}, tmp_path / "x", "it", "v")
    with pytest.raises(ValueError):
        plot_series({}, tmp_path / "x", "it", "v")


def test_monotone_series_has_monotone_pixel_trend(tmp_path):
    xs = list(range(10))
    (png, _) = plot_series({"up": (xs, xs)}, tmp_path / "m", "it", "v")
    img = np.asarray(Image.open(png).convert("RGB")).astype(int)
    # the default first line color is blue-ish: locate its topmost pixel per column
    blue = (img[..., 2] > 150) & (img[..., 0] < 100)
    cols = np.flatnonzero(blue.any(axis=0))
    tops = np.array([np.flatnonzero(blue[:, c])[0] for c in cols])
    left, right = tops[: len(tops) // 4].mean(), tops[-len(tops) // 4:].mean()
    assert right < left  # rising curve means smaller row index on the right


def test_four_variant_legend(tmp_path):
    runs = {name: {"loss": ([0, 1], [1.0, 0.5]), "fscore": ([0, 1], [10.0, 50.0])}
            for name in ("full", "w/o rs", "w/o bd", "w/o both")}
    paths = curve_and_plot(runs, tmp_path)
    svg = (tmp_path / "fscore.svg").read_text()
    assert all(name in svg for name in runs)
    assert len(paths) == 4


def test_metric_report_bounds():
    rep = compare_clouds(np.random.default_rng(4).normal(size=(30, 3)), np.random.default_rng(5).normal(size=(30, 3)))
    assert isinstance(rep, MetricReport)
    for v in (rep.precision, rep.recall, rep.fscore):
        assert 0 <= v <= 100
