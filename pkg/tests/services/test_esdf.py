# tests/services/test_esdf.py
import numpy as np
import pytest
from numpy.testing import assert_allclose

from app.errors import DomainError
from app.services.esdf import build_esdf, chord_features, in_bounds, query_sdf, query_sdf_batch
from app.services.geometry import point_in_polygon, workspace_sdf


def test_grid_covers_workspace(box_grid):
    assert box_grid.shape == (101, 101)
    xs, ys = box_grid.sample_points()
    assert xs[0, -1] == pytest.approx(10.0)
    assert ys[-1, 0] == pytest.approx(10.0)


def test_resolution_limit(box_workspace):
    with pytest.raises(DomainError):
        build_esdf(box_workspace, 3.0)
    with pytest.raises(DomainError):
        build_esdf(box_workspace, 0.0)
    assert build_esdf(box_workspace, 2.5).shape == (5, 5)


def test_query_at_sample_points_is_exact(box_grid):
    dist, normal = query_sdf(box_grid, (7.0, 5.0))
    assert dist == pytest.approx(1.0, abs=1e-9)
    assert_allclose(normal, [1.0, 0.0], atol=1e-9)
    dist, normal = query_sdf(box_grid, (5.0, 2.0))
    assert dist == pytest.approx(2.0, abs=1e-9)
    assert_allclose(normal, [0.0, -1.0], atol=1e-9)


def test_bilinear_error_is_bounded_by_resolution(box_workspace, box_grid):
    pts = np.random.default_rng(0).uniform(0, 10, size=(1000, 2))
    dist, normal, _ = query_sdf_batch(box_grid, pts)
    assert np.max(np.abs(dist - workspace_sdf(box_workspace, pts))) <= box_grid.resolution
    assert_allclose(np.linalg.norm(normal, axis=1), 1.0, atol=1e-9)


def test_value_gradient_matches_finite_difference(box_grid):
    p = np.array([[7.23, 2.61]])
    _, _, grad = query_sdf_batch(box_grid, p)
    h = 1e-5
    fx = (query_sdf_batch(box_grid, p + [h, 0])[0] - query_sdf_batch(box_grid, p - [h, 0])[0]) / (2 * h)
    fy = (query_sdf_batch(box_grid, p + [0, h])[0] - query_sdf_batch(box_grid, p - [0, h])[0]) / (2 * h)
    assert_allclose(grad[0], [fx[0], fy[0]], atol=1e-6)


def test_out_of_bounds_query_raises(box_grid):
    assert in_bounds(box_grid, [(10.0, 10.0)])[0]
    assert not in_bounds(box_grid, [(10.1, 5.0)])[0]
    with pytest.raises(DomainError, match="outside"):
        query_sdf(box_grid, (-0.5, 5.0))
    with pytest.raises(DomainError):
        query_sdf_batch(box_grid, [(1.0, 1.0), (np.nan, 1.0)])


def test_flat_field_falls_back_to_default_normal(empty_grid):
    _, normal = query_sdf(empty_grid, (3.3, 4.4))
    assert_allclose(normal, [1.0, 0.0])


def test_chord_features_length_and_pooled_stats(box_grid):
    feats = chord_features(box_grid, (1.0, 1.0), (9.0, 9.0), 5)
    assert feats.shape == (3 * 5 + 5,)
    # the middle sample is the obstacle center
    dists = feats[: 3 * 5 : 3]
    assert dists[2] == pytest.approx(-1.0, abs=1e-9)
    assert dists.min() < 0
    assert feats[-4] == pytest.approx(box_grid.values.min())
    assert 0 < feats[-1] < 1


def test_sign_matches_obstacle_membership(box_workspace, box_grid):
    pts = np.random.default_rng(1).uniform(0, 10, size=(10000, 2))
    exact = workspace_sdf(box_workspace, pts)
    keep = np.abs(exact) > box_grid.resolution
    dist, _, _ = query_sdf_batch(box_grid, pts[keep])
    inside = point_in_polygon(box_workspace.obstacles[0], pts[keep])
    assert keep.sum() > 9000
    np.testing.assert_array_equal(dist < 0, inside)
    assert np.all(dist[~inside] > 0)


def _angles_to_finite_difference(grid, pts):
    h = grid.resolution / 4
    _, normal, _ = query_sdf_batch(grid, pts)
    fx = (query_sdf_batch(grid, pts + [h, 0])[0] - query_sdf_batch(grid, pts - [h, 0])[0]) / (2 * h)
    fy = (query_sdf_batch(grid, pts + [0, h])[0] - query_sdf_batch(grid, pts - [0, h])[0]) / (2 * h)
    fd = np.stack([fx, fy], axis=1)
    fd /= np.linalg.norm(fd, axis=1, keepdims=True)
    return np.degrees(np.arccos(np.clip(np.sum(normal * fd, axis=1), -1.0, 1.0)))


def test_normals_follow_finite_differences_along_faces(box_workspace, box_grid):
    res = box_grid.resolution
    pts = np.random.default_rng(2).uniform(0.5, 9.5, size=(10000, 2))
    exact = workspace_sdf(box_workspace, pts)
    x, y = pts[:, 0], pts[:, 1]
    beside = (x > 4 + 3 * res) & (x < 6 - 3 * res)
    level = (y > 4 + 3 * res) & (y < 6 - 3 * res)
    # outside, facing one edge away from its end points
    faces = (exact > 2 * res) & (beside ^ level)
    assert faces.sum() > 1000
    assert np.max(_angles_to_finite_difference(box_grid, pts[faces])) < 5.0

    # inside, with the nearest edge well ahead of the second nearest
    pts = np.random.default_rng(4).uniform(4.0, 6.0, size=(4000, 2))
    x, y = pts[:, 0], pts[:, 1]
    depth = np.sort(np.stack([x - 4, 6 - x, y - 4, 6 - y], axis=1), axis=1)
    interior = (depth[:, 0] > 2 * res) & (depth[:, 1] - depth[:, 0] > 5 * res)
    assert interior.sum() > 100
    assert np.max(_angles_to_finite_difference(box_grid, pts[interior])) < 5.0


def test_normals_follow_finite_differences_around_corners(box_workspace, box_grid):
    res = box_grid.resolution
    pts = np.random.default_rng(3).uniform(0.5, 9.5, size=(10000, 2))
    exact = workspace_sdf(box_workspace, pts)
    x, y = pts[:, 0], pts[:, 1]
    corner = ((x < 4) | (x > 6)) & ((y < 4) | (y > 6))
    keep = corner & (exact > 10 * res)
    assert keep.sum() > 1000
    assert np.max(_angles_to_finite_difference(box_grid, pts[keep])) < 5.0
