import json

import numpy as np
import pytest

from rvkit.boundary import (BoundaryError, RoundSphere, build_curve, circle, ellipse,
                            load_boundary, sphere_area)


def test_circle_geometry():
    b = circle(2.0, P=64)
    assert b.length == pytest.approx(4 * np.pi, rel=1e-12)
    np.testing.assert_allclose(np.linalg.norm(b.kappa, axis=1), 0.5, atol=1e-10)
    # the frame is orthonormal
    np.testing.assert_allclose(np.einsum("pi,pi->p", b.tangent, b.normals[:, 0]), 0,
                               atol=1e-12)


def test_ellipse_curvature_extremes():
    b = ellipse(2.0, 1.0, P=128)
    k = np.abs(b.kappa[:, 0])
    assert k.max() == pytest.approx(2.0, rel=1e-6)
    assert k.min() == pytest.approx(0.25, rel=1e-6)


def test_space_curve_normals_are_parallel_transported():
    t = 2 * np.pi * np.arange(96) / 96
    pts = np.stack([np.cos(t), np.sin(t), 0.3 * np.sin(2 * t)], axis=1)
    b = build_curve(pts, 96)
    assert b.normals.shape == (96, 2, 3)
    G = np.einsum("pij,pkj->pik", b.normals, b.normals)
    np.testing.assert_allclose(G, np.broadcast_to(np.eye(2), G.shape), atol=1e-10)
    np.testing.assert_allclose(b.twist, -b.twist.T, atol=1e-12)


def test_integration_weights():
    b = circle(1.0, P=32)
    s = b.s
    assert b.integrate(np.cos(s) ** 2) == pytest.approx(np.pi, rel=1e-12)
    assert b.integrate(3.0) == pytest.approx(6 * np.pi)


def test_round_sphere():
    S = RoundSphere(2.0, 4)
    assert S.dim == 3
    assert S.volume == pytest.approx(sphere_area(3) * 8)
    assert S.mean_curvature()[0] == pytest.approx(-1.5)
    with pytest.raises(BoundaryError):
        RoundSphere(-1.0, 2)
    with pytest.raises(BoundaryError):
        RoundSphere(1.0, 2, 2)


@pytest.mark.parametrize("pts", [np.zeros((20, 2)), np.ones((5, 2)), np.zeros(10)])
def test_degenerate_curves_rejected(pts):
    with pytest.raises(BoundaryError):
        build_curve(pts)


def test_self_intersection_rejected():
    t = 2 * np.pi * np.arange(64) / 64
    figure_eight = np.stack([np.sin(t), np.sin(t) * np.cos(t)], axis=1)
    with pytest.raises(BoundaryError):
        build_curve(figure_eight)


def test_load_boundary(tmp_path):
    assert isinstance(load_boundary({"R": 1.0, "n": 3}), RoundSphere)
    t = 2 * np.pi * np.arange(32) / 32
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"points": np.stack([np.cos(t), np.sin(t)], 1).tolist()}))
    b = load_boundary(str(path))
    assert b.length == pytest.approx(2 * np.pi, rel=1e-10)
    with pytest.raises(BoundaryError):
        load_boundary({"foo": 1})
