"""Tests for the synthetic ground-truth manifolds."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from imanifold.embed import pairwise_distances
from imanifold.errors import DimensionError, ManifoldError
from imanifold.simdata import (
    DISTORTION,
    add_noise,
    double_saddle,
    lift_and_rotate,
    loop_of_double_saddles,
    random_orthogonal,
)


class TestDoubleSaddle:
    @given(st.integers(8, 400))
    def test_unit_circle_axes(self, n):
        p = double_saddle(n)
        assert np.abs(p.points[:, 0] ** 2 + p.points[:, 1] ** 2 - 1).max() < 1e-12

    def test_size_and_grid(self):
        p = double_saddle(500)
        assert p.points.shape == (500, 4)
        assert p.grid.topology == "circle" and p.grid.n == 500

    def test_first_point(self):
        # the separating term vanishes at psi = 0
        np.testing.assert_allclose(double_saddle(16).points[0], [1, 0, 1, 0.25], atol=1e-15)

    def test_winding_number_two(self):
        p = double_saddle(500)
        ang = np.unwrap(np.arctan2(p.points[:, 1], p.points[:, 0]))
        total = ang[-1] - ang[0] + (ang[1] - ang[0])
        assert total == pytest.approx(4 * np.pi, rel=1e-9)

    def test_loops_separated(self):
        # psi and psi + pi share (x1, x2); the curve itself never self-intersects
        p = double_saddle(500)
        D = pairwise_distances(p.points)
        half = D[np.arange(250), np.arange(250) + 250]
        assert half.min() > 0.1
        off = D + np.eye(500) * 10
        np.fill_diagonal(off[:, 1:], 10)
        np.fill_diagonal(off[1:, :], 10)
        assert off.min() > 1e-3

    def test_third_axis(self):
        p = double_saddle(64)
        psi = p.grid.nodes[:, 2]
        np.testing.assert_allclose(p.points[:, 2], np.cos(4 * psi) + DISTORTION * np.sin(psi))

    def test_invalid(self):
        with pytest.raises(ManifoldError):
            double_saddle(7)


class TestLoop:
    def test_size(self):
        p = loop_of_double_saddles(40, 50)
        assert p.points.shape == (2000, 6)
        assert p.grid.topology == "torus"

    def test_phi_zero_slice(self):
        loop = loop_of_double_saddles(40, 50).points[:50]
        ds = double_saddle(50).points
        np.testing.assert_allclose(loop[:, :3], ds[:, :3], atol=1e-15)
        np.testing.assert_allclose(loop[:, 3], 0.25 * np.cos(2 * np.pi * np.arange(50) / 50), atol=1e-15)
        np.testing.assert_allclose(loop[:, 4:], [[0.25, 0.0]] * 50, atol=1e-15)

    @given(st.integers(8, 30), st.integers(8, 30))
    @settings(max_examples=20)
    def test_fifth_sixth_axes(self, a, b):
        p = loop_of_double_saddles(a, b).points
        assert np.abs(p[:, 4] ** 2 + p[:, 5] ** 2 - 1 / 16).max() < 1e-15

    def test_rotation_about_third_axis(self):
        p = loop_of_double_saddles(10, 12).points
        r = np.hypot(p[:, 0], p[:, 1])
        np.testing.assert_allclose(r, 1.0)

    def test_invalid(self):
        with pytest.raises(ManifoldError):
            loop_of_double_saddles(7, 50)


class TestLiftAndNoise:
    def test_isometry_768(self):
        p = double_saddle(200)
        q = lift_and_rotate(p, 768, seed=3)
        assert q.points.shape == (200, 768)
        assert np.abs(pairwise_distances(p.points) - pairwise_distances(q.points)).max() < 1e-9

    @given(st.integers(0, 10_000))
    @settings(max_examples=10)
    def test_same_dim_preserves_norms(self, seed):
        p = double_saddle(40)
        q = lift_and_rotate(p, 4, seed=seed)
        np.testing.assert_allclose(np.linalg.norm(q.points, axis=1), np.linalg.norm(p.points, axis=1))

    def test_seeded(self):
        p = double_saddle(20)
        assert np.array_equal(lift_and_rotate(p, 30, 5).points, lift_and_rotate(p, 30, 5).points)
        assert not np.array_equal(lift_and_rotate(p, 30, 5).points, lift_and_rotate(p, 30, 6).points)

    def test_too_small(self):
        with pytest.raises(DimensionError):
            lift_and_rotate(double_saddle(20), 3)

    def test_orthogonal(self):
        Q = random_orthogonal(50, np.random.default_rng(0))
        assert np.abs(Q.T @ Q - np.eye(50)).max() < 1e-12

    def test_zero_noise(self):
        p = double_saddle(20)
        assert np.array_equal(add_noise(p, 0.0).points, p.points)

    def test_noise_seeded(self):
        p = double_saddle(20)
        assert np.array_equal(add_noise(p, 0.1, 4).points, add_noise(p, 0.1, 4).points)

    def test_noise_mean(self):
        p = lift_and_rotate(loop_of_double_saddles(40, 50), 768, 0)
        sigma = 0.01
        e = add_noise(p, sigma, seed=1).points - p.points
        assert abs(e.mean()) < 3 * sigma / np.sqrt(e.size)
        assert e.std() == pytest.approx(sigma, rel=0.01)

    def test_negative_sigma(self):
        with pytest.raises(ManifoldError):
            add_noise(double_saddle(20), -1.0)
