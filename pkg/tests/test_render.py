"""Tests for meshes, OBJ parsing and the z-buffer rasterizer."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from imanifold.errors import InvalidMeshError, ObjParseError, WrongGridKindError
from imanifold.render import (
    CameraConfig,
    LightConfig,
    TriMesh,
    empty_mesh,
    load_obj,
    make_icosphere,
    make_prism,
    render,
    render_illumination_set,
    render_pose_set,
    triangle_shading,
)
from imanifold.sampling import hopf_to_rotation, sample_lights, sample_so2

CAM = CameraConfig()
LIGHT = LightConfig()

CUBE_OBJ = """\
# unit cube, quads
v 0 0 0
v 1 0 0
v 1 1 0
v 0 1 0
v 0 0 1
v 1 0 1
v 1 1 1
v 0 1 1
f 1 4 3 2
f 5 6 7 8
f 1 2 6 5
f 2 3 7 6
f 3 4 8 7
f 4 1 5 8
"""


def ray_cast_oracle(mesh, pose, cam, light, margin=1e-6):
    """Per-pixel brute force: intersect the pixel-center ray with every triangle.

    Returns the image and a mask of pixels whose winner is unambiguous (the ray
    is not within ``margin`` of any hit triangle's edge).
    """
    D = cam.image_size
    verts = mesh.vertices @ pose.T
    shade = triangle_shading(mesh, pose, cam, light)
    eye = np.array([0.0, -cam.distance, 0.0])
    img = np.zeros((D, D))
    ok = np.ones((D, D), dtype=bool)
    k = cam.sensor_width / (D * cam.focal_length)
    for r in range(D):
        for c in range(D):
            d = np.array([(c + 0.5 - D / 2) * k, 1.0, -(r + 0.5 - D / 2) * k])
            best, best_t = 0.0, np.inf
            for t, (a, b, cc) in enumerate(mesh.triangles):
                p0, p1, p2 = verts[a], verts[b], verts[cc]
                # solve eye + s d = p0 + u (p1 - p0) + v (p2 - p0)
                M = np.column_stack([d, p0 - p1, p0 - p2])
                if abs(np.linalg.det(M)) < 1e-14:
                    continue
                s, u, v = np.linalg.solve(M, p0 - eye)
                bary = (1 - u - v, u, v)
                if min(bary) < -margin:
                    continue
                if min(bary) < margin:
                    ok[r, c] = False
                if s < best_t:
                    best_t, best = s, shade[t]
            img[r, c] = best
    return img, ok


class TestMeshes:
    def test_prism_four(self):
        m = make_prism(4)
        assert len(m.vertices) == 8 and len(m.triangles) == 12

    def test_prism_thousand(self):
        m = make_prism(1000)
        assert len(m.vertices) == 2000
        assert len(m.triangles) == 2 * 1000 + 2 * 998

    @given(st.integers(3, 60), st.floats(0.1, 5), st.floats(0.1, 5))
    def test_prism_geometry(self, n, r, h):
        m = make_prism(n, r, h)
        np.testing.assert_allclose(np.hypot(m.vertices[:, 0], m.vertices[:, 1]), r)
        np.testing.assert_allclose(np.abs(m.vertices[:, 2]), h / 2)
        assert len(m.triangles) == 2 * n + 2 * (n - 2)

    def test_prism_normals_point_outward(self):
        m = make_prism(7)
        cent = m.vertices[m.triangles].mean(axis=1)
        assert np.all(np.einsum("ij,ij->i", m.normals, cent) > 0)

    def test_prism_invalid(self):
        with pytest.raises(InvalidMeshError):
            make_prism(2)

    def test_degenerate_triangle_rejected(self):
        with pytest.raises(InvalidMeshError):
            TriMesh(np.array([[0, 0, 0], [1, 0, 0], [2, 0, 0]]), np.array([[0, 1, 2]]))

    def test_index_out_of_range(self):
        with pytest.raises(InvalidMeshError):
            TriMesh(np.eye(3), np.array([[0, 1, 3]]))

    def test_icosphere_on_sphere(self):
        m = make_icosphere(2)
        np.testing.assert_allclose(np.linalg.norm(m.vertices, axis=1), 1.0)
        assert len(m.triangles) == 20 * 16


class TestObj:
    def test_single_triangle(self):
        m = load_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n")
        assert len(m.triangles) == 1

    def test_quad_fan(self):
        m = load_obj("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n")
        assert len(m.triangles) == 2

    def test_cube(self):
        m = load_obj(CUBE_OBJ)
        assert len(m.vertices) == 8 and len(m.triangles) == 12
        assert m.bounding_radius == pytest.approx(1.0)
        np.testing.assert_allclose(m.vertices.mean(axis=0), 0, atol=1e-15)

    def test_slash_and_negative_indices(self):
        m = load_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nvn 0 0 1\nf -3/1/1 -2//1 -1\n", normalize=False)
        np.testing.assert_array_equal(m.triangles, [[0, 1, 2]])

    def test_parse_error_line_number(self):
        with pytest.raises(ObjParseError, match="line 2"):
            load_obj("v 0 0 0\nv 1 x 0\nv 0 1 0\nf 1 2 3\n")
        with pytest.raises(ObjParseError, match="line 4"):
            load_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 9\n")

    def test_empty_mesh_error(self):
        with pytest.raises(InvalidMeshError):
            load_obj("# nothing\nv 0 0 0\n")

    def test_degenerate_faces_dropped(self):
        m = load_obj("v 0 0 0\nv 1 0 0\nv 2 0 0\nv 0 1 0\nf 1 2 3\nf 1 2 4\n")
        assert len(m.triangles) == 1


class TestCameraConfig:
    @pytest.mark.parametrize("kw", [{"distance": 0}, {"focal_length": -1}, {"image_size": 8}])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            CameraConfig(**kw)

    def test_light_budget(self):
        with pytest.raises(ValueError):
            LightConfig(ambient=0.5, diffuse=0.6)


class TestRender:
    def test_empty_mesh_black(self):
        assert not render(empty_mesh(), np.eye(3), CAM, LIGHT).any()

    def test_deterministic(self):
        R = hopf_to_rotation(0.7, 1.1, 2.3)
        a = render(make_prism(6), R, CAM, LIGHT)
        b = render(make_prism(6), R, CAM, LIGHT)
        assert a.tobytes() == b.tobytes()

    @given(st.floats(0, np.pi), st.floats(0, 6.28), st.floats(0, 6.28))
    @settings(max_examples=30, deadline=None)
    def test_intensity_range(self, t, p, s):
        img = render(make_prism(5), hopf_to_rotation(t, p, s), CAM, LIGHT)
        assert img.shape == (64, 64)
        assert img.min() >= 0 and img.max() <= 1
        fg = img[img > 0]
        assert fg.size and fg.min() >= LIGHT.ambient - 1e-12

    @pytest.mark.parametrize("mesh,pose", [
        (make_prism(4), hopf_to_rotation(np.pi / 4, 0, 0.4)),
        (make_prism(7), hopf_to_rotation(1.0, 2.0, 3.0)),
        (make_icosphere(1), np.eye(3)),
    ])
    def test_zbuffer_matches_ray_cast(self, mesh, pose):
        cam = CameraConfig(distance=3.0, image_size=16)
        img = render(mesh, pose, cam, LIGHT)
        ref, ok = ray_cast_oracle(mesh, pose, cam, LIGHT)
        assert ok.mean() > 0.8
        np.testing.assert_array_equal(img[ok], ref[ok])

    def test_distance_area_scaling(self):
        # similar triangles: doubling the distance quarters the projected area
        pose = hopf_to_rotation(np.pi / 4, 0, 0.3)
        near = render(make_prism(4), pose, CameraConfig(distance=4.0, image_size=128), LIGHT)
        far = render(make_prism(4), pose, CameraConfig(distance=8.0, image_size=128), LIGHT)
        ratio = (near > 0).sum() / (far > 0).sum()
        assert ratio == pytest.approx(4.0, rel=0.15)

    def test_light_dependence(self):
        a = render(make_icosphere(2), np.eye(3), CAM, LightConfig(position=(3, -3, 0)))
        b = render(make_icosphere(2), np.eye(3), CAM, LightConfig(position=(-3, -3, 0)))
        assert np.array_equal(a > 0, b > 0)
        assert not np.array_equal(a, b)
        np.testing.assert_allclose(a, b[:, ::-1], atol=1e-12)


class TestImageSets:
    def test_pose_set_count(self):
        assert render_pose_set(make_prism(4), sample_so2(500), CAM, LIGHT).shape == (500, 64, 64)

    @pytest.mark.parametrize("sides", [4, 5, 10])
    def test_prism_period(self, sides):
        ims = render_pose_set(make_prism(sides), sample_so2(500), CAM, LIGHT)
        step = 500 // sides
        assert np.abs(ims - np.roll(ims, -step, axis=0)).max() < 2 / 255

    def test_identity_node(self):
        g = sample_so2(8, theta=0.0)
        ims = render_pose_set(make_prism(5), g, CAM, LIGHT)
        np.testing.assert_array_equal(ims[0], render(make_prism(5), np.eye(3), CAM, LIGHT))

    def test_threads_bit_identical(self):
        g = sample_so2(24)
        a = render_pose_set(make_prism(6), g, CAM, LIGHT, workers=1)
        b = render_pose_set(make_prism(6), g, CAM, LIGHT, workers=4)
        assert a.tobytes() == b.tobytes()

    def test_pose_set_rejects_lights(self):
        with pytest.raises(WrongGridKindError):
            render_pose_set(make_prism(4), sample_lights(5), CAM, LIGHT)

    def test_illumination_count(self):
        assert render_illumination_set(make_prism(4), sample_lights(500), CAM, LIGHT).shape[0] == 500

    def test_illumination_rejects_rotations(self):
        with pytest.raises(WrongGridKindError):
            render_illumination_set(make_prism(4), sample_so2(5), CAM, LIGHT)

    def test_sphere_mirror_symmetry(self):
        # mirroring x maps a light at angle a to angle pi - a
        n = 40
        ims = render_illumination_set(make_icosphere(2), sample_lights(n), CAM, LIGHT)
        for i in range(n):
            j = (n // 2 - i) % n
            assert np.abs(ims[i][:, ::-1] - ims[j]).max() < 2 / 255

    def test_repeated_light_identical(self):
        g = sample_lights(4)
        a = render_illumination_set(make_prism(4), g, CAM, LIGHT)
        b = render_illumination_set(make_prism(4), g, CAM, LIGHT)
        assert a.tobytes() == b.tobytes()
