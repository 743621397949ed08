"""Triangle meshes and a small z-buffered software rasterizer.

The camera sits at ``(0, -distance, 0)`` looking at the origin with ``+z`` up, so
image columns follow world ``+x`` and image rows follow world ``-z``.  Each
triangle is flat shaded with a constant ambient term plus a Lambertian term from
a single point light; there are no shadows.  Pixels are sampled at their
centers with no anti-aliasing, so renders are bit-reproducible.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import InvalidMeshError, ObjParseError, WrongGridKindError
from .sampling import LIGHT, SampleGrid

log = logging.getLogger(__name__)

MIN_TRIANGLE_AREA = 1e-12


@dataclass(frozen=True, eq=False)
class TriMesh:
    vertices: np.ndarray
    triangles: np.ndarray
    normals: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        v = np.ascontiguousarray(np.asarray(self.vertices, dtype=float).reshape(-1, 3))
        t = np.ascontiguousarray(np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3))
        if t.size and (t.min() < 0 or t.max() >= len(v)):
            raise InvalidMeshError("triangle index out of range")
        cross = np.cross(v[t[:, 1]] - v[t[:, 0]], v[t[:, 2]] - v[t[:, 0]])
        norm = np.linalg.norm(cross, axis=1)
        if np.any(0.5 * norm <= MIN_TRIANGLE_AREA):
            raise InvalidMeshError("mesh contains a degenerate triangle")
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)
        object.__setattr__(self, "normals", cross / np.where(norm > 0, norm, 1.0)[:, None])

    @property
    def bounding_radius(self) -> float:
        if len(self.vertices) == 0:
            return 0.0
        return float(np.linalg.norm(self.vertices, axis=1).max())


def empty_mesh() -> TriMesh:
    return TriMesh(np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64))


@dataclass(frozen=True)
class CameraConfig:
    """Pinhole camera on the ``-y`` axis.

    ``sensor_width`` is the width of the focal plane (same units as
    ``focal_length``) mapped onto ``image_size`` pixels.
    """

    distance: float = 4.0
    focal_length: float = 1.0
    image_size: int = 64
    sensor_width: float = 1.0

    def __post_init__(self):
        if self.distance <= 0 or self.focal_length <= 0 or self.sensor_width <= 0:
            raise ValueError("camera distance, focal length and sensor width must be positive")
        if self.image_size < 16:
            raise ValueError(f"image_size must be >= 16, got {self.image_size}")


@dataclass(frozen=True)
class LightConfig:
    position: tuple = (1.0, -4.0, 3.0)
    ambient: float = 0.25
    diffuse: float = 0.65

    def __post_init__(self):
        if not (0 <= self.ambient <= 1 and 0 <= self.diffuse <= 1):
            raise ValueError("ambient and diffuse must lie in [0, 1]")
        if self.ambient + self.diffuse > 1 + 1e-12:
            raise ValueError("ambient + diffuse must not exceed 1")


def make_prism(sides: int, radius: float = 1.0, height: float = 1.0) -> TriMesh:
    """Right prism over a regular polygon, caps in the planes ``z = +-height/2``."""
    if sides < 3:
        raise InvalidMeshError(f"a prism needs at least 3 sides, got {sides}")
    if radius <= 0 or height <= 0:
        raise InvalidMeshError("prism radius and height must be positive")
    a = 2.0 * np.pi * np.arange(sides) / sides
    ring = np.column_stack([radius * np.cos(a), radius * np.sin(a)])
    bottom = np.column_stack([ring, np.full(sides, -height / 2)])
    top = np.column_stack([ring, np.full(sides, height / 2)])
    verts = np.vstack([bottom, top])
    tris = []
    for k in range(sides):
        k1 = (k + 1) % sides
        tris.append((k, k1, sides + k1))
        tris.append((k, sides + k1, sides + k))
    for k in range(1, sides - 1):
        tris.append((0, k + 1, k))
        tris.append((sides, sides + k, sides + k + 1))
    return TriMesh(verts, np.array(tris))


def make_icosphere(subdivisions: int = 2, radius: float = 1.0) -> TriMesh:
    """Geodesic sphere; symmetric under each coordinate-plane reflection."""
    g = (1.0 + math.sqrt(5.0)) / 2.0
    verts = [
        (-1, g, 0), (1, g, 0), (-1, -g, 0), (1, -g, 0),
        (0, -1, g), (0, 1, g), (0, -1, -g), (0, 1, -g),
        (g, 0, -1), (g, 0, 1), (-g, 0, -1), (-g, 0, 1),
    ]
    faces = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    verts = [np.array(v, dtype=float) / np.linalg.norm(v) for v in verts]
    for _ in range(subdivisions):
        cache = {}

        def midpoint(i, j):
            key = (min(i, j), max(i, j))
            if key not in cache:
                m = verts[i] + verts[j]
                verts.append(m / np.linalg.norm(m))
                cache[key] = len(verts) - 1
            return cache[key]

        new_faces = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new_faces
    return TriMesh(radius * np.array(verts), np.array(faces))


def _parse_index(token: str, n_vertices: int, lineno: int) -> int:
    head = token.split("/")[0]
    try:
        idx = int(head)
    except ValueError:
        raise ObjParseError(lineno, f"bad face index {token!r}") from None
    if idx == 0:
        raise ObjParseError(lineno, "face index 0 is invalid in OBJ")
    idx = idx - 1 if idx > 0 else n_vertices + idx
    if not 0 <= idx < n_vertices:
        raise ObjParseError(lineno, f"face index {token!r} out of range")
    return idx


def load_obj(text: str, normalize: bool = True) -> TriMesh:
    """Parse ``v``/``f`` records of a Wavefront OBJ document.

    Polygons are fan-triangulated and degenerate triangles are dropped.  With
    ``normalize`` the vertices are moved to have centroid at the origin and
    scaled to a bounding radius of 1.  Other record types are ignored.
    """
    verts, tris = [], []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if parts[0] == "v":
            if len(parts) < 4:
                raise ObjParseError(lineno, "vertex record needs 3 coordinates")
            try:
                verts.append([float(x) for x in parts[1:4]])
            except ValueError:
                raise ObjParseError(lineno, "non-numeric vertex coordinate") from None
        elif parts[0] == "f":
            if len(parts) < 4:
                raise ObjParseError(lineno, "face record needs at least 3 vertices")
            idx = [_parse_index(tok, len(verts), lineno) for tok in parts[1:]]
            for k in range(1, len(idx) - 1):
                tris.append((idx[0], idx[k], idx[k + 1]))
    if not verts or not tris:
        raise InvalidMeshError("OBJ document contains no faces")
    v = np.array(verts, dtype=float)
    t = np.array(tris, dtype=np.int64)
    area = 0.5 * np.linalg.norm(np.cross(v[t[:, 1]] - v[t[:, 0]], v[t[:, 2]] - v[t[:, 0]]), axis=1)
    keep = area > MIN_TRIANGLE_AREA
    if not keep.all():
        log.warning("dropping %d degenerate triangles", int((~keep).sum()))
        t = t[keep]
    if len(t) == 0:
        raise InvalidMeshError("OBJ document contains only degenerate faces")
    if normalize:
        v = v - v.mean(axis=0)
        r = np.linalg.norm(v, axis=1).max()
        if r <= 0:
            raise InvalidMeshError("all vertices coincide")
        v = v / r
    return TriMesh(v, t)


def read_obj(path) -> TriMesh:
    with open(path) as fh:
        return load_obj(fh.read())


@njit(cache=True, nogil=True)
def _rasterize(px, py, inv_depth, tris, shade, size, img, zbuf):
    for t in range(tris.shape[0]):
        i0, i1, i2 = tris[t, 0], tris[t, 1], tris[t, 2]
        x0, y0, x1, y1, x2, y2 = px[i0], py[i0], px[i1], py[i1], px[i2], py[i2]
        area = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0)
        if abs(area) < 1e-12:
            continue
        c_lo = max(0, int(math.ceil(min(x0, x1, x2) - 0.5)))
        c_hi = min(size - 1, int(math.floor(max(x0, x1, x2) - 0.5)))
        r_lo = max(0, int(math.ceil(min(y0, y1, y2) - 0.5)))
        r_hi = min(size - 1, int(math.floor(max(y0, y1, y2) - 0.5)))
        for r in range(r_lo, r_hi + 1):
            cy = r + 0.5
            for c in range(c_lo, c_hi + 1):
                cx = c + 0.5
                w0 = ((x1 - cx) * (y2 - cy) - (x2 - cx) * (y1 - cy)) / area
                w1 = ((x2 - cx) * (y0 - cy) - (x0 - cx) * (y2 - cy)) / area
                w2 = ((x0 - cx) * (y1 - cy) - (x1 - cx) * (y0 - cy)) / area
                if w0 < 0.0 or w1 < 0.0 or w2 < 0.0:
                    continue
                z = w0 * inv_depth[i0] + w1 * inv_depth[i1] + w2 * inv_depth[i2]
                if z > zbuf[r, c]:
                    zbuf[r, c] = z
                    img[r, c] = shade[t]


def project(points: np.ndarray, cam: CameraConfig):
    """World points to ``(col, row, depth)`` in continuous pixel coordinates."""
    depth = points[:, 1] + cam.distance
    scale = cam.focal_length / depth * (cam.image_size / cam.sensor_width)
    col = cam.image_size / 2.0 + points[:, 0] * scale
    row = cam.image_size / 2.0 - points[:, 2] * scale
    return col, row, depth


def triangle_shading(mesh: TriMesh, pose: np.ndarray, cam: CameraConfig, light: LightConfig) -> np.ndarray:
    """Flat-shaded intensity of every triangle under ``pose``.

    Normals are flipped to face the camera so that inconsistent OBJ winding
    does not change the shading of visible faces.
    """
    verts = mesh.vertices @ pose.T
    centroids = verts[mesh.triangles].mean(axis=1)
    normals = mesh.normals @ pose.T
    to_cam = np.array([0.0, -cam.distance, 0.0]) - centroids
    flip = np.einsum("ij,ij->i", normals, to_cam) < 0
    normals[flip] *= -1
    to_light = np.asarray(light.position, dtype=float) - centroids
    to_light /= np.linalg.norm(to_light, axis=1, keepdims=True)
    lambert = np.maximum(0.0, np.einsum("ij,ij->i", normals, to_light))
    return np.clip(light.ambient + light.diffuse * lambert, 0.0, 1.0)


def render(mesh: TriMesh, pose: np.ndarray, cam: CameraConfig, light: LightConfig) -> np.ndarray:
    """Render ``mesh`` rotated by ``pose`` into a ``(D, D)`` float image in [0, 1]."""
    size = cam.image_size
    img = np.zeros((size, size))
    if len(mesh.triangles) == 0:
        return img
    pose = np.asarray(pose, dtype=float)
    verts = mesh.vertices @ pose.T
    col, row, depth = project(verts, cam)
    tris = mesh.triangles
    # crude near-plane handling: drop triangles touching or behind the eye
    visible = (depth[tris] > 1e-9).all(axis=1)
    tris = np.ascontiguousarray(tris[visible])
    shade = triangle_shading(mesh, pose, cam, light)[visible]
    zbuf = np.zeros((size, size))
    _rasterize(col, row, 1.0 / np.where(depth > 1e-9, depth, 1.0), tris, shade, size, img, zbuf)
    return img


def _render_many(mesh, poses, lights, cam, workers):
    jobs = list(zip(poses, lights))
    if workers is None or workers <= 1:
        return np.stack([render(mesh, p, cam, li) for p, li in jobs])
    with ThreadPoolExecutor(workers) as ex:
        return np.stack(list(ex.map(lambda pl: render(mesh, pl[0], cam, pl[1]), jobs)))


def render_pose_set(mesh: TriMesh, grid: SampleGrid, cam: CameraConfig,
                    light: LightConfig, workers: int = 1) -> np.ndarray:
    """One image per rotation node of ``grid``, stacked as ``(n, D, D)``."""
    if not grid.is_rotation:
        raise WrongGridKindError(f"pose sets need a rotation grid, got {grid.topology}")
    poses = grid.rotations()
    return _render_many(mesh, poses, [light] * len(poses), cam, workers)


def render_illumination_set(mesh: TriMesh, grid: SampleGrid, cam: CameraConfig,
                            base_light: LightConfig, workers: int = 1) -> np.ndarray:
    """One image per light position of a light-circle grid, object at identity pose."""
    if grid.topology != LIGHT:
        raise WrongGridKindError(f"illumination sets need a light grid, got {grid.topology}")
    lights = [LightConfig(tuple(float(x) for x in p), base_light.ambient, base_light.diffuse)
              for p in grid.light_positions()]
    poses = [np.eye(3)] * len(lights)
    return _render_many(mesh, poses, lights, cam, workers)
