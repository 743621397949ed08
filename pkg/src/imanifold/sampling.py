"""Structured pose and light sample sets, their neighbor graphs and registrations.

Rotation grids index SO(3) by Hopf triples ``(theta, phi, psi)``: ``(theta, phi)``
is the zenith/azimuth of the object's internal north pole after the rotation and
``psi`` the spin about the extrinsic z-axis applied first.  At ``theta`` in
``{0, pi}`` the azimuth ``phi`` carries no information (the usual spherical
coordinate degeneracy); such triples are accepted as-is.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .errors import InvalidGridError, UnsupportedRegistrationError

TWO_PI = 2.0 * np.pi
GOLDEN_RATIO = (1.0 + np.sqrt(5.0)) / 2.0

CIRCLE = "circle"
TORUS = "torus"
SO3 = "so3"
LIGHT = "light"
ROTATION_TOPOLOGIES = (CIRCLE, TORUS, SO3)

SO3_CROSS_NEIGHBORS = 4


def rotation_z(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def hopf_to_rotation(theta: float, phi: float, psi: float) -> np.ndarray:
    """Rotation matrix for the Hopf triple ``(theta, phi, psi)``.

    The spin ``Rz(psi)`` is applied first, followed by a tilt of ``theta`` about
    the horizontal axis ``(-sin phi, cos phi, 0)``, so that ``R @ e_z`` points
    in the spherical direction ``(theta, phi)``.
    """
    return hopf_to_rotations(np.array([[theta, phi, psi]]))[0]


def hopf_to_rotations(triples) -> np.ndarray:
    """Vectorized :func:`hopf_to_rotation` over an ``(n, 3)`` array."""
    t = np.asarray(triples, dtype=float).reshape(-1, 3)
    theta, phi, psi = t[:, 0], t[:, 1], t[:, 2]
    ux, uy = -np.sin(phi), np.cos(phi)
    c, s = np.cos(theta), np.sin(theta)
    C = 1.0 - c
    tilt = np.empty((len(t), 3, 3))
    # Rodrigues formula with u_z = 0
    tilt[:, 0, 0] = c + ux * ux * C
    tilt[:, 0, 1] = ux * uy * C
    tilt[:, 0, 2] = uy * s
    tilt[:, 1, 0] = ux * uy * C
    tilt[:, 1, 1] = c + uy * uy * C
    tilt[:, 1, 2] = -ux * s
    tilt[:, 2, 0] = -uy * s
    tilt[:, 2, 1] = ux * s
    tilt[:, 2, 2] = c
    cp, sp = np.cos(psi), np.sin(psi)
    spin = np.zeros((len(t), 3, 3))
    spin[:, 0, 0] = cp
    spin[:, 0, 1] = -sp
    spin[:, 1, 0] = sp
    spin[:, 1, 1] = cp
    spin[:, 2, 2] = 1.0
    return tilt @ spin


def rotation_angle(r1: np.ndarray, r2: np.ndarray) -> float:
    """Geodesic angle between two rotations."""
    cos = (np.trace(r1.T @ r2) - 1.0) / 2.0
    return float(np.arccos(np.clip(cos, -1.0, 1.0)))


@dataclass(frozen=True, eq=False)
class SampleGrid:
    """An ordered finite set of imaging conditions plus its neighbor graph.

    ``nodes`` is an ``(n, 3)`` array of Hopf triples for rotation topologies and
    an ``(n,)`` array of light angles for the ``light`` topology.
    """

    topology: str
    params: dict
    nodes: np.ndarray
    neighbors: tuple
    k_directions: int

    def __len__(self) -> int:
        return len(self.nodes)

    @property
    def n(self) -> int:
        return len(self.nodes)

    @property
    def is_rotation(self) -> bool:
        return self.topology in ROTATION_TOPOLOGIES

    @property
    def intrinsic_dim(self) -> int:
        return {CIRCLE: 1, LIGHT: 1, TORUS: 2, SO3: 3}[self.topology]

    def rotations(self) -> np.ndarray:
        if not self.is_rotation:
            raise InvalidGridError(f"{self.topology} grid has no rotations")
        return hopf_to_rotations(self.nodes)

    def light_positions(self) -> np.ndarray:
        if self.topology != LIGHT:
            raise InvalidGridError(f"{self.topology} grid has no light positions")
        r, h = self.params["radius"], self.params["height"]
        a = self.nodes
        return np.stack([r * np.cos(a), r * np.sin(a), np.full_like(a, h)], axis=1)

    def edges(self) -> set:
        return {(min(i, j), max(i, j)) for i, nb in enumerate(self.neighbors) for j in nb}

    def compatible_with(self, other: "SampleGrid") -> bool:
        return self.topology == other.topology and self.n == other.n and self.params == other.params

    def to_dict(self) -> dict:
        if self.topology == LIGHT:
            nodes = [
                {"angle": float(a), "position": [float(x) for x in p]}
                for a, p in zip(self.nodes, self.light_positions())
            ]
        else:
            nodes = [{"theta": float(t), "phi": float(p), "psi": float(s)} for t, p, s in self.nodes]
        return {
            "topology": self.topology,
            "parameters": dict(self.params),
            "k_directions": self.k_directions,
            "nodes": nodes,
            "neighbors": [list(nb) for nb in self.neighbors],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SampleGrid":
        if d["topology"] == LIGHT:
            nodes = np.array([nd["angle"] for nd in d["nodes"]], dtype=float)
        else:
            nodes = np.array([[nd["theta"], nd["phi"], nd["psi"]] for nd in d["nodes"]], dtype=float)
        return cls(
            topology=d["topology"],
            params=dict(d["parameters"]),
            nodes=nodes,
            neighbors=tuple(tuple(int(j) for j in nb) for nb in d["neighbors"]),
            k_directions=int(d.get("k_directions", 1)),
        )


@dataclass(frozen=True, eq=False)
class Registration:
    """An adjacency-preserving re-indexing: registered points are ``points[permutation]``."""

    permutation: np.ndarray
    direction_class: int
    shifts: tuple = field(default=())


def _cycle_neighbors(n: int) -> tuple:
    return tuple(tuple(sorted({(i - 1) % n, (i + 1) % n})) for i in range(n))


def _torus_neighbors(n_a: int, n_b: int) -> tuple:
    out = []
    for a in range(n_a):
        for b in range(n_b):
            nb = {
                ((a - 1) % n_a) * n_b + b,
                ((a + 1) % n_a) * n_b + b,
                a * n_b + (b - 1) % n_b,
                a * n_b + (b + 1) % n_b,
            }
            out.append(tuple(sorted(nb)))
    return tuple(out)


def sample_so2(n: int, theta: float = np.pi / 4, phi: float = 0.0) -> SampleGrid:
    """Circle of ``n`` evenly spaced spins at a fixed tilt direction."""
    if n < 3:
        raise InvalidGridError(f"circle grid needs n >= 3, got {n}")
    psi = TWO_PI * np.arange(n) / n
    nodes = np.column_stack([np.full(n, theta), np.full(n, phi), psi])
    return SampleGrid(CIRCLE, {"n": n, "theta": theta, "phi": phi}, nodes, _cycle_neighbors(n), 2)


def sample_t2(n_phi: int, n_psi: int, theta: float = np.pi / 4) -> SampleGrid:
    """Torus of tilt azimuths times spins; node ``a * n_psi + b`` is ``(phi_a, psi_b)``."""
    if n_phi < 3 or n_psi < 3:
        raise InvalidGridError(f"torus grid needs both counts >= 3, got ({n_phi}, {n_psi})")
    phi = TWO_PI * np.arange(n_phi) / n_phi
    psi = TWO_PI * np.arange(n_psi) / n_psi
    P, S = np.meshgrid(phi, psi, indexing="ij")
    nodes = np.column_stack([np.full(n_phi * n_psi, theta), P.ravel(), S.ravel()])
    params = {"n_phi": n_phi, "n_psi": n_psi, "theta": theta}
    return SampleGrid(TORUS, params, nodes, _torus_neighbors(n_phi, n_psi), 4)


def fibonacci_sphere(n: int) -> np.ndarray:
    """``(n, 2)`` array of ``(theta, phi)`` on a Fibonacci spiral."""
    if n < 1:
        raise InvalidGridError(f"need n >= 1, got {n}")
    i = np.arange(n)
    z = 1.0 - (2.0 * i + 1.0) / n
    phi = np.mod(TWO_PI * i * GOLDEN_RATIO, TWO_PI)
    return np.column_stack([np.arccos(z), phi])


def spherical_to_cartesian(theta, phi) -> np.ndarray:
    theta, phi = np.asarray(theta), np.asarray(phi)
    return np.stack([np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)], axis=-1)


def sample_so3(n_sphere: int, n_psi: int, n_cross: int = SO3_CROSS_NEIGHBORS) -> SampleGrid:
    """Fibonacci sphere directions, each carrying a circle of ``n_psi`` spins.

    Besides the two in-circle neighbors, every node is joined to the node of
    smallest rotation angle on each of the ``n_cross`` nearest sphere points;
    the resulting graph is symmetrized.
    """
    if n_sphere < 1 or n_psi < 3:
        raise InvalidGridError(f"invalid SO(3) grid counts ({n_sphere}, {n_psi})")
    sphere = fibonacci_sphere(n_sphere)
    psi = TWO_PI * np.arange(n_psi) / n_psi
    nodes = np.column_stack([
        np.repeat(sphere[:, 0], n_psi),
        np.repeat(sphere[:, 1], n_psi),
        np.tile(psi, n_sphere),
    ])
    nb = [set() for _ in range(len(nodes))]
    for p in range(n_sphere):
        for j in range(n_psi):
            nb[p * n_psi + j].update({p * n_psi + (j - 1) % n_psi, p * n_psi + (j + 1) % n_psi})

    s = min(n_cross, n_sphere - 1)
    if s > 0:
        rots = hopf_to_rotations(nodes).reshape(n_sphere, n_psi, 3, 3)
        xyz = spherical_to_cartesian(sphere[:, 0], sphere[:, 1])
        ang = np.arccos(np.clip(xyz @ xyz.T, -1.0, 1.0))
        np.fill_diagonal(ang, np.inf)
        nearest = np.argsort(ang, axis=1, kind="stable")[:, :s]
        for p in range(n_sphere):
            for q in nearest[p]:
                # trace(Rp^T Rq) is monotone decreasing in the rotation angle
                tr = np.einsum("aij,bij->ab", rots[p], rots[q])
                best = np.argmax(tr, axis=1)
                for j in range(n_psi):
                    u, v = p * n_psi + j, q * n_psi + int(best[j])
                    nb[u].add(v)
                    nb[v].add(u)
    params = {"n_sphere": n_sphere, "n_psi": n_psi, "n_cross": n_cross}
    neighbors = tuple(tuple(sorted(int(j) for j in x)) for x in nb)
    return SampleGrid(SO3, params, nodes, neighbors, 1)


def sample_lights(n: int, radius: float = 3.0, height: float = 3.0) -> SampleGrid:
    """Point-light positions evenly spaced on a horizontal circle above the origin."""
    if n < 3:
        raise InvalidGridError(f"light circle needs n >= 3, got {n}")
    if radius <= 0:
        raise InvalidGridError(f"radius must be positive, got {radius}")
    angles = TWO_PI * np.arange(n) / n
    params = {"n": n, "radius": float(radius), "height": float(height)}
    return SampleGrid(LIGHT, params, angles, _cycle_neighbors(n), 2)


def registration_permutations(grid: SampleGrid) -> tuple[np.ndarray, np.ndarray, list]:
    """All restricted registrations of ``grid`` as an array.

    Returns ``(perms, classes, shifts)`` with ``perms`` of shape ``(k * n, n)``
    ordered by direction class, then by shift.
    """
    n = grid.n
    if grid.topology in (CIRCLE, LIGHT):
        idx = np.arange(n)
        perms, classes, shifts = [], [], []
        for c, sign in enumerate((1, -1)):
            for s in range(n):
                perms.append((sign * idx + s) % n)
                classes.append(c)
                shifts.append((s,))
        return np.array(perms), np.array(classes), shifts
    if grid.topology == TORUS:
        na, nb = grid.params["n_phi"], grid.params["n_psi"]
        A, B = np.meshgrid(np.arange(na), np.arange(nb), indexing="ij")
        A, B = A.ravel(), B.ravel()
        perms, classes, shifts = [], [], []
        for c in range(4):
            ea = -1 if c & 2 else 1
            eb = -1 if c & 1 else 1
            for sa in range(na):
                for sb in range(nb):
                    perms.append(((ea * A + sa) % na) * nb + (eb * B + sb) % nb)
                    classes.append(c)
                    shifts.append((sa, sb))
        return np.array(perms), np.array(classes), shifts
    raise UnsupportedRegistrationError(
        f"no restricted registrations for {grid.topology} grids; only the identity is used"
    )


def registration_family(grid: SampleGrid) -> Iterator[Registration]:
    """Enumerate the ``k * n`` adjacency-preserving registrations of ``grid``."""
    perms, classes, shifts = registration_permutations(grid)
    for p, c, s in zip(perms, classes, shifts):
        yield Registration(p, int(c), s)


def identity_registration(grid: SampleGrid) -> Registration:
    return Registration(np.arange(grid.n), 0, ())
