"""End-to-end experiments: configs, PCA views, smoothing, joint embedding and artifacts."""
from __future__ import annotations

import contextlib
import dataclasses
import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.sparse import csr_matrix

from . import io
from .embed import DEFAULT_KNN, LatentManifold, embed_vectors, mds_smacof, pairwise_distances
from .errors import ConnectivityError, ManifoldError, StageError
from .render import CameraConfig, LightConfig, TriMesh, make_prism, read_obj, render_illumination_set, render_pose_set
from .sampling import SampleGrid, sample_lights, sample_so2, sample_so3, sample_t2
from .shape import cluster, proximity_embed_2d, shape_distance, shape_distance_matrix
from .simdata import NOISE_SIGMA, SIMULATIONS, add_noise, lift_and_rotate

log = logging.getLogger(__name__)

KINDS = ("so2", "t2", "so3", "illumination", "simulation", "invariance", "joint")
SELF_WEIGHT = 0.5
# SO(3) grids above this size are only run when explicitly requested
LONG_RUN_NODES = 2000

_GRID_DEFAULTS = {
    "so2": {"n": 500},
    "t2": {"n_phi": 40, "n_psi": 50},
    "so3": {"n_sphere": 267, "n_psi": 30},
    "illumination": {"n": 500},
    "invariance": {"n": 500},
    "joint": {"n": 500},
}
_SIM_GRIDS = {"double_saddle": {"n": 500}, "loop_of_double_saddles": {"n_phi": 40, "n_psi": 50}}
_SIM_DIMS = {"double_saddle": 4, "loop_of_double_saddles": 6}
# kNN size for the graph baselines; k=10 leaves the 2000-point torus disconnected
_SIM_KNN = {"double_saddle": 10, "loop_of_double_saddles": 15}
# SMACOF restarts; single runs on the double saddle occasionally stall in a folded local minimum
_SIM_RESTARTS = {"double_saddle": 5, "loop_of_double_saddles": 1}


class ConfigError(ManifoldError):
    """An experiment configuration is incomplete or inconsistent."""


# ---------------------------------------------------------------- PCA and smoothing

@dataclass(eq=False)
class PcaProjection:
    """Coordinates on the top three joint principal axes.

    ``explained`` holds the fraction of total variance carried by each axis;
    ``rank_deficient`` is set when fewer than three axes carry variance and the
    remaining columns are zero padding.
    """

    coords: np.ndarray
    explained: np.ndarray
    rank_deficient: bool = False


def pca_project(sets, n_axes: int = 3, rank_tol: float = 1e-12) -> list[PcaProjection]:
    """Project one or more point sets onto the principal axes of their union."""
    arrays = [np.asarray(s.points if isinstance(s, LatentManifold) else s, dtype=float) for s in sets]
    if not arrays:
        raise ManifoldError("pca_project needs at least one point set")
    width = max(a.shape[1] for a in arrays)
    arrays = [np.hstack([a, np.zeros((len(a), width - a.shape[1]))]) for a in arrays]
    allpts = np.vstack(arrays)
    if len(allpts) <= 3:
        raise ManifoldError(f"need more than 3 points in total, got {len(allpts)}")
    mean = allpts.mean(axis=0)
    _, s, Vt = np.linalg.svd(allpts - mean, full_matrices=False)
    var = s ** 2
    total = var.sum()
    rank = int(np.sum(var > rank_tol * max(total, 1e-300)))
    k = min(n_axes, rank)
    basis = np.zeros((width, n_axes))
    basis[:, :k] = Vt[:k].T
    frac = np.zeros(n_axes)
    if total > 0:
        frac[:k] = var[:k] / total
    deficient = k < n_axes
    if deficient:
        log.warning("joint point set has rank %d < %d; padding with zero axes", rank, n_axes)
    return [PcaProjection((a - mean) @ basis, frac.copy(), deficient) for a in arrays]


def default_smoothing_steps(grid: SampleGrid) -> int:
    return 10 if grid.intrinsic_dim == 1 else 5


def neighbor_mean_operator(grid: SampleGrid) -> csr_matrix:
    """Row-stochastic sparse matrix averaging each node's grid neighbours."""
    rows, cols, vals = [], [], []
    for i, nb in enumerate(grid.neighbors):
        if not nb:
            rows.append(i), cols.append(i), vals.append(1.0)
            continue
        for j in nb:
            rows.append(i), cols.append(j), vals.append(1.0 / len(nb))
    return csr_matrix((vals, (rows, cols)), shape=(grid.n, grid.n))


def smooth(m: LatentManifold, steps: int | None = None, self_weight: float = SELF_WEIGHT) -> LatentManifold:
    """Repeatedly blend each point with the mean of its grid neighbours.

    ``steps=None`` uses 10 steps on one-dimensional grids and 5 otherwise.
    """
    if m.grid is None:
        raise ManifoldError("smoothing needs a manifold with a grid")
    if steps is None:
        steps = default_smoothing_steps(m.grid)
    if steps < 0:
        raise ManifoldError(f"steps must be >= 0, got {steps}")
    if not 0.0 < self_weight < 1.0:
        raise ManifoldError(f"self_weight must lie in (0, 1), got {self_weight}")
    A = neighbor_mean_operator(m.grid)
    Z = m.points.copy()
    for _ in range(steps):
        Z = self_weight * Z + (1.0 - self_weight) * (A @ Z)
    prov = dict(m.provenance, smoothing_steps=steps, self_weight=self_weight)
    return LatentManifold(Z, m.grid, m.stress, prov)


# ---------------------------------------------------------------- joint and invariance studies

def joint_embed(meshes, grid: SampleGrid, cam: CameraConfig, light: LightConfig, d: int = 8,
                seed: int = 0, workers: int = 1, **smacof_kw) -> list[LatentManifold]:
    """Embed the images of several objects together and split the result per object."""
    meshes = list(meshes)
    if not meshes:
        raise ManifoldError("joint_embed needs at least one object")
    images = np.concatenate([render_set(mesh, grid, cam, light, workers) for mesh in meshes])
    joint = mds_smacof(pairwise_distances(images), d, seed=seed, **smacof_kw)
    n = grid.n
    prov = dict(joint.provenance, joint_objects=len(meshes))
    return [LatentManifold(joint.points[i * n:(i + 1) * n], grid, joint.stress, prov) for i in range(len(meshes))]


def invariance_study(D, n_seeds: int = 5, n_perms: int = 4, base_seed: int = 0, d: int = 8,
                     grid: SampleGrid | None = None, **smacof_kw):
    """Embed ``D`` under varied seeds and under row/column permutations.

    Seeds ``base_seed .. base_seed + n_seeds - 1`` are used on ``D`` as given.
    Each permuted run uses ``base_seed`` on ``D[P][:, P]`` and is mapped back by
    the inverse permutation.  Returns the pairwise shape distance matrix over
    all ``n_seeds + n_perms`` manifolds and the manifolds themselves.
    """
    if n_seeds < 1 or n_perms < 0:
        raise ManifoldError(f"need n_seeds >= 1 and n_perms >= 0, got {n_seeds}, {n_perms}")
    D = np.asarray(D, dtype=float)
    n = len(D)
    runs = [mds_smacof(D, d, seed=base_seed + s, grid=grid, **smacof_kw) for s in range(n_seeds)]
    rng = np.random.default_rng(base_seed)
    for _ in range(n_perms):
        P = rng.permutation(n)
        m = mds_smacof(D[np.ix_(P, P)], d, seed=base_seed, **smacof_kw)
        pts = np.empty_like(m.points)
        pts[P] = m.points
        runs.append(LatentManifold(pts, grid, m.stress, dict(m.provenance, permutation=P.tolist())))
    return shape_distance_matrix(runs), runs


# ---------------------------------------------------------------- configuration

@dataclass
class ExperimentConfig:
    """Everything needed to reproduce one experiment.

    ``objects`` holds prism side counts (integers or ``"prism:N"``), OBJ paths,
    or simulation names for ``kind="simulation"``.  ``grid``, ``render`` and
    ``embedding`` are keyword dictionaries for the sampler, the camera/light
    and the embedding; missing keys take the documented defaults.
    """

    kind: str
    objects: list
    output_dir: str
    grid: dict = field(default_factory=dict)
    render: dict = field(default_factory=dict)
    embedding: dict = field(default_factory=dict)
    smoothing_steps: int | None = None
    self_weight: float = SELF_WEIGHT
    n_clusters: int = 2
    simulation: dict = field(default_factory=dict)
    invariance: dict = field(default_factory=dict)
    long_running: bool = False

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.kind not in KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}; choose from {KINDS}")
        if not self.objects:
            raise ConfigError("objects must list at least one object")
        if not self.output_dir:
            raise ConfigError("output_dir is required")
        if "seed" not in self.embedding:
            raise ConfigError("embedding.seed must be given explicitly")
        if self.kind == "simulation":
            bad = [o for o in self.objects if o not in SIMULATIONS]
            if bad:
                raise ConfigError(f"unknown simulations {bad}; choose from {sorted(SIMULATIONS)}")
            for key in ("lift_seed", "noise_seed"):
                if key not in self.simulation:
                    raise ConfigError(f"simulation.{key} must be given explicitly")
        else:
            for o in self.objects:
                _object_name(o)
        if self.kind == "invariance" and len(self.objects) != 1:
            raise ConfigError("an invariance study takes exactly one object")
        if self.kind == "so3" and not self.long_running:
            g = dict(_GRID_DEFAULTS["so3"], **self.grid)
            if g["n_sphere"] * g["n_psi"] > LONG_RUN_NODES:
                raise ConfigError(f"SO(3) grids above {LONG_RUN_NODES} nodes need long_running=true")
        if self.smoothing_steps is not None and self.smoothing_steps < 0:
            raise ConfigError("smoothing_steps must be >= 0")
        if not 0.0 < self.self_weight < 1.0:
            raise ConfigError("self_weight must lie in (0, 1)")
        if self.n_clusters < 1:
            raise ConfigError("n_clusters must be >= 1")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigError(f"unknown config fields {sorted(unknown)}")
        missing = {"kind", "objects", "output_dir"} - set(d)
        if missing:
            raise ConfigError(f"missing config fields {sorted(missing)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None


def _object_name(obj) -> str:
    if isinstance(obj, bool):
        raise ConfigError(f"invalid object {obj!r}")
    if isinstance(obj, int):
        if obj < 3:
            raise ConfigError(f"prisms need at least 3 sides, got {obj}")
        return f"prism{obj}"
    if isinstance(obj, str):
        if obj.startswith("prism:"):
            return _object_name(int(obj.split(":", 1)[1]))
        if obj.lower().endswith(".obj"):
            return Path(obj).stem
    raise ConfigError(f"objects must be prism side counts or OBJ paths, got {obj!r}")


def load_object(obj) -> TriMesh:
    name = _object_name(obj)
    if name.startswith("prism") and not str(obj).lower().endswith(".obj"):
        return make_prism(int(str(obj).split(":")[-1]))
    return read_obj(obj)


def build_grid(kind: str, params: dict) -> SampleGrid:
    p = dict(_GRID_DEFAULTS.get(kind, {}), **params)
    if kind in ("so2", "invariance", "joint"):
        return sample_so2(**p)
    if kind == "t2":
        return sample_t2(**p)
    if kind == "so3":
        return sample_so3(**p)
    if kind == "illumination":
        return sample_lights(**p)
    raise ConfigError(f"no grid for kind {kind!r}")


def build_camera(params: dict) -> tuple[CameraConfig, LightConfig, int]:
    p = dict(params)
    workers = int(p.pop("workers", 1))
    light_keys = {"light_position": "position", "ambient": "ambient", "diffuse": "diffuse"}
    light = {light_keys[k]: p.pop(k) for k in list(p) if k in light_keys}
    if "position" in light:
        light["position"] = tuple(float(x) for x in light["position"])
    try:
        return CameraConfig(**p), LightConfig(**light), workers
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid render parameters: {exc}") from None


def render_set(mesh, grid, cam, light, workers):
    if grid.is_rotation:
        return render_pose_set(mesh, grid, cam, light, workers)
    return render_illumination_set(mesh, grid, cam, light, workers)


# ---------------------------------------------------------------- artifact bookkeeping

FAILED_MARKER = "FAILED"


class _Run:
    """Tracks stages and written files for one experiment directory."""

    def __init__(self, out: Path):
        self.out = out
        self.files: list[Path] = []
        self.stages: list[str] = []

    @contextlib.contextmanager
    def stage(self, name: str):
        log.info("stage %s", name)
        try:
            yield
        except Exception as exc:
            (self.out / FAILED_MARKER).write_text(f"stage: {name}\ncause: {type(exc).__name__}: {exc}\n")
            raise StageError(name, exc) from exc
        self.stages.append(name)

    def path(self, *parts) -> Path:
        p = self.out.joinpath(*parts)
        p.parent.mkdir(parents=True, exist_ok=True)
        self.files.append(p)
        return p


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_manifest(run: _Run, cfg: ExperimentConfig, extra: dict) -> Path:
    files = sorted({p for p in run.files if p.exists()})
    for p in list(files):
        side = p.with_suffix(".json")
        if side.exists() and side not in files:
            files.append(side)
    artifacts = {str(p.relative_to(run.out)): _sha256(p) for p in sorted(files)}
    manifest = {"config": cfg.to_dict(), "stages": run.stages, "artifacts": artifacts}
    manifest.update(extra)
    path = run.out / "manifest.json"
    io.write_json(path, manifest)
    return path


def manifest_hash(out_dir) -> str:
    return _sha256(Path(out_dir) / "manifest.json")


def _embedding_kw(cfg: ExperimentConfig) -> dict:
    e = dict(cfg.embedding)
    e.setdefault("method", "mds")
    e.setdefault("d", 8)
    e.setdefault("k", DEFAULT_KNN)
    return e


# ---------------------------------------------------------------- experiment kinds

def _run_objects(cfg: ExperimentConfig, run: _Run) -> dict:
    """Pose or illumination sets: one latent manifold per object, then shape statistics."""
    with run.stage("sample"):
        grid = build_grid(cfg.kind, cfg.grid)
        cam, light, workers = build_camera(cfg.render)
        io.write_grid(run.path("grid.json"), grid)
    e = _embedding_kw(cfg)
    names, manifolds = [], []
    for obj in cfg.objects:
        name = _object_name(obj)
        names.append(name)
        with run.stage(f"render:{name}"):
            images = render_set(load_object(obj), grid, cam, light, workers)
            for f in io.write_image_set(run.out / "objects" / name / "images", images):
                run.files.append(run.out / "objects" / name / "images" / f)
            run.files.append(run.out / "objects" / name / "images" / "images.json")
        with run.stage(f"distances:{name}"):
            vectors = images.reshape(len(images), -1)
            D = pairwise_distances(vectors)
            io.write_matrix_csv(run.path("objects", name, "distances.csv"), D)
        with run.stage(f"embed:{name}"):
            kw = {k: v for k, v in e.items() if k not in ("method", "d", "seed", "k")}
            if e["method"] == "mds":
                m = mds_smacof(D, e["d"], seed=e["seed"], grid=grid, **kw)
            else:
                m = embed_vectors(vectors, e["method"], e["d"], seed=e["seed"], k=e["k"], grid=grid, **kw)
            io.write_latent(run.path("objects", name, "latent.csv"), m)
        with run.stage(f"smooth:{name}"):
            sm = smooth(m, cfg.smoothing_steps, cfg.self_weight)
            io.write_latent(run.path("objects", name, "latent_smoothed.csv"), sm)
        manifolds.append(m)
    with run.stage("pca"):
        proj = pca_project(manifolds)
        rows = [[name, i] + [float(x) for x in p.coords[i]]
                for name, p in zip(names, proj) for i in range(len(p.coords))]
        io.write_rows_csv(run.path("pca3d.csv"), ["object", "node", "pc1", "pc2", "pc3"], rows)
    _shape_stages(run, names, manifolds, cfg.n_clusters)
    return {"objects": names, "explained_variance": [float(x) for x in proj[0].explained]}


def _shape_stages(run: _Run, names, manifolds, n_clusters) -> None:
    with run.stage("shape"):
        S = shape_distance_matrix(manifolds)
        io.write_labeled_matrix_csv(run.path("shape_distances.csv"), S, names)
    if len(names) < 2:
        return
    with run.stage("proximity"):
        P = proximity_embed_2d(S, seed=0) if len(names) > 2 else np.array([[-S[0, 1] / 2, 0.0], [S[0, 1] / 2, 0.0]])
        io.write_rows_csv(run.path("proximity2d.csv"), ["object", "x", "y"],
                          [[n, float(x), float(y)] for n, (x, y) in zip(names, P)])
    with run.stage("cluster"):
        labels = cluster(S, min(n_clusters, len(names)))
        io.write_rows_csv(run.path("clusters.csv"), ["object", "cluster"], [[n, int(c)] for n, c in zip(names, labels)])


def simulate(name: str, noise: float = 0.0, target_dim: int = 768, lift_seed: int = 0,
             noise_seed: int = 1, grid: dict | None = None):
    """Ground-truth point set and its lifted (optionally noisy) observation."""
    truth = SIMULATIONS[name](**(grid or _SIM_GRIDS[name]))
    obs = lift_and_rotate(truth, target_dim, seed=lift_seed)
    return truth, add_noise(obs, noise, seed=noise_seed)


def _per_case(value, name, default):
    return int(value.get(name, default)) if isinstance(value, dict) else int(value)


def _run_simulation(cfg: ExperimentConfig, run: _Run) -> dict:
    s = dict({"noise": [0.0, NOISE_SIGMA], "target_dim": 768, "methods": ["isomap", "le", "lle", "mds"],
              "k": _SIM_KNN, "n_init": _SIM_RESTARTS}, **cfg.simulation)
    e = _embedding_kw(cfg)
    smacof_kw = {k: v for k, v in e.items() if k not in ("method", "d", "seed", "k")}
    table = []
    for name in cfg.objects:
        for sigma in s["noise"]:
            label = name if sigma == 0 else f"noisy_{name}"
            with run.stage(f"simulate:{label}"):
                truth, obs = simulate(name, sigma, s["target_dim"], s["lift_seed"], s["noise_seed"],
                                      s.get("grid", {}).get(name))
                io.write_matrix_csv(run.path("objects", label, "ground_truth.csv"), truth.points)
                io.write_grid(run.path("objects", label, "grid.json"), truth.grid)
                D = pairwise_distances(obs.points)
                io.write_matrix_csv(run.path("objects", label, "distances.csv"), D)
            truth_m = LatentManifold(truth.points, truth.grid)
            row = [label]
            for method in s["methods"]:
                with run.stage(f"embed:{label}:{method}"):
                    k = _per_case(s["k"], name, e["k"])
                    d = _SIM_DIMS[name]
                    try:
                        if method == "mds":
                            kw = dict({"n_init": _per_case(s["n_init"], name, 1)}, **smacof_kw)
                            m = mds_smacof(D, d, seed=e["seed"], grid=truth.grid, **kw)
                        else:
                            m = embed_vectors(obs.points, method, d, seed=e["seed"], k=k, grid=truth.grid)
                    except ConnectivityError as exc:
                        log.warning("%s on %s: %s", method, label, exc)
                        row.append(float("nan"))
                        continue
                    io.write_latent(run.path("objects", label, f"latent_{method}.csv"), m)
                    row.append(float(shape_distance(m, truth_m).distance))
            table.append(row)
    with run.stage("table"):
        io.write_rows_csv(run.path("table1.csv"), ["dataset"] + list(s["methods"]), table)
    return {"table": {r[0]: dict(zip(s["methods"], r[1:])) for r in table}}


def _run_invariance(cfg: ExperimentConfig, run: _Run) -> dict:
    inv = dict({"n_seeds": 5, "n_perms": 4}, **cfg.invariance)
    e = _embedding_kw(cfg)
    smacof_kw = {k: v for k, v in e.items() if k not in ("method", "d", "seed", "k")}
    with run.stage("sample"):
        grid = build_grid(cfg.kind, cfg.grid)
        cam, light, workers = build_camera(cfg.render)
        io.write_grid(run.path("grid.json"), grid)
    name = _object_name(cfg.objects[0])
    with run.stage("render"):
        images = render_set(load_object(cfg.objects[0]), grid, cam, light, workers)
    with run.stage("distances"):
        D = pairwise_distances(images)
        io.write_matrix_csv(run.path("distances.csv"), D)
    with run.stage("invariance"):
        S, runs = invariance_study(D, inv["n_seeds"], inv["n_perms"], e["seed"], e["d"], grid, **smacof_kw)
        labels = [f"seed{e['seed'] + i}" for i in range(inv["n_seeds"])] + [f"perm{i}" for i in range(inv["n_perms"])]
        for lab, m in zip(labels, runs):
            io.write_latent(run.path("latents", f"{lab}.csv"), m)
        io.write_labeled_matrix_csv(run.path("shape_distances.csv"), S, labels)
    iu = np.triu_indices(len(S), 1)
    return {"object": name, "median_shape_distance": float(np.median(S[iu])) if len(S) > 1 else 0.0}


def _run_joint(cfg: ExperimentConfig, run: _Run) -> dict:
    e = _embedding_kw(cfg)
    smacof_kw = {k: v for k, v in e.items() if k not in ("method", "d", "seed", "k")}
    with run.stage("sample"):
        grid = build_grid(cfg.kind, cfg.grid)
        cam, light, workers = build_camera(cfg.render)
        io.write_grid(run.path("grid.json"), grid)
    names = [_object_name(o) for o in cfg.objects]
    with run.stage("joint_embed"):
        ms = joint_embed([load_object(o) for o in cfg.objects], grid, cam, light, e["d"], e["seed"], workers,
                         **smacof_kw)
        for name, m in zip(names, ms):
            io.write_latent(run.path("objects", name, "latent.csv"), m)
    _shape_stages(run, names, ms, cfg.n_clusters)
    return {"objects": names}


_RUNNERS = {
    "so2": _run_objects, "t2": _run_objects, "so3": _run_objects, "illumination": _run_objects,
    "simulation": _run_simulation, "invariance": _run_invariance, "joint": _run_joint,
}


def run_experiment(cfg: ExperimentConfig) -> Path:
    """Run ``cfg`` and write every artifact plus ``manifest.json`` into ``cfg.output_dir``.

    A failing stage leaves the files written so far, a ``FAILED`` marker naming
    the stage, and raises :class:`StageError`.
    """
    cfg.validate()
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    marker = out / FAILED_MARKER
    if marker.exists():
        marker.unlink()
    run = _Run(out)
    summary = _RUNNERS[cfg.kind](cfg, run)
    _write_manifest(run, cfg, {"summary": summary})
    return out
