"""Command-line interface.

Exit codes: 0 on success, 1 on invalid input or configuration, 2 when a
pipeline stage fails.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import io
from .embed import DEFAULT_KNN, METHODS, embed_vectors, mds_smacof, pairwise_distances
from .errors import ManifoldError, StageError
from .pipeline import (
    ExperimentConfig,
    build_camera,
    joint_embed,
    load_object,
    invariance_study,
    pca_project,
    render_set,
    run_experiment,
    smooth,
)
from .sampling import sample_lights, sample_so2, sample_so3, sample_t2
from .shape import free_align, shape_distance
from .simdata import NOISE_SIGMA, SIMULATIONS, add_noise, lift_and_rotate

EXIT_OK, EXIT_INVALID, EXIT_STAGE = 0, 1, 2


def _render_args(p):
    p.add_argument("--image-size", type=int, default=64)
    p.add_argument("--camera-distance", type=float, default=4.0)
    p.add_argument("--focal-length", type=float, default=1.0)
    p.add_argument("--workers", type=int, default=1)


def _camera(args):
    return build_camera({"image_size": args.image_size, "distance": args.camera_distance,
                         "focal_length": args.focal_length, "workers": args.workers})


def _object(args):
    if args.mesh:
        return args.mesh
    if args.prism:
        return f"prism:{args.prism}"
    raise ManifoldError("give --mesh PATH or --prism SIDES")


def cmd_simulate(args):
    if args.table:
        cfg = ExperimentConfig(
            kind="simulation", objects=[args.case], output_dir=args.out,
            embedding={"seed": args.seed},
            simulation={"noise": [0.0, args.noise], "target_dim": args.target_dim,
                        "lift_seed": args.lift_seed, "noise_seed": args.noise_seed},
        )
        out = run_experiment(cfg)
        print((out / "table1.csv").read_text(), end="")
        return
    truth = SIMULATIONS[args.case]()
    obs = add_noise(lift_and_rotate(truth, args.target_dim, args.lift_seed), args.noise, args.noise_seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    io.write_matrix_csv(out / "ground_truth.csv", truth.points)
    io.write_matrix_csv(out / "points.csv", obs.points)
    io.write_grid(out / "grid.json", truth.grid)


def cmd_sample(args):
    if args.topology == "circle":
        g = sample_so2(args.n)
    elif args.topology == "torus":
        g = sample_t2(args.n_phi, args.n_psi)
    elif args.topology == "so3":
        g = sample_so3(args.n_sphere, args.n_psi)
    else:
        g = sample_lights(args.n)
    io.write_grid(args.out, g)


def cmd_render(args):
    grid = io.read_grid(args.grid)
    cam, light, workers = _camera(args)
    images = render_set(load_object(_object(args)), grid, cam, light, workers)
    io.write_image_set(args.out, images)
    if args.distances:
        io.write_matrix_csv(args.distances, pairwise_distances(images))


def cmd_embed(args):
    grid = io.read_grid(args.grid) if args.grid else None
    X = io.read_matrix_csv(args.inp)
    if args.vectors:
        m = embed_vectors(X, args.method, args.dim, seed=args.seed, k=args.knn, grid=grid)
    elif args.method == "mds":
        m = mds_smacof(X, args.dim, seed=args.seed, grid=grid, n_init=args.restarts)
    else:
        raise ManifoldError(f"method {args.method!r} needs row vectors; pass --vectors")
    io.write_latent(args.out, m)


def cmd_shape_dist(args):
    grid = io.read_grid(args.grid) if args.grid else None
    a, b = io.read_latent(args.a, grid), io.read_latent(args.b, grid)
    if args.free:
        r = free_align(a, b)
        out = {"rmse": r.rmse, "assignment": r.assignment.tolist(),
               "Q": [float(x) for x in r.alignment.ravel()], "dim": int(r.alignment.shape[0])}
    else:
        out = shape_distance(a, b, "identity" if args.identity else None).to_dict()
    text = json.dumps(out, indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)


def cmd_pca(args):
    sets = [io.read_matrix_csv(p) for p in args.inp]
    proj = pca_project(sets)
    rows = [[Path(p).stem, i] + [float(x) for x in pr.coords[i]]
            for p, pr in zip(args.inp, proj) for i in range(len(pr.coords))]
    io.write_rows_csv(args.out, ["set", "node", "pc1", "pc2", "pc3"], rows)
    print("explained variance: " + " ".join(f"{f:.4f}" for f in proj[0].explained))


def cmd_smooth(args):
    m = io.read_latent(args.inp, io.read_grid(args.grid))
    io.write_latent(args.out, smooth(m, args.steps, args.self_weight))


def cmd_run(args):
    cfg = ExperimentConfig.from_json(args.config)
    if args.out:
        cfg.output_dir = args.out
    print(run_experiment(cfg))


def cmd_invariance(args):
    grid = io.read_grid(args.grid) if args.grid else None
    D = io.read_matrix_csv(args.inp)
    S, runs = invariance_study(D, args.n_seeds, args.n_perms, args.seed, args.dim, grid)
    labels = [f"seed{args.seed + i}" for i in range(args.n_seeds)] + [f"perm{i}" for i in range(args.n_perms)]
    io.write_labeled_matrix_csv(args.out, S, labels)
    iu = np.triu_indices(len(S), 1)
    if len(iu[0]):
        print(f"median off-diagonal shape distance: {np.median(S[iu]):.4f}")


def cmd_joint(args):
    grid = io.read_grid(args.grid)
    cam, light, workers = _camera(args)
    objs = [f"prism:{s}" for s in args.prism] + list(args.mesh)
    if not objs:
        raise ManifoldError("give at least one --prism or --mesh")
    ms = joint_embed([load_object(o) for o in objs], grid, cam, light, args.dim, args.seed, workers)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for i, m in enumerate(ms):
        io.write_latent(out / f"object{i}.csv", m)


class _Parser(argparse.ArgumentParser):
    # usage errors are validation errors, not stage failures
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="imanifold", description="Image-manifold shape toolkit")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="synthetic manifolds and the ground-truth comparison table")
    p.add_argument("--case", choices=sorted(SIMULATIONS), default="double_saddle")
    p.add_argument("--noise", type=float, default=NOISE_SIGMA)
    p.add_argument("--target-dim", type=int, default=768)
    p.add_argument("--lift-seed", type=int, default=0)
    p.add_argument("--noise-seed", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--table", action="store_true", help="embed with every method and write table1.csv")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sample", help="write a sampling grid as JSON")
    p.add_argument("--topology", choices=["circle", "torus", "so3", "light"], required=True)
    p.add_argument("--n", type=int, default=500)
    p.add_argument("--n-phi", type=int, default=40)
    p.add_argument("--n-psi", type=int, default=50)
    p.add_argument("--n-sphere", type=int, default=267)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("render", help="render an image set over a grid")
    p.add_argument("--mesh")
    p.add_argument("--prism", type=int)
    p.add_argument("--grid", required=True)
    p.add_argument("--distances", help="also write the image distance matrix CSV")
    _render_args(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("embed", help="embed a distance matrix (or row vectors) into R^d")
    p.add_argument("--method", choices=METHODS, default="mds")
    p.add_argument("--dim", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--knn", type=int, default=DEFAULT_KNN)
    p.add_argument("--restarts", type=int, default=1)
    p.add_argument("--vectors", action="store_true", help="input rows are vectors, not distances")
    p.add_argument("--grid")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("shape-dist", help="shape distance between two latent CSVs")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--grid")
    p.add_argument("--identity", action="store_true", help="disable registration")
    p.add_argument("--free", action="store_true", help="free assignment alignment instead")
    p.add_argument("--out")
    p.set_defaults(func=cmd_shape_dist)

    p = sub.add_parser("pca", help="joint 3-axis PCA projection of latent CSVs")
    p.add_argument("--in", dest="inp", nargs="+", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_pca)

    p = sub.add_parser("smooth", help="grid-neighbour smoothing of a latent CSV")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--grid", required=True)
    p.add_argument("--steps", type=int)
    p.add_argument("--self-weight", type=float, default=0.5)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_smooth)

    p = sub.add_parser("run", help="run a JSON experiment config")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="override output_dir")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("invariance", help="seed/permutation invariance study of a distance matrix")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--grid")
    p.add_argument("--n-seeds", type=int, default=5)
    p.add_argument("--n-perms", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dim", type=int, default=8)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_invariance)

    p = sub.add_parser("joint", help="joint embedding of several objects")
    p.add_argument("--prism", type=int, nargs="*", default=[])
    p.add_argument("--mesh", nargs="*", default=[])
    p.add_argument("--grid", required=True)
    p.add_argument("--dim", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    _render_args(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_joint)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STAGE
    except (ManifoldError, ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
