"""Prism pose manifolds on a circle of rotations.

Prints latent scale per prism, the restricted shape-distance matrix and the
free-registration RMSE for every pair.
"""
import argparse
import itertools

import numpy as np

from imanifold.embed import mds_smacof, pairwise_distances
from imanifold.render import CameraConfig, LightConfig, make_prism, render_pose_set
from imanifold.sampling import sample_so2
from imanifold.shape import free_align, shape_distance_matrix


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sides", type=int, nargs="+", default=[4, 5, 6, 7, 8, 9, 10])
    ap.add_argument("--n", type=int, default=500)
    ap.add_argument("--dim", type=int, default=8)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    grid = sample_so2(args.n)
    ms = []
    for s in args.sides:
        D = pairwise_distances(render_pose_set(make_prism(s), grid, CameraConfig(), LightConfig()))
        m = mds_smacof(D, args.dim, seed=args.seed, grid=grid)
        ms.append(m)
        print(f"prism{s}: stress {m.stress:.4f}, rms norm {m.rms_norm():.3f}")
    S = shape_distance_matrix(ms)
    np.set_printoptions(precision=3, suppress=True, linewidth=120)
    print("restricted shape distances\n", S)
    free = {(a, b): free_align(ms[i], ms[j]).rmse
            for (i, a), (j, b) in itertools.combinations(enumerate(args.sides), 2)}
    for (a, b), v in free.items():
        print(f"free rmse prism{a} vs prism{b}: {v:.3f}")
    iu = np.triu_indices(len(ms), 1)
    print(f"median restricted {np.median(S[iu]):.3f}, median free {np.median(list(free.values())):.3f}")


if __name__ == "__main__":
    main()
