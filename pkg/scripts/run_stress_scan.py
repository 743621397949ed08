"""Stress against latent dimension for one prism, with the elbow estimate."""
import argparse

from imanifold.embed import elbow_dimension, pairwise_distances, stress_scan
from imanifold.pipeline import render_set
from imanifold.render import CameraConfig, LightConfig, make_prism
from imanifold.sampling import sample_lights, sample_so2, sample_t2


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sides", type=int, default=5)
    ap.add_argument("--grid", choices=["so2", "t2", "illumination"], default="so2")
    ap.add_argument("--max-dim", type=int, default=16)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    grid = {"so2": lambda: sample_so2(500), "t2": lambda: sample_t2(20, 25),
            "illumination": lambda: sample_lights(500)}[args.grid]()
    ims = render_set(make_prism(args.sides), grid, CameraConfig(), LightConfig(), 1)
    scan = stress_scan(pairwise_distances(ims), range(1, args.max_dim + 1), seed=args.seed)
    for d, s in scan:
        print(f"d={d:2d} stress={s:.4f}")
    print(f"elbow dimension: {elbow_dimension(scan)}")


if __name__ == "__main__":
    main()
