"""Image distances shrink by the ratio of camera distances when the camera backs away."""
import argparse

import numpy as np

from imanifold.render import CameraConfig, LightConfig, make_prism, render_pose_set
from imanifold.sampling import sample_so2


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sides", type=int, default=6)
    ap.add_argument("--image-size", type=int, default=128)
    ap.add_argument("--distances", type=float, nargs="+", default=[4.0, 5.0, 6.0, 8.0])
    ap.add_argument("--pairs", type=int, default=50)
    args = ap.parse_args()
    grid = sample_so2(500)
    rng = np.random.default_rng(0)
    pairs = [rng.choice(500, 2, replace=False) for _ in range(args.pairs)]
    sets = {y: render_pose_set(make_prism(args.sides), grid, CameraConfig(image_size=args.image_size, distance=y),
                               LightConfig()) for y in args.distances}
    base = args.distances[0]
    for y in args.distances[1:]:
        r = np.mean([np.linalg.norm(sets[y][i] - sets[y][j]) / np.linalg.norm(sets[base][i] - sets[base][j])
                     for i, j in pairs])
        print(f"y={base} -> {y}: mean ratio {r:.3f} (expected {base / y:.3f})")


if __name__ == "__main__":
    main()
