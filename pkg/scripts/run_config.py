"""Run one JSON experiment config and print its manifest summary.

Usage: python3 scripts/run_config.py scripts/configs/prisms_so2.json [--out DIR]
"""
import argparse
import json

from imanifold import io
from imanifold.pipeline import ExperimentConfig, run_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("config")
    ap.add_argument("--out")
    args = ap.parse_args()
    cfg = ExperimentConfig.from_json(args.config)
    if args.out:
        cfg.output_dir = args.out
    out = run_experiment(cfg)
    print(json.dumps(io.read_json(out / "manifest.json")["summary"], indent=2))
    print(f"artifacts in {out}")


if __name__ == "__main__":
    main()
