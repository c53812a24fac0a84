"""Run the four example experiments at a chosen scale.

    python scripts/run_examples.py --runs 50 --out results
"""

import argparse
import time
from pathlib import Path

from grbeam import experiments as ex


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--runs", type=int, default=None, help="override Monte-Carlo runs for example1/3")
    p.add_argument("--rand", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="results")
    p.add_argument("--only", nargs="*", default=["example1", "example2", "example3", "example4"])
    args = p.parse_args()

    for name in args.only:
        runs = args.runs if name in ("example1", "example3") else None
        cfg = ex.ExperimentConfig(name, runs=runs, n_rand=args.rand, seed=args.seed,
                                  out=str(Path(args.out) / name))
        t0 = time.perf_counter()
        files = ex.run_experiment(cfg)
        print(f"{name}: {time.perf_counter() - t0:.1f}s")
        for key, path in files.items():
            print(f"  {key}: {path}")
        (Path(args.out) / name / "plots.gp").write_text(ex.gnuplot_script(Path(args.out) / name))


if __name__ == "__main__":
    main()
