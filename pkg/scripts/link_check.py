"""Design beamformers for Example 1 and compare simulated against analytic SINR."""

import argparse

from grbeam import linksim as ls, scenario as sc
from grbeam.pipeline import solve_downlink


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--sinr-db", type=float, default=10.0)
    p.add_argument("--blocks", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()

    s = sc.example1(args.sinr_db)
    sol = solve_downlink(s)
    print(f"K={sol.K} exact={sol.exact} power={sol.total_power:.6g}")
    run = ls.empirical_sinr(ls.RunConfig(blocks=args.blocks, seed=args.seed), sol.W, s)
    print("user  sinr_db(theory)  sinr_db(sim)  ser(theory)  ser(sim)")
    for r in run.records:
        print(f"{r.user:4d}  {r.theoretical_sinr_db:15.3f}  {r.empirical_sinr_db:12.3f}  "
              f"{r.ser_theory:11.3e}  {r.ser:8.3e}")


if __name__ == "__main__":
    main()
