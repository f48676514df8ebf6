"""Count agreement and FSYNC-period failures of the min-clock protocol on lines and cycles.

    python scripts/fsync_wrap_study.py [--seeds 10] [--kmax 8]

For every read adversary (newest, oldest, seeded) and every line/cycle up to
``kmax`` robots, runs ``--seeds`` adversarial starts for 20+ wraps after the
prefix and prints how many runs break each rule.
"""

import argparse

from nmrsim import scenario as sc


def family(kmax: int):
    for k in range(2, kmax + 1):
        yield "line", k, k - 1
    for k in range(3, kmax + 1):
        yield "ring", k, k // 2


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--kmax", type=int, default=8)
    args = ap.parse_args()
    print(f"{'reads':8} {'graph':7} {'D':>2}  agreement  fsync")
    for reads in ("newest", "oldest", "seeded"):
        for layout, k, d in family(args.kmax):
            m = 6 * d + 1
            scn = sc.from_dict({
                "name": f"{layout}{k}", "protocol": "fsync", "horizon": m + 2 * d + 21 * m,
                "seeds": f"0:{args.seeds}",
                "world": {"k": k, "layout": layout, "spacing": 0.9},
                "schedule": {"mode": "local", "offsets": "seeded"},
                "params": {"d_bound": d}, "init": {"mode": "adversarial"}, "reads": {"mode": reads},
                "checkers": ["agreement", "fsync"],
            })
            agree = fsync = 0
            for seed in scn.seeds:
                a, f = sc.run_seed(scn, seed).verdicts
                agree += not a.passed
                fsync += not f.passed
            print(f"{reads:8} {layout}{k:<3} {d:>2}  {agree:>4}/{args.seeds:<4} {fsync:>3}/{args.seeds}")


if __name__ == "__main__":
    main()
