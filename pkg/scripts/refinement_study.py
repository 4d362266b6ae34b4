"""Grid-refinement study for the certified Gaussian scenario.

Runs the scenario at a ladder of resolutions (h halved each rung) and prints
the bound margins, the link gap and the entropy deficit, plus the ratio of
consecutive values. Usage::

    python3 scripts/refinement_study.py [configs/gaussian.json] [--rungs 3]
"""

import argparse
import dataclasses
import time

from dislo.config import load_scenario
from dislo.runner import entropy_certificate, run_scenario


def rungs(n0: int, count: int) -> list:
    out = [n0]
    for _ in range(count - 1):
        out.append(2 * out[-1] - 1)
    return out


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("config", nargs="?", default="configs/gaussian.json")
    p.add_argument("--rungs", type=int, default=3)
    p.add_argument("--n0", type=int, default=None, help="coarsest node count (default: config n / 2)")
    args = p.parse_args(argv)
    base = load_scenario(args.config)
    n0 = args.n0 or (base.n // 2 + 1)
    cols = ("n", "h", "lower", "time", "upper", "link", "entropy", "seconds")
    print(",".join(cols))
    prev = None
    for n in rungs(n0, args.rungs):
        t0 = time.perf_counter()
        out = run_scenario(dataclasses.replace(base, n=n))
        ent = entropy_certificate(out)
        vals = [c.value for c in out.certificates] + [ent.value]
        dt = time.perf_counter() - t0
        print(",".join([str(n), f"{out.table.grid.h:.6g}"] + [f"{v:.6g}" for v in vals] + [f"{dt:.2f}"]))
        if prev is not None:
            ratios = [a / b if b else float("inf") for a, b in zip(prev, vals)]
            print("ratio,," + ",".join(f"{r:.3g}" for r in ratios) + ",")
        prev = vals


if __name__ == "__main__":
    main()
