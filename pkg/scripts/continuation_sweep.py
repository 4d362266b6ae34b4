"""eps -> 0 continuation: sweep a level-0 scenario and print the Cauchy table.

Usage::

    python3 scripts/continuation_sweep.py [configs/continuation.json] [--eps 0.4,0.2,0.1,0.05]
"""

import argparse

import numpy as np

from dislo.config import check_eps_list, load_scenario
from dislo.runner import run_sweep, sweep_csv, sweep_passes


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("config", nargs="?", default="configs/continuation.json")
    p.add_argument("--eps", default=None)
    args = p.parse_args(argv)
    sc = load_scenario(args.config)
    eps = check_eps_list(args.eps.split(",")) if args.eps else sc.eps_list
    rows = run_sweep(sc, eps)
    print(sweep_csv(rows), end="")
    bound = float(np.max(np.abs(sc.rho0.derivative(sc.grid().x, 2))))
    print("uniform bounds and decreasing differences:", sweep_passes(rows, bound))


if __name__ == "__main__":
    main()
