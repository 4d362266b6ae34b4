"""Command line front door: ``dislo run|check|sweep|channel``.

Exit codes: 0 ok, 2 config error, 3 solver error, 4 certificate failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import ConfigError, check_eps_list, load_scenario
from .hj import SchemeError
from .runner import (
    atomic_write,
    full_suite,
    read_run,
    run_scenario,
    run_sweep,
    sweep_csv,
    sweep_passes,
    table_certificates,
    write_run,
)

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_CERT = 0, 2, 3, 4


def _out_dir(args, sc) -> Path:
    return Path(args.out) if args.out else Path("dislo-out") / sc.name


def _print_certs(certs) -> bool:
    for c in certs:
        print(c.line())
    return all(c.passed for c in certs)


def cmd_run(args, channel: bool = False) -> int:
    sc = load_scenario(args.config)
    if channel and sc.domain != "channel":
        raise ConfigError("the channel command needs domain 'channel'")
    out = run_scenario(sc)
    if channel:
        full = full_suite(out)
        ok = _print_certs(full)
    else:
        ok = _print_certs(out.certificates)
    d = write_run(out, _out_dir(args, sc))
    print(f"wrote {len(out.table.times)} slices to {d}")
    return EXIT_CERT if (args.strict and not ok) else EXIT_OK


def cmd_check(args) -> int:
    if args.from_dir:
        table, meta, _ = read_run(args.from_dir)
        _, certs = table_certificates(table, meta)
        ok = _print_certs(certs)
    else:
        if args.config is None:
            raise ConfigError("check needs a config or --from DIR")
        out = run_scenario(load_scenario(args.config))
        ok = _print_certs(full_suite(out))
    print("verdict:", "PASS" if ok else "FAIL")
    return EXIT_OK if ok else EXIT_CERT


def _parse_eps(text: str) -> tuple:
    try:
        vals = [float(v) for v in text.replace(" ", "").split(",") if v]
    except ValueError as exc:
        raise ConfigError(f"bad eps list {text!r}") from exc
    return check_eps_list(vals)


def cmd_sweep(args) -> int:
    sc = load_scenario(args.config)
    eps = _parse_eps(args.eps) if args.eps else sc.eps_list
    if not eps:
        raise ConfigError("give --eps or an eps_list in the config")
    rows = run_sweep(sc, eps)
    text = sweep_csv(rows)
    path = Path(args.out) if args.out else Path("dislo-out") / sc.name / "sweep.csv"
    atomic_write(path, text)
    sys.stdout.write(text)
    print(f"wrote {path}")
    if args.strict:
        bound = float(abs(sc.rho0.derivative(sc.grid().x, 2)).max())
        if not sweep_passes(rows, bound):
            print("FAIL continuation")
            return EXIT_CERT
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dislo", description="Dislocation-density numerical lab")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="solve a scenario and write its trajectory archive")
    r.add_argument("config")
    r.add_argument("--strict", action="store_true", help="exit 4 when a certificate fails")
    r.add_argument("--out", help="output directory")

    c = sub.add_parser("check", help="run the full certificate suite")
    c.add_argument("config", nargs="?")
    c.add_argument("--from", dest="from_dir", help="re-check an archive written by run")

    s = sub.add_parser("sweep", help="eps -> 0 continuation table")
    s.add_argument("config")
    s.add_argument("--eps", help="comma separated, strictly decreasing")
    s.add_argument("--out", help="output CSV path")
    s.add_argument("--strict", action="store_true")

    ch = sub.add_parser("channel", help="channel-mode run with wall certificates")
    ch.add_argument("config")
    ch.add_argument("--strict", action="store_true")
    ch.add_argument("--out", help="output directory")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {
        "run": cmd_run,
        "check": cmd_check,
        "sweep": cmd_sweep,
        "channel": lambda a: cmd_run(a, channel=True),
    }
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SchemeError, FloatingPointError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
