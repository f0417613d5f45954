"""Command-line front end: ``subrad spectrum | run | validate``.

Exit codes: 0 ok, 1 config error, 2 numerical failure, 3 validation failure.
The default output root comes from ``SUBRAD_OUTPUT_ROOT`` (else ``./runs``).
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import observables as obs
from .dynamics import IntegratorDivergence, InvalidConfig
from .geometry import build_ring
from .protocols import RunConfig, execute
from .spectral import magic_angle, ring_spectrum_m0, subradiant_fraction

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_VALIDATION = 0, 1, 2, 3
OUTPUT_ROOT_ENV = "SUBRAD_OUTPUT_ROOT"

log = logging.getLogger("subrad")


def _output_root() -> Path:
    return Path(os.environ.get(OUTPUT_ROOT_ENV, "runs"))


def _err(msg: str) -> None:
    print(f"subrad: error: {msg}", file=sys.stderr)


def cmd_spectrum(args) -> int:
    if args.n < 2 or not args.a > 0:
        _err("need --n >= 2 and --a > 0")
        return EXIT_CONFIG
    geo = build_ring(args.n, args.a)
    spec = ring_spectrum_m0(geo)
    out = Path(args.out) if args.out else _output_root() / f"spectrum_n{args.n}_a{args.a:g}"
    out.mkdir(parents=True, exist_ok=True)
    spec.to_csv(out / "spectrum.csv")
    doc = {
        "n": args.n,
        "a_over_lambda": args.a,
        "subradiant_fraction": subradiant_fraction(spec),
        "magic_angle_rad": magic_angle(2.0 * math.pi * args.a),
    }
    obs.write_summary(out / "summary.json", doc)
    print(f"subradiant_fraction={doc['subradiant_fraction']:.6f} magic_angle_rad={doc['magic_angle_rad']:.12f} -> {out}")
    return EXIT_OK


def _load_config(args) -> RunConfig:
    path = Path(args.config)
    if not path.is_file():
        raise ValueError(f"config file not found: {path}")
    cfg = RunConfig.load(path)
    if args.engine:
        cfg.engine = "rk4" if args.engine == "integrator" else args.engine
    if args.threads:
        cfg.threads = args.threads
    return cfg


def cmd_run(args) -> int:
    try:
        cfg = _load_config(args)
    except (ValueError, TypeError, KeyError) as exc:
        _err(f"bad config: {exc}")
        return EXIT_CONFIG
    out = Path(args.out) if args.out else _output_root() / Path(args.config).stem
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        _err(f"cannot create output directory {out}: {exc}")
        return EXIT_CONFIG
    try:
        doc = execute(cfg, out)
    except (IntegratorDivergence, np.linalg.LinAlgError, FloatingPointError) as exc:
        _err(f"numerical failure: {exc}")
        return EXIT_NUMERICAL
    except (InvalidConfig, ValueError) as exc:
        _err(f"bad config: {exc}")
        return EXIT_CONFIG
    plateau = doc.get("plateau")
    geff = doc.get("gamma_eff")
    print(f"plateau={'none' if plateau is None else f'{plateau:.6f}'} "
          f"gamma_eff={'none' if geff is None else f'{geff:.3e}'} -> {out}")
    return EXIT_OK


def cmd_validate(args) -> int:
    from .validate import run_all

    checks = run_all(corrupt_gamma=args.corrupt_gamma)
    for c in checks:
        print(c.line())
    failed = [c for c in checks if not c.passed]
    print(f"{len(checks) - len(failed)}/{len(checks)} checks passed")
    return EXIT_VALIDATION if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="subrad", description="Subradiant excitation transport in atomic rings and chains.")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("spectrum", help="ring m=0 spectrum, subradiant fraction and magic angle")
    s.add_argument("--n", type=int, required=True, help="number of atoms")
    s.add_argument("--a", type=float, required=True, help="lattice spacing a/lambda")
    s.add_argument("--out", help="output directory")
    s.set_defaults(func=cmd_spectrum)

    r = sub.add_parser("run", help="run a preset or disorder ensemble from a TOML/JSON config")
    r.add_argument("config")
    r.add_argument("--out", help="run directory")
    r.add_argument("--engine", choices=("spectral", "rk4", "integrator"))
    r.add_argument("--threads", type=int, help="cap on concurrent realizations")
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("validate", help="operator identities and oracle equivalence on small systems")
    v.add_argument("--corrupt-gamma", action="store_true", help=argparse.SUPPRESS)
    v.set_defaults(func=cmd_validate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
