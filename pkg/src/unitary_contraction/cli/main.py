"""``unitary-contraction run --config FILE`` / ``unitary-contraction replay DIR``."""
from __future__ import annotations

import argparse
import json
import logging
import sys

from .. import __version__
from ..circle_measure import CircleMeasure
from ..matrix_model import check_unitary, load_matrix, save_matrix, spectral_measure, two_norm
from ..transport import w2_bruteforce, w2_cyclic, w2_exact, w2_to_haar
from .config import SCHEMA, ConfigError, ExperimentConfig, load_config
from .runner import EXIT_CONFIG, EXIT_IO, EXIT_OK, OUTPUT_ROOT_ENV, replay, run
from .scenarios import contraction_starts


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="unitary-contraction",
        description="Seeded experiments for the two-stage contraction of unitary matrices.",
        epilog=f"Default output root: ${OUTPUT_ROOT_ENV} (falls back to ./runs).",
    )
    parser.add_argument("--print-schema", action="store_true", help="print the config JSON schema and exit")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command")

    p_run = sub.add_parser("run", help="run a scenario from a config file")
    p_run.add_argument("--config", required=True, help="YAML experiment config")
    p_run.add_argument("--seed-override", type=int, metavar="K", help="replace the seed list by [K]")
    p_run.add_argument("--out", help="artifact directory")
    p_run.add_argument("--workers", type=int, help="override the worker pool size")

    p_replay = sub.add_parser("replay", help="re-run a recorded experiment and byte-compare its CSV output")
    p_replay.add_argument("dir", help="artifact directory of a previous run")
    p_replay.add_argument("--workers", type=int, help="override the worker pool size")

    p_w2 = sub.add_parser("w2", help="distance between two measures stored as JSON")
    p_w2.add_argument("mu")
    p_w2.add_argument("nu")
    p_w2.add_argument("--solver", choices=("exact", "brute", "cyclic"), default="exact")
    p_w2.add_argument("--validate", action="store_true", help="cyclic solver: cross-check against the exact solver")
    p_w2.add_argument("--plan", action="store_true", help="exact solver: print the optimal plan as JSON")

    p_dump = sub.add_parser("dump", help="write h(t, u) for one homotopy start as a binary matrix file")
    p_dump.add_argument("--N", type=int, required=True)
    p_dump.add_argument("--seed", type=int, required=True)
    p_dump.add_argument("--t", type=float, required=True)
    p_dump.add_argument("--start", default="identity", help="identity, minus_identity, two_cluster or four_point")
    p_dump.add_argument("--deformed", action="store_true", help="apply the scheduled g_s deformation as well")
    p_dump.add_argument("--out", required=True, help="output .ucmx path (a .json sidecar is written next to it)")

    p_inspect = sub.add_parser("inspect", help="summarize a dumped matrix")
    p_inspect.add_argument("path")
    return parser


def _read_measure(path) -> CircleMeasure:
    with open(path) as fh:
        return CircleMeasure.from_json(fh.read())


def _cmd_w2(args) -> int:
    try:
        mu, nu = _read_measure(args.mu), _read_measure(args.nu)
    except OSError as exc:
        print(f"cannot read measure: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, KeyError) as exc:
        print(f"invalid measure: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = {"solver": args.solver}
    try:
        if args.solver == "exact":
            out["distance"], plan = w2_exact(mu, nu)
            if args.plan:
                out["plan"] = plan.to_dict()
        elif args.solver == "brute":
            out["distance"] = w2_bruteforce(mu, nu)
        else:
            out["distance"], out["matched_exact"] = w2_cyclic(mu, nu, validate=args.validate)
    except ValueError as exc:
        print(f"solver rejected input: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(json.dumps(out, indent=2))
    return EXIT_OK


def _cmd_dump(args) -> int:
    import math

    from ..homotopy import build_ladder, g_deform, h_path, schedule_s

    starts = contraction_starts(args.N, args.seed)
    if args.start not in starts:
        print(f"unknown start {args.start!r}; choose from {sorted(starts)}", file=sys.stderr)
        return EXIT_CONFIG
    ladder = build_ladder(args.N, max(1, math.ceil(args.t)), args.seed)
    H = h_path(ladder, starts[args.start], args.t)
    lineage = {"package_version": __version__, "N": args.N, "seed": args.seed, "t": args.t, "start": args.start}
    if args.deformed:
        s = schedule_s(args.t, w2_to_haar(spectral_measure(H), args.N))
        H = g_deform(H, s)
        lineage["schedule_s"] = s
    try:
        save_matrix(args.out, H, lineage)
    except OSError as exc:
        print(f"cannot write {args.out}: {exc}", file=sys.stderr)
        return EXIT_IO
    print(args.out)
    return EXIT_OK


def _cmd_inspect(args) -> int:
    import numpy as np

    try:
        A, lineage = load_matrix(args.path)
    except OSError as exc:
        print(f"cannot read {args.path}: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"invalid matrix file: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    n = A.shape[0]
    info = {"shape": list(A.shape), "lineage": lineage}
    info["unitarity_defect"] = float(np.max(np.abs(A.conj().T @ A - np.eye(n))))
    try:
        check_unitary(A)
    except ArithmeticError:
        pass
    else:
        info["norm_to_identity"] = two_norm(A - np.eye(n))
        info["dist_to_haar"] = w2_to_haar(spectral_measure(A), n)
    print(json.dumps(info, indent=2))
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.print_schema:
        print(json.dumps(SCHEMA, indent=2))
        return 0
    if args.command == "run":
        try:
            config = load_config(args.config)
            if args.seed_override is not None:
                data = config.to_dict()
                data["seeds"] = [args.seed_override]
                config = ExperimentConfig.from_dict(data)
        except ConfigError as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        return run(config, args.out, args.workers)
    if args.command == "replay":
        return replay(args.dir, args.workers)
    if args.command in ("w2", "dump", "inspect"):
        return {"w2": _cmd_w2, "dump": _cmd_dump, "inspect": _cmd_inspect}[args.command](args)
    parser.print_help()
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
