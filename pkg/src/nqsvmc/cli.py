"""Command-line interface.

Subcommands:
    train <config.json>        run one experiment, emit CSV/JSON artifacts
    sweep <config.json>        run one experiment per swept value
    reference                  print a ground-truth energy as JSON
    embed-report               describe an RBM embedding on a chimera graph
    validate <config.json>     print config diagnostics
    report <dir> [...]         render PNG figures from run/sweep artifacts

Exit statuses: 0 success, 2 invalid config/arguments, 3 numerical abort.
NQS_THREADS caps sweep worker parallelism.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from . import __version__
from .chimera import embed_rbm
from .config import load_config, validate_config
from .harness import EXIT_INVALID, EXIT_OK, diagnostics_report, run_experiment, sweep
from .lattice import build_lattice
from .reference import ground_energy


def _add_common_run_flags(parser: argparse.ArgumentParser):
    parser.add_argument("config", help="path to the experiment config JSON")
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    parser.add_argument("--out", default=None, help="override the output directory")
    parser.add_argument(
        "--checkpoint-every", type=int, default=None, help="checkpoint interval in iterations (0 = off)"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nqsvmc", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="run one training experiment")
    _add_common_run_flags(p_train)

    p_sweep = sub.add_parser("sweep", help="run a parameter sweep")
    _add_common_run_flags(p_sweep)
    p_sweep.add_argument("--param", required=True, help="one of x, h, N, p_break, gamma")
    p_sweep.add_argument("--values", required=True, help="comma-separated values, e.g. 0.5,1,2")

    p_ref = sub.add_parser("reference", help="print a ground-truth energy as JSON")
    p_ref.add_argument("--kind", choices=("chain", "torus"), default="chain")
    p_ref.add_argument("--n", type=int, default=None, help="chain length")
    p_ref.add_argument("--lx", type=int, default=None, help="torus rows")
    p_ref.add_argument("--ly", type=int, default=None, help="torus columns")
    p_ref.add_argument("--h", type=float, required=True, help="transverse field")
    p_ref.add_argument(
        "--method", choices=("auto", "free-fermion", "dense-ed", "lanczos"), default="auto"
    )

    p_embed = sub.add_parser("embed-report", help="describe an RBM embedding on C_n")
    p_embed.add_argument("--n", type=int, required=True, help="chimera grid size")
    p_embed.add_argument("--visible", type=int, required=True)
    p_embed.add_argument("--hidden", type=int, required=True)
    p_embed.add_argument("--chain-coupling", type=float, default=1.0)

    p_val = sub.add_parser("validate", help="validate a config file")
    p_val.add_argument("config", help="path to the experiment config JSON")

    p_rep = sub.add_parser("report", help="render figures from run artifacts")
    p_rep.add_argument("dirs", nargs="+", help="run or sweep directories")
    p_rep.add_argument("--out", default=None, help="write figures here instead of next to the CSVs")
    return parser


def _load(args) -> tuple:
    try:
        config = load_config(args.config)
    except (OSError, ValueError, json.JSONDecodeError) as err:
        print(f"cannot read config: {err}", file=sys.stderr)
        return None, EXIT_INVALID
    if args.seed is not None:
        config.seed = args.seed
    if args.out is not None:
        config.out_dir = args.out
    if getattr(args, "checkpoint_every", None) is not None:
        config.checkpoint_every = args.checkpoint_every
    return config, EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )

    if args.command == "train":
        config, status = _load(args)
        if config is None:
            return status
        diagnostics = validate_config(config)
        if diagnostics:
            sys.stderr.write(diagnostics_report(diagnostics))
            return EXIT_INVALID
        return run_experiment(config)

    if args.command == "sweep":
        config, status = _load(args)
        if config is None:
            return status
        try:
            values = [float(v) for v in args.values.split(",") if v.strip() != ""]
        except ValueError as err:
            print(f"bad --values: {err}", file=sys.stderr)
            return EXIT_INVALID
        try:
            return sweep(config, args.param, values)
        except ValueError as err:
            print(str(err), file=sys.stderr)
            return EXIT_INVALID

    if args.command == "reference":
        if args.kind == "chain":
            if args.n is None:
                print("--n is required for chains", file=sys.stderr)
                return EXIT_INVALID
            dims = (args.n,)
        else:
            if args.lx is None or args.ly is None:
                print("--lx and --ly are required for tori", file=sys.stderr)
                return EXIT_INVALID
            dims = (args.lx, args.ly)
        try:
            lattice = build_lattice(args.kind, dims, args.h)
            result = ground_energy(lattice, args.method)
        except (ValueError, RuntimeError) as err:
            print(str(err), file=sys.stderr)
            return EXIT_INVALID
        print(json.dumps(result.to_dict(), indent=2))
        return EXIT_OK

    if args.command == "embed-report":
        try:
            embedding = embed_rbm(args.visible, args.hidden, args.n, args.chain_coupling)
        except ValueError as err:
            print(str(err), file=sys.stderr)
            return EXIT_INVALID
        doc = {
            "chimera_n": args.n,
            "n_qubits": embedding.graph.n_nodes,
            "n_couplers": len(embedding.graph.edges),
            "capacity_visible": 4 * args.n,
            "capacity_hidden": 4 * args.n,
            "l_max": 8 * args.n,
            "qubits_used": len(embedding.qubits_used()),
            "chain_length_visible": args.n,
            "chain_length_hidden": args.n,
            "chain_coupling": embedding.chain_coupling,
            "visible_chains": [list(c) for c in embedding.visible_chains],
            "hidden_chains": [list(c) for c in embedding.hidden_chains],
        }
        print(json.dumps(doc, indent=2))
        return EXIT_OK

    if args.command == "validate":
        try:
            config = load_config(args.config)
        except (OSError, ValueError, json.JSONDecodeError) as err:
            print(f"cannot read config: {err}", file=sys.stderr)
            return EXIT_INVALID
        diagnostics = validate_config(config)
        sys.stdout.write(diagnostics_report(diagnostics))
        return EXIT_OK if not diagnostics else EXIT_INVALID

    if args.command == "report":
        from .report import render

        try:
            for directory in args.dirs:
                for path in render(directory, args.out):
                    print(path)
        except (OSError, ValueError) as err:
            print(str(err), file=sys.stderr)
            return EXIT_INVALID
        return EXIT_OK

    raise AssertionError(f"unhandled command {args.command}")


if __name__ == "__main__":
    sys.exit(main())
