"""Command line: ``energytree fit | predict | simulate``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 runtime error.
"""

import argparse
import csv
import json
import os
import sys

import numpy as np

from . import simulate as sim
from .dataset import DatasetError, load_dataset
from .tree import FitConfig, ModelFormatError, grow, load, render_text, save

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_RUNTIME = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _per_covariate(text):
    """``10`` or ``name=10,other=12``."""
    try:
        if "=" not in text:
            return int(text)
        out = {}
        for part in text.split(","):
            name, value = part.split("=", 1)
            out[name.strip()] = int(value)
        return out
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer or name=int pairs, got {text!r}") from None


def _echo(command, resolved):
    print(json.dumps({"command": command, **resolved}, sort_keys=True), file=sys.stderr)


def _random_seed():
    return int(np.random.SeedSequence().entropy % 2**63)


def build_parser():
    parser = _Parser(prog="energytree", description="Energy trees for structured and mixed-type covariates.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    fit = sub.add_parser("fit", help="fit a tree and write the model file")
    fit.add_argument("--data", required=True, help="dataset manifest (JSON)")
    fit.add_argument("--alpha", type=float, default=0.05)
    fit.add_argument("--min-bucket", type=int, default=5)
    fit.add_argument("--n-perm", type=int, default=999)
    fit.add_argument("--split", choices=["fve", "clustering"], default="fve")
    fit.add_argument("--n-basis", type=_per_covariate, default=10)
    fit.add_argument("--shell-bins", type=_per_covariate, default=10)
    fit.add_argument("--seed", type=int, default=None)
    fit.add_argument("--out", required=True, help="model file to write")
    fit.add_argument("--workers", type=int, default=None)

    pred = sub.add_parser("predict", help="score a dataset with a saved model")
    pred.add_argument("--model", required=True)
    pred.add_argument("--data", required=True)
    pred.add_argument("--out", required=True, help="CSV with one prediction per row")
    pred.add_argument("--workers", type=int, default=None)

    simp = sub.add_parser("simulate", help="run a simulation scenario")
    simp.add_argument("--scenario", required=True,
                      choices=["unbiasedness", "power-functional", "power-graph"])
    simp.add_argument("--reps", type=int, default=None)
    simp.add_argument("--n", type=int, default=100)
    simp.add_argument("--scale", choices=list(sim.SCALES), default="desk")
    simp.add_argument("--seed", type=int, default=None)
    simp.add_argument("--out", required=True, help="output directory")
    simp.add_argument("--workers", type=int, default=None)
    return parser


def _workers(args):
    if args.workers is not None and args.workers < 1:
        raise UsageError("--workers must be positive")
    return args.workers or os.cpu_count() or 1


def cmd_fit(args):
    workers = _workers(args)
    seed = _random_seed() if args.seed is None else args.seed
    config = FitConfig(alpha=args.alpha, min_bucket=args.min_bucket, n_permutations=args.n_perm,
                       split_method=args.split, n_basis=args.n_basis, shell_bins=args.shell_bins,
                       seed=seed)
    try:
        config.validate()
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    _echo("fit", {"data": args.data, "out": args.out, "workers": workers, **config.to_dict()})
    dataset = load_dataset(args.data)
    tree = grow(dataset, config, n_jobs=workers)
    save(tree, args.out)
    print(render_text(tree))
    return EXIT_OK


def cmd_predict(args):
    workers = _workers(args)
    _echo("predict", {"model": args.model, "data": args.data, "out": args.out, "workers": workers})
    try:
        tree = load(args.model)
    except FileNotFoundError:
        raise DatasetError(f"model file not found: {args.model!r}") from None
    dataset = load_dataset(args.data, require_response=False)
    preds = tree.predict(dataset)
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        for p in preds:
            writer.writerow([p if tree.is_classifier else repr(float(p))])
    return EXIT_OK


def cmd_simulate(args):
    workers = _workers(args)
    scale = sim.SCALES[args.scale]
    reps = args.reps or scale["replications"]
    if reps < 1 or args.n < 2:
        raise UsageError("--reps must be positive and --n at least 2")
    seed = _random_seed() if args.seed is None else args.seed
    common = dict(R=reps, n=args.n, seed=seed, grid_size=scale["grid_size"],
                  n_vertices=scale["n_vertices"], edge_prob=0.2,
                  n_permutations=scale["n_permutations"])
    resolved = {"scenario": args.scenario, "scale": args.scale, "out": args.out,
                "workers": workers, **common}
    if args.scenario != "unbiasedness":
        resolved.update(mu_grid=list(sim.DEFAULT_MU_GRID), alpha=0.05)
    _echo("simulate", resolved)
    # fail before the long run if the output cannot be written
    try:
        os.makedirs(args.out, exist_ok=True)
        probe = os.path.join(args.out, ".write-test")
        open(probe, "w").close()
        os.remove(probe)
    except OSError as exc:
        print(f"energytree: cannot write to {args.out!r}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    if args.scenario == "unbiasedness":
        result = sim.scenario_unbiasedness(n_jobs=workers, **common)
    else:
        associated = args.scenario.split("-", 1)[1]
        result = sim.scenario_power(associated, sim.DEFAULT_MU_GRID, n_jobs=workers, **common)
    result.write(args.out)
    _print_summary(result)
    return EXIT_OK


def _print_summary(result):
    tables = [("selection" if not result.conditional else "power", result.rows)]
    if result.conditional:
        tables.append(("conditional probability", result.conditional))
    for title, rows in tables:
        print(f"{result.scenario}: {title}")
        key = "label" if "label" in rows[0] else "mu"
        for r in rows:
            print(f"  {str(r[key]):<16} {r['estimate']:.4f}  ({r['lo']:.4f}, {r['hi']:.4f})")


COMMANDS = {"fit": cmd_fit, "predict": cmd_predict, "simulate": cmd_simulate}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"energytree: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DatasetError, ModelFormatError) as exc:
        print(f"energytree: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001
        print(f"energytree: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
