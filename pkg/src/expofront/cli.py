"""Command line entry point: ``expofront <command> ...``."""
from __future__ import annotations

import argparse
import functools
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .decomposition import bvn_decompose, caratheodory_decompose
from .errors import ExpoError
from .harness.data import (dump_instances, filter_instances, gen_synthetic, load_instances,
                           parse_letor_file)
from .harness.experiment import (ExperimentConfig, aggregate_fronts, bench, bench_table,
                                 format_bench_table, read_fronts_csv, run_experiment)

FRONT_METHODS = {"pexpo": "pexpo", "sphere": "sphere-expo", "qp-sweep": "qp-sweep",
                 "birkhoff-qp": "birkhoff-qp"}


def _floats(text: str) -> list:
    return [float(v) for v in text.split(",") if v.strip()]


def _grid(text: str) -> list:
    """``"0,0.5,1"`` or ``"lo:hi:count"`` (inclusive linspace)."""
    if text.count(":") == 2:
        lo, hi, num = text.split(":")
        return list(np.linspace(float(lo), float(hi), int(num)))
    return _floats(text)


def _dataset(args):
    if args.instances:
        return load_instances(args.instances)
    kind, _, count = args.synth.partition(":")
    return gen_synthetic(kind, int(count or 50), args.seed, policy=args.policy)


def _emit(text: str, out):
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _add_dataset_args(p):
    src = p.add_mutually_exclusive_group()
    src.add_argument("--instances", help="instance JSON file")
    src.add_argument("--synth", default="Ds:50", help="synthetic dataset KIND:COUNT (default Ds:50)")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", help="output file (a directory for csv fronts)")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--policy", choices=("merit", "size-proportional"), default="merit",
                        help="group target for generated or parsed instances")
    common.add_argument("-v", "--verbose", action="store_true")
    parser = argparse.ArgumentParser(prog="expofront", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    add = functools.partial(sub.add_parser, parents=[common])

    p = add("synth", help="generate a synthetic dataset as instance JSON")
    p.add_argument("kind", choices=("Ds", "Dl"))
    p.add_argument("count", type=int)

    p = add("parse", help="sparse ranking file -> filtered instance JSON")
    p.add_argument("path")
    p.add_argument("--group-feature", type=int, default=132)
    p.add_argument("--bin-edges", type=_floats, default=None)
    p.add_argument("--max-grade", type=float, default=4.0)
    p.add_argument("--max-docs", type=int, default=100)
    p.add_argument("--drops", help="write per-rule drop counts (JSON) here")

    p = add("front", help="compute fronts for every query")
    p.add_argument("method", choices=sorted(FRONT_METHODS))
    _add_dataset_args(p)
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--n-sample", type=int, default=5)
    p.add_argument("--n-points", type=int, default=20)
    p.add_argument("--alpha-grid", type=_grid, default=list(np.linspace(0, 1, 20)))
    p.add_argument("--t", type=int, default=1000, help="rankings delivered per front point")
    p.add_argument("--no-decompose", action="store_true")
    p.add_argument("--workers", type=int, default=1)

    p = add("ctrl", help="run the feedback controller baseline")
    _add_dataset_args(p)
    p.add_argument("--lambda-grid", type=_grid, default=[0.0, 1.0, 10.0, 100.0])
    p.add_argument("--t", type=int, default=1000)

    p = add("decompose", help="decompose an exposure vector or a bistochastic matrix")
    p.add_argument("method", choices=("caratheodory", "bvn"))
    p.add_argument("input", help='JSON: {"exposure": [...], "gamma": [...]} or {"matrix": [[...]]}')

    p = add("bench", help="runtime comparison table")
    _add_dataset_args(p)
    p.add_argument("--n", type=int, default=None, help="fix the number of items (synthetic only)")
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--n-points", type=int, default=20)

    p = add("aggregate", help="mean normalized front over queries")
    p.add_argument("fronts", help="fronts CSV")
    p.add_argument("--grid-size", type=int, default=21)
    p.add_argument("--method", default=None)
    return parser


def _cmd_synth(args):
    insts = gen_synthetic(args.kind, args.count, args.seed, policy=args.policy)
    if args.out:
        dump_instances(insts, args.out)
    else:
        _emit(json.dumps({"instances": [q.to_dict() for q in insts]}), None)


def _cmd_parse(args):
    insts = parse_letor_file(args.path, args.group_feature, args.bin_edges, args.max_grade,
                             policy=args.policy)
    kept, counts = filter_instances(insts, args.max_docs)
    if args.out:
        dump_instances(kept, args.out)
    else:
        _emit(json.dumps({"instances": [q.to_dict() for q in kept]}), None)
    if args.drops:
        Path(args.drops).write_text(json.dumps(counts, indent=1), encoding="utf-8")
    logging.info("kept %d of %d queries; dropped %s", len(kept), len(insts), counts)


def _cmd_front(args):
    cfg = ExperimentConfig(FRONT_METHODS[args.method], _dataset(args), seed=args.seed, k=args.k,
                           n_sample=args.n_sample, n_points=args.n_points,
                           alphas=tuple(args.alpha_grid), T=args.t,
                           decompose=not args.no_decompose, deliver=not args.no_decompose,
                           workers=args.workers)
    return _report(cfg, args)


def _cmd_ctrl(args):
    cfg = ExperimentConfig("ctrl", _dataset(args), seed=args.seed, lambdas=tuple(args.lambda_grid),
                           T=args.t)
    return _report(cfg, args)


def _report(cfg, args) -> int:
    if args.out and args.format == "csv":
        cfg.out_dir = args.out
    report = run_experiment(cfg)
    if args.format == "json":
        payload = {"rows": report.records(), "runtime": report.runtime()}
        _emit(json.dumps(payload, indent=1), args.out)
    elif not args.out:
        _emit(report.fronts_csv(), None)
    for o in report.failures:
        logging.warning("query %s failed: %s", o.query_id, o.error)
    return 0 if report.ok else 1


def _cmd_decompose(args):
    data = json.loads(Path(args.input).read_text(encoding="utf-8"))
    if args.method == "caratheodory":
        dist = caratheodory_decompose(np.asarray(data["exposure"]), np.asarray(data["gamma"]))
        atoms = dist.to_dict()["atoms"]
    else:
        atoms = [{"weight": w, "ranking": list(p.order)} for w, p in bvn_decompose(np.asarray(data["matrix"]))]
    if args.format == "csv":
        lines = ["weight,ranking"] + [f"{a['weight']!r},\"{json.dumps(a['ranking'])}\"" for a in atoms]
        _emit("\n".join(lines), args.out)
    else:
        _emit(json.dumps({"atoms": atoms}, indent=1), args.out)


def _cmd_bench(args):
    if args.instances:
        insts = load_instances(args.instances)
    else:
        kind, _, count = args.synth.partition(":")
        rng = (args.n, args.n) if args.n else None
        insts = gen_synthetic(kind, int(count or 20), args.seed, policy=args.policy, n_range=rng)
    table = bench_table(bench(insts, k=args.k, n_points=args.n_points))
    if args.format == "json":
        _emit(json.dumps(table, indent=1), args.out)
    else:
        _emit(format_bench_table(table), args.out)


def _cmd_aggregate(args):
    curve = aggregate_fronts(read_fronts_csv(args.fronts, args.method), args.grid_size)
    if args.format == "json":
        _emit(json.dumps({"grid": curve.grid.tolist(), "meanUtility": curve.mean_utility.tolist(),
                          "count": curve.count.tolist(), "excluded": curve.excluded}), args.out)
    else:
        _emit(curve.to_csv(), args.out)


COMMANDS = {"synth": _cmd_synth, "parse": _cmd_parse, "front": _cmd_front, "ctrl": _cmd_ctrl,
            "decompose": _cmd_decompose, "bench": _cmd_bench, "aggregate": _cmd_aggregate}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args) or 0
    except ExpoError as exc:
        logging.error("%s: %s", type(exc).__name__, exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
