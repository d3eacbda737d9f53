"""Command-line interface.

Every command writes its data products and a ``manifest.json`` into
``--out``; progress goes to stderr and a short summary to stdout.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import platform
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bounds import BoundsParams, robustness_interval
from .dataset import (
    DatasetError,
    SplitSpec,
    TestTarget,
    binarize,
    load_csv,
    load_raw_csv,
    load_targets,
    save_csv,
    save_targets,
    split_indices,
    standardize,
)
from .exact import (
    DEFAULT_BIG_M,
    DEFAULT_NODE_BUDGET,
    ExactStatus,
    TargetUnreachableError,
    brute_force_robustness,
    dump_instance,
    encode,
    solve_bnb,
)
from .harness import DEFAULT_FRACTIONS, evaluate_grid, histogram, summarize
from .linsep import DEFAULT_EPS, NumericalInstabilityError
from .lower import MilpParams, default_k, lower_bound, partition
from .parallel import default_threads, parallel_map
from .reduction import VC_LIMIT, format_edge_list, min_vertex_cover, random_graph, read_edge_list, reduce
from .sanitize import SanitizeConfig, compare_robustness, sanitize
from .seeds import derive_seed
from .trainer import LossKind, TrainConfig
from .upper import DEFAULT_TRIALS, upper_bound

log = logging.getLogger("flipbound")

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_BUDGET = 3
EXIT_NUMERIC = 4


class BudgetExhausted(Exception):
    pass


# ---------------------------------------------------------------- helpers

def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _write_csv(path: Path, header, rows) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _write_manifest(args, out: Path, params: dict, inputs: dict) -> None:
    manifest = {
        "tool": "flipbound",
        "version": __version__,
        "command": args.command,
        "argv": args.argv,
        "params": params,
        "inputs": {k: {"path": str(v), "sha256": _sha256(v)} for k, v in inputs.items() if v},
        "python": platform.python_version(),
        "numpy": np.__version__,
    }
    _write_json(out / "manifest.json", manifest)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _parse_k(s: str):
    if s == "auto":
        return None
    k = int(s)
    if k < 1:
        raise argparse.ArgumentTypeError("k must be >= 1")
    return k


def _positive_int(s: str) -> int:
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {s}")
    return v


def _positive_float(s: str) -> float:
    v = float(s)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {s}")
    return v


def _seed(s: str) -> int:
    v = int(s)
    if not 0 <= v < 1 << 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _load_train(args):
    if getattr(args, "pos_class", None) is not None:
        raw = load_raw_csv(args.train, args.label)
        return binarize(raw, args.pos_class, args.neg_class)
    return load_csv(args.train, args.label)


def _resolve_data_and_targets(args):
    """Training set and targets from ``--targets`` or ``--target-index``."""
    data = _load_train(args)
    if args.targets:
        targets = load_targets(args.targets, args.label if str(args.targets).endswith(".csv") else None)
        train = data
        rows = list(range(len(targets)))
    elif args.target_index is not None:
        spec = SplitSpec(args.test_fraction, args.seed)
        tr_idx, te_idx = split_indices(data.m, spec)
        train = data.subset(tr_idx)
        test = data.subset(te_idx)
        if args.target_index == "all":
            rows = list(range(test.m))
        else:
            rows = [int(t) for t in args.target_index.split(",")]
            if any(not 0 <= r < test.m for r in rows):
                raise DatasetError(f"target index out of range for a test split of {test.m} rows")
        targets = [TestTarget(test.features[r], -int(test.labels[r])) for r in rows]
    else:
        raise DatasetError("give --targets or --target-index")
    for t in targets:
        t.check_dim(train.d)
    if getattr(args, "standardize", False):
        train, *targets = standardize(train, *targets)
    return train, targets, rows


def _train_kwargs(args) -> dict:
    return {"l2": args.l2, "epochs_max": args.epochs, "eta0": args.eta0, "tol": args.tol,
            "patience": args.patience, "average": args.average}


# ---------------------------------------------------------------- commands

def _bounds_job(a):
    data, target, params, i = a
    try:
        return robustness_interval(data, target, params, index=i)
    except (NumericalInstabilityError, TargetUnreachableError) as exc:
        return exc


def cmd_bounds(args) -> int:
    data, targets, rows = _resolve_data_and_targets(args)
    params = BoundsParams(args.M, args.eps, args.k, args.k_prime, args.loss, args.trials,
                          args.node_budget, args.seed, **_train_kwargs(args))
    out = _out_dir(args)
    log.info("bounds: m=%d d=%d targets=%d", data.m, data.d, len(targets))
    results = parallel_map(_bounds_job, [(data, t, params, i) for i, t in enumerate(targets)],
                           args.threads)
    report = {"params": params.to_dict(data), "targets": []}
    timing, csv_rows, done = [], [], []
    for i, (row, res) in enumerate(zip(rows, results)):
        if isinstance(res, Exception):
            report["targets"].append({"index": i, "row": row, "error": f"{type(res).__name__}: {res}"})
            print(f"target {i}: error {res}")
            continue
        done.append(res)
        report["targets"].append({**res.to_dict(), "row": row})
        timing.append({"index": res.index, **res.millis})
        csv_rows.append([res.index, row, res.lower.lower, res.upper.upper, int(res.lower.complete),
                         int(res.upper.certified)])
        print(f"target {i}: lower {res.lower.lower} upper {res.upper.upper}"
              f"{'' if res.upper.certified else ' (uncertified)'}")
    _write_json(out / "report.json", report)
    _write_json(out / "timings.json", timing)
    _write_csv(out / "bounds.csv", ["index", "row", "lower", "upper", "lower_complete", "upper_certified"],
               csv_rows)
    _write_manifest(args, out, {**params.to_dict(data), "threads": args.threads}, _inputs(args))
    if not done:
        raise NumericalInstabilityError("every target failed")
    blocks = [b for r in done for b in r.lower.per_block]
    if blocks and all(b.status == ExactStatus.BUDGET_EXHAUSTED.value for b in blocks):
        raise BudgetExhausted("every block exhausted its node budget")
    return EXIT_OK


def _exact_job(a):
    data, target, M, eps, budget, solver, bias = a
    try:
        if solver == "brute":
            return brute_force_robustness(data, target, eps, M, bias=bias)
        return solve_bnb(encode(data, target, M, eps, bias), budget)
    except TargetUnreachableError as exc:
        return exc


def cmd_exact(args) -> int:
    data, targets, rows = _resolve_data_and_targets(args)
    out = _out_dir(args)
    if args.dump:
        Path(args.dump).write_text(dump_instance(encode(data, targets[0], args.M, args.eps, not args.no_bias)),
                                   encoding="utf-8")
    results = parallel_map(_exact_job, [(data, t, args.M, args.eps, args.node_budget, args.solver,
                                         not args.no_bias)
                                        for t in targets], args.threads)
    entries = []
    for i, (row, res) in enumerate(zip(rows, results)):
        if isinstance(res, Exception):
            entries.append({"index": i, "row": row, "error": str(res)})
            print(f"target {i}: error {res}")
            continue
        entries.append({"index": i, "row": row, **res.to_dict()})
        print(f"target {i}: robustness {res.robustness} ({res.status.value})")
    _write_json(out / "exact.json", entries)
    _write_manifest(args, out, {"M": args.M, "eps": args.eps, "node_budget": args.node_budget,
                                "solver": args.solver, "bias": not args.no_bias, "seed": args.seed},
                    _inputs(args))
    ok = [r for r in results if not isinstance(r, Exception)]
    if not ok:
        raise TargetUnreachableError("no target could be solved")
    if all(r.status == ExactStatus.BUDGET_EXHAUSTED for r in ok):
        raise BudgetExhausted("every solve exhausted its node budget")
    return EXIT_OK


def cmd_lower(args) -> int:
    data, targets, rows = _resolve_data_and_targets(args)
    out = _out_dir(args)
    milp = MilpParams(args.M, args.eps, args.node_budget)
    k = min(args.k if args.k is not None else default_k(data.m, data.d), data.m)
    reports = []
    for i, t in enumerate(targets):
        plan = partition(data, k, derive_seed(args.seed, "partition", i))
        rep = lower_bound(data, t, plan, milp, threads=args.threads)
        reports.append({"index": i, "row": rows[i], **rep.to_dict()})
        print(f"target {i}: lower {rep.lower}{'' if rep.complete else ' (some blocks unproven)'}")
    _write_json(out / "lower.json", reports)
    _write_manifest(args, out, {"M": args.M, "eps": args.eps, "node_budget": args.node_budget,
                                "k": k, "seed": args.seed}, _inputs(args))
    return EXIT_OK


def _upper_job(a):
    data, target, cfg, trials, k_prime = a
    return upper_bound(data, target, cfg, trials, k_prime)


def cmd_upper(args) -> int:
    data, targets, rows = _resolve_data_and_targets(args)
    out = _out_dir(args)
    kw = _train_kwargs(args)
    jobs = [(data, t, TrainConfig(loss=args.loss, seed=derive_seed(args.seed, "upper", i), **kw),
             args.trials, args.k_prime) for i, t in enumerate(targets)]
    reports = parallel_map(_upper_job, jobs, args.threads)
    _write_json(out / "upper.json", [{"index": i, "row": r, **rep.to_dict()}
                                     for i, (r, rep) in enumerate(zip(rows, reports))])
    for i, rep in enumerate(reports):
        print(f"target {i}: upper {rep.upper}{'' if rep.certified else ' (uncertified)'}")
    _write_manifest(args, out, {"loss": LossKind.parse(args.loss).value, "trials": args.trials,
                                "k_prime": args.k_prime if args.k_prime else "m+1",
                                "seed": args.seed, **kw}, _inputs(args))
    return EXIT_OK


def cmd_poison_eval(args) -> int:
    data = _load_train(args)
    if args.test:
        train, test = data, load_csv(args.test, args.label)
    else:
        tr, te = split_indices(data.m, SplitSpec(args.test_fraction, args.seed))
        train, test = data.subset(tr), data.subset(te)
    if args.standardize:
        train, test = standardize(train, test)
    rows = list(range(min(args.n_targets, test.m))) if args.n_targets else None
    losses = [LossKind.parse(s) for s in args.losses.split(",")]
    fractions = [float(f) for f in args.fractions.split(",")]
    out = _out_dir(args)
    grids = evaluate_grid(train, test, rows, fractions, args.seed, losses, args.trials, args.k_prime,
                          _train_kwargs(args), args.threads)
    combined = []
    for g in grids:
        body = [[r.fraction, r.rho, r.accuracy, r.n_points] for r in g.rows]
        _write_csv(out / f"grid_{g.attack_loss.value}_{g.victim_loss.value}.csv",
                   ["fraction", "rho", "accuracy", "n"], body)
        combined += [[g.attack_loss.value, g.victim_loss.value] + b for b in body]
        for w in g.warnings:
            print(f"warning: {w}", file=sys.stderr)
    _write_csv(out / "grids.csv", ["attack_loss", "victim_loss", "fraction", "rho", "accuracy", "n"], combined)
    _write_manifest(args, out, {"fractions": fractions, "losses": [l.value for l in losses],
                                "trials": args.trials, "seed": args.seed, "n_targets": args.n_targets,
                                "accuracy_set": "clean held-out test split excluding the targeted point",
                                **_train_kwargs(args)}, _inputs(args))
    print(f"{len(grids)} grids, {len(combined)} rows -> {out / 'grids.csv'}")
    return EXIT_OK


def cmd_sanitize(args) -> int:
    data = _load_train(args)
    out = _out_dir(args)
    cfg = SanitizeConfig(args.k_neighbors)
    res = sanitize(data, cfg)
    save_csv(res.data, out / "sanitized.csv")
    _write_json(out / "changed.json", {"changed": list(res.changed), "fixed_point": res.fixed_point})
    print(f"relabelled {len(res.changed)} of {data.m} points (fixed point: {res.fixed_point})")
    if args.targets:
        targets = load_targets(args.targets, args.label if str(args.targets).endswith(".csv") else None)
        kw = _train_kwargs(args)
        rows, avg = compare_robustness(data, targets, cfg, TrainConfig(loss=args.loss, **kw), args.trials,
                                       MilpParams(args.M, args.eps, args.node_budget), args.k, args.seed)
        _write_csv(out / "comparison.csv", ["target", "upper_before", "upper_after", "lower_before", "lower_after"],
                   [[r.target, r.upper_before, r.upper_after, r.lower_before, r.lower_after] for r in rows])
        _write_json(out / "comparison.json", {"rows": [r.to_dict() for r in rows], "averages": avg})
        print(f"average upper {avg['upper_before']:.2f} -> {avg['upper_after']:.2f}, "
              f"lower {avg['lower_before']:.2f} -> {avg['lower_after']:.2f}")
    _write_manifest(args, out, {"k_neighbors": args.k_neighbors, "seed": args.seed}, _inputs(args))
    return EXIT_OK


def cmd_gen_vc(args) -> int:
    if args.graph:
        g = read_edge_list(args.graph)
    else:
        if args.n is None:
            raise DatasetError("give --graph or --n")
        g = random_graph(args.n, args.p, args.seed)
    out = _out_dir(args)
    data, target = reduce(g)
    save_csv(data, out / "dataset.csv")
    save_targets([target], out / "target.json")
    (out / "graph.txt").write_text(format_edge_list(g), encoding="utf-8")
    info = {"n": g.n, "edges": len(g.edges)}
    if g.n <= VC_LIMIT:
        size, cover = min_vertex_cover(g)
        info.update(min_vertex_cover=size, cover=list(cover))
    _write_json(out / "vc.json", info)
    _write_manifest(args, out, {"n": g.n, "p": args.p, "seed": args.seed}, _inputs(args))
    print(f"graph n={g.n} |E|={len(g.edges)} -> {out / 'dataset.csv'}, {out / 'target.json'}"
          " (solve with: exact --no-bias)")
    return EXIT_OK


def cmd_hist(args) -> int:
    report = json.loads(Path(args.report).read_text(encoding="utf-8"))
    entries = report["targets"] if isinstance(report, dict) else report
    values = [e[args.field] for e in entries if args.field in e]
    edges = [float(x) for x in args.edges.split(",")] if args.edges else None
    bins = histogram(values, args.width, edges)
    out = _out_dir(args)
    _write_csv(out / f"hist_{args.field}.csv", ["bin_lo", "bin_hi", "count"], bins)
    _write_json(out / f"summary_{args.field}.json", summarize(values))
    _write_manifest(args, out, {"field": args.field, "width": args.width, "edges": edges}, {"report": args.report})
    print(f"{len(values)} values in {len(bins)} bins")
    return EXIT_OK


def cmd_describe(args) -> int:
    data = _load_train(args)
    print(data.to_json())
    return EXIT_OK


def cmd_replay(args) -> int:
    manifest = json.loads(Path(args.manifest).read_text(encoding="utf-8"))
    for name, info in manifest.get("inputs", {}).items():
        if _sha256(info["path"]) != info["sha256"]:
            raise DatasetError(f"input {name} ({info['path']}) changed since the manifest was written")
    argv = list(manifest["argv"])
    if args.out:
        if "--out" in argv:
            argv[argv.index("--out") + 1] = args.out
        else:
            argv += ["--out", args.out]
    return main(argv)


# ---------------------------------------------------------------- parser

def _add_data(p, targets=True):
    p.add_argument("--train", required=True, help="training CSV (header row first)")
    p.add_argument("--label", default=None, help="label column name or index (default: last)")
    p.add_argument("--pos-class", default=None, help="binarize: class mapped to +1")
    p.add_argument("--neg-class", default=None, help="binarize: class mapped to -1")
    p.add_argument("--standardize", action="store_true", help="z-score features using train statistics")
    if targets:
        p.add_argument("--targets", default=None, help="CSV (label = desired label) or JSON targets")
        p.add_argument("--target-index", default=None,
                       help="comma list or 'all': rows of the held-out split, desired label = -true label")
        p.add_argument("--test-fraction", type=float, default=0.1)


def _add_milp(p):
    p.add_argument("--M", type=_positive_float, default=DEFAULT_BIG_M)
    p.add_argument("--eps", type=_positive_float, default=DEFAULT_EPS)
    p.add_argument("--node-budget", type=_positive_int, default=DEFAULT_NODE_BUDGET)


def _add_train(p):
    p.add_argument("--loss", default="hinge", choices=["hinge", "log", "modified-huber"])
    p.add_argument("--trials", type=_positive_int, default=DEFAULT_TRIALS)
    p.add_argument("--k-prime", type=_positive_int, default=None, help="target copies (default m+1)")
    p.add_argument("--l2", type=float, default=1e-4)
    p.add_argument("--epochs", type=_positive_int, default=1000)
    p.add_argument("--eta0", type=_positive_float, default=None)
    p.add_argument("--tol", type=float, default=1e-3)
    p.add_argument("--patience", type=_positive_int, default=5)
    p.add_argument("--average", action="store_true", help="return Polyak-averaged weights")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="flipbound", description="Label-flip robustness bounds for linear classifiers.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=_seed, default=0)
    common.add_argument("--threads", type=_positive_int, default=default_threads())
    common.add_argument("--out", default="out")
    common.add_argument("--log-level", default="INFO")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bounds", parents=[common], help="lower and upper bounds per target")
    _add_data(p)
    _add_milp(p)
    _add_train(p)
    p.add_argument("--k", type=_parse_k, default=None, help="partition count or 'auto'")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("exact", parents=[common], help="exact robustness by branch-and-bound")
    _add_data(p)
    _add_milp(p)
    p.add_argument("--solver", choices=["bnb", "brute"], default="bnb")
    p.add_argument("--dump", default=None, help="write the first target's MILP as text")
    p.add_argument("--no-bias", action="store_true",
                   help="classifiers through the origin (b = 0), as the vertex-cover instances need")
    p.set_defaults(func=cmd_exact)

    p = sub.add_parser("lower", parents=[common], help="partition lower bound")
    _add_data(p)
    _add_milp(p)
    p.add_argument("--k", type=_parse_k, default=None)
    p.set_defaults(func=cmd_lower)

    p = sub.add_parser("upper", parents=[common], help="augmentation upper bound")
    _add_data(p)
    _add_train(p)
    p.set_defaults(func=cmd_upper)

    p = sub.add_parser("poison-eval", parents=[common], help="rho/accuracy grids over loss pairs")
    _add_data(p, targets=False)
    _add_train(p)
    p.add_argument("--test", default=None, help="held-out CSV (default: split --train)")
    p.add_argument("--test-fraction", type=float, default=0.1)
    p.add_argument("--n-targets", type=int, default=None)
    p.add_argument("--fractions", default=",".join(str(f) for f in DEFAULT_FRACTIONS))
    p.add_argument("--losses", default="hinge,log,modified-huber")
    p.set_defaults(func=cmd_poison_eval)

    p = sub.add_parser("sanitize", parents=[common], help="KNN label sanitization")
    _add_data(p, targets=False)
    _add_milp(p)
    _add_train(p)
    p.add_argument("--k-neighbors", type=_positive_int, default=15)
    p.add_argument("--targets", default=None, help="compare bounds before/after for these targets")
    p.add_argument("--k", type=_parse_k, default=None)
    p.set_defaults(func=cmd_sanitize)

    p = sub.add_parser("gen-vc", parents=[common], help="dataset + target from a graph")
    p.add_argument("--graph", default=None, help="edge list: n on the first line, then 'u v'")
    p.add_argument("--n", type=_positive_int, default=None)
    p.add_argument("--p", type=float, default=0.4)
    p.set_defaults(func=cmd_gen_vc)

    p = sub.add_parser("hist", parents=[common], help="histogram of a bounds report column")
    p.add_argument("--report", required=True)
    p.add_argument("--field", default="upper", choices=["upper", "lower"])
    p.add_argument("--width", type=_positive_float, default=1.0)
    p.add_argument("--edges", default=None, help="explicit comma-separated bin edges")
    p.set_defaults(func=cmd_hist)

    p = sub.add_parser("describe", parents=[common], help="print {m, d, class_counts}")
    _add_data(p, targets=False)
    p.set_defaults(func=cmd_describe)

    p = sub.add_parser("replay", help="re-run a command from its manifest")
    p.add_argument("manifest")
    p.add_argument("--out", default=None)
    p.add_argument("--log-level", default="INFO")
    p.set_defaults(func=cmd_replay)
    return parser


def _inputs(args) -> dict:
    return {k: getattr(args, k, None) for k in ("train", "targets", "test", "graph")}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    args.argv = argv
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.INFO),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        if (getattr(args, "pos_class", None) is None) != (getattr(args, "neg_class", None) is None):
            raise DatasetError("--pos-class and --neg-class go together")
        return args.func(args)
    except BudgetExhausted as exc:
        log.error("%s", exc)
        return EXIT_BUDGET
    except (NumericalInstabilityError, TargetUnreachableError) as exc:
        log.error("%s", exc)
        return EXIT_NUMERIC
    except (DatasetError, ValueError, OSError, KeyError, json.JSONDecodeError) as exc:
        log.error("%s", exc)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
