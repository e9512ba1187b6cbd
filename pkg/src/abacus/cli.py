"""Command-line front end.

Each subcommand is a thin adapter over one or two library calls: parse
flags, run, print machine-readable output (CSV or a single value) on
stdout.  Diagnostics go to stderr; the ABACUS_LOG environment variable
sets their verbosity (debug/info/warning/error).

Exit codes: 0 success, 1 domain errors (bad graphs, infeasible
instances, mismatched layouts...), 2 usage errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from pathlib import Path

from .errors import AbacusError
from .features import (Optimizer, RunConfig, extract_features,
                       features_csv_header, features_csv_row)
from .graph import load_graph, save_graph, validate
from .nsm import build_nsm, nsm_to_csv

log = logging.getLogger(__name__)

_LOG_LEVELS = {"debug": logging.DEBUG, "info": logging.INFO,
               "warning": logging.WARNING, "error": logging.ERROR}


def _configure_logging() -> None:
    name = os.environ.get("ABACUS_LOG", "warning").strip().lower()
    level = _LOG_LEVELS.get(name)
    if level is None:
        level = logging.WARNING
    logging.basicConfig(stream=sys.stderr, level=level,
                        format="%(levelname)s %(name)s: %(message)s")


# ---------------------------------------------------------------------------
# Flag parsing helpers

def _parse_int_tuple(text: str, n: int, flag: str) -> tuple[int, ...]:
    parts = text.split(",")
    if len(parts) != n:
        raise ValueError(f"{flag} wants {n} comma-separated integers, got {text!r}")
    return tuple(int(p) for p in parts)


def _parse_float_list(text: str, flag: str) -> list[float]:
    try:
        return [float(p) for p in text.split(",") if p != ""]
    except ValueError as exc:
        raise ValueError(f"{flag} wants comma-separated numbers, got {text!r}") from exc


def _load_run_config(path: str, g) -> RunConfig:
    """Read a run configuration JSON file.

    Required keys: batch_size, learning_rate, epochs, optimizer.  Input
    dimensions default to the graph's input shape but may be overridden.
    """
    from .errors import ParseError

    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ParseError(f"{path}: expected a JSON object")
    missing = [k for k in ("batch_size", "learning_rate", "epochs", "optimizer")
               if k not in doc]
    if missing:
        raise ParseError(f"{path}: missing keys {missing}")
    channels, h, w = g.input_shape
    try:
        return RunConfig(
            batch_size=int(doc["batch_size"]),
            input_h=int(doc.get("input_h", h)),
            input_w=int(doc.get("input_w", w)),
            channels=int(doc.get("channels", channels)),
            learning_rate=float(doc["learning_rate"]),
            epochs=int(doc["epochs"]),
            optimizer=Optimizer.from_string(str(doc["optimizer"])))
    except (TypeError, ValueError) as exc:
        raise ParseError(f"{path}: {exc}") from exc


def _structural_block(g, args, graph_id: str):
    """NSM or embedding vector for the graph, per --structural."""
    if args.structural == "nsm":
        return build_nsm(g)
    from .embedding import embed, load_embeddings, wl_tokens

    if not args.model:
        raise ValueError("--structural embedding needs --model EMBEDDINGS")
    m = load_embeddings(args.model)
    bag = wl_tokens(g, m.depth, graph_id=graph_id)
    log.info("embedding %s: %d tokens at depth %d", graph_id, len(bag.tokens), m.depth)
    return embed(g, m, graph_id=graph_id)


# ---------------------------------------------------------------------------
# Subcommands

def cmd_validate(args) -> int:
    g = load_graph(args.graph)
    report = validate(g)
    if report.ok:
        print("OK")
        return 0
    for subject, message in report.issues:
        print(f"{subject}: {message}", file=sys.stderr)
    print("INVALID")
    return 1


def cmd_nsm(args) -> int:
    g = load_graph(args.graph)
    sys.stdout.write(nsm_to_csv(build_nsm(g)))
    return 0


def cmd_features(args) -> int:
    g = load_graph(args.graph)
    cfg = _load_run_config(args.config, g)
    block = _structural_block(g, args, Path(args.graph).stem)
    fv = extract_features(g, cfg, block)
    print(features_csv_header(fv.layout))
    print(features_csv_row(fv))
    return 0


def cmd_embed(args) -> int:
    from .embedding import (embed, load_embeddings, save_embeddings,
                            train_embeddings, wl_tokens)

    if args.graph and not args.data:
        # Apply mode: print one vector for one graph.
        if not args.model:
            raise ValueError("embedding a graph needs --model EMBEDDINGS")
        m = load_embeddings(args.model)
        g = load_graph(args.graph)
        vec = embed(g, m, graph_id=Path(args.graph).stem)
        print(",".join(repr(float(v)) for v in vec))
        return 0

    if args.data and not args.graph:
        # Train mode: fit token/graph vectors over a directory of graphs.
        if args.seed is None:
            raise ValueError("training embeddings needs --seed")
        if not args.out:
            raise ValueError("training embeddings needs --out MODEL")
        paths = sorted(Path(args.data).glob("*.graph"))
        if not paths:
            raise ValueError(f"no .graph files under {args.data}")
        corpus = [wl_tokens(load_graph(p), args.depth, graph_id=p.stem)
                  for p in paths]
        m = train_embeddings(corpus, dims=args.dims, epochs=args.epochs,
                             learning_rate=args.lr,
                             negative_samples=args.negatives,
                             seed=args.seed, depth=args.depth)
        save_embeddings(m, args.out)
        log.info("embeddings saved to %s", args.out)
        print("graphs,tokens,dims")
        print(f"{len(corpus)},{len(m.tokens)},{m.dims}")
        return 0

    raise ValueError("embed wants either --graph (apply) or --data DIR (train)")


def cmd_generate(args) -> int:
    from .netgen import GenSpec, build_dataset
    from .predictor import save_dataset, split_dataset

    spec = GenSpec(node_count=tuple(args.nodes),
                   branch_prob=args.branch_prob,
                   pool_prob=args.pool_prob,
                   channel_range=tuple(args.channels),
                   kernel_choices=tuple(args.kernels),
                   input_shape=tuple(args.input),
                   seed=args.seed)
    ds, graphs = build_dataset(spec, n_graphs=args.count,
                               configs_per_graph=args.configs)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    for i, g in enumerate(graphs):
        save_graph(g, outdir / f"g{i:05d}.graph")
    save_dataset(ds, str(outdir / "dataset.csv"))
    train_part, holdout = split_dataset(ds, ratio=args.ratio, seed=args.seed)
    save_dataset(train_part, str(outdir / "train.csv"))
    save_dataset(holdout, str(outdir / "holdout.csv"))
    log.info("wrote %d graphs and %d points to %s", len(graphs), len(ds), outdir)
    print("graphs,points,train_points,holdout_points")
    print(f"{len(graphs)},{len(ds)},{len(train_part)},{len(holdout)}")
    return 0


def cmd_train(args) -> int:
    from .predictor import DEFAULT_MODELS, ZooConfig, load_dataset, save_predictor, train

    ds = load_dataset(args.data)
    models = tuple(args.models.split(",")) if args.models else DEFAULT_MODELS
    cfg = ZooConfig(models=models, val_fraction=args.val_fraction,
                    log_targets=not args.no_log_targets, seed=args.seed,
                    n_jobs=args.jobs)
    predictor = train(ds, cfg)
    save_predictor(predictor, args.out)
    log.info("predictor saved to %s", args.out)
    print("target,model,validation_mre")
    for target in sorted(predictor.chosen):
        name = predictor.chosen[target]
        print(f"{target},{name},{repr(predictor.validation_mre[target][name])}")
    return 0


def cmd_predict(args) -> int:
    from .errors import LayoutMismatch
    from .predictor import load_dataset, load_predictor, predict, predict_matrix

    p = load_predictor(args.pred)
    if args.graph and not args.data:
        g = load_graph(args.graph)
        cfg = _load_run_config(args.config, g)
        if args.structural is None:
            args.structural = p.layout.structural
        block = _structural_block(g, args, Path(args.graph).stem)
        fv = extract_features(g, cfg, block)
        out = predict(p, fv)
        print("time_s,mem_mib")
        print(f"{repr(out.time_s)},{repr(out.mem_mib)}")
        return 0

    if args.data and not args.graph:
        ds = load_dataset(args.data)
        if ds.layout.digest() != p.layout.digest():
            raise LayoutMismatch("dataset layout does not match the predictor's")
        out = predict_matrix(p, ds.feature_matrix())
        print("job_id,time_s,mem_mib")
        for i, point in enumerate(ds.points):
            print(f"{point.graph_id}#{i},{repr(float(out['time_s'][i]))},"
                  f"{repr(float(out['mem_mib'][i]))}")
        return 0

    raise ValueError("predict wants either --graph with --config, or --data CSV")


def cmd_evaluate(args) -> int:
    from .predictor import evaluate, load_dataset, load_predictor

    p = load_predictor(args.pred)
    ds = load_dataset(args.data)
    report = evaluate(p, ds)
    log.info("evaluated %d points", report.n_points)
    print("target,mre")
    for target in sorted(report.mre_by_target):
        print(f"{target},{repr(report.mre_by_target[target])}")
    return 0


def cmd_schedule(args) -> int:
    from .scheduler import (GAParams, brute_force_schedule, ga_schedule,
                            load_jobs, lower_bound, random_schedule)

    jobs = load_jobs(args.data)
    if args.capacities:
        capacities = _parse_float_list(args.capacities, "--capacities")
        if args.machines is not None and args.machines != len(capacities):
            raise ValueError(f"--machines {args.machines} disagrees with "
                             f"{len(capacities)} capacities")
    elif args.machines is not None:
        capacities = [math.inf] * args.machines
    else:
        raise ValueError("schedule wants --capacities or --machines")
    if not capacities:
        raise ValueError("need at least one machine")

    if args.method == "ga":
        params = GAParams(population_size=args.population,
                          generations=args.generations, seed=args.seed)
        result = ga_schedule(jobs, capacities, params)
    elif args.method == "brute":
        result = brute_force_schedule(jobs, capacities)
    else:
        result = random_schedule(jobs, capacities, seed=args.seed)

    print("job_id,machine")
    for job_id, machine in result.to_rows(jobs):
        print(f"{job_id},{machine}")
    print(f"method={result.method} makespan={result.makespan} "
          f"lower_bound={lower_bound(jobs, len(capacities))}", file=sys.stderr)
    if args.out:
        doc = {"method": result.method,
               "makespan": result.makespan,
               "per_machine_time": list(result.per_machine_time),
               "history": list(result.history),
               "assignment": {job_id: m for job_id, m in result.to_rows(jobs)}}
        Path(args.out).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
        log.info("report written to %s", args.out)
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service.app import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port, log_level="info")
    return 0


# ---------------------------------------------------------------------------
# Parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="abacus",
        description="Network-aware training cost prediction and scheduling.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("validate", help="check a graph file")
    p.add_argument("graph", help="graph JSON file")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("nsm", help="print the network structural matrix as CSV")
    p.add_argument("--graph", required=True)
    p.set_defaults(func=cmd_nsm)

    p = sub.add_parser("features", help="print the feature vector as CSV")
    p.add_argument("--graph", required=True)
    p.add_argument("--config", required=True, help="run configuration JSON")
    p.add_argument("--structural", choices=("nsm", "embedding"), default="nsm")
    p.add_argument("--model", help="embeddings file for --structural embedding")
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("embed", help="train graph embeddings or embed one graph")
    p.add_argument("--data", help="directory of .graph files (train mode)")
    p.add_argument("--graph", help="graph to embed (apply mode)")
    p.add_argument("--model", help="embeddings file to apply")
    p.add_argument("--out", help="where to save the trained embeddings")
    p.add_argument("--seed", type=int)
    p.add_argument("--dims", type=int, default=64)
    p.add_argument("--depth", type=int, default=2)
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--lr", type=float, default=0.025)
    p.add_argument("--negatives", type=int, default=5)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("generate", help="sample random networks and a labelled dataset")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--count", type=int, default=20, help="number of graphs")
    p.add_argument("--configs", type=int, default=3, help="run configs per graph")
    p.add_argument("--ratio", type=float, default=0.7,
                   help="train fraction for the train/holdout split")
    p.add_argument("--nodes", type=lambda s: _parse_int_tuple(s, 2, "--nodes"),
                   default=(5, 60), help="node count range LO,HI")
    p.add_argument("--branch-prob", type=float, default=0.25)
    p.add_argument("--pool-prob", type=float, default=0.12)
    p.add_argument("--channels", type=lambda s: _parse_int_tuple(s, 2, "--channels"),
                   default=(8, 256), help="conv width range LO,HI")
    p.add_argument("--kernels", type=lambda s: tuple(int(x) for x in s.split(",")),
                   default=(1, 3, 5, 7), help="kernel sizes, comma-separated")
    p.add_argument("--input", type=lambda s: _parse_int_tuple(s, 3, "--input"),
                   default=(3, 32, 32), help="input shape C,H,W")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", help="train the predictor zoo on a dataset CSV")
    p.add_argument("--data", required=True, help="training dataset CSV")
    p.add_argument("--out", required=True, help="where to save the predictor")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--models", help="comma-separated subset of the zoo")
    p.add_argument("--val-fraction", type=float, default=0.2)
    p.add_argument("--no-log-targets", action="store_true",
                   help="fit raw targets instead of log targets")
    p.add_argument("--jobs", type=int, default=-1, help="worker cap for ensembles")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="predict cost for a graph or a dataset")
    p.add_argument("--pred", required=True, help="trained predictor file")
    p.add_argument("--graph", help="graph file (single mode)")
    p.add_argument("--config", help="run configuration JSON (single mode)")
    p.add_argument("--data", help="dataset CSV (batch mode)")
    p.add_argument("--structural", choices=("nsm", "embedding"),
                   help="defaults to the predictor's layout")
    p.add_argument("--model", help="embeddings file for --structural embedding")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="per-target MRE of a predictor on a dataset")
    p.add_argument("--pred", required=True)
    p.add_argument("--data", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("schedule", help="assign jobs to machines")
    p.add_argument("--data", required=True, help="jobs CSV")
    p.add_argument("--capacities", help="per-machine memory MiB, comma-separated")
    p.add_argument("--machines", type=int, help="machine count (unbounded memory)")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--method", choices=("ga", "brute", "random"), default="ga")
    p.add_argument("--generations", type=int, default=20)
    p.add_argument("--population", type=int, default=20)
    p.add_argument("--out", help="optional JSON report path")
    p.set_defaults(func=cmd_schedule)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    _configure_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except AbacusError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
