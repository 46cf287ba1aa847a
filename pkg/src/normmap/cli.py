"""Command-line interface.

Subcommands: ingest, align, fit, evaluate, ablate, upper-bound, sweep,
report, reproduce. Failures expected from bad inputs print one JSON
object on stderr and exit 2; success exits 0.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .ablation import make_cdiff, make_rand, make_shuffle, make_tax_shuffle
from .dataset import (
    build_matrix,
    ingest_norm,
    load_canonical,
    load_matrix,
    norm_stats,
    save_canonical,
    save_matrix,
)
from .embeddings import align, load_embeddings
from .errors import NormMapError
from .evaluation import ModelSpec, cross_validate, make_fold_plan
from .experiment import (
    ExperimentConfig,
    emit_report,
    run_experiment,
    sweep_k,
    _write_json,
)
from .ffnn import TrainConfig, init_ffnn, save_ffnn_model, train_ffnn
from .plsr import fit_plsr, save_plsr_model
from .reproduce import ReproduceConfig, reproduce_table


def _cmd_ingest(args) -> int:
    norm = ingest_norm(args.dataset, args.infile)
    save_canonical(norm, args.out)
    print(json.dumps(norm_stats(norm), sort_keys=True))
    return 0


def _load_norm_matrix(path):
    with open(path, "r", encoding="utf-8") as fh:
        first = fh.readline()
    if first.startswith("# norm-matrix"):
        return load_matrix(path)
    return build_matrix(load_canonical(path))


def _cmd_align(args) -> int:
    table = load_embeddings(args.embeddings, args.format)
    matrix = _load_norm_matrix(args.norm)
    pair = align(table, matrix, missing_policy=args.policy)
    summary = {
        "aligned": len(pair.concept_order),
        "dropped": list(pair.dropped),
        "dim": int(pair.X.shape[1]),
    }
    print(json.dumps(summary, sort_keys=True))
    return 0


def _cmd_fit(args) -> int:
    matrix = _load_norm_matrix(args.norm)
    table = load_embeddings(args.embeddings, args.format)
    pair = align(table, matrix)
    k = args.hidden if args.hidden is not None else args.k
    if args.method == "plsr":
        model = fit_plsr(pair.X, pair.Y.values, k=k)
        save_plsr_model(model, args.out)
    else:
        cfg = TrainConfig(epochs=args.epochs, learning_rate=args.lr,
                          batch_size=min(args.batch_size, pair.X.shape[0]),
                          seed=args.seed)
        model = init_ffnn(pair.X.shape[1], k, pair.Y.shape[1], seed=args.seed)
        model = train_ffnn(model, pair.X, pair.Y.values, cfg)
        save_ffnn_model(model, args.out)
    print(json.dumps({"method": args.method, "k": k, "model": str(args.out)},
                     sort_keys=True))
    return 0


def _cmd_evaluate(args) -> int:
    config = ExperimentConfig.from_file(args.config)
    bundle = run_experiment(config)
    print(json.dumps({
        "fingerprint": bundle.fingerprint,
        "files": [str(p) for p in bundle.files],
        "aggregate": {name: r.aggregate for name, r in bundle.reports.items()},
    }, sort_keys=True))
    return 0


def _cmd_ablate(args) -> int:
    matrix = _load_norm_matrix(args.norm)
    if args.kind == "rand":
        out = make_rand(matrix.shape, args.seed, matrix.concept_index,
                        matrix.feature_index)
    elif args.kind == "shuffle":
        out = make_shuffle(matrix, args.seed)
    elif args.kind == "taxshuffle":
        norm = load_canonical(args.norm)
        out = make_tax_shuffle(matrix, norm.feature_meta, args.seed)
    else:
        out = make_cdiff(matrix.concept_index, matrix.feature_index)
    save_matrix(out, args.out)
    print(json.dumps({"kind": args.kind, "out": str(args.out),
                      "density": out.density}, sort_keys=True))
    return 0


def _cmd_upper_bound(args) -> int:
    matrix = _load_norm_matrix(args.norm)
    plan = make_fold_plan(matrix.concept_index, args.folds, args.fold_seed)
    spec = ModelSpec(method=args.method, k=args.k)
    report = cross_validate(matrix.values, matrix, spec, plan)
    if args.out:
        _write_json(report.to_dict(), Path(args.out))
    print(json.dumps(report.aggregate, sort_keys=True))
    return 0


def _cmd_sweep(args) -> int:
    config = ExperimentConfig.from_file(args.config)
    grid = tuple(int(x) for x in args.grid.split(",")) if args.grid else None
    result = sweep_k(config, grid=grid)
    print(json.dumps({"selected_k": result.selected_k,
                      "files": [str(p) for p in result.files]},
                     sort_keys=True))
    return 0


def _cmd_report(args) -> int:
    with open(args.bundle, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    from .evaluation import EvalReport
    reports = {name: EvalReport.from_dict(r)
               for name, r in data["reports"].items()}
    path = emit_report(reports, args.format, args.out,
                       fingerprint_value=data.get("fingerprint", ""))
    print(json.dumps({"out": str(path)}, sort_keys=True))
    return 0


def _cmd_reproduce(args) -> int:
    rc = ReproduceConfig.from_file(args.config)
    payload = reproduce_table(rc, args.table)
    print(payload["markdown"])
    if payload["warnings"]:
        for warning in payload["warnings"]:
            print(f"warning: {warning}", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="normmap",
        description="Map word embeddings onto semantic feature norms with "
                    "diagnostic baselines and upper bounds.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true",
                        help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="published distribution -> canonical TSV")
    p.add_argument("--dataset", required=True,
                   choices=("mcrae", "buchanan", "binder"))
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("align", help="check embedding coverage of a norm")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--norm", required=True)
    p.add_argument("--format", default="word2vec_text",
                   choices=("word2vec_text", "tsv"))
    p.add_argument("--policy", default="drop", choices=("drop", "error"))
    p.set_defaults(func=_cmd_align)

    p = sub.add_parser("fit", help="fit one model on the full aligned data")
    p.add_argument("--method", required=True, choices=("plsr", "ffnn"))
    p.add_argument("--norm", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--format", default="word2vec_text",
                   choices=("word2vec_text", "tsv"))
    p.add_argument("--k", type=int, default=25)
    p.add_argument("--hidden", type=int, default=None,
                   help="alias for --k (FFNN hidden layer size)")
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("evaluate", help="run a config: system + ablations + "
                                        "upper bounds, one fold plan")
    p.add_argument("--config", required=True)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("ablate", help="generate a replacement target matrix")
    p.add_argument("--kind", required=True,
                   choices=("rand", "shuffle", "taxshuffle", "cdiff"))
    p.add_argument("--norm", required=True)
    p.add_argument("--seed", type=int, default=17)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_ablate)

    p = sub.add_parser("upper-bound", help="self-mapping ceiling of a matrix")
    p.add_argument("--norm", required=True)
    p.add_argument("--method", default="plsr", choices=("plsr", "ffnn"))
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--fold-seed", type=int, default=13)
    p.add_argument("--out", default="")
    p.set_defaults(func=_cmd_upper_bound)

    p = sub.add_parser("sweep", help="train/test curves over a k grid")
    p.add_argument("--config", required=True)
    p.add_argument("--grid", default="",
                   help="comma-separated override, e.g. 5,10,25")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("report", help="re-render a bundle.json")
    p.add_argument("--bundle", required=True)
    p.add_argument("--format", required=True,
                   choices=("json", "markdown", "csv"))
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_report)

    p = sub.add_parser("reproduce", help="assemble a published-table "
                                         "reproduction")
    p.add_argument("--table", type=int, required=True, choices=(1, 3, 4, 5, 6))
    p.add_argument("--config", required=True)
    p.set_defaults(func=_cmd_reproduce)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except NormMapError as e:
        print(json.dumps({"error": type(e).__name__, "message": str(e)}),
              file=sys.stderr)
        return 2
    except OSError as e:
        print(json.dumps({"error": "OSError", "message": str(e)}),
              file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
