"""Assemble the cross-norm result tables from a multi-norm config.

A reproduction config lists the three norm files (and, when available,
per-norm embedding files produced by the extractor) plus the tuned
latent sizes. Each table command runs exactly the evaluations that
table needs, under one fold plan per norm, and renders a Markdown table
in the layout of the corresponding published table; cells whose inputs
are missing (usually: no embedding file yet) render as ``n/a`` and are
listed in the accompanying JSON under ``warnings``.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigInvalid
from .evaluation import permutation_test
from .experiment import ExperimentConfig, parse_kv_file, run_experiment, sweep_k

log = logging.getLogger(__name__)

NORM_NAMES = ("mcrae", "buchanan", "binder")
TABLES = (1, 3, 4, 5, 6)

_DEFAULT_K = {"mcrae": 25, "buchanan": 80, "binder": 20}
_DEFAULT_HIGH_K = {"mcrae": 300, "buchanan": 300, "binder": 50}

_RC_INTS = {
    "folds": 10, "fold_seed": 13, "ablation_seed": 17,
    "epochs": 50, "batch_size": 32, "train_seed": 0, "n_retrieval": 10,
}


@dataclass(frozen=True)
class ReproduceConfig:
    norms: dict          # name -> path ("" when absent)
    embeddings: dict     # name -> path ("" when absent)
    k: dict              # name -> tuned latent size
    high_k: dict         # name -> overfitting contrast size (table 6)
    folds: int = 10
    fold_seed: int = 13
    ablation_seed: int = 17
    epochs: int = 50
    learning_rate: float = 1e-4
    batch_size: int = 32
    train_seed: int = 0
    n_retrieval: int = 10
    out: str = "out/reproduce"

    @classmethod
    def from_file(cls, path) -> "ReproduceConfig":
        raw = parse_kv_file(path)
        norms = {}
        embeddings = {}
        k = dict(_DEFAULT_K)
        high_k = dict(_DEFAULT_HIGH_K)
        scalars = dict(_RC_INTS)
        learning_rate = 1e-4
        out = "out/reproduce"
        for key, value in raw.items():
            if key.endswith("_norm") and key[:-5] in NORM_NAMES:
                norms[key[:-5]] = value
            elif key.endswith("_embeddings") and key[:-11] in NORM_NAMES:
                embeddings[key[:-11]] = value
            elif key.startswith("k_") and key[2:] in NORM_NAMES:
                k[key[2:]] = int(value)
            elif key.startswith("high_k_") and key[7:] in NORM_NAMES:
                high_k[key[7:]] = int(value)
            elif key in scalars:
                scalars[key] = int(value)
            elif key == "learning_rate":
                learning_rate = float(value)
            elif key == "out":
                out = value
            else:
                raise ConfigInvalid(key, "unknown reproduction key")
        # missing files degrade to n/a cells rather than hard errors, so a
        # partially populated data/ directory still yields partial tables
        for mapping, what in ((norms, "norm"), (embeddings, "embedding")):
            for name, p in list(mapping.items()):
                if p and not Path(p).exists():
                    log.warning("%s %s file not found (%s); treating as "
                                "absent", name, what, p)
                    mapping[name] = ""
        return cls(norms=norms, embeddings=embeddings, k=k, high_k=high_k,
                   learning_rate=learning_rate, out=out, **scalars)


def _experiment_config(rc: ReproduceConfig, name: str, method: str,
                       ablations: tuple[str, ...]) -> ExperimentConfig:
    return ExperimentConfig(
        dataset=name,
        norm=rc.norms.get(name, ""),
        embeddings=rc.embeddings.get(name, ""),
        method=method,
        k=rc.k[name],
        epochs=rc.epochs,
        learning_rate=rc.learning_rate,
        batch_size=rc.batch_size,
        train_seed=rc.train_seed,
        folds=rc.folds,
        fold_seed=rc.fold_seed,
        ablations=ablations,
        ablation_seed=rc.ablation_seed,
        n_retrieval=rc.n_retrieval,
        out=str(Path(rc.out) / name),
    )


def _headline(name: str) -> str:
    return "rho" if name == "binder" else "f1_at_10"


def _norm_ablations(name: str, wanted: tuple[str, ...]) -> tuple[str, ...]:
    out = []
    for kind in wanted:
        if kind == "shuffle" and name == "binder":
            continue  # shuffle is defined for categorical norms only
        if kind == "taxshuffle" and name != "mcrae":
            continue  # needs the McRae relation tags
        out.append(kind)
    return tuple(out)


def _cell(report, metric) -> float | None:
    if report is None:
        return None
    return report.aggregate.get(metric)


def _fmt(value: float | None) -> str:
    return "n/a" if value is None else f"{value:.2f}"


def _render(title: str, header: list[str], rows: list[list[str]],
            fingerprint: str) -> str:
    lines = [f"## {title}", "", f"fingerprint: `{fingerprint}`", ""]
    lines.append("| " + " | ".join(header) + " |")
    lines.append("|---" * len(header) + "|")
    for row in rows:
        lines.append("| " + " | ".join(row) + " |")
    return "\n".join(lines) + "\n"


def reproduce_table(rc: ReproduceConfig, table: int,
                    write_files: bool = True) -> dict:
    """Compute one published-table reproduction; returns the payload."""
    if table not in TABLES:
        raise ConfigInvalid("table", f"must be one of {TABLES}")
    builder = {
        1: _table1, 3: _table3, 4: _table4, 5: _table5, 6: _table6,
    }[table]
    payload = builder(rc)
    if write_files:
        out_dir = Path(rc.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        md = out_dir / f"table{table}.md"
        md.write_text(payload["markdown"], encoding="utf-8")
        js = out_dir / f"table{table}.json"
        js.write_text(json.dumps(
            {k: v for k, v in payload.items() if k != "markdown"},
            sort_keys=True, indent=2) + "\n", encoding="utf-8")
        payload["files"] = [str(md), str(js)]
    return payload


def _available(rc: ReproduceConfig, name: str) -> bool:
    if rc.norms.get(name):
        return True
    log.warning("no %s norm file configured; its rows render as n/a", name)
    return False


def _run(rc, name, method, ablations):
    cfg = _experiment_config(rc, name, method,
                             _norm_ablations(name, ablations))
    return run_experiment(cfg, write_files=False)


def _table1(rc: ReproduceConfig) -> dict:
    header = ["norm", "PLSR sys", "PLSR rand", "FFNN sys", "FFNN rand"]
    rows, values, warnings = [], {}, []
    for name in NORM_NAMES:
        metric = _headline(name)
        cells: dict = {}
        if _available(rc, name):
            if not rc.embeddings.get(name):
                warnings.append(f"{name}: no embeddings; sys/rand need them")
            for method in ("plsr", "ffnn"):
                bundle = _run(rc, name, method, ("rand",))
                cells[f"{method}_sys"] = _cell(bundle.reports.get("sys"), metric)
                cells[f"{method}_rand"] = _cell(bundle.reports.get("rand"), metric)
        values[name] = cells
        rows.append([f"{name} ({metric})"] + [
            _fmt(cells.get(c)) for c in
            ("plsr_sys", "plsr_rand", "ffnn_sys", "ffnn_rand")
        ])
    md = _render("Mapping embeddings to feature norms (system vs random "
                 "baseline)", header, rows, _fp(rc, 1))
    return {"table": 1, "values": values, "warnings": warnings,
            "markdown": md}


def _table3(rc: ReproduceConfig) -> dict:
    header = ["norm", "sys", "upper", "rand", "rand_upper"]
    rows, values, warnings = [], {}, []
    for name in NORM_NAMES:
        metric = _headline(name)
        cells: dict = {}
        if _available(rc, name):
            bundle = _run(rc, name, "plsr", ("rand",))
            cells = {
                "sys": _cell(bundle.reports.get("sys"), metric),
                "upper": _cell(bundle.reports.get("upper"), metric),
                "rand": _cell(bundle.reports.get("rand"), metric),
                "rand_upper": _cell(bundle.reports.get("rand_upper"), metric),
            }
            if not rc.embeddings.get(name):
                warnings.append(f"{name}: no embeddings; sys/rand are n/a")
        values[name] = cells
        rows.append([f"{name} ({metric})"]
                    + [_fmt(cells.get(c)) for c in header[1:]])
    md = _render("Self-mapping upper bounds (PLSR)", header, rows, _fp(rc, 3))
    return {"table": 3, "values": values, "warnings": warnings,
            "markdown": md}


def _table4(rc: ReproduceConfig) -> dict:
    header = ["norm", "sys", "upper", "shuffle", "shuffle_upper", "rand",
              "cdiff", "cdiff_upper"]
    rows, values, warnings = [], {}, []
    for name in NORM_NAMES:
        metric = _headline(name)
        cells: dict = {}
        if _available(rc, name):
            wanted = ("rand", "shuffle", "cdiff", "taxshuffle")
            bundle = _run(rc, name, "plsr", wanted)
            for run in ("sys", "upper", "rand", "shuffle", "shuffle_upper",
                        "cdiff", "cdiff_upper", "taxshuffle"):
                cells[run] = _cell(bundle.reports.get(run), metric)
            if name == "binder":
                warnings.append("binder: shuffle skipped (dense norm)")
            # paired significance of nonsense vs system where possible
            sys_report = bundle.reports.get("sys")
            for other in ("cdiff", "taxshuffle"):
                other_report = bundle.reports.get(other)
                if sys_report is None or other_report is None:
                    continue
                a, b = _paired_metric(sys_report, other_report, metric)
                cells[f"p_sys_vs_{other}"] = permutation_test(a, b, seed=1)
        values[name] = cells
        rows.append([f"{name} ({metric})"]
                    + [_fmt(cells.get(c)) for c in header[1:]])
    md = _render("Replacement baselines and their upper bounds (PLSR)",
                 header, rows, _fp(rc, 4))
    return {"table": 4, "values": values, "warnings": warnings,
            "markdown": md}


def _table5(rc: ReproduceConfig) -> dict:
    runs = ["sys", "upper", "rand", "rand_upper", "shuffle", "shuffle_upper",
            "cdiff", "cdiff_upper"]
    header = ["norm"] + runs
    rows, values, warnings = [], {}, []
    for name in NORM_NAMES:
        cells: dict = {}
        if _available(rc, name):
            bundle = _run(rc, name, "plsr", ("rand", "shuffle", "cdiff"))
            metric = f"na_at_{rc.n_retrieval}"
            for run in runs:
                cells[run] = _cell(bundle.reports.get(run), metric)
            if name == "binder":
                warnings.append("binder: shuffle skipped (dense norm)")
        values[name] = cells
        rows.append([name] + [_fmt(cells.get(c)) for c in runs])
    md = _render(f"Neighborhood accuracy @{rc.n_retrieval} with upper bounds",
                 header, rows, _fp(rc, 5))
    return {"table": 5, "values": values, "warnings": warnings,
            "markdown": md}


def _table6(rc: ReproduceConfig) -> dict:
    rows, values, warnings = [], {}, []
    header = ["norm", "k", "train_metric", "test_metric", "train_mse",
              "test_mse"]
    for name in NORM_NAMES:
        if not _available(rc, name):
            values[name] = {}
            rows.append([name] + ["n/a"] * 5)
            continue
        metric = _headline(name)
        grid = tuple(sorted({rc.k[name], rc.high_k[name]}))
        for method in ("plsr", "ffnn"):
            cfg = _experiment_config(rc, name, method, ())
            sweep = sweep_k(cfg, grid=grid, write_files=False)
            values[f"{name}_{method}"] = sweep.to_dict()
            for row in sweep.rows:
                rows.append([
                    f"{name} ({method})",
                    str(row["k"]),
                    _fmt(row.get(f"train_{metric}")),
                    _fmt(row.get(metric)),
                    _fmt(row.get("train_mse")),
                    _fmt(row.get("mse")),
                ])
        if not rc.embeddings.get(name):
            warnings.append(
                f"{name}: sweep ran as self-mapping (no embeddings file)")
    md = _render("Overfitting: train vs test at tuned and oversized k",
                 header, rows, _fp(rc, 6))
    return {"table": 6, "values": values, "warnings": warnings,
            "markdown": md}


def _paired_metric(report_a, report_b, metric):
    shared = [c for c in report_a.per_concept
              if metric in report_a.per_concept[c]
              and metric in report_b.per_concept.get(c, {})]
    a = [report_a.per_concept[c][metric] for c in shared]
    b = [report_b.per_concept[c][metric] for c in shared]
    return a, b


def _fp(rc: ReproduceConfig, table: int) -> str:
    from ._util import fingerprint
    return fingerprint({
        "table": table,
        "norms": rc.norms, "embeddings": rc.embeddings,
        "k": rc.k, "high_k": rc.high_k,
        "folds": rc.folds, "fold_seed": rc.fold_seed,
        "ablation_seed": rc.ablation_seed,
        "epochs": rc.epochs, "learning_rate": rc.learning_rate,
        "batch_size": rc.batch_size, "train_seed": rc.train_seed,
    })
