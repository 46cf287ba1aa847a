"""End-to-end experiment orchestration from plain key=value config files.

A run loads one norm, optionally aligns it with an embedding table,
builds a single fold plan, and evaluates the system alongside the
requested replacement targets and every run's self-mapping upper bound
— all sharing that one fold plan so comparisons stay paired. Results
are written as lossless JSON plus rounded Markdown/CSV tables, every
artifact carrying the config fingerprint.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from ._util import fingerprint
from .ablation import make_cdiff, make_rand, make_shuffle, make_tax_shuffle
from .dataset import (
    DATASETS,
    SYNTHETIC,
    CanonicalNorm,
    NormMatrix,
    build_matrix,
    ingest_norm,
    load_canonical,
    norm_stats,
    save_matrix,
    synthetic_categorical,
    synthetic_ratings,
    _CANONICAL_MAGIC,
)
from .embeddings import align, load_embeddings
from .errors import ConfigInvalid, ReportIOError
from .evaluation import (
    EvalReport,
    ModelSpec,
    cross_validate,
    make_fold_plan,
)
from .ffnn import TrainConfig

log = logging.getLogger(__name__)

ABLATION_CHOICES = ("rand", "shuffle", "taxshuffle", "cdiff")
FORMAT_CHOICES = ("json", "markdown", "csv")

# key -> (parser, default); required keys have no default
_SCHEMA: dict[str, tuple] = {
    "dataset": (str, None),
    "norm": (str, ""),
    "embeddings": (str, ""),
    "embedding_format": (str, "word2vec_text"),
    "method": (str, "plsr"),
    "k": (int, 25),
    "epochs": (int, 50),
    "learning_rate": (float, 1e-4),
    "batch_size": (int, 32),
    "train_seed": (int, 0),
    "folds": (int, 10),
    "fold_seed": (int, 13),
    "ablations": ("strlist", ()),
    "ablation_seed": (int, 17),
    "sweep": ("intlist", ()),
    "out": (str, "out"),
    "formats": ("strlist", ("json", "markdown")),
    "n_retrieval": (int, 10),
    "synthetic_kind": (str, "categorical"),
    "synthetic_n": (int, 120),
    "synthetic_m": (int, 400),
    "synthetic_seed": (int, 7),
    "synthetic_taxonomic": (int, 0),
    "synthetic_embedding_dim": (int, 0),
    "synthetic_embedding_noise": (float, 1.0),
}


def _parse_value(key: str, raw: str):
    kind = _SCHEMA[key][0]
    try:
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        if kind == "strlist":
            return tuple(x.strip() for x in raw.split(",") if x.strip())
        if kind == "intlist":
            return tuple(int(x) for x in raw.split(",") if x.strip())
        return raw
    except ValueError:
        raise ConfigInvalid(key, f"cannot parse {raw!r} as {kind}")


def parse_kv_file(path) -> dict:
    """Parse a `key = value` file; '#' starts a comment."""
    out: dict = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigInvalid(f"line {line_no}", f"expected key = value, got {line!r}")
            key, raw = (part.strip() for part in line.split("=", 1))
            out[key] = raw
    return out


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: str
    norm: str = ""
    embeddings: str = ""
    embedding_format: str = "word2vec_text"
    method: str = "plsr"
    k: int = 25
    epochs: int = 50
    learning_rate: float = 1e-4
    batch_size: int = 32
    train_seed: int = 0
    folds: int = 10
    fold_seed: int = 13
    ablations: tuple[str, ...] = ()
    ablation_seed: int = 17
    sweep: tuple[int, ...] = ()
    out: str = "out"
    formats: tuple[str, ...] = ("json", "markdown")
    n_retrieval: int = 10
    synthetic_kind: str = "categorical"
    synthetic_n: int = 120
    synthetic_m: int = 400
    synthetic_seed: int = 7
    synthetic_taxonomic: int = 0
    synthetic_embedding_dim: int = 0
    synthetic_embedding_noise: float = 1.0

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        raw = parse_kv_file(path)
        values: dict = {}
        for key, raw_value in raw.items():
            if key not in _SCHEMA:
                raise ConfigInvalid(key, "unknown configuration key")
            values[key] = _parse_value(key, raw_value)
        if "dataset" not in values:
            raise ConfigInvalid("dataset", "missing required key")
        cfg = cls(**values)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.dataset not in DATASETS:
            raise ConfigInvalid("dataset", f"must be one of {DATASETS}")
        if self.method not in ("plsr", "ffnn"):
            raise ConfigInvalid("method", "must be plsr or ffnn")
        if self.k < 1:
            raise ConfigInvalid("k", "must be >= 1")
        if self.folds < 2:
            raise ConfigInvalid("folds", "must be >= 2")
        for kind in self.ablations:
            if kind not in ABLATION_CHOICES:
                raise ConfigInvalid("ablations",
                                    f"{kind!r} not in {ABLATION_CHOICES}")
        for fmt in self.formats:
            if fmt not in FORMAT_CHOICES:
                raise ConfigInvalid("formats",
                                    f"{fmt!r} not in {FORMAT_CHOICES}")
        if self.sweep and tuple(sorted(self.sweep)) != self.sweep:
            raise ConfigInvalid("sweep", "grid must be sorted ascending")
        if any(k < 1 for k in self.sweep):
            raise ConfigInvalid("sweep", "grid values must be >= 1")
        if self.dataset == SYNTHETIC:
            if self.synthetic_kind not in ("categorical", "ratings"):
                raise ConfigInvalid("synthetic_kind",
                                    "must be categorical or ratings")
        elif not self.norm:
            raise ConfigInvalid("norm", "required for non-synthetic datasets")
        if self.norm and not Path(self.norm).exists():
            raise ConfigInvalid("norm", f"file not found: {self.norm}")
        if self.embeddings and not Path(self.embeddings).exists():
            raise ConfigInvalid("embeddings",
                                f"file not found: {self.embeddings}")

    def to_dict(self) -> dict:
        return {
            name: (list(v) if isinstance(v, tuple) else v)
            for name, v in self.__dict__.items()
        }

    @property
    def fingerprint(self) -> str:
        return fingerprint(self.to_dict())

    def model_spec(self) -> ModelSpec:
        if self.method == "plsr":
            return ModelSpec(method="plsr", k=self.k)
        return ModelSpec(
            method="ffnn", k=self.k, seed=self.train_seed,
            train=TrainConfig(epochs=self.epochs,
                              learning_rate=self.learning_rate,
                              batch_size=self.batch_size,
                              seed=self.train_seed),
        )


@dataclass
class ReportBundle:
    fingerprint: str
    reports: dict[str, EvalReport]
    dataset_stats: dict
    dropped_concepts: tuple[str, ...]
    files: list[Path] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "fingerprint": self.fingerprint,
            "dataset_stats": self.dataset_stats,
            "dropped_concepts": list(self.dropped_concepts),
            "reports": {name: r.to_dict() for name, r in self.reports.items()},
        }


def load_norm(config: ExperimentConfig) -> CanonicalNorm:
    if config.dataset == SYNTHETIC and not config.norm:
        if config.synthetic_kind == "categorical":
            return synthetic_categorical(
                config.synthetic_n, config.synthetic_m,
                taxonomic_feature_count=config.synthetic_taxonomic,
                seed=config.synthetic_seed)
        return synthetic_ratings(config.synthetic_n, config.synthetic_m,
                                 seed=config.synthetic_seed)
    with open(config.norm, "r", encoding="utf-8") as fh:
        first = fh.readline().rstrip("\n")
    if first == _CANONICAL_MAGIC:
        return load_canonical(config.norm)
    return ingest_norm(config.dataset, config.norm)


def _build_ablation(kind: str, Y: NormMatrix, norm: CanonicalNorm,
                    seed: int) -> NormMatrix:
    if kind == "rand":
        return make_rand(Y.shape, seed, Y.concept_index, Y.feature_index)
    if kind == "shuffle":
        return make_shuffle(Y, seed)
    if kind == "taxshuffle":
        return make_tax_shuffle(Y, norm.feature_meta, seed)
    if kind == "cdiff":
        return make_cdiff(Y.concept_index, Y.feature_index)
    raise ConfigInvalid("ablations", f"unknown kind {kind!r}")


def _aligned_source(config: ExperimentConfig, Y_full: NormMatrix):
    """(X or None, Y restricted to embedded concepts, dropped labels)."""
    if config.embeddings:
        table = load_embeddings(config.embeddings, config.embedding_format)
        pair = align(table, Y_full, missing_policy="drop")
        return pair.X, pair.Y, pair.dropped
    if config.dataset == SYNTHETIC and config.synthetic_embedding_dim > 0:
        # demo source: a noisy linear image of the norm itself
        rng = np.random.default_rng(
            np.random.SeedSequence(entropy=config.synthetic_seed,
                                   spawn_key=(97,)))
        dense = (Y_full.values.toarray() if hasattr(Y_full.values, "toarray")
                 else Y_full.values)
        proj = rng.normal(size=(Y_full.shape[1], config.synthetic_embedding_dim))
        X = dense @ proj + config.synthetic_embedding_noise * rng.normal(
            size=(Y_full.shape[0], config.synthetic_embedding_dim))
        return X, Y_full, ()
    return None, Y_full, ()


def run_experiment(config: ExperimentConfig, write_files: bool = True
                   ) -> ReportBundle:
    """Run system + ablations + upper bounds under one fold plan."""
    config.validate()
    norm = load_norm(config)
    Y_full = build_matrix(norm)
    X, Y, dropped = _aligned_source(config, Y_full)
    plan = make_fold_plan(Y.concept_index, config.folds, config.fold_seed)
    spec = config.model_spec()
    metric_family = "f1" if Y.categorical else "rho"
    n_ret = config.n_retrieval

    reports: dict[str, EvalReport] = {}
    matrices: dict[str, NormMatrix] = {}
    if X is not None:
        reports["sys"] = cross_validate(X, Y, spec, plan, n_retrieval=n_ret)
    reports["upper"] = cross_validate(Y.values, Y, spec, plan,
                                      n_retrieval=n_ret)
    for kind in config.ablations:
        target = _build_ablation(kind, Y, norm, config.ablation_seed)
        matrices[kind] = target
        if X is not None:
            reports[kind] = cross_validate(
                X, target, spec, plan, n_retrieval=n_ret,
                ranking_metric=metric_family)
        reports[f"{kind}_upper"] = cross_validate(
            target.values, target, spec, plan, n_retrieval=n_ret,
            ranking_metric=metric_family)

    bundle = ReportBundle(
        fingerprint=config.fingerprint,
        reports=reports,
        dataset_stats=norm_stats(norm),
        dropped_concepts=tuple(dropped),
    )
    if write_files:
        out_dir = Path(config.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        bundle.files.append(_write_json(bundle.to_dict(),
                                        out_dir / "bundle.json"))
        for fmt in config.formats:
            if fmt == "json":
                continue  # bundle.json already carries everything
            bundle.files.append(
                emit_report(reports, fmt, out_dir / f"report.{_ext(fmt)}",
                            fingerprint_value=config.fingerprint))
        matrix_dir = out_dir / "matrices"
        if matrices:
            matrix_dir.mkdir(exist_ok=True)
            for kind, target in matrices.items():
                path = matrix_dir / f"{kind}.tsv"
                save_matrix(target, path)
                bundle.files.append(path)
    return bundle


# ---------------------------------------------------------------------------
# report emission
# ---------------------------------------------------------------------------

def _ext(fmt: str) -> str:
    return {"markdown": "md", "csv": "csv", "json": "json"}[fmt]


def _write_json(payload: dict, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    text = json.dumps(payload, sort_keys=True, indent=2) + "\n"
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as e:
        raise ReportIOError(f"cannot write {path}: {e}")
    return path


def _metric_columns(reports: Mapping[str, EvalReport]) -> list[str]:
    keys: list[str] = []
    for report in reports.values():
        for key in report.aggregate:
            if key not in keys:
                keys.append(key)
    return sorted(keys)


def emit_report(reports: Mapping[str, EvalReport], fmt: str, path,
                fingerprint_value: str = "") -> Path:
    """Write reports in one format; Markdown/CSV round to 2 decimals."""
    if not reports:
        raise ReportIOError("no reports to write")
    if fmt not in FORMAT_CHOICES:
        raise ConfigInvalid("formats", f"unknown format {fmt!r}")
    path = Path(path)
    if fmt == "json":
        return _write_json(
            {"fingerprint": fingerprint_value,
             "reports": {name: r.to_dict() for name, r in reports.items()}},
            path,
        )
    columns = _metric_columns(reports)
    lines: list[str] = []
    if fmt == "markdown":
        if fingerprint_value:
            lines.append(f"fingerprint: `{fingerprint_value}`")
            lines.append("")
        lines.append("| run | " + " | ".join(columns) + " |")
        lines.append("|---" * (len(columns) + 1) + "|")
        for name, report in reports.items():
            cells = [
                f"{report.aggregate[c]:.2f}" if c in report.aggregate else ""
                for c in columns
            ]
            lines.append(f"| {name} | " + " | ".join(cells) + " |")
    else:  # csv
        header = ["run"] + columns
        if fingerprint_value:
            lines.append(f"# fingerprint: {fingerprint_value}")
        lines.append(",".join(header))
        for name, report in reports.items():
            cells = [
                f"{report.aggregate[c]:.2f}" if c in report.aggregate else ""
                for c in columns
            ]
            lines.append(",".join([name] + cells))
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    except OSError as e:
        raise ReportIOError(f"cannot write {path}: {e}")
    return path


# ---------------------------------------------------------------------------
# hyperparameter sweep
# ---------------------------------------------------------------------------

@dataclass
class SweepReport:
    grid: tuple[int, ...]
    rows: tuple[dict, ...]
    selected_k: int
    fingerprint: str
    files: list[Path] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "grid": list(self.grid),
            "rows": list(self.rows),
            "selected_k": self.selected_k,
            "fingerprint": self.fingerprint,
        }


def sweep_k(config: ExperimentConfig, grid: Sequence[int] | None = None,
            write_files: bool = True) -> SweepReport:
    """Train/test curves over a grid of latent sizes.

    The selected k minimizes test MSE (ties go to the smaller k). Uses
    the configured embeddings as source when present, otherwise the
    norm itself (self-mapping sweep).
    """
    grid = tuple(grid) if grid is not None else config.sweep
    if not grid:
        raise ConfigInvalid("sweep", "grid must be non-empty")
    if tuple(sorted(grid)) != tuple(grid):
        raise ConfigInvalid("sweep", "grid must be sorted ascending")

    norm = load_norm(config)
    Y_full = build_matrix(norm)
    X, Y, _ = _aligned_source(config, Y_full)
    source = Y.values if X is None else X
    plan = make_fold_plan(Y.concept_index, config.folds, config.fold_seed)

    rows = []
    for k in grid:
        if config.method == "plsr":
            spec = ModelSpec(method="plsr", k=k)
        else:
            base = config.model_spec()
            spec = ModelSpec(method="ffnn", k=k, seed=base.seed,
                             train=base.train)
        report = cross_validate(source, Y, spec, plan,
                                n_retrieval=config.n_retrieval,
                                include_train_metrics=True)
        row = {"k": k}
        row.update(report.aggregate)
        rows.append(row)

    test_mse = [row["mse"] for row in rows]
    selected = grid[int(np.argmin(test_mse))]
    result = SweepReport(
        grid=tuple(grid),
        rows=tuple(rows),
        selected_k=selected,
        fingerprint=fingerprint({"config": config.to_dict(),
                                 "grid": list(grid)}),
    )
    if write_files:
        out_dir = Path(config.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        result.files.append(_write_json(result.to_dict(),
                                        out_dir / "sweep.json"))
        csv_path = out_dir / "sweep.csv"
        columns = sorted({key for row in rows for key in row} - {"k"})
        lines = ["k," + ",".join(columns)]
        for row in rows:
            lines.append(",".join(
                [str(row["k"])]
                + [repr(row[c]) if c in row else "" for c in columns]))
        csv_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        result.files.append(csv_path)
        chart = _plot_sweep(rows, out_dir / "sweep.png")
        if chart is not None:
            result.files.append(chart)
    return result


def _plot_sweep(rows, path: Path) -> Path | None:
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:  # chart is a nicety; data files carry the curve
        log.warning("matplotlib unavailable; skipping sweep chart")
        return None
    ks = [row["k"] for row in rows]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(ks, [row["train_mse"] for row in rows], "o-", label="train MSE")
    ax.plot(ks, [row["mse"] for row in rows], "s-", label="test MSE")
    best = ks[int(np.argmin([row["mse"] for row in rows]))]
    ax.axvline(best, color="gray", linestyle=":", label=f"selected k={best}")
    ax.set_xlabel("latent dimension k")
    ax.set_ylabel("MSE")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
