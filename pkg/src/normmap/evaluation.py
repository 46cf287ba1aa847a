"""Evaluation metrics, the cross-validation driver, and significance test.

Categorical norms are scored with retrieval metrics over the top-n
predicted features (fixed n, deterministic index-order tie-break);
dense rating norms with per-concept Spearman correlation (fractional
ranks, mean over concepts); both additionally with MSE and cosine
neighborhood accuracy. Neighborhood candidate pools always contain all
concepts (training and held-out), with a concept's own gold row
excluded, so system, baseline and upper-bound runs stay comparable.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from ._util import fingerprint, rng_for
from .dataset import NormMatrix
from .errors import DimensionMismatch, EmptyGold, LengthMismatch
from .ffnn import TrainConfig, init_ffnn, predict_ffnn, train_ffnn
from .plsr import fit_plsr, predict_plsr

log = logging.getLogger(__name__)

DEFAULT_TOP_N = 10


# ---------------------------------------------------------------------------
# elementary metrics
# ---------------------------------------------------------------------------

def mse(pred, gold) -> float:
    """Mean of squared elementwise differences."""
    pred = np.asarray(pred, dtype=np.float64)
    gold = np.asarray(gold, dtype=np.float64)
    if pred.shape != gold.shape:
        raise DimensionMismatch(
            f"pred shape {pred.shape} != gold shape {gold.shape}"
        )
    return float(np.mean((pred - gold) ** 2))


def topn_indices(values: np.ndarray, n: int) -> np.ndarray:
    """Indices of the n largest values; ties broken by feature index."""
    return np.argsort(-np.asarray(values), kind="stable")[:n]


def f1_at_n(pred_row, gold_support, n: int = DEFAULT_TOP_N
            ) -> tuple[float, float, float]:
    """Precision, recall and F1 of the top-n predicted features.

    `gold_support` is the set of feature indices present for the
    concept. F1 is 0 when precision and recall are both 0.
    """
    support = set(int(i) for i in gold_support)
    if not support:
        raise EmptyGold("concept has no gold features")
    top = topn_indices(pred_row, n)
    hits = sum(1 for j in top if int(j) in support)
    precision = hits / n
    recall = hits / len(support)
    if precision + recall == 0.0:
        return 0.0, 0.0, 0.0
    f1 = 2.0 * precision * recall / (precision + recall)
    return precision, recall, f1


def average_f1_at_n(pred_row, gold_support, n: int = DEFAULT_TOP_N
                    ) -> tuple[float, float, float]:
    """Average-P/R/F1@N: means of the @1..@n values (flagged variant)."""
    triples = [f1_at_n(pred_row, gold_support, i) for i in range(1, n + 1)]
    arr = np.array(triples)
    return tuple(float(x) for x in arr.mean(axis=0))


def f1_at_gold_size(pred_row, gold_support) -> tuple[float, float, float]:
    """P/R/F1 with n set to the concept's own feature count (variant)."""
    return f1_at_n(pred_row, gold_support, n=len(set(gold_support)))


def rankdata_average(x: np.ndarray) -> np.ndarray:
    """1-based fractional ranks with ties sharing their average rank."""
    x = np.asarray(x)
    order = np.argsort(x, kind="stable")
    sx = x[order]
    boundary = np.r_[True, sx[1:] != sx[:-1]]
    group = np.cumsum(boundary) - 1
    counts = np.bincount(group)
    ends = np.cumsum(counts).astype(np.float64)
    starts = ends - counts + 1
    ranks = np.empty(len(x), dtype=np.float64)
    ranks[order] = ((starts + ends) / 2.0)[group]
    return ranks


def _pearson(a: np.ndarray, b: np.ndarray) -> float | None:
    a = a - a.mean()
    b = b - b.mean()
    denom = np.linalg.norm(a) * np.linalg.norm(b)
    if denom == 0.0:
        return None
    return float(a @ b / denom)


def spearman_rho_rows(pred, gold) -> tuple[np.ndarray, int]:
    """Per-row Spearman correlations; constant rows score 0 (counted)."""
    pred = np.asarray(pred, dtype=np.float64)
    gold = np.asarray(gold, dtype=np.float64)
    if pred.shape != gold.shape:
        raise DimensionMismatch(
            f"pred shape {pred.shape} != gold shape {gold.shape}"
        )
    if pred.shape[1] < 2:
        raise DimensionMismatch("need at least 2 features per row")
    out = np.empty(pred.shape[0])
    constant = 0
    for i in range(pred.shape[0]):
        rho = _pearson(rankdata_average(pred[i]), rankdata_average(gold[i]))
        if rho is None:
            constant += 1
            rho = 0.0
        out[i] = rho
    if constant:
        log.info("spearman: %d constant row(s) scored as 0", constant)
    return out, constant


def spearman_rho(pred, gold) -> float:
    """Mean per-concept Spearman correlation of feature rankings."""
    values, _ = spearman_rho_rows(pred, gold)
    return float(values.mean())


# ---------------------------------------------------------------------------
# cosine neighborhoods
# ---------------------------------------------------------------------------

def _unit_rows(M):
    """Row-normalized copy plus a mask of zero rows (cosine undefined)."""
    if sp.issparse(M):
        M = M.tocsr().astype(np.float64)
        norms = np.sqrt(np.asarray(M.multiply(M).sum(axis=1)).ravel())
        zero = norms == 0.0
        inv = np.where(zero, 0.0, 1.0 / np.where(zero, 1.0, norms))
        return sp.diags(inv) @ M, zero
    M = np.asarray(M, dtype=np.float64)
    norms = np.linalg.norm(M, axis=1)
    zero = norms == 0.0
    inv = np.where(zero, 0.0, 1.0 / np.where(zero, 1.0, norms))
    return M * inv[:, None], zero


def neighbor_sets(queries, pool, n: int = DEFAULT_TOP_N,
                  exclude: np.ndarray | None = None,
                  block: int = 512) -> np.ndarray:
    """Top-n pool rows by cosine similarity to each query row.

    `exclude[i]` names one pool index hidden from query i (a concept's
    own gold row), or -1. Rows with zero norm get similarity -1 to every
    candidate, and candidates with zero norm similarity -1 to every
    query; ties and such degenerate rows resolve by pool index order.
    """
    upool, pool_zero = _unit_rows(pool)
    uq, q_zero = _unit_rows(queries)
    n_pool = upool.shape[0]
    n_q = uq.shape[0]
    if n >= n_pool:
        raise ValueError(f"n={n} must be below pool size {n_pool}")
    if q_zero.any() or pool_zero.any():
        log.info("neighbor_sets: %d zero query row(s), %d zero pool row(s) "
                 "scored with similarity -1", int(q_zero.sum()),
                 int(pool_zero.sum()))
    out = np.empty((n_q, n), dtype=np.int64)
    for start in range(0, n_q, block):
        stop = min(start + block, n_q)
        qb = uq[start:stop]
        qb = qb.toarray() if sp.issparse(qb) else qb
        if sp.issparse(upool):
            sims = (upool @ qb.T).T
        else:
            sims = qb @ upool.T
        sims = np.asarray(sims)
        if pool_zero.any():
            sims[:, pool_zero] = -1.0
        zq = q_zero[start:stop]
        if zq.any():
            sims[zq, :] = -1.0
        if exclude is not None:
            rows = np.arange(start, stop)
            mask = exclude[rows] >= 0
            sims[np.flatnonzero(mask), exclude[rows[mask]]] = -np.inf
        out[start:stop] = np.argsort(-sims, axis=1, kind="stable")[:, :n]
    return out


def _overlap_fraction(sets_a: np.ndarray, sets_b: np.ndarray) -> np.ndarray:
    n = sets_a.shape[1]
    return np.array([
        len(np.intersect1d(sets_a[i], sets_b[i], assume_unique=True)) / n
        for i in range(sets_a.shape[0])
    ])


def neighborhood_accuracy(pred, gold, n: int = DEFAULT_TOP_N,
                          pred_space_pool: bool = False) -> float:
    """Mean overlap of gold and predicted cosine neighborhoods.

    For each concept, the n nearest gold rows to its gold vector are
    compared with the n nearest gold rows to its predicted vector (own
    row excluded on both sides). The alternative reading, searching the
    predicted neighbors among the predicted rows themselves, sits
    behind `pred_space_pool` for sensitivity checks.
    """
    n_rows = pred.shape[0]
    if n_rows != gold.shape[0]:
        raise DimensionMismatch(
            f"pred has {n_rows} rows but gold has {gold.shape[0]}"
        )
    if n_rows <= n:
        raise ValueError(f"need more than n={n} rows, got {n_rows}")
    own = np.arange(n_rows)
    gold_sets = neighbor_sets(gold, gold, n, exclude=own)
    pred_pool = pred if pred_space_pool else gold
    pred_sets = neighbor_sets(pred, pred_pool, n, exclude=own)
    return float(_overlap_fraction(gold_sets, pred_sets).mean())


# ---------------------------------------------------------------------------
# fold plans
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FoldPlan:
    """Partition of concepts into folds; sizes differ by at most one."""

    fold_count: int
    concepts: tuple[str, ...]
    fold_of: tuple[int, ...]
    seed: int

    @property
    def assignments(self) -> dict[str, int]:
        return dict(zip(self.concepts, self.fold_of))

    def test_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(np.array(self.fold_of) == fold)

    def train_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(np.array(self.fold_of) != fold)


def make_fold_plan(concepts: Sequence[str], fold_count: int = 10,
                   seed: int = 0) -> FoldPlan:
    n = len(concepts)
    if not 2 <= fold_count <= n:
        raise ValueError(f"fold_count={fold_count} outside [2, {n}]")
    rng = rng_for(seed, 17)
    perm = rng.permutation(n)
    fold_of = np.empty(n, dtype=np.int64)
    base, extra = divmod(n, fold_count)
    start = 0
    for f in range(fold_count):
        size = base + (1 if f < extra else 0)
        fold_of[perm[start:start + size]] = f
        start += size
    return FoldPlan(fold_count, tuple(concepts), tuple(int(f) for f in fold_of),
                    seed)


# ---------------------------------------------------------------------------
# cross-validation driver
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ModelSpec:
    """What to fit in each fold: PLSR or the FFNN, at latent size k."""

    method: str  # "plsr" | "ffnn"
    k: int
    train: TrainConfig | None = None
    max_iter: int = 1000
    tol: float = 1e-6
    activation: str = "tanh"
    seed: int = 0

    def __post_init__(self):
        if self.method not in ("plsr", "ffnn"):
            raise ValueError(f"unknown method {self.method!r}")

    def describe(self) -> dict:
        out = {"method": self.method, "k": self.k, "seed": self.seed}
        if self.method == "plsr":
            out.update(max_iter=self.max_iter, tol=self.tol)
        else:
            cfg = self.train or TrainConfig()
            out.update(activation=self.activation, epochs=cfg.epochs,
                       learning_rate=cfg.learning_rate,
                       batch_size=cfg.batch_size)
        return out


@dataclass(frozen=True)
class EvalReport:
    """Per-fold and aggregated metric values with run provenance."""

    per_fold: tuple[dict, ...]
    aggregate: dict
    per_concept: dict
    config_fingerprint: str
    context: dict

    def to_dict(self) -> dict:
        return {
            "per_fold": list(self.per_fold),
            "aggregate": dict(self.aggregate),
            "per_concept": dict(self.per_concept),
            "config_fingerprint": self.config_fingerprint,
            "context": dict(self.context),
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "EvalReport":
        return cls(
            per_fold=tuple(dict(f) for f in data["per_fold"]),
            aggregate=dict(data["aggregate"]),
            per_concept=dict(data["per_concept"]),
            config_fingerprint=data["config_fingerprint"],
            context=dict(data["context"]),
        )


def _fold_seed(base_seed: int, fold: int) -> int:
    ss = np.random.SeedSequence(entropy=base_seed, spawn_key=(fold,))
    return int(ss.generate_state(1)[0])


def _fit_predict(spec: ModelSpec, X_train, Y_train, fold: int):
    """Fit per spec; returns a predict(X) closure."""
    if spec.method == "plsr":
        model = fit_plsr(X_train, Y_train, spec.k,
                         max_iter=spec.max_iter, tol=spec.tol)
        return lambda X: predict_plsr(model, X)
    d = X_train.shape[1]
    m = Y_train.shape[1]
    seed = _fold_seed(spec.seed, fold)
    cfg = replace(spec.train or TrainConfig(),
                  batch_size=min((spec.train or TrainConfig()).batch_size,
                                 X_train.shape[0]),
                  seed=seed)
    model = init_ffnn(d, spec.k, m, seed=seed, activation=spec.activation)
    model = train_ffnn(model, X_train, Y_train, cfg)
    return lambda X: predict_ffnn(model, X)


def cross_validate(X, Y: NormMatrix, model_spec: ModelSpec, plan: FoldPlan,
                   n_retrieval: int = DEFAULT_TOP_N,
                   include_train_metrics: bool = False,
                   extra_f1_variants: bool = False,
                   rho_axis: str = "concept",
                   ranking_metric: str = "auto") -> EvalReport:
    """Per-fold fit/predict/score over a shared fold plan.

    By default F1@n is computed for categorical targets and Spearman
    rho for dense targets (MSE and neighborhood accuracy always);
    `ranking_metric` in {"f1", "rho"} overrides the choice, e.g. to
    score a dense replacement target with the base norm's retrieval
    metric (gold support is then simply every nonzero cell). The
    aggregate is the arithmetic mean of the per-fold values.
    """
    if tuple(plan.concepts) != tuple(Y.concept_index):
        raise LengthMismatch("fold plan concepts do not match Y concepts")
    n_all, m = Y.shape
    if X.shape[0] != n_all:
        raise DimensionMismatch(f"X has {X.shape[0]} rows, Y has {n_all}")
    if rho_axis not in ("concept", "feature", "global"):
        raise ValueError(f"unknown rho_axis {rho_axis!r}")
    if ranking_metric not in ("auto", "f1", "rho"):
        raise ValueError(f"unknown ranking_metric {ranking_metric!r}")
    use_f1 = (Y.categorical if ranking_metric == "auto"
              else ranking_metric == "f1")

    own = np.arange(n_all)
    gold_sets = neighbor_sets(Y.values, Y.values, n_retrieval, exclude=own)

    per_fold: list[dict] = []
    per_concept: dict[str, dict] = {}
    for fold in range(plan.fold_count):
        train_idx = plan.train_indices(fold)
        test_idx = plan.test_indices(fold)
        try:
            predict = _fit_predict(model_spec, X[train_idx],
                                   Y.values[train_idx], fold)
            pred = predict(X[test_idx])
        except Exception as e:
            e.args = (f"[fold {fold}] {e}",) + e.args[1:]
            raise
        gold_rows = Y.dense_rows(test_idx)
        metrics: dict[str, float] = {"mse": mse(pred, gold_rows)}
        row_mse = np.mean((pred - gold_rows) ** 2, axis=1)

        concept_rows: dict[str, dict] = {
            Y.concept_index[i]: {"fold": fold, "mse": float(row_mse[r])}
            for r, i in enumerate(test_idx)
        }

        if use_f1:
            scores = np.array([
                f1_at_n(pred[r], Y.row_support(i), n_retrieval)
                for r, i in enumerate(test_idx)
            ])
            metrics[f"f1_at_{n_retrieval}"] = float(scores[:, 2].mean())
            if extra_f1_variants:
                metrics[f"precision_at_{n_retrieval}"] = float(scores[:, 0].mean())
                metrics[f"recall_at_{n_retrieval}"] = float(scores[:, 1].mean())
                avg = np.array([
                    average_f1_at_n(pred[r], Y.row_support(i), n_retrieval)
                    for r, i in enumerate(test_idx)
                ])
                metrics[f"avg_f1_at_{n_retrieval}"] = float(avg[:, 2].mean())
                gsize = np.array([
                    f1_at_gold_size(pred[r], Y.row_support(i))
                    for r, i in enumerate(test_idx)
                ])
                metrics["f1_at_gold_size"] = float(gsize[:, 2].mean())
            for r, i in enumerate(test_idx):
                concept_rows[Y.concept_index[i]][f"f1_at_{n_retrieval}"] = \
                    float(scores[r, 2])
        else:
            if rho_axis == "concept":
                rho_rows, _ = spearman_rho_rows(pred, gold_rows)
                metrics["rho"] = float(rho_rows.mean())
                for r, i in enumerate(test_idx):
                    concept_rows[Y.concept_index[i]]["rho"] = float(rho_rows[r])
            elif rho_axis == "feature":
                rho_cols, _ = spearman_rho_rows(pred.T, gold_rows.T)
                metrics["rho"] = float(rho_cols.mean())
            else:
                flat_p = rankdata_average(pred.ravel())
                flat_g = rankdata_average(gold_rows.ravel())
                rho = _pearson(flat_p, flat_g)
                metrics["rho"] = 0.0 if rho is None else rho

        pred_sets = neighbor_sets(pred, Y.values, n_retrieval,
                                  exclude=test_idx)
        overlap = _overlap_fraction(gold_sets[test_idx], pred_sets)
        metrics[f"na_at_{n_retrieval}"] = float(overlap.mean())
        for r, i in enumerate(test_idx):
            concept_rows[Y.concept_index[i]][f"na_at_{n_retrieval}"] = \
                float(overlap[r])

        if include_train_metrics:
            train_pred = predict(X[train_idx])
            train_gold = Y.dense_rows(train_idx)
            metrics["train_mse"] = mse(train_pred, train_gold)
            if use_f1:
                tr = np.array([
                    f1_at_n(train_pred[r], Y.row_support(i), n_retrieval)[2]
                    for r, i in enumerate(train_idx)
                ])
                metrics[f"train_f1_at_{n_retrieval}"] = float(tr.mean())
            else:
                tr_rows, _ = spearman_rho_rows(train_pred, train_gold)
                metrics["train_rho"] = float(tr_rows.mean())
            tr_sets = neighbor_sets(train_pred, Y.values, n_retrieval,
                                    exclude=train_idx)
            tr_overlap = _overlap_fraction(gold_sets[train_idx], tr_sets)
            metrics[f"train_na_at_{n_retrieval}"] = float(tr_overlap.mean())

        per_fold.append(metrics)
        per_concept.update(concept_rows)

    aggregate = {
        key: float(np.mean([f[key] for f in per_fold]))
        for key in per_fold[0]
    }
    context = {
        "n": n_all,
        "m": m,
        "d": int(X.shape[1]),
        "fold_count": plan.fold_count,
        "fold_seed": plan.seed,
        "n_retrieval": n_retrieval,
        "categorical": Y.categorical,
        "ranking_metric": "f1" if use_f1 else "rho",
        "rho_axis": rho_axis,
        "model": model_spec.describe(),
    }
    return EvalReport(
        per_fold=tuple(per_fold),
        aggregate=aggregate,
        per_concept=per_concept,
        config_fingerprint=fingerprint(context),
        context=context,
    )


# ---------------------------------------------------------------------------
# significance
# ---------------------------------------------------------------------------

def permutation_test(per_concept_a, per_concept_b, iterations: int = 10000,
                     seed: int = 0) -> float:
    """Two-sided paired sign-flip permutation test on metric differences.

    Returns the (add-one corrected) fraction of sign assignments whose
    absolute mean difference reaches the observed one.
    """
    a = np.asarray(per_concept_a, dtype=np.float64)
    b = np.asarray(per_concept_b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise LengthMismatch(
            f"paired vectors must share one length, got {a.shape} vs {b.shape}"
        )
    diff = a - b
    observed = abs(diff.mean())
    rng = rng_for(seed, 23)
    hits = 0
    remaining = iterations
    while remaining > 0:
        block = min(remaining, 1000)
        signs = rng.integers(0, 2, size=(block, len(diff))) * 2.0 - 1.0
        means = np.abs(signs @ diff) / len(diff)
        hits += int(np.sum(means >= observed - 1e-12))
        remaining -= block
    return (1 + hits) / (iterations + 1)
