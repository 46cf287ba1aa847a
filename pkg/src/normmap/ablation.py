"""Diagnostic target matrices and the self-mapping upper-bound protocol.

Four generators replace the gold norm matrix with controlled content:

* ``rand``: every cell an i.i.d. Uniform[0,1) draw (dense);
* ``shuffle``: per concept, the same number of features as in the gold
  row, at uniformly sampled positions, all with value 1 (sparse only);
* ``taxshuffle``: each concept's hypernym features are zeroed and
  replaced by equally many random other hypernyms (value 1), with no
  compatibility filtering; all other cells untouched;
* ``cdiff``: cell (i, j) is the absolute character-length difference
  between concept i and feature j (dense, deterministic, seedless).

The upper bound evaluates a matrix's self-predictability: the target
matrix doubles as the source, under the same fold plan and metrics as
the main run.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from ._util import rng_for
from .dataset import TAXONOMIC_TAGS, NormMatrix
from .errors import MissingTaxonomyMeta, NotCategorical
from .evaluation import EvalReport, FoldPlan, ModelSpec, cross_validate

ABLATION_KINDS = ("rand", "shuffle", "taxshuffle", "cdiff")


@dataclass(frozen=True)
class AblationSpec:
    kind: str
    seed: int = 0
    base_norm_id: str = ""

    def __post_init__(self):
        if self.kind not in ABLATION_KINDS + ("upperbound",):
            raise ValueError(f"unknown ablation kind {self.kind!r}")


def _default_labels(n: int, m: int):
    return (tuple(f"c{i:04d}" for i in range(n)),
            tuple(f"f{j:05d}" for j in range(m)))


def make_rand(shape: tuple[int, int], seed: int,
              concept_labels=None, feature_labels=None) -> NormMatrix:
    """Dense matrix of seeded i.i.d. Uniform[0,1) values."""
    n, m = shape
    if n < 1 or m < 1:
        raise ValueError(f"shape must be positive, got {shape}")
    rng = rng_for(seed, 31)
    values = rng.random((n, m))
    defaults = _default_labels(n, m)
    return NormMatrix(
        values,
        tuple(concept_labels) if concept_labels is not None else defaults[0],
        tuple(feature_labels) if feature_labels is not None else defaults[1],
        categorical=False,
    )


def make_shuffle(Y: NormMatrix, seed: int) -> NormMatrix:
    """Random feature positions per concept, cardinalities preserved.

    Each row keeps exactly its gold nonzero count; positions are drawn
    uniformly without replacement over all features; values are 1.
    """
    if not Y.categorical:
        raise NotCategorical("shuffle requires a sparse categorical norm")
    n, m = Y.shape
    rng = rng_for(seed, 37)
    indptr = [0]
    indices: list[np.ndarray] = []
    for i in range(n):
        count = len(Y.row_support(i))
        chosen = np.sort(rng.choice(m, size=count, replace=False))
        indices.append(chosen)
        indptr.append(indptr[-1] + count)
    flat = np.concatenate(indices) if indices else np.empty(0, dtype=np.int64)
    values = sp.csr_matrix(
        (np.ones(len(flat)), flat, np.array(indptr)), shape=(n, m)
    )
    return NormMatrix(values, Y.concept_index, Y.feature_index,
                      categorical=True)


def make_tax_shuffle(Y: NormMatrix, feature_meta, seed: int) -> NormMatrix:
    """Replace each concept's hypernyms with random other hypernyms.

    A concept with h taxonomic features gets those h cells zeroed and h
    distinct features from the global taxonomic pool (minus the
    originals) set to 1. Non-taxonomic cells are untouched; no
    compatibility filtering is applied.
    """
    if not Y.categorical:
        raise NotCategorical("taxonomic shuffle requires a categorical norm")
    if not feature_meta:
        raise MissingTaxonomyMeta("norm has no feature relation tags")
    tax_pool = np.array([
        j for j, f in enumerate(Y.feature_index)
        if str(feature_meta.get(f, "")).lower() in TAXONOMIC_TAGS
    ])
    if len(tax_pool) == 0:
        raise MissingTaxonomyMeta("no feature is tagged as taxonomic")
    tax_set = set(int(j) for j in tax_pool)

    rng = rng_for(seed, 41)
    n, m = Y.shape
    rows: list[np.ndarray] = []
    cols: list[np.ndarray] = []
    vals: list[np.ndarray] = []
    for i in range(n):
        support = Y.row_support(i)
        dense_row = Y.dense_rows([i])[0]
        own_tax = np.array([j for j in support if int(j) in tax_set],
                           dtype=np.int64)
        keep = np.array([j for j in support if int(j) not in tax_set],
                        dtype=np.int64)
        h = len(own_tax)
        if h:
            candidates = np.setdiff1d(tax_pool, own_tax, assume_unique=False)
            if len(candidates) < h:
                raise MissingTaxonomyMeta(
                    f"taxonomic pool too small to replace {h} hypernyms of "
                    f"{Y.concept_index[i]!r}"
                )
            replacement = rng.choice(candidates, size=h, replace=False)
        else:
            replacement = np.empty(0, dtype=np.int64)
        new_cols = np.concatenate([keep, replacement]).astype(np.int64)
        new_vals = np.concatenate([dense_row[keep], np.ones(h)])
        order = np.argsort(new_cols)
        rows.append(np.full(len(new_cols), i, dtype=np.int64))
        cols.append(new_cols[order])
        vals.append(new_vals[order])
    values = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, m),
    )
    return NormMatrix(values, Y.concept_index, Y.feature_index,
                      categorical=True)


def make_cdiff(concept_labels, feature_labels) -> NormMatrix:
    """Absolute character-length difference matrix (dense, seedless)."""
    concepts = tuple(concept_labels)
    features = tuple(feature_labels)
    if not concepts or not features:
        raise ValueError("label lists must be non-empty")
    c_len = np.array([len(c) for c in concepts], dtype=np.float64)
    f_len = np.array([len(f) for f in features], dtype=np.float64)
    values = np.abs(c_len[:, None] - f_len[None, :])
    return NormMatrix(values, concepts, features, categorical=False)


def upper_bound(Y_target: NormMatrix, model_spec: ModelSpec, plan: FoldPlan,
                **cv_kwargs) -> EvalReport:
    """Self-mapping ceiling: cross-validate with the target as source."""
    return cross_validate(Y_target.values, Y_target, model_spec, plan,
                          **cv_kwargs)
