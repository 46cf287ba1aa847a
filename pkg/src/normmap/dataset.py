"""Feature-norm ingestion and concept-by-feature matrix construction.

Three published norm collections are supported, each through an adapter
pinned to the column layout of its distribution file:

* **McRae** (``CONCS_FEATS_concstats_brm`` text export, tab or comma
  separated). Required columns: ``Concept``, ``Feature``, ``Prod_Freq``
  (number of annotators out of 30 who listed the feature) and
  ``BR_Label`` (relation tag; ``taxonomic`` marks hypernym features).
* **Buchanan** (combined single-word norms CSV). Required columns:
  ``cue``, ``translated`` (lemmatized feature) and
  ``normalized_translated`` (feature frequency divided by sample size).
* **Binder** (word ratings CSV export). Requires a ``Word`` column;
  every other column is a rating dimension unless it is a known
  metadata column or fails numeric parsing. Dimensions containing any
  ``na`` entry are dropped; ratings must lie in [0, 6]; duplicated
  words keep their first row only.

Adapters fail loudly (`UnknownColumnLayout`) when a required column is
missing, and log the achieved dimensions next to the published
reference dimensions rather than asserting them, since distribution
files drift.
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from ._util import rng_for
from .errors import (
    DuplicateTriple,
    MalformedLine,
    UnknownColumnLayout,
    ValueOutOfRange,
)

log = logging.getLogger(__name__)

MCRAE = "mcrae"
BUCHANAN = "buchanan"
BINDER = "binder"
SYNTHETIC = "synthetic"
DATASETS = (MCRAE, BUCHANAN, BINDER, SYNTHETIC)

# Relation tags that mark hypernym-like features (McRae BR_Label values).
TAXONOMIC_TAGS = frozenset({"taxonomic", "superordinate"})

# Reference dimensions of the published distributions: (n, m, triples).
# Ingestion warns on mismatch instead of asserting; Buchanan is absent
# because its published figures are internally inconsistent.
PUBLISHED_SHAPES = {
    MCRAE: (541, 2526, 7259),
    BINDER: (534, 62, 33108),
}

_BINDER_MAX = 6.0
_NA_TOKENS = frozenset({"", "na", "n/a", "nan"})
# Metadata columns of the Binder ratings export (matched case-insensitively).
_BINDER_METADATA = frozenset(
    {"no", "no.", "index", "word num", "wordnum", "wclass", "word class",
     "super category", "supercategory", "type", "pos", "n", "mean rt",
     "mean_rt"}
)

_MATRIX_SPARSE_THRESHOLD = 0.10


@dataclass(frozen=True)
class CanonicalNorm:
    """A feature norm in canonical long form.

    ``triples`` holds (concept, feature, value) with no duplicate
    (concept, feature) pair and non-negative values; Binder values must
    lie in [0, 6]. ``feature_meta`` maps features to relation tags
    (populated for McRae, empty otherwise). ``categorical`` is True for
    present/absent-style norms and False for dense rating norms.
    """

    dataset_id: str
    triples: tuple[tuple[str, str, float], ...]
    feature_meta: Mapping[str, str] = field(default_factory=dict)
    categorical: bool = True

    def __post_init__(self):
        if self.dataset_id not in DATASETS:
            raise ValueError(f"unknown dataset id {self.dataset_id!r}")
        seen = set()
        upper = _BINDER_MAX if self.dataset_id == BINDER else None
        for concept, feature, value in self.triples:
            if (concept, feature) in seen:
                raise DuplicateTriple(
                    f"duplicate triple ({concept!r}, {feature!r})"
                )
            seen.add((concept, feature))
            if value < 0:
                raise ValueOutOfRange(
                    f"negative value {value} for ({concept!r}, {feature!r})"
                )
            if upper is not None and value > upper:
                raise ValueOutOfRange(
                    f"rating {value} outside [0, {upper}] for "
                    f"({concept!r}, {feature!r})"
                )

    @cached_property
    def concepts(self) -> tuple[str, ...]:
        return tuple(sorted({c for c, _, _ in self.triples}))

    @cached_property
    def features(self) -> tuple[str, ...]:
        return tuple(sorted({f for _, f, _ in self.triples}))

    @property
    def n(self) -> int:
        return len(self.concepts)

    @property
    def m(self) -> int:
        return len(self.features)

    @property
    def triple_count(self) -> int:
        return len(self.triples)

    @cached_property
    def per_concept_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for concept, _, _ in self.triples:
            counts[concept] = counts.get(concept, 0) + 1
        return counts


@dataclass
class NormMatrix:
    """Dense or sparse concept-by-feature value matrix with label maps."""

    values: np.ndarray | sp.csr_matrix
    concept_index: tuple[str, ...]
    feature_index: tuple[str, ...]
    categorical: bool = True

    def __post_init__(self):
        n, m = self.values.shape
        if len(self.concept_index) != n or len(self.feature_index) != m:
            raise ValueError(
                f"label lists ({len(self.concept_index)}, "
                f"{len(self.feature_index)}) do not match matrix shape {n}x{m}"
            )
        if len(set(self.concept_index)) != n:
            raise ValueError("duplicate concept labels")
        if len(set(self.feature_index)) != m:
            raise ValueError("duplicate feature labels")

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @property
    def is_sparse(self) -> bool:
        return sp.issparse(self.values)

    @property
    def density(self) -> float:
        n, m = self.shape
        nnz = self.values.nnz if self.is_sparse else np.count_nonzero(self.values)
        return nnz / (n * m) if n * m else 0.0

    def dense(self) -> np.ndarray:
        return self.values.toarray() if self.is_sparse else self.values

    def dense_rows(self, rows: np.ndarray | Sequence[int]) -> np.ndarray:
        sub = self.values[np.asarray(rows, dtype=int)]
        return sub.toarray() if sp.issparse(sub) else np.asarray(sub)

    def row_support(self, i: int) -> np.ndarray:
        """Column indices of nonzero cells in row i, ascending."""
        if self.is_sparse:
            row = self.values.getrow(i)
            return np.sort(row.indices)
        return np.flatnonzero(self.values[i])

    def restrict_concepts(self, keep: Sequence[int]) -> "NormMatrix":
        keep = np.asarray(keep, dtype=int)
        return NormMatrix(
            values=self.values[keep],
            concept_index=tuple(self.concept_index[i] for i in keep),
            feature_index=self.feature_index,
            categorical=self.categorical,
        )


# ---------------------------------------------------------------------------
# ingestion
# ---------------------------------------------------------------------------

def ingest_norm(source_kind: str, path) -> CanonicalNorm:
    """Ingest a published distribution file into canonical long form."""
    adapters = {
        MCRAE: _ingest_mcrae,
        BUCHANAN: _ingest_buchanan,
        BINDER: _ingest_binder,
    }
    if source_kind not in adapters:
        raise ValueError(f"no ingestion adapter for dataset {source_kind!r}")
    norm = adapters[source_kind](path)
    _report_shape(norm)
    return norm


def _report_shape(norm: CanonicalNorm) -> None:
    achieved = (norm.n, norm.m, norm.triple_count)
    expected = PUBLISHED_SHAPES.get(norm.dataset_id)
    if expected is None or achieved == expected:
        log.info("%s ingested: n=%d m=%d triples=%d", norm.dataset_id, *achieved)
    else:
        log.warning(
            "%s ingested with n=%d m=%d triples=%d; published distribution "
            "has %s", norm.dataset_id, *achieved, expected,
        )


def _read_table(path, required: Sequence[str], dataset: str):
    """Parse a delimited file into (header, rows); sniffs tab vs comma."""
    with open(path, "r", encoding="utf-8-sig", newline="") as fh:
        text = fh.read()
    if not text.strip():
        raise UnknownColumnLayout(f"{dataset}: empty input file")
    delim = "\t" if "\t" in text.splitlines()[0] else ","
    reader = csv.DictReader(io.StringIO(text), delimiter=delim)
    header = reader.fieldnames or []
    missing = [c for c in required if c not in header]
    if missing:
        raise UnknownColumnLayout(
            f"{dataset}: missing required column(s) {missing}; "
            f"got header {header}"
        )
    return header, list(reader)


def _clean_concept(label: str) -> str:
    return label.strip().lower()


def _ingest_mcrae(path) -> CanonicalNorm:
    header, rows = _read_table(
        path, required=("Concept", "Feature", "Prod_Freq", "BR_Label"),
        dataset=MCRAE,
    )
    triples = []
    meta: dict[str, str] = {}
    for row in rows:
        concept = _clean_concept(row["Concept"])
        feature = row["Feature"].strip()
        if not concept or not feature:
            continue
        raw = row["Prod_Freq"].strip()
        try:
            value = float(raw)
        except ValueError:
            raise UnknownColumnLayout(
                f"{MCRAE}: non-numeric Prod_Freq {raw!r} for {concept!r}"
            )
        if value <= 0:
            raise ValueOutOfRange(
                f"{MCRAE}: production frequency must be positive, got {value} "
                f"for ({concept!r}, {feature!r})"
            )
        tag = row["BR_Label"].strip()
        if tag:
            meta.setdefault(feature, tag)
        triples.append((concept, feature, value))
    if not triples:
        raise UnknownColumnLayout(f"{MCRAE}: no data rows")
    return CanonicalNorm(MCRAE, tuple(sorted(triples)), meta, categorical=True)


def _ingest_buchanan(path) -> CanonicalNorm:
    header, rows = _read_table(
        path, required=("cue", "translated", "normalized_translated"),
        dataset=BUCHANAN,
    )
    triples = []
    skipped = 0
    for row in rows:
        concept = _clean_concept(row["cue"])
        feature = row["translated"].strip()
        raw = row["normalized_translated"].strip()
        if not concept or not feature or raw.lower() in _NA_TOKENS:
            skipped += 1
            continue
        try:
            value = float(raw)
        except ValueError:
            raise UnknownColumnLayout(
                f"{BUCHANAN}: non-numeric normalized_translated {raw!r}"
            )
        if value <= 0:
            raise ValueOutOfRange(
                f"{BUCHANAN}: normalized frequency must be positive, got "
                f"{value} for ({concept!r}, {feature!r})"
            )
        triples.append((concept, feature, value))
    if not triples:
        raise UnknownColumnLayout(f"{BUCHANAN}: no data rows")
    if skipped:
        log.info("%s: skipped %d rows with missing feature/value", BUCHANAN, skipped)
    return CanonicalNorm(BUCHANAN, tuple(sorted(triples)), {}, categorical=True)


def _ingest_binder(path) -> CanonicalNorm:
    header, rows = _read_table(path, required=("Word",), dataset=BINDER)
    candidates = [
        c for c in header
        if c != "Word" and c.strip().lower() not in _BINDER_METADATA
    ]
    if not candidates:
        raise UnknownColumnLayout(f"{BINDER}: no rating columns found")

    table: list[tuple[str, dict[str, float | None]]] = []
    non_numeric: set[str] = set()
    has_na: set[str] = set()
    seen_words: set[str] = set()
    duplicates = 0
    for row in rows:
        word = _clean_concept(row["Word"])
        if not word:
            continue
        if word in seen_words:
            duplicates += 1
            continue
        seen_words.add(word)
        ratings: dict[str, float | None] = {}
        for col in candidates:
            raw = (row[col] or "").strip()
            if raw.lower() in _NA_TOKENS:
                ratings[col] = None
                has_na.add(col)
                continue
            try:
                ratings[col] = float(raw)
            except ValueError:
                non_numeric.add(col)
                ratings[col] = None
        table.append((word, ratings))
    if not table:
        raise UnknownColumnLayout(f"{BINDER}: no data rows")

    if non_numeric:
        log.info("%s: treating non-numeric column(s) as metadata: %s",
                 BINDER, sorted(non_numeric))
    if duplicates:
        log.info("%s: removed %d duplicate word row(s)", BINDER, duplicates)
    dropped_na = sorted((has_na - non_numeric))
    if dropped_na:
        log.info("%s: dropped %d feature(s) with na entries: %s",
                 BINDER, len(dropped_na), dropped_na)

    features = [c for c in candidates if c not in non_numeric and c not in has_na]
    triples = []
    for word, ratings in table:
        for col in features:
            value = ratings[col]
            if value is None or value < 0 or value > _BINDER_MAX:
                raise ValueOutOfRange(
                    f"{BINDER}: rating {value} outside [0, 6] for "
                    f"({word!r}, {col!r})"
                )
            triples.append((word, col.strip(), value))
    return CanonicalNorm(BINDER, tuple(sorted(triples)), {}, categorical=False)


# ---------------------------------------------------------------------------
# matrix construction
# ---------------------------------------------------------------------------

def build_matrix(norm: CanonicalNorm) -> NormMatrix:
    """Lay the norm out as an n-by-m matrix, labels sorted lexicographically.

    Cells carry the triple value where present and 0 elsewhere. A sparse
    representation is chosen when fewer than 10% of cells are nonzero.
    """
    concepts = norm.concepts
    features = norm.features
    c_pos = {c: i for i, c in enumerate(concepts)}
    f_pos = {f: j for j, f in enumerate(features)}
    n, m = len(concepts), len(features)
    density = norm.triple_count / (n * m) if n * m else 0.0

    rows = np.fromiter((c_pos[c] for c, _, _ in norm.triples), dtype=np.int64,
                       count=norm.triple_count)
    cols = np.fromiter((f_pos[f] for _, f, _ in norm.triples), dtype=np.int64,
                       count=norm.triple_count)
    vals = np.fromiter((v for _, _, v in norm.triples), dtype=np.float64,
                       count=norm.triple_count)

    if density < _MATRIX_SPARSE_THRESHOLD:
        values = sp.csr_matrix((vals, (rows, cols)), shape=(n, m))
    else:
        values = np.zeros((n, m), dtype=np.float64)
        values[rows, cols] = vals
    return NormMatrix(values, concepts, features, categorical=norm.categorical)


# ---------------------------------------------------------------------------
# canonical file format
# ---------------------------------------------------------------------------

_CANONICAL_MAGIC = "# canonical-norm v1"
_MATRIX_MAGIC = "# norm-matrix v1"


def save_canonical(norm: CanonicalNorm, path) -> None:
    """Write the norm as a sorted, lossless, diffable TSV."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{_CANONICAL_MAGIC}\n")
        fh.write(f"# dataset: {norm.dataset_id}\n")
        fh.write(f"# kind: {'categorical' if norm.categorical else 'ratings'}\n")
        for feature in sorted(norm.feature_meta):
            fh.write(f"# feature-tag\t{feature}\t{norm.feature_meta[feature]}\n")
        for concept, feature, value in sorted(norm.triples):
            fh.write(f"{concept}\t{feature}\t{float(value)!r}\n")


def load_canonical(path) -> CanonicalNorm:
    """Read a canonical TSV back; inverse of :func:`save_canonical`."""
    dataset_id = SYNTHETIC
    categorical = True
    meta: dict[str, str] = {}
    triples: list[tuple[str, str, float]] = []
    seen: set[tuple[str, str]] = set()
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                if line.startswith("# dataset:"):
                    dataset_id = line.split(":", 1)[1].strip()
                elif line.startswith("# kind:"):
                    categorical = line.split(":", 1)[1].strip() == "categorical"
                elif line.startswith("# feature-tag\t"):
                    parts = line.split("\t")
                    if len(parts) != 3:
                        raise MalformedLine("bad feature-tag line", line_no)
                    meta[parts[1]] = parts[2]
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise MalformedLine(
                    f"expected 3 tab-separated fields, got {len(parts)}", line_no
                )
            concept, feature, raw = parts
            try:
                value = float(raw)
            except ValueError:
                raise MalformedLine(f"bad value {raw!r}", line_no)
            if (concept, feature) in seen:
                raise DuplicateTriple(
                    f"line {line_no}: duplicate triple ({concept!r}, {feature!r})"
                )
            seen.add((concept, feature))
            triples.append((concept, feature, value))
    return CanonicalNorm(dataset_id, tuple(sorted(triples)), meta, categorical)


def save_matrix(mat: NormMatrix, path) -> None:
    """Write a NormMatrix as canonical TSV (labels preserved in comments)."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{_MATRIX_MAGIC}\n")
        fh.write(f"# kind: {'categorical' if mat.categorical else 'ratings'}\n")
        fh.write("# concepts\t" + "\t".join(mat.concept_index) + "\n")
        fh.write("# features\t" + "\t".join(mat.feature_index) + "\n")
        coo = (mat.values.tocoo() if mat.is_sparse
               else sp.coo_matrix(mat.values))
        cells = sorted(
            (mat.concept_index[i], mat.feature_index[j], float(v))
            for i, j, v in zip(coo.row, coo.col, coo.data) if v != 0.0
        )
        for concept, feature, value in cells:
            fh.write(f"{concept}\t{feature}\t{value!r}\n")


def load_matrix(path) -> NormMatrix:
    """Read a matrix TSV written by :func:`save_matrix`."""
    concepts: tuple[str, ...] | None = None
    features: tuple[str, ...] | None = None
    categorical = True
    entries: list[tuple[str, str, float]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("# concepts\t"):
                concepts = tuple(line.split("\t")[1:])
                continue
            if line.startswith("# features\t"):
                features = tuple(line.split("\t")[1:])
                continue
            if line.startswith("# kind:"):
                categorical = line.split(":", 1)[1].strip() == "categorical"
                continue
            if line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise MalformedLine(
                    f"expected 3 tab-separated fields, got {len(parts)}", line_no
                )
            try:
                entries.append((parts[0], parts[1], float(parts[2])))
            except ValueError:
                raise MalformedLine(f"bad value {parts[2]!r}", line_no)
    if concepts is None or features is None:
        raise MalformedLine("missing # concepts / # features header", 1)
    c_pos = {c: i for i, c in enumerate(concepts)}
    f_pos = {f: j for j, f in enumerate(features)}
    n, m = len(concepts), len(features)
    rows = np.array([c_pos[c] for c, _, _ in entries], dtype=np.int64)
    cols = np.array([f_pos[f] for _, f, _ in entries], dtype=np.int64)
    vals = np.array([v for _, _, v in entries], dtype=np.float64)
    if len(entries) < _MATRIX_SPARSE_THRESHOLD * n * m:
        values = sp.csr_matrix((vals, (rows, cols)), shape=(n, m))
    else:
        values = np.zeros((n, m))
        values[rows, cols] = vals
    return NormMatrix(values, concepts, features, categorical=categorical)


# ---------------------------------------------------------------------------
# synthetic norms and dataset statistics
# ---------------------------------------------------------------------------

def _synth_label(prefix: str, i: int) -> str:
    """Unique label with varied length, so label-length baselines work."""
    return f"{prefix}{i:05d}" + "x" * (i % 5)


def synthetic_categorical(
    n_concepts: int = 120,
    m_features: int = 400,
    features_per_concept: tuple[int, int] = (6, 26),
    max_value: int = 30,
    taxonomic_feature_count: int = 0,
    seed: int = 0,
) -> CanonicalNorm:
    """Generate a sparse categorical norm with skewed feature frequencies.

    Feature popularity follows a power law so that, as in the published
    categorical norms, a small set of features recurs across concepts
    while most features are rare. Values mimic production frequencies
    (integers in [1, max_value]). `taxonomic_feature_count` features,
    spread across the popularity spectrum, are tagged "taxonomic" in
    feature_meta so hypernym-replacement experiments have a workable
    pool.
    """
    rng = rng_for(seed, 101)
    concepts = [_synth_label("c", i) for i in range(n_concepts)]
    features = [_synth_label("f", j) for j in range(m_features)]
    weights = 1.0 / np.arange(1, m_features + 1) ** 0.8
    weights /= weights.sum()
    lo, hi = features_per_concept
    triples = []
    for concept in concepts:
        count = int(rng.integers(lo, hi + 1))
        chosen = rng.choice(m_features, size=count, replace=False, p=weights)
        values = rng.integers(1, max_value + 1, size=count)
        for j, v in zip(chosen, values):
            triples.append((concept, features[j], float(v)))
    tagged = np.unique(np.linspace(0, m_features - 1, taxonomic_feature_count,
                                   dtype=np.int64)) if taxonomic_feature_count else []
    meta = {features[j]: "taxonomic" for j in tagged}
    return CanonicalNorm(SYNTHETIC, tuple(sorted(triples)), meta, categorical=True)


def synthetic_ratings(
    n_concepts: int = 80,
    m_features: int = 30,
    latent_rank: int = 5,
    noise: float = 0.6,
    seed: int = 0,
) -> CanonicalNorm:
    """Generate a dense rating norm with correlated dimensions in [0, 6]."""
    rng = rng_for(seed, 202)
    concepts = [_synth_label("c", i) for i in range(n_concepts)]
    features = [_synth_label("f", j) for j in range(m_features)]
    loadings = rng.normal(size=(n_concepts, latent_rank))
    axes = rng.normal(size=(latent_rank, m_features))
    values = 3.0 + loadings @ axes + noise * rng.normal(size=(n_concepts, m_features))
    values = np.clip(values, 0.05, 5.95)
    triples = tuple(
        (c, f, float(values[i, j]))
        for i, c in enumerate(concepts)
        for j, f in enumerate(features)
    )
    return CanonicalNorm(SYNTHETIC, tuple(sorted(triples)), {}, categorical=False)


def norm_stats(norm: CanonicalNorm) -> dict:
    """Shape and sparsity statistics of a canonical norm."""
    counts = norm.per_concept_counts
    feature_occurrence: dict[str, int] = {}
    for _, feature, _ in norm.triples:
        feature_occurrence[feature] = feature_occurrence.get(feature, 0) + 1
    occ = np.array(list(feature_occurrence.values()))
    per = np.array([counts[c] for c in norm.concepts])
    return {
        "dataset": norm.dataset_id,
        "n": norm.n,
        "m": norm.m,
        "triples": norm.triple_count,
        "density": norm.triple_count / (norm.n * norm.m),
        "features_per_concept_min": int(per.min()),
        "features_per_concept_mean": float(per.mean()),
        "features_per_concept_max": int(per.max()),
        "singleton_feature_fraction": float(np.mean(occ == 1)),
        "at_most_two_feature_fraction": float(np.mean(occ <= 2)),
    }


def verify_published_shape(norm: CanonicalNorm) -> list[str]:
    """Differences between this norm and its published reference shape."""
    problems = []
    expected = PUBLISHED_SHAPES.get(norm.dataset_id)
    if expected is not None:
        achieved = (norm.n, norm.m, norm.triple_count)
        if achieved != expected:
            problems.append(f"shape {achieved} != published {expected}")
    if norm.dataset_id == MCRAE:
        per = norm.per_concept_counts.values()
        if min(per) < 6 or max(per) > 26:
            problems.append(
                f"per-concept feature count range [{min(per)}, {max(per)}] "
                "outside published [6, 26]"
            )
    return problems
