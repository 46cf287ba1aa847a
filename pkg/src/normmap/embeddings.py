"""Embedding tables and alignment with norm matrices.

Two plain-text formats are read:

* ``word2vec_text``: a header line ``"<count> <dim>"`` followed by one
  ``word v1 .. vd`` line per word, space separated. Lines starting with
  ``#`` are treated as comments (extractor output carries a provenance
  comment line).
* ``tsv``: ``word<TAB>v1<TAB>..<TAB>vd`` with no header; the dimension
  is taken from the first row.

Concept labels are matched to embedding words through a lookup key:
the label lowercased, cut at the first underscore or opening
parenthesis. Sense-marked concepts ("bank_(river)", "bank_(money)")
therefore share one vector.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .dataset import NormMatrix
from .errors import (
    DimensionMismatch,
    DuplicateWord,
    EmptyIntersection,
    MalformedHeader,
    MissingEmbedding,
)

log = logging.getLogger(__name__)

FORMATS = ("word2vec_text", "tsv")


@dataclass(frozen=True)
class EmbeddingTable:
    """word -> d-dimensional vector store; words unique and lowercase."""

    dim: int
    vectors: Mapping[str, np.ndarray]
    source_tag: str = ""

    def __contains__(self, word: str) -> bool:
        return word in self.vectors

    def __len__(self) -> int:
        return len(self.vectors)


@dataclass(frozen=True)
class AlignedPair:
    """Paired (X, Y) training matrices over a shared concept order."""

    X: np.ndarray
    Y: NormMatrix
    concept_order: tuple[str, ...]
    dropped: tuple[str, ...]


def lookup_key(label: str) -> str:
    """Embedding lookup key: lowercase, sense-marker suffix removed."""
    key = label.lower()
    for marker in ("_", "("):
        pos = key.find(marker)
        if pos != -1:
            key = key[:pos]
    return key.strip()


def load_embeddings(path, fmt: str = "word2vec_text",
                    source_tag: str = "") -> EmbeddingTable:
    """Load an embedding table from a plain-text file."""
    if fmt not in FORMATS:
        raise ValueError(f"unknown embedding format {fmt!r}")
    if fmt == "word2vec_text":
        return _load_word2vec_text(path, source_tag)
    return _load_tsv(path, source_tag)


def _parse_row(parts, dim, what):
    if len(parts) - 1 != dim:
        raise DimensionMismatch(
            f"{what}: expected {dim} values, got {len(parts) - 1} "
            f"for word {parts[0]!r}"
        )
    try:
        vec = np.array([float(x) for x in parts[1:]], dtype=np.float64)
    except ValueError:
        raise DimensionMismatch(f"{what}: non-numeric vector entry for "
                                f"word {parts[0]!r}")
    return parts[0].lower(), vec


def _load_word2vec_text(path, source_tag):
    vectors: dict[str, np.ndarray] = {}
    declared = None
    dim = None
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            if declared is None:
                parts = line.split()
                if len(parts) != 2:
                    raise MalformedHeader(
                        f"expected header '<count> <dim>', got {line!r}"
                    )
                try:
                    declared, dim = int(parts[0]), int(parts[1])
                except ValueError:
                    raise MalformedHeader(
                        f"non-integer header fields in {line!r}"
                    )
                if declared < 0 or dim < 1:
                    raise MalformedHeader(f"implausible header {line!r}")
                continue
            word, vec = _parse_row(line.split(" "), dim, "word2vec_text")
            if word in vectors:
                raise DuplicateWord(f"duplicate word {word!r}")
            vectors[word] = vec
    if declared is None:
        raise MalformedHeader("missing header line")
    if len(vectors) != declared:
        raise MalformedHeader(
            f"header declares {declared} words but file has {len(vectors)}"
        )
    return EmbeddingTable(dim, vectors, source_tag)


def _load_tsv(path, source_tag):
    vectors: dict[str, np.ndarray] = {}
    dim = None
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if dim is None:
                if len(parts) < 2:
                    raise MalformedHeader("tsv rows need a word and >=1 value")
                dim = len(parts) - 1
            word, vec = _parse_row(parts, dim, "tsv")
            if word in vectors:
                raise DuplicateWord(f"duplicate word {word!r}")
            vectors[word] = vec
    if dim is None:
        raise MalformedHeader("empty embedding file")
    return EmbeddingTable(dim, vectors, source_tag)


def save_word2vec_text(path, vectors: Mapping[str, np.ndarray],
                       comment: str = "") -> None:
    """Write vectors in word2vec text format (optional # comment line)."""
    words = list(vectors)
    if not words:
        raise ValueError("no vectors to write")
    dim = len(next(iter(vectors.values())))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        fh.write(f"{len(words)} {dim}\n")
        for word in words:
            vec = np.asarray(vectors[word], dtype=np.float64)
            if vec.shape != (dim,):
                raise DimensionMismatch(
                    f"vector for {word!r} has shape {vec.shape}, expected ({dim},)"
                )
            fh.write(word + " " + " ".join(repr(float(v)) for v in vec) + "\n")


def align(table: EmbeddingTable, norm: NormMatrix,
          missing_policy: str = "drop") -> AlignedPair:
    """Pair embedding rows with norm rows over the shared concepts.

    Concepts whose lookup key has no embedding are dropped (default) or
    raise MissingEmbedding when missing_policy="error". Concepts with
    identical lookup keys receive identical X rows.
    """
    if missing_policy not in ("drop", "error"):
        raise ValueError(f"unknown missing_policy {missing_policy!r}")
    kept: list[int] = []
    rows: list[np.ndarray] = []
    dropped: list[str] = []
    for i, concept in enumerate(norm.concept_index):
        key = lookup_key(concept)
        vec = table.vectors.get(key)
        if vec is None:
            if missing_policy == "error":
                raise MissingEmbedding(
                    f"no embedding for concept {concept!r} (key {key!r})"
                )
            dropped.append(concept)
            continue
        kept.append(i)
        rows.append(vec)
    if not kept:
        raise EmptyIntersection("no norm concept has an embedding")
    if dropped:
        log.warning("align: dropped %d of %d concepts without embeddings",
                    len(dropped), len(norm.concept_index))
    X = np.vstack(rows).astype(np.float64)
    Y = norm.restrict_concepts(kept)
    return AlignedPair(X, Y, tuple(Y.concept_index), tuple(dropped))
