"""Decontextualized (type-level) word vectors from a transformer encoder.

Each word is embedded on its own, with no sentence context. The vector
is the unweighted mean of its subword representations at the requested
hidden-state layer; layer 0 is the embedding-layer output before any
transformer block (token + position + segment embeddings after layer
norm). Special-token positions ([CLS]/[SEP]) and padding never enter
the mean. Inference runs in eval mode, so output is deterministic for a
fixed model revision.

Output is word2vec text: one provenance comment line, a "count dim"
header, then one space-separated row per word.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

log = logging.getLogger(__name__)


class UnknownModel(Exception):
    """The model identifier cannot be resolved or loaded."""


class EmptyTokenization(Exception):
    """A word produced no subword tokens (dropped with a warning)."""


@dataclass(frozen=True)
class ExtractionRequest:
    words_path: str
    output_path: str
    model_id: str = "bert-base-uncased"
    layer: int = 0
    revision: str | None = None
    batch_size: int = 64

    def __post_init__(self):
        if self.layer < 0:
            raise ValueError("layer must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


def read_words(path) -> list[str]:
    """Lowercased, deduplicated word list; blank and '#' lines skipped."""
    words: list[str] = []
    seen: set[str] = set()
    duplicates = 0
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            word = line.strip().lower()
            if not word or word.startswith("#"):
                continue
            if word in seen:
                duplicates += 1
                continue
            seen.add(word)
            words.append(word)
    if duplicates:
        log.warning("dropped %d duplicate word(s)", duplicates)
    if not words:
        raise ValueError(f"no words in {path}")
    return words


def load_encoder(model_id: str, revision: str | None = None):
    """(tokenizer, model in eval mode, resolved revision string)."""
    from transformers import AutoModel, AutoTokenizer

    kwargs = {"revision": revision} if revision else {}
    try:
        tokenizer = AutoTokenizer.from_pretrained(model_id, **kwargs)
        model = AutoModel.from_pretrained(model_id, **kwargs)
    except (OSError, ValueError) as e:
        raise UnknownModel(f"cannot load {model_id!r}: {e}")
    model.eval()
    resolved = revision or getattr(model.config, "_commit_hash", None) or "local"
    return tokenizer, model, resolved


def _batch_vectors(tokenizer, model, words, layer):
    enc = tokenizer(words, return_tensors="pt", padding=True,
                    return_special_tokens_mask=True)
    model_inputs = {
        key: enc[key]
        for key in ("input_ids", "attention_mask", "token_type_ids")
        if key in enc
    }
    with torch.no_grad():
        out = model(**model_inputs, output_hidden_states=True)
    hidden = out.hidden_states[layer]
    keep = (enc["special_tokens_mask"] == 0) & (enc["attention_mask"] == 1)
    vectors = []
    for i in range(len(words)):
        idx = keep[i].nonzero(as_tuple=True)[0]
        if len(idx) == 0:
            vectors.append(None)
            continue
        vectors.append(hidden[i, idx].mean(dim=0).double().numpy())
    return vectors


def extract(request: ExtractionRequest) -> Path:
    """Embed every word in the list and write a word2vec text file."""
    words = read_words(request.words_path)
    tokenizer, model, revision = load_encoder(request.model_id,
                                              request.revision)
    depth = getattr(model.config, "num_hidden_layers", 0)
    if request.layer > depth:
        raise ValueError(f"layer {request.layer} exceeds model depth {depth}")

    table: dict[str, np.ndarray] = {}
    dropped: list[str] = []
    for start in range(0, len(words), request.batch_size):
        batch = words[start:start + request.batch_size]
        for word, vec in zip(batch, _batch_vectors(tokenizer, model, batch,
                                                   request.layer)):
            if vec is None:
                dropped.append(word)
            else:
                table[word] = vec
    if dropped:
        log.warning("dropped %d word(s) with empty tokenization: %s",
                    len(dropped), dropped[:10])
    if not table:
        raise EmptyTokenization("every word tokenized to nothing")

    out = Path(request.output_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    dim = len(next(iter(table.values())))
    with open(out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# model={request.model_id} revision={revision} "
                 f"layer={request.layer}\n")
        fh.write(f"{len(table)} {dim}\n")
        for word in table:
            row = " ".join(repr(float(v)) for v in table[word])
            fh.write(f"{word} {row}\n")
    log.info("wrote %d x %d vectors to %s", len(table), dim, out)
    return out
