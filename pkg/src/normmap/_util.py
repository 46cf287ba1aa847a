"""Small shared helpers: canonical JSON, fingerprints, seeded RNG streams."""

from __future__ import annotations

import hashlib
import json
from typing import Any

import numpy as np


def canonical_json(payload: Any) -> str:
    """Serialize `payload` deterministically (sorted keys, repr floats)."""
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def fingerprint(payload: Any) -> str:
    """sha256 hex digest of the canonical JSON form of `payload`."""
    return hashlib.sha256(canonical_json(payload).encode("utf-8")).hexdigest()


def rng_for(seed: int, *spawn_key: int) -> np.random.Generator:
    """Deterministic generator for (seed, spawn_key), independent per key."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=spawn_key)
    return np.random.Generator(np.random.PCG64(ss))


def as_float_matrix(a, name: str = "matrix") -> np.ndarray:
    """Convert to a 2-d float64 ndarray, rejecting non-finite entries."""
    from .errors import DimensionMismatch

    out = np.asarray(a, dtype=np.float64)
    if out.ndim != 2:
        raise DimensionMismatch(f"{name} must be 2-d, got shape {out.shape}")
    if not np.all(np.isfinite(out)):
        raise ValueError(f"{name} contains non-finite values")
    return out
