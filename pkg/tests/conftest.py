"""Shared fixtures: small distribution-layout files and real-data discovery.

The published distribution files are not redistributable with this
repository. Tests that assert published figures look for them under
$NORMMAP_DATA_DIR (default: ./data) and skip with instructions when
absent:

    data/mcrae/CONCS_FEATS_concstats_brm.txt   (tab or comma separated)
    data/buchanan/*.csv
    data/binder/*.csv
"""

from __future__ import annotations

import os
from pathlib import Path

import pytest

MCRAE_HEADER = "Concept\tFeature\tWB_Label\tBR_Label\tProd_Freq\tRank_PF"

MCRAE_ROWS = [
    ("airplane", "has_wings", "wb", "visual-form_and_surface", 21),
    ("airplane", "a_vehicle", "wb", "taxonomic", 14),
    ("airplane", "is_fast", "wb", "visual-motion", 9),
    ("raven", "a_bird", "wb", "taxonomic", 28),
    ("raven", "an_animal", "wb", "taxonomic", 10),
    ("raven", "a_scavenger", "wb", "taxonomic", 6),
    ("raven", "is_black", "wb", "visual-colour", 20),
    ("bat_(animal)", "an_animal", "wb", "taxonomic", 18),
    ("bat_(animal)", "has_wings", "wb", "visual-form_and_surface", 15),
    ("bat_(baseball)", "made_of_wood", "wb", "visual-form_and_surface", 17),
]


@pytest.fixture
def mcrae_file(tmp_path):
    lines = [MCRAE_HEADER]
    for concept, feature, wb, br, freq in MCRAE_ROWS:
        lines.append(f"{concept}\t{feature}\t{wb}\t{br}\t{freq}\t1")
    path = tmp_path / "mcrae.txt"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


BUCHANAN_HEADER = "cue,feature,translated,frequency_translated,n,normalized_translated"

BUCHANAN_ROWS = [
    ("apple", "a fruit", "fruit", 20, 30, 0.667),
    ("apple", "is red", "red", 12, 30, 0.4),
    ("apple", "grows on trees", "tree", 9, 30, 0.3),
    ("bank", "money", "money", 25, 50, 0.5),
    ("bank", "a building", "building", 10, 50, 0.2),
]


@pytest.fixture
def buchanan_file(tmp_path):
    lines = [BUCHANAN_HEADER]
    for cue, feat, trans, freq, n, norm in BUCHANAN_ROWS:
        lines.append(f"{cue},{feat},{trans},{freq},{n},{norm}")
    path = tmp_path / "buchanan.csv"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


BINDER_HEADER = "No.,Word,WClass,Vision,Touch,Caused"

BINDER_ROWS = [
    (1, "apple", "Noun", 5.1, 3.2, "na"),
    (2, "bank", "Noun", 4.0, 2.0, "1.0"),
    (3, "apple", "Noun", 9.9, 9.9, "9.9"),  # duplicate word: dropped
    (4, "sun", "Noun", 5.9, 0.4, "2.0"),
]


@pytest.fixture
def binder_file(tmp_path):
    lines = [BINDER_HEADER]
    for no, word, wclass, v, t, c in BINDER_ROWS:
        lines.append(f"{no},{word},{wclass},{v},{t},{c}")
    path = tmp_path / "binder.csv"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


# --- real published distributions (optional) ---

def data_dir() -> Path:
    return Path(os.environ.get("NORMMAP_DATA_DIR", "data"))


def find_real(dataset: str) -> Path | None:
    base = data_dir() / dataset
    if not base.is_dir():
        return None
    for pattern in ("*.txt", "*.csv", "*.tsv"):
        hits = sorted(base.glob(pattern))
        if hits:
            return hits[0]
    return None


def require_real(dataset: str) -> Path:
    path = find_real(dataset)
    if path is None:
        pytest.skip(
            f"requires the published {dataset} distribution file under "
            f"{data_dir() / dataset}/ (set NORMMAP_DATA_DIR to change); "
            "see README section 'Reproducing the published numbers'"
        )
    return path
