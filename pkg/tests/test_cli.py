import json
import subprocess
import sys

import numpy as np
import pytest

from normmap.dataset import build_matrix, save_canonical, synthetic_categorical
from normmap.embeddings import save_word2vec_text


def run_cli(*args, cwd=None):
    return subprocess.run(
        [sys.executable, "-m", "normmap.cli", *args],
        capture_output=True, text=True, cwd=cwd,
    )


@pytest.fixture
def canonical_norm(tmp_path):
    norm = synthetic_categorical(
        n_concepts=50, m_features=140, taxonomic_feature_count=20, seed=5)
    path = tmp_path / "norm.tsv"
    save_canonical(norm, path)
    return path, norm


@pytest.fixture
def embeddings_file(tmp_path, canonical_norm):
    _, norm = canonical_norm
    Y = build_matrix(norm)
    rng = np.random.default_rng(1)
    X = Y.dense() @ rng.normal(size=(Y.shape[1], 16)) \
        + rng.normal(size=(Y.shape[0], 16))
    path = tmp_path / "emb.txt"
    save_word2vec_text(path, {c: X[i] for i, c in enumerate(Y.concept_index)})
    return path


def test_ingest_subcommand(tmp_path, mcrae_file):
    out = tmp_path / "mcrae.tsv"
    proc = run_cli("ingest", "--dataset", "mcrae", "--in", str(mcrae_file),
                   "--out", str(out))
    assert proc.returncode == 0, proc.stderr
    stats = json.loads(proc.stdout)
    assert stats["n"] == 4
    assert out.exists()


def test_ingest_error_is_machine_readable(tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text("nope\n", encoding="utf-8")
    proc = run_cli("ingest", "--dataset", "mcrae", "--in", str(bad),
                   "--out", str(tmp_path / "x.tsv"))
    assert proc.returncode == 2
    error = json.loads(proc.stderr)
    assert error["error"] == "UnknownColumnLayout"


def test_align_subcommand(tmp_path, canonical_norm, embeddings_file):
    norm_path, _ = canonical_norm
    proc = run_cli("align", "--embeddings", str(embeddings_file),
                   "--norm", str(norm_path))
    assert proc.returncode == 0, proc.stderr
    summary = json.loads(proc.stdout)
    assert summary["aligned"] == 50
    assert summary["dropped"] == []


def test_fit_subcommand_writes_model(tmp_path, canonical_norm, embeddings_file):
    norm_path, _ = canonical_norm
    out = tmp_path / "model.npz"
    proc = run_cli("fit", "--method", "plsr", "--k", "5",
                   "--norm", str(norm_path),
                   "--embeddings", str(embeddings_file), "--out", str(out))
    assert proc.returncode == 0, proc.stderr
    assert out.exists()


def test_fit_ffnn_hidden_alias(tmp_path, canonical_norm, embeddings_file):
    norm_path, _ = canonical_norm
    out = tmp_path / "ffnn.npz"
    proc = run_cli("fit", "--method", "ffnn", "--hidden", "4",
                   "--epochs", "2", "--lr", "1e-3",
                   "--norm", str(norm_path),
                   "--embeddings", str(embeddings_file), "--out", str(out))
    assert proc.returncode == 0, proc.stderr
    assert json.loads(proc.stdout)["k"] == 4


def test_ablate_and_upper_bound(tmp_path, canonical_norm):
    norm_path, _ = canonical_norm
    shuffled = tmp_path / "shuffle.tsv"
    proc = run_cli("ablate", "--kind", "shuffle", "--norm", str(norm_path),
                   "--seed", "3", "--out", str(shuffled))
    assert proc.returncode == 0, proc.stderr
    assert shuffled.exists()

    proc = run_cli("upper-bound", "--norm", str(shuffled), "--k", "4",
                   "--folds", "5")
    assert proc.returncode == 0, proc.stderr
    aggregate = json.loads(proc.stdout)
    assert "f1_at_10" in aggregate


def test_evaluate_and_report_round_trip(tmp_path, canonical_norm,
                                        embeddings_file):
    norm_path, _ = canonical_norm
    cfg = tmp_path / "exp.cfg"
    out_dir = tmp_path / "out"
    cfg.write_text(f"""
dataset = synthetic
norm = {norm_path}
embeddings = {embeddings_file}
method = plsr
k = 5
folds = 5
ablations = rand
out = {out_dir}
formats = json,markdown
""", encoding="utf-8")
    proc = run_cli("evaluate", "--config", str(cfg))
    assert proc.returncode == 0, proc.stderr
    result = json.loads(proc.stdout)
    assert "sys" in result["aggregate"]
    assert (out_dir / "bundle.json").exists()

    rendered = tmp_path / "again.csv"
    proc = run_cli("report", "--bundle", str(out_dir / "bundle.json"),
                   "--format", "csv", "--out", str(rendered))
    assert proc.returncode == 0, proc.stderr
    assert rendered.exists()


def test_evaluate_invalid_config_exit_code(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("dataset = synthetic\nmethod = magic\n", encoding="utf-8")
    proc = run_cli("evaluate", "--config", str(cfg))
    assert proc.returncode == 2
    error = json.loads(proc.stderr)
    assert error["error"] == "ConfigInvalid"
    assert "method" in error["message"]


def test_sweep_subcommand(tmp_path, canonical_norm):
    norm_path, _ = canonical_norm
    cfg = tmp_path / "sweep.cfg"
    cfg.write_text(f"""
dataset = synthetic
norm = {norm_path}
method = plsr
folds = 5
out = {tmp_path / 'sweep_out'}
""", encoding="utf-8")
    proc = run_cli("sweep", "--config", str(cfg), "--grid", "2,5,9")
    assert proc.returncode == 0, proc.stderr
    assert "selected_k" in json.loads(proc.stdout)
    assert (tmp_path / "sweep_out" / "sweep.csv").exists()


def test_reproduce_runs_without_data(tmp_path):
    cfg = tmp_path / "rep.cfg"
    cfg.write_text(f"out = {tmp_path / 'rep'}\n", encoding="utf-8")
    proc = run_cli("reproduce", "--table", "5", "--config", str(cfg))
    assert proc.returncode == 0, proc.stderr
    assert "n/a" in proc.stdout
