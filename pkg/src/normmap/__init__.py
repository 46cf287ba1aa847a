"""normmap: map word embeddings onto semantic feature norms, with the
diagnostic baselines and self-mapping upper bounds needed to tell
information overlap from methodological ceiling."""

from .ablation import (
    AblationSpec,
    make_cdiff,
    make_rand,
    make_shuffle,
    make_tax_shuffle,
    upper_bound,
)
from .dataset import (
    BINDER,
    BUCHANAN,
    MCRAE,
    SYNTHETIC,
    CanonicalNorm,
    NormMatrix,
    build_matrix,
    ingest_norm,
    load_canonical,
    load_matrix,
    norm_stats,
    save_canonical,
    save_matrix,
    synthetic_categorical,
    synthetic_ratings,
)
from .embeddings import AlignedPair, EmbeddingTable, align, load_embeddings
from .evaluation import (
    EvalReport,
    FoldPlan,
    ModelSpec,
    cross_validate,
    f1_at_n,
    make_fold_plan,
    mse,
    neighborhood_accuracy,
    permutation_test,
    spearman_rho,
)
from .experiment import (
    ExperimentConfig,
    ReportBundle,
    SweepReport,
    emit_report,
    run_experiment,
    sweep_k,
)
from .ffnn import (
    FfnnModel,
    TrainConfig,
    gradient_check,
    init_ffnn,
    predict_ffnn,
    train_ffnn,
)
from .plsr import PlsrModel, fit_plsr, predict_plsr
from .reproduce import ReproduceConfig, reproduce_table

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
