"""rankfuse: score-matrix toolkit for cross-modal retrieval.

Dense similarity and ranking primitives, the four training-objective loss
kernels with gradient verification, probabilistic local/global view
sampling, guidance-driven candidate selection, iterative ensemble fusion
with per-step weight tuning, Recall@K evaluation, synthetic instance
generation, and file/CLI plumbing.
"""

from .ensemble import (
    DEFAULT_WEIGHT_GRID,
    EnsembleStep,
    EnsembleTrace,
    RecallAtK,
    WeightGrid,
    format_trace,
    iterative_ensemble,
    minmax_normalize,
    sweep_weight,
)
from .errors import (
    DegenerateInputError,
    FormatError,
    ParameterError,
    RankfuseError,
    ShapeError,
    ValidationError,
)
from .io_files import (
    ModelEntry,
    load_ground_truth,
    load_manifest,
    load_matrix,
    write_manifest,
    write_matrix,
)
from .losses import (
    DEFAULT_MIM_WEIGHT,
    ImageTensor,
    ItmBatch,
    LossKind,
    LossReport,
    MaskSpec,
    MlmBatch,
    finite_diff_grad_check,
    itc_loss,
    itm_loss,
    mim_loss,
    mlm_loss,
    total_loss,
)
from .matrix_ops import (
    EmbeddingMatrix,
    ScoreMatrix,
    TopKResult,
    cosine_similarity,
    l2_normalize_rows,
    row_softmax,
    topk_rows,
)
from .metrics import GroundTruth, RetrievalMetrics, metrics_report, recall_at_k
from .selection import SelectedFeatures, rerank_selected, select_topk_features
from .synth import SynthConfig, gen_model_scores, gen_paired_embeddings
from .view_sampling import (
    Branch,
    CropSpec,
    ViewDecision,
    apply_transform,
    sample_decision,
    sample_decisions,
)

__version__ = "0.1.0"
