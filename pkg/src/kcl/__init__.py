"""Transductive classification over precomputed embeddings.

The engine iteratively absorbs high-confidence unlabeled samples into a
pseudo-labeled completion set and re-estimates the remaining samples
with it, on top of either plain anchor logits (zero-shot) or a labeled
feature cache (few-shot).
"""

from .core import (
    Bundle,
    CompletionState,
    HyperParams,
    as_class_weights,
    as_feature_matrix,
    as_label_matrix,
    normalize,
    one_hot,
    validate_run,
)
from .engine import (
    HpMode,
    Mode,
    RunConfig,
    RunReport,
    StepRecord,
    accuracy,
    run,
    search_lambda_mu,
)
from .errors import (
    BadMagic,
    DegenerateSpec,
    DimMismatch,
    EmptyGrid,
    EmptyTestSet,
    FormatError,
    IndexNotRemaining,
    KCLError,
    LengthMismatch,
    MissingLabels,
    NonFinite,
    NonPositiveBeta,
    NotNormalized,
    TruncatedPayload,
    ValidationError,
    ZeroRow,
)
from .io import read_emb, read_features, read_label_file, read_labels, write_emb, write_labels
from .oracle import oracle_select
from .selection import (
    SelectionKind,
    SelectionResult,
    SelectionRule,
    absorb,
    argmax_class,
    rank_class_neighbors,
    select,
)
from .similarity import (
    ModalityMask,
    cache_affinity,
    clip_logits,
    kcl_fs_logits,
    kcl_zs_logits,
    masked_logits,
    tip_logits,
)
from .synth import SynthData, SynthSpec, centroid_gaps, gen_synth

__version__ = "0.1.0"
