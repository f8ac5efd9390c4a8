"""Domain matrices, validation, and L2 normalization.

Everything downstream works on plain float64 numpy arrays in cosine
space: similarity is always the inner product of unit rows. Arrays are
validated and frozen (read-only) once, at load time; the completion
engine owns the only mutable state (see :class:`CompletionState`).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimMismatch,
    EmptyTestSet,
    MissingLabels,
    NonFinite,
    NotNormalized,
    ValidationError,
    ZeroRow,
)

# Readability aliases; all of these are 2-D float64 ndarrays.
FeatureMatrix = np.ndarray   # (n, d) embedding rows
ClassWeights = np.ndarray    # (c, d) one anchor row per class
LabelMatrix = np.ndarray     # (m, c) one-hot rows
SimilarityMatrix = np.ndarray  # (n, c) combined logits

# Row norms must sit within this tolerance of 1 for inputs declared normalized.
ROW_NORM_TOL = 1e-5
# Rows with a norm below this cannot be meaningfully normalized.
ZERO_NORM_TOL = 1e-12

DEFAULT_ALPHA_GRID = (0.5, 1.0, 2.0, 5.0)
DEFAULT_BETA_GRID = (1.0, 2.0, 5.5, 10.0)
DEFAULT_LAMBDA_GRID = (0.5, 1.0, 2.0, 5.0)
DEFAULT_MU_GRID = (1.0, 2.0, 5.5, 10.0)


def _as_2d(m, what: str) -> np.ndarray:
    a = np.array(m, dtype=np.float64, order="C", copy=True)
    if a.ndim != 2:
        raise DimMismatch(f"{what} must be 2-D, got shape {a.shape}")
    return a


def _check_finite(a: np.ndarray, what: str) -> None:
    finite = np.isfinite(a)
    if not finite.all():
        row = int(np.argwhere(~finite)[0][0])
        raise NonFinite(row, what)


def normalize(m) -> FeatureMatrix:
    """Return a copy of ``m`` with every row scaled to unit L2 norm.

    Idempotent up to float rounding. Raises :class:`NonFinite` on NaN/Inf
    entries and :class:`ZeroRow` when a row norm falls below
    ``ZERO_NORM_TOL``.
    """
    a = _as_2d(m, "matrix")
    _check_finite(a, "matrix")
    norms = np.linalg.norm(a, axis=1)
    small = norms < ZERO_NORM_TOL
    if small.any():
        raise ZeroRow(int(np.argmax(small)))
    return a / norms[:, None]


def _freeze(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def as_feature_matrix(m, what: str = "features") -> FeatureMatrix:
    """Validate an (n, d) feature matrix: finite entries, d >= 1."""
    a = _as_2d(m, what)
    if a.shape[1] < 1:
        raise DimMismatch(f"{what} must have at least one column")
    _check_finite(a, what)
    return _freeze(a)


def as_class_weights(w) -> ClassWeights:
    """Validate a (c, d) anchor matrix: c >= 2 and unit rows."""
    a = _as_2d(w, "class weights")
    if a.shape[0] < 2:
        raise DimMismatch(f"need at least 2 classes, got {a.shape[0]}")
    _check_finite(a, "class weights")
    norms = np.linalg.norm(a, axis=1)
    off = np.abs(norms - 1.0) > ROW_NORM_TOL
    if off.any():
        i = int(np.argmax(off))
        raise NotNormalized(i, float(norms[i]))
    return _freeze(a)


def as_label_matrix(l, classes: int | None = None) -> LabelMatrix:
    """Validate an (m, c) one-hot matrix: exactly one 1 per row, rest 0."""
    a = _as_2d(l, "label matrix")
    if classes is not None and a.shape[1] != classes:
        raise DimMismatch(f"label matrix has {a.shape[1]} classes, expected {classes}")
    _check_finite(a, "label matrix")
    if not np.isin(a, (0.0, 1.0)).all():
        raise ValidationError("label matrix entries must be exactly 0 or 1")
    if a.size and not (a.sum(axis=1) == 1.0).all():
        raise ValidationError("every label matrix row must contain exactly one 1")
    return _freeze(a)


def one_hot(labels, num_classes: int) -> LabelMatrix:
    """Encode integer class indices as one-hot float rows."""
    idx = np.asarray(labels, dtype=np.int64).reshape(-1)
    if idx.size and (idx.min() < 0 or idx.max() >= num_classes):
        raise ValidationError(
            f"label index out of range [0, {num_classes}): {idx.min()}..{idx.max()}"
        )
    out = np.zeros((idx.size, num_classes), dtype=np.float64)
    out[np.arange(idx.size), idx] = 1.0
    return _freeze(out)


def _as_label_vector(labels, n: int, num_classes: int, what: str) -> np.ndarray:
    idx = np.asarray(labels, dtype=np.int64).reshape(-1)
    if idx.size != n:
        raise DimMismatch(f"{what}: expected {n} labels, got {idx.size}")
    if idx.size and (idx.min() < 0 or idx.max() >= num_classes):
        raise ValidationError(f"{what}: class index outside [0, {num_classes})")
    return _freeze(idx)


@dataclass(frozen=True)
class HyperParams:
    """Scalar knobs for the combined similarity and the completion loop.

    ``k2`` is pinned to 1: a sample's nearest class is its argmax, which
    is what makes pseudo-labels unique.
    """

    alpha: float = 1.0
    beta: float = 1.0
    lam: float = 1.0
    mu: float = 1.0
    k1: int = 1
    k2: int = 1
    max_steps: int = 10
    per_class_budget: int | None = None
    alpha_grid: tuple[float, ...] = DEFAULT_ALPHA_GRID
    beta_grid: tuple[float, ...] = DEFAULT_BETA_GRID
    lambda_grid: tuple[float, ...] = DEFAULT_LAMBDA_GRID
    mu_grid: tuple[float, ...] = DEFAULT_MU_GRID

    def __post_init__(self):
        if self.alpha < 0:
            raise ValidationError(f"alpha must be >= 0, got {self.alpha}")
        if self.beta <= 0:
            raise ValidationError(f"beta must be > 0, got {self.beta}")
        if self.lam < 0:
            raise ValidationError(f"lambda must be >= 0, got {self.lam}")
        if self.mu <= 0:
            raise ValidationError(f"mu must be > 0, got {self.mu}")
        if self.k1 < 1:
            raise ValidationError(f"k1 must be >= 1, got {self.k1}")
        if self.k2 != 1:
            raise ValidationError("k2 is fixed to 1")
        if self.max_steps < 1:
            raise ValidationError(f"max_steps must be >= 1, got {self.max_steps}")
        if self.per_class_budget is not None and self.per_class_budget < 0:
            raise ValidationError("per_class_budget must be >= 0 (0 disables absorption)")

    def replace(self, **kw) -> "HyperParams":
        from dataclasses import replace

        return replace(self, **kw)


@dataclass(frozen=True)
class CompletionState:
    """Partition of test indices into absorbed (pseudo-labeled) and remaining.

    ``absorbed`` keeps absorption order: the completion features and
    pseudo-label rows are rebuilt from it verbatim. ``remaining`` stays
    sorted ascending so positional ties coincide with index ties.
    """

    absorbed: tuple[tuple[int, int], ...]
    remaining: tuple[int, ...]
    step: int = 0

    def __post_init__(self):
        taken = [i for i, _ in self.absorbed]
        if len(set(taken)) != len(taken):
            raise ValidationError("a test index was absorbed more than once")
        if set(taken) & set(self.remaining):
            raise ValidationError("absorbed and remaining sets overlap")
        n = len(taken) + len(self.remaining)
        if set(taken) | set(self.remaining) != set(range(n)):
            raise ValidationError("absorbed and remaining do not partition 0..n-1")
        if any(a >= b for a, b in zip(self.remaining, self.remaining[1:])):
            raise ValidationError("remaining indices must be strictly increasing")

    @classmethod
    def initial(cls, n: int) -> "CompletionState":
        return cls(absorbed=(), remaining=tuple(range(n)), step=0)

    @property
    def n(self) -> int:
        return len(self.absorbed) + len(self.remaining)


@dataclass(frozen=True)
class Bundle:
    """Validated, immutable inputs for one inference run.

    ``cache_features``/``cache_labels`` hold the labeled shots (absent in
    zero-shot mode); ``test_labels`` and the validation split are
    optional extras used for scoring and grid search.
    """

    features: FeatureMatrix
    weights: ClassWeights
    cache_features: FeatureMatrix | None = None
    cache_labels: LabelMatrix | None = None
    test_labels: np.ndarray | None = None
    val_features: FeatureMatrix | None = None
    val_labels: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    @property
    def num_classes(self) -> int:
        return self.weights.shape[0]

    @property
    def has_cache(self) -> bool:
        return self.cache_features is not None


def validate_run(
    features,
    weights,
    cache_features=None,
    cache_labels=None,
    *,
    test_labels=None,
    val_features=None,
    val_labels=None,
) -> Bundle:
    """Cross-check all matrices for one run and freeze them into a Bundle.

    Raises :class:`EmptyTestSet` for an empty test matrix,
    :class:`MissingLabels` when cache features arrive without one-hot
    labels, and :class:`DimMismatch` on any shape disagreement.
    """
    f = as_feature_matrix(features, "test features")
    if f.shape[0] == 0:
        raise EmptyTestSet()
    w = as_class_weights(weights)
    if w.shape[1] != f.shape[1]:
        raise DimMismatch(
            f"test features have dim {f.shape[1]} but class weights have dim {w.shape[1]}"
        )
    c = w.shape[0]

    fc = lc = None
    if cache_features is not None and cache_labels is None:
        raise MissingLabels("cache features supplied without cache labels")
    if cache_labels is not None and cache_features is None:
        raise MissingLabels("cache labels supplied without cache features")
    if cache_features is not None:
        fc = as_feature_matrix(cache_features, "cache features")
        if fc.shape[1] != f.shape[1]:
            raise DimMismatch(
                f"cache features have dim {fc.shape[1]}, expected {f.shape[1]}"
            )
        lc = as_label_matrix(cache_labels, classes=c)
        if lc.shape[0] != fc.shape[0]:
            raise DimMismatch(
                f"cache labels have {lc.shape[0]} rows but cache features have {fc.shape[0]}"
            )

    ty = None
    if test_labels is not None:
        ty = _as_label_vector(test_labels, f.shape[0], c, "test labels")

    vf = vy = None
    if (val_features is None) != (val_labels is None):
        raise MissingLabels("validation features and labels must be supplied together")
    if val_features is not None:
        vf = as_feature_matrix(val_features, "validation features")
        if vf.shape[1] != f.shape[1]:
            raise DimMismatch(
                f"validation features have dim {vf.shape[1]}, expected {f.shape[1]}"
            )
        vy = _as_label_vector(val_labels, vf.shape[0], c, "validation labels")

    return Bundle(
        features=f,
        weights=w,
        cache_features=fc,
        cache_labels=lc,
        test_labels=ty,
        val_features=vf,
        val_labels=vy,
    )
