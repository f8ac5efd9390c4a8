"""Confidence selection: which unlabeled samples get absorbed, and absorption.

A sample is picked for class ``i`` when it is confidently associated
with ``i`` under one of three rules:

* ``mutual`` — the sample is among the class's top-``k1`` scoring rows
  AND the class is the sample's single best class (row argmax). This is
  the double-ended criterion; the other two are its one-directional
  degradations used as ablation baselines.
* ``image-to-class`` — top-``k1`` per class only; a sample wanted by
  several classes goes to the one where its rank is best (ties: lower
  class index).
* ``class-to-image`` — every remaining sample is picked for its argmax
  class.

All ties break toward the lower index, which makes selection a pure
deterministic function of the logit matrix.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .core import CompletionState, FeatureMatrix, LabelMatrix, one_hot
from .errors import IndexNotRemaining, ValidationError


class SelectionKind(str, Enum):
    MUTUAL = "mutual"
    IMAGE_TO_CLASS = "image-to-class"
    CLASS_TO_IMAGE = "class-to-image"


@dataclass(frozen=True)
class SelectionRule:
    kind: SelectionKind = SelectionKind.MUTUAL
    k1: int = 1

    def __post_init__(self):
        if self.k1 < 1:
            raise ValidationError(f"k1 must be >= 1, got {self.k1}")


@dataclass(frozen=True)
class SelectionResult:
    """Picks as (test_index, class_index) pairs, sorted by class then index."""

    picks: tuple[tuple[int, int], ...]
    per_class_counts: tuple[int, ...]

    def __post_init__(self):
        taken = [j for j, _ in self.picks]
        if len(set(taken)) != len(taken):
            raise ValidationError("a test index was picked more than once")

    def __len__(self) -> int:
        return len(self.picks)


def rank_class_neighbors(a: np.ndarray, class_i: int, k1: int) -> list[int]:
    """Row positions of the k1 highest scores in column ``class_i``, descending.

    Stable: equal scores keep ascending row order. Returns fewer than
    ``k1`` positions when fewer rows exist.
    """
    order = np.argsort(-a[:, class_i], kind="stable")
    return [int(j) for j in order[:k1]]


def argmax_class(a: np.ndarray, test_j: int) -> int:
    """Index of the best class for row ``test_j`` (ties: lowest class)."""
    return int(np.argmax(a[test_j]))


def _finish(picks: list[tuple[int, int]], num_classes: int) -> SelectionResult:
    picks.sort(key=lambda p: (p[1], p[0]))
    counts = [0] * num_classes
    for _, i in picks:
        counts[i] += 1
    return SelectionResult(picks=tuple(picks), per_class_counts=tuple(counts))


def select(
    a: np.ndarray,
    rule: SelectionRule,
    remaining: tuple[int, ...] | None = None,
) -> SelectionResult:
    """Apply a selection rule to the logit matrix of the remaining set.

    ``a`` has one row per remaining sample; ``remaining`` maps row
    positions to original test indices (identity when omitted) and must
    be strictly increasing so positional ties equal index ties. Empty
    picks are a legal result.
    """
    n_prime, num_classes = a.shape
    if remaining is None:
        remaining = tuple(range(n_prime))
    if len(remaining) != n_prime:
        raise ValidationError(
            f"logit matrix has {n_prime} rows but remaining set has {len(remaining)}"
        )
    if any(x >= y for x, y in zip(remaining, remaining[1:])):
        raise ValidationError("remaining indices must be strictly increasing")

    picks: list[tuple[int, int]] = []
    if n_prime == 0:
        return _finish(picks, num_classes)

    row_best = a.argmax(axis=1)

    if rule.kind is SelectionKind.MUTUAL:
        for i in range(num_classes):
            for j in rank_class_neighbors(a, i, rule.k1):
                if int(row_best[j]) == i:
                    picks.append((remaining[j], i))
    elif rule.kind is SelectionKind.IMAGE_TO_CLASS:
        best: dict[int, tuple[int, int]] = {}
        for i in range(num_classes):
            for rank, j in enumerate(rank_class_neighbors(a, i, rule.k1)):
                if j not in best or (rank, i) < best[j]:
                    best[j] = (rank, i)
        picks = [(remaining[j], i) for j, (_, i) in best.items()]
    elif rule.kind is SelectionKind.CLASS_TO_IMAGE:
        picks = [(remaining[j], int(row_best[j])) for j in range(n_prime)]
    else:  # pragma: no cover
        raise ValidationError(f"unknown selection kind {rule.kind!r}")

    return _finish(picks, num_classes)


def absorb(
    state: CompletionState,
    result: SelectionResult,
    features: FeatureMatrix,
) -> tuple[CompletionState, FeatureMatrix, LabelMatrix]:
    """Move picked samples into the absorbed set with their pseudo-labels.

    Returns the advanced state plus the completion features and one-hot
    pseudo-labels rebuilt in absorption order. Absorbed samples are
    never revisited; an empty result only advances the step counter.
    """
    remaining = set(state.remaining)
    for j, _ in result.picks:
        if j not in remaining:
            raise IndexNotRemaining(j)
    absorbed = state.absorbed + result.picks
    picked = {j for j, _ in result.picks}
    new_state = CompletionState(
        absorbed=absorbed,
        remaining=tuple(j for j in state.remaining if j not in picked),
        step=state.step + 1,
    )
    num_classes = len(result.per_class_counts)
    idx = np.array([j for j, _ in absorbed], dtype=np.int64)
    d = features[idx] if idx.size else np.zeros((0, features.shape[1]))
    l_d = one_hot([i for _, i in absorbed], num_classes)
    return new_state, d, l_d
