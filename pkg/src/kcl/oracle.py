"""Brute-force reference for confidence selection, used only by tests.

Deliberately naive: builds the neighbor sets of both directions with
plain Python sorts and evaluates the set-membership conditions
literally. Shares no code path with :mod:`kcl.selection`.
"""
from __future__ import annotations

import numpy as np

from .selection import SelectionKind, SelectionResult, SelectionRule


def _class_neighbors(a: np.ndarray, class_i: int, k: int) -> list[int]:
    # K nearest remaining rows to class_i, score descending, index ascending.
    order = sorted(range(a.shape[0]), key=lambda j: (-float(a[j][class_i]), j))
    return order[:k]


def _nearest_class(a: np.ndarray, row_j: int) -> int:
    order = sorted(range(a.shape[1]), key=lambda i: (-float(a[row_j][i]), i))
    return order[0]


def oracle_select(
    a: np.ndarray,
    rule: SelectionRule,
    remaining: tuple[int, ...] | None = None,
) -> SelectionResult:
    """Set-construction transcription of the three selection rules."""
    n_prime, num_classes = a.shape
    if remaining is None:
        remaining = tuple(range(n_prime))

    pairs: list[tuple[int, int]] = []
    if rule.kind is SelectionKind.MUTUAL:
        for i in range(num_classes):
            members = set(_class_neighbors(a, i, rule.k1))
            for j in range(n_prime):
                if j in members and _nearest_class(a, j) == i:
                    pairs.append((j, i))
    elif rule.kind is SelectionKind.IMAGE_TO_CLASS:
        wanted: dict[int, list[tuple[int, int]]] = {}
        for i in range(num_classes):
            for rank, j in enumerate(_class_neighbors(a, i, rule.k1)):
                wanted.setdefault(j, []).append((rank, i))
        for j, options in wanted.items():
            _, i = min(options)
            pairs.append((j, i))
    elif rule.kind is SelectionKind.CLASS_TO_IMAGE:
        for j in range(n_prime):
            pairs.append((j, _nearest_class(a, j)))
    else:  # pragma: no cover
        raise ValueError(f"unknown selection kind {rule.kind!r}")

    pairs = sorted(((remaining[j], i) for j, i in pairs), key=lambda p: (p[1], p[0]))
    counts = [0] * num_classes
    for _, i in pairs:
        counts[i] += 1
    return SelectionResult(picks=tuple(pairs), per_class_counts=tuple(counts))
