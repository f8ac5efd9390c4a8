"""Independent pure-Python reference for the whole completion loop.

Everything here is written with plain lists, explicit loops, and
math.exp — no numpy and no imports from the package under test — so it
can serve as an oracle for the engine's predictions.
"""
from __future__ import annotations

import math


def _dot(u, v):
    return sum(a * b for a, b in zip(u, v))


def _text_logits(rows, weights):
    return [[_dot(r, w) for w in weights] for r in rows]


def _affinity_logits(rows, keys, key_labels, scale, sharp, num_classes):
    out = [[0.0] * num_classes for _ in rows]
    for ri, r in enumerate(rows):
        for key, lab in zip(keys, key_labels):
            out[ri][lab] += scale * math.exp(-sharp * (1.0 - _dot(r, key)))
    return out


def _add(a, b):
    return [[x + y for x, y in zip(ra, rb)] for ra, rb in zip(a, b)]


def _nearest_class(row):
    return min(range(len(row)), key=lambda i: (-row[i], i))


def reference_run(
    features,
    weights,
    cache_features=None,
    cache_label_indices=None,
    *,
    alpha=1.0,
    beta=1.0,
    lam=1.0,
    mu=1.0,
    k1=1,
    max_steps=1,
):
    """Run the loop with mutual selection and return the predictions."""
    n = len(features)
    num_classes = len(weights)
    absorbed: list[tuple[int, int]] = []
    remaining = list(range(n))

    def matrix(rem):
        rows = [features[j] for j in rem]
        m = _text_logits(rows, weights)
        if cache_features is not None:
            m = _add(
                m,
                _affinity_logits(
                    rows, cache_features, cache_label_indices, alpha, beta, num_classes
                ),
            )
        if absorbed:
            keys = [features[j] for j, _ in absorbed]
            labs = [i for _, i in absorbed]
            m = _add(m, _affinity_logits(rows, keys, labs, lam, mu, num_classes))
        return m

    a = matrix(remaining)
    for _ in range(max_steps):
        picks = []
        for i in range(num_classes):
            top = sorted(range(len(remaining)), key=lambda p: (-a[p][i], p))[:k1]
            for p in top:
                if _nearest_class(a[p]) == i:
                    picks.append((remaining[p], i))
        picks.sort(key=lambda t: (t[1], t[0]))
        if not picks:
            break
        absorbed.extend(picks)
        taken = {j for j, _ in picks}
        remaining = [j for j in remaining if j not in taken]
        a = matrix(remaining)
        if not remaining:
            break

    preds = [0] * n
    for j, i in absorbed:
        preds[j] = i
    for p, j in enumerate(remaining):
        preds[j] = _nearest_class(a[p])
    return preds
