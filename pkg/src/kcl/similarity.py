"""Similarity kernels combining class anchors with labeled-feature caches.

All kernels are pure functions over unit-row matrices and return an
(n, c) logit matrix for the rows of their first argument. The combined
form is a sum of up to three terms, accumulated in a fixed order so the
degenerate cases collapse bitwise onto the simpler kernels:

    completion term   lam * exp(-mu  * (1 - f D^T)) @ l_D
    cache term        alpha * exp(-beta * (1 - f F^T)) @ l
    text term         f W^T

Dropping the completion term (lam = 0 or empty D) recovers the cache
classifier; dropping the cache term (alpha = 0 or no shots) recovers
plain anchor logits.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import HyperParams
from .errors import DimMismatch, NonPositiveBeta, ValidationError


@dataclass(frozen=True)
class ModalityMask:
    """Which similarity sources participate in the combined logits."""

    use_text: bool = True
    use_visual: bool = True

    def __post_init__(self):
        if not (self.use_text or self.use_visual):
            raise ValidationError("at least one modality must be enabled")


def _check_dims(a: np.ndarray, b: np.ndarray, what: str) -> None:
    if a.shape[1] != b.shape[1]:
        raise DimMismatch(f"{what}: dim {a.shape[1]} vs {b.shape[1]}")


def clip_logits(f: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Cosine logits of each feature row against every class anchor."""
    _check_dims(f, weights, "features vs class weights")
    return f @ weights.T


def cache_affinity(q: np.ndarray, keys: np.ndarray, beta: float) -> np.ndarray:
    """exp(-beta * (1 - <q_j, k_m>)) for every query/key pair.

    For unit rows this is a sharpened cosine-distance kernel with values
    in (exp(-2*beta), 1].
    """
    if beta <= 0:
        raise NonPositiveBeta(beta)
    _check_dims(q, keys, "queries vs cache keys")
    return np.exp(-beta * (1.0 - q @ keys.T))


def tip_logits(
    f: np.ndarray,
    weights: np.ndarray,
    cache_f: np.ndarray,
    cache_l: np.ndarray,
    alpha: float,
    beta: float,
) -> np.ndarray:
    """Cache-model logits: affinity-weighted label lookup plus text logits."""
    if alpha < 0:
        raise ValidationError(f"alpha must be >= 0, got {alpha}")
    if cache_f.shape[0] != cache_l.shape[0]:
        raise DimMismatch(
            f"cache has {cache_f.shape[0]} feature rows but {cache_l.shape[0]} label rows"
        )
    if cache_l.shape[1] != weights.shape[0]:
        raise DimMismatch(
            f"cache labels cover {cache_l.shape[1]} classes, weights {weights.shape[0]}"
        )
    return alpha * (cache_affinity(f, cache_f, beta) @ cache_l) + clip_logits(f, weights)


def _completion_term(
    f_prime: np.ndarray, d: np.ndarray, l_d: np.ndarray, lam: float, mu: float
) -> np.ndarray:
    if d.shape[0] != l_d.shape[0]:
        raise DimMismatch(
            f"completion set has {d.shape[0]} rows but {l_d.shape[0]} label rows"
        )
    # An empty completion set contributes an exact zero matrix.
    return lam * (cache_affinity(f_prime, d, mu) @ l_d)


def kcl_fs_logits(
    f_prime: np.ndarray,
    weights: np.ndarray,
    cache_f: np.ndarray,
    cache_l: np.ndarray,
    d: np.ndarray,
    l_d: np.ndarray,
    hp: HyperParams,
) -> np.ndarray:
    """Re-estimated few-shot logits: completion term + cache term + text term."""
    return _completion_term(f_prime, d, l_d, hp.lam, hp.mu) + tip_logits(
        f_prime, weights, cache_f, cache_l, hp.alpha, hp.beta
    )


def kcl_zs_logits(
    f_prime: np.ndarray,
    weights: np.ndarray,
    d: np.ndarray,
    l_d: np.ndarray,
    hp: HyperParams,
) -> np.ndarray:
    """Re-estimated zero-shot logits: completion term + text term."""
    return _completion_term(f_prime, d, l_d, hp.lam, hp.mu) + clip_logits(
        f_prime, weights
    )


def masked_logits(
    f_prime: np.ndarray,
    weights: np.ndarray,
    cache_f: np.ndarray | None,
    cache_l: np.ndarray | None,
    d: np.ndarray,
    l_d: np.ndarray,
    hp: HyperParams,
    mask: ModalityMask,
) -> np.ndarray:
    """Combined logits with whole modalities switched off.

    Text-only keeps just the anchor logits; visual-only keeps the
    exp-affinity terms; both delegates to the full kernels so it is
    bit-identical to them.
    """
    if mask.use_text and mask.use_visual:
        if cache_f is None:
            return kcl_zs_logits(f_prime, weights, d, l_d, hp)
        return kcl_fs_logits(f_prime, weights, cache_f, cache_l, d, l_d, hp)
    if mask.use_text:
        return clip_logits(f_prime, weights)
    out = _completion_term(f_prime, d, l_d, hp.lam, hp.mu)
    if cache_f is not None:
        out = out + hp.alpha * (cache_affinity(f_prime, cache_f, hp.beta) @ cache_l)
    return out
