"""Seeded synthetic benchmarks with deliberately biased shots.

Classes are mutually separated directions on the unit sphere. Test and
validation samples scatter isotropically around their class center; the
labeled shots are additionally pushed toward the next class's center,
which displaces the empirical shot mean from the true mean — the
situation iterative completion exists to repair.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import LabelMatrix, normalize, one_hot
from .errors import DegenerateSpec, NonFinite, ValidationError, ZeroRow


@dataclass(frozen=True)
class SynthSpec:
    classes: int = 10
    dim: int = 32
    samples_per_class: int = 20
    shots: int = 1
    center_separation: float = 1.0
    noise_sigma: float = 0.25
    center_bias: float = 0.6
    seed: int = 0
    val_per_class: int = 0  # 0: no validation split

    def __post_init__(self):
        if self.classes < 2:
            raise ValidationError("need at least 2 classes")
        if min(self.dim, self.samples_per_class, self.shots) < 1:
            raise ValidationError("dim, samples_per_class and shots must be >= 1")
        if self.noise_sigma <= 0:
            raise ValidationError("noise_sigma must be > 0")
        if self.val_per_class < 0:
            raise ValidationError("val_per_class must be >= 0")


@dataclass(frozen=True)
class SynthData:
    weights: np.ndarray        # (c, d) unit rows; also the true class centers
    test_features: np.ndarray  # (c*samples_per_class, d) unit rows
    test_labels: np.ndarray
    cache_features: np.ndarray  # (c*shots, d) unit rows, class-major
    cache_labels: LabelMatrix
    val_features: np.ndarray | None
    val_labels: np.ndarray | None


def _unit_centers(spec: SynthSpec, rng: np.random.Generator) -> np.ndarray:
    g = rng.standard_normal((spec.dim, spec.classes))
    if spec.dim >= spec.classes:
        # Orthonormal columns with canonical signs: exactly separated centers.
        q, r = np.linalg.qr(g)
        q = q * np.sign(np.diag(r))
        return q.T.copy()
    return normalize(g.T)


def _sample_block(
    centers: np.ndarray,
    per_class: int,
    sigma: float,
    offsets: np.ndarray | None,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    c, d = centers.shape
    mean = centers if offsets is None else centers + offsets
    noise = rng.standard_normal((c, per_class, d)) * sigma
    raw = (mean[:, None, :] + noise).reshape(c * per_class, d)
    labels = np.repeat(np.arange(c, dtype=np.int64), per_class)
    try:
        return normalize(raw), labels
    except (ZeroRow, NonFinite) as exc:
        raise DegenerateSpec(f"sampled row could not be normalized: {exc}") from exc


def gen_synth(spec: SynthSpec) -> SynthData:
    """Generate one seeded benchmark instance (byte-deterministic)."""
    rng = np.random.default_rng(spec.seed)
    weights = _unit_centers(spec, rng)
    centers = spec.center_separation * weights
    if not np.isfinite(centers).all():
        raise DegenerateSpec("class centers are not finite")

    test_f, test_y = _sample_block(
        centers, spec.samples_per_class, spec.noise_sigma, None, rng
    )

    # Shots drift toward the next class center by a fixed offset.
    toward_next = np.roll(weights, -1, axis=0) - weights
    try:
        offsets = spec.center_bias * normalize(toward_next)
    except (ZeroRow, NonFinite) as exc:
        raise DegenerateSpec(f"shot bias offsets are degenerate: {exc}") from exc
    if not np.isfinite(offsets).all():
        raise DegenerateSpec("shot bias offsets are not finite")
    cache_f, cache_y = _sample_block(
        centers, spec.shots, spec.noise_sigma, offsets, rng
    )

    val_f = val_y = None
    if spec.val_per_class > 0:
        val_f, val_y = _sample_block(
            centers, spec.val_per_class, spec.noise_sigma, None, rng
        )

    return SynthData(
        weights=weights,
        test_features=test_f,
        test_labels=test_y,
        cache_features=cache_f,
        cache_labels=one_hot(cache_y, spec.classes),
        val_features=val_f,
        val_labels=val_y,
    )


def centroid_gaps(
    features: np.ndarray,
    labels: np.ndarray,
    centers: np.ndarray,
) -> np.ndarray:
    """Distance from each class's feature centroid to its true center.

    Classes with no members get NaN so callers can mask them out.
    """
    labels = np.asarray(labels).reshape(-1)
    c = centers.shape[0]
    out = np.full(c, np.nan)
    for i in range(c):
        members = features[labels == i]
        if len(members):
            out[i] = float(np.linalg.norm(members.mean(axis=0) - centers[i]))
    return out
