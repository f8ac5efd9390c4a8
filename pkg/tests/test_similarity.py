import math

import numpy as np
import pytest

from kcl import (
    DimMismatch,
    HyperParams,
    ModalityMask,
    NonPositiveBeta,
    ValidationError,
    cache_affinity,
    clip_logits,
    kcl_fs_logits,
    kcl_zs_logits,
    masked_logits,
    normalize,
    one_hot,
    tip_logits,
)

# Shared 2-D toy: one query on the 3-4-5 direction, identity anchors,
# one completion sample close to class 0.
F_PRIME = np.array([[0.8, 0.6]])
EYE = np.eye(2)
D_ONE = np.array([[0.980581, 0.196116]])
L_D_ONE = one_hot([0], 2)
TOY_DOT = 0.8 * 0.980581 + 0.6 * 0.196116  # cosine between query and D row


def loop_clip(f, w):
    out = np.zeros((f.shape[0], w.shape[0]))
    for j in range(f.shape[0]):
        for i in range(w.shape[0]):
            out[j, i] = sum(f[j, k] * w[i, k] for k in range(f.shape[1]))
    return out


def loop_affinity(q, keys, beta):
    out = np.zeros((q.shape[0], keys.shape[0]))
    for j in range(q.shape[0]):
        for m in range(keys.shape[0]):
            dot = sum(q[j, k] * keys[m, k] for k in range(q.shape[1]))
            out[j, m] = math.exp(-beta * (1.0 - dot))
    return out


def rel_close(a, b, tol=1e-6):
    scale = np.maximum(np.abs(b), 1e-12)
    return np.max(np.abs(a - b) / scale) < tol


def random_bundle(rng, n=6, c=3, d=5, m_per_class=2):
    f = normalize(rng.standard_normal((n, d)))
    w = normalize(rng.standard_normal((c, d)))
    cache = normalize(rng.standard_normal((c * m_per_class, d)))
    labels = one_hot(np.repeat(np.arange(c), m_per_class), c)
    return f, w, cache, labels


class TestClipLogits:
    def test_orthonormal(self):
        assert np.array_equal(clip_logits(np.array([[1.0, 0.0]]), EYE), [[1.0, 0.0]])

    def test_identity_weights(self):
        assert np.array_equal(clip_logits(F_PRIME, EYE), [[0.8, 0.6]])

    def test_matches_loop_oracle(self):
        rng = np.random.default_rng(10)
        f = normalize(rng.standard_normal((7, 5)))
        w = normalize(rng.standard_normal((4, 5)))
        assert np.allclose(clip_logits(f, w), loop_clip(f, w), rtol=0, atol=1e-12)

    def test_dim_mismatch(self):
        with pytest.raises(DimMismatch):
            clip_logits(np.ones((2, 3)), np.ones((2, 4)))


class TestCacheAffinity:
    def test_self_similarity(self):
        q = np.array([[1.0, 0.0]])
        assert np.array_equal(cache_affinity(q, q, 5.5), [[1.0]])

    def test_orthogonal_pair(self):
        out = cache_affinity(np.array([[1.0, 0.0]]), np.array([[0.0, 1.0]]), 1.0)
        assert out[0, 0] == pytest.approx(math.exp(-1.0), abs=1e-12)

    def test_scalar_oracle(self):
        out = cache_affinity(F_PRIME, np.array([[1.0, 0.0]]), 2.0)
        assert out[0, 0] == pytest.approx(math.exp(-0.4), abs=1e-12)

    def test_monotone_in_similarity(self):
        # Fixing beta, a higher cosine must give a strictly higher affinity.
        rng = np.random.default_rng(11)
        q = normalize(rng.standard_normal((20, 6)))
        keys = normalize(rng.standard_normal((15, 6)))
        sims = q @ keys.T
        aff = cache_affinity(q, keys, 3.0)
        order = np.argsort(sims, axis=None)
        flat_s, flat_a = sims.flatten()[order], aff.flatten()[order]
        strict = np.diff(flat_s) > 1e-12
        assert (np.diff(flat_a)[strict] > 0).all()

    def test_rejects_bad_beta(self):
        with pytest.raises(NonPositiveBeta):
            cache_affinity(F_PRIME, F_PRIME, 0.0)


class TestTipLogits:
    def test_alpha_zero_is_clip_bitwise(self):
        rng = np.random.default_rng(12)
        f, w, cache, labels = random_bundle(rng)
        assert np.array_equal(
            tip_logits(f, w, cache, labels, 0.0, 1.0), clip_logits(f, w)
        )

    def test_scalar_oracle(self):
        out = tip_logits(F_PRIME, EYE, EYE, one_hot([0, 1], 2), 1.0, 1.0)
        expected = [0.8 + math.exp(-0.2), 0.6 + math.exp(-0.4)]
        assert np.allclose(out, [expected], rtol=0, atol=1e-12)

    def test_anchor_cache_preserves_argmax(self):
        # One shot per class exactly at its anchor: the cache term is a
        # strictly increasing transform of the text logit, so the row
        # argmax never changes.
        rng = np.random.default_rng(13)
        w = normalize(rng.standard_normal((5, 16)))
        f = normalize(rng.standard_normal((50, 16)))
        tip = tip_logits(f, w, w, one_hot(np.arange(5), 5), 1.0, 1.0)
        assert np.array_equal(np.argmax(tip, axis=1), np.argmax(clip_logits(f, w), axis=1))

    def test_rejects_negative_alpha(self):
        with pytest.raises(ValidationError):
            tip_logits(F_PRIME, EYE, EYE, one_hot([0, 1], 2), -1.0, 1.0)


class TestCompletionLogits:
    def hp(self, **kw):
        return HyperParams(**kw)

    def test_lambda_zero_is_tip_bitwise(self):
        rng = np.random.default_rng(14)
        f, w, cache, labels = random_bundle(rng)
        d = normalize(rng.standard_normal((2, 5)))
        l_d = one_hot([0, 2], 3)
        out = kcl_fs_logits(f, w, cache, labels, d, l_d, self.hp(lam=0.0))
        assert np.array_equal(out, tip_logits(f, w, cache, labels, 1.0, 1.0))

    def test_empty_d_is_tip_bitwise(self):
        rng = np.random.default_rng(15)
        f, w, cache, labels = random_bundle(rng)
        out = kcl_fs_logits(f, w, cache, labels, np.zeros((0, 5)), one_hot([], 3), self.hp())
        assert np.array_equal(out, tip_logits(f, w, cache, labels, 1.0, 1.0))

    def test_fs_scalar_oracle(self):
        out = kcl_fs_logits(F_PRIME, EYE, EYE, one_hot([0, 1], 2), D_ONE, L_D_ONE, self.hp())
        expected = [
            0.8 + math.exp(-0.2) + math.exp(-(1.0 - TOY_DOT)),
            0.6 + math.exp(-0.4),
        ]
        assert np.allclose(out, [expected], rtol=0, atol=1e-12)

    def test_zs_reduces_to_clip(self):
        rng = np.random.default_rng(16)
        f = normalize(rng.standard_normal((4, 5)))
        w = normalize(rng.standard_normal((3, 5)))
        empty = kcl_zs_logits(f, w, np.zeros((0, 5)), one_hot([], 3), self.hp())
        assert np.array_equal(empty, clip_logits(f, w))
        d = normalize(rng.standard_normal((2, 5)))
        lam0 = kcl_zs_logits(f, w, d, one_hot([0, 1], 3), self.hp(lam=0.0))
        assert np.array_equal(lam0, clip_logits(f, w))

    def test_zs_scalar_oracle(self):
        out = kcl_zs_logits(F_PRIME, EYE, D_ONE, L_D_ONE, self.hp())
        expected = [0.8 + math.exp(-(1.0 - TOY_DOT)), 0.6]
        assert np.allclose(out, [expected], rtol=0, atol=1e-12)

    def test_mismatched_d_labels(self):
        with pytest.raises(DimMismatch):
            kcl_zs_logits(F_PRIME, EYE, D_ONE, one_hot([0, 1], 2), self.hp())


class TestMaskedLogits:
    def test_mask_needs_a_modality(self):
        with pytest.raises(ValidationError):
            ModalityMask(use_text=False, use_visual=False)

    def test_text_only_is_clip(self):
        rng = np.random.default_rng(17)
        f, w, cache, labels = random_bundle(rng)
        d = normalize(rng.standard_normal((2, 5)))
        out = masked_logits(
            f, w, cache, labels, d, one_hot([0, 1], 3), HyperParams(),
            ModalityMask(use_text=True, use_visual=False),
        )
        assert np.array_equal(out, clip_logits(f, w))

    def test_both_is_full_formula_bitwise(self):
        rng = np.random.default_rng(18)
        f, w, cache, labels = random_bundle(rng)
        d = normalize(rng.standard_normal((2, 5)))
        l_d = one_hot([1, 2], 3)
        hp = HyperParams(alpha=2.0, beta=3.0, lam=0.5, mu=2.0)
        out = masked_logits(f, w, cache, labels, d, l_d, hp, ModalityMask())
        assert np.array_equal(out, kcl_fs_logits(f, w, cache, labels, d, l_d, hp))
        zs = masked_logits(f, w, None, None, d, l_d, hp, ModalityMask())
        assert np.array_equal(zs, kcl_zs_logits(f, w, d, l_d, hp))

    def test_visual_only_scalar_oracle(self):
        out = masked_logits(
            F_PRIME, EYE, EYE, one_hot([0, 1], 2), D_ONE, L_D_ONE, HyperParams(),
            ModalityMask(use_text=False, use_visual=True),
        )
        expected = [math.exp(-0.2) + math.exp(-(1.0 - TOY_DOT)), math.exp(-0.4)]
        assert np.allclose(out, [expected], rtol=0, atol=1e-12)


class TestLoopOracleEquivalence:
    def test_all_kernels_match_reference_loops(self):
        rng = np.random.default_rng(19)
        for _ in range(5):
            n = int(rng.integers(1, 64))
            c = int(rng.integers(2, 16))
            d = int(rng.integers(2, 32))
            m = int(rng.integers(1, 10))
            f = normalize(rng.standard_normal((n, d)))
            w = normalize(rng.standard_normal((c, d)))
            cache = normalize(rng.standard_normal((m, d)))
            labels = one_hot(rng.integers(0, c, size=m), c)
            beta = float(rng.uniform(0.5, 8.0))
            alpha = float(rng.uniform(0.0, 3.0))
            assert rel_close(clip_logits(f, w), loop_clip(f, w))
            assert rel_close(cache_affinity(f, cache, beta), loop_affinity(f, cache, beta))
            tip_ref = alpha * (loop_affinity(f, cache, beta) @ labels) + loop_clip(f, w)
            assert rel_close(tip_logits(f, w, cache, labels, alpha, beta), tip_ref)
            hp = HyperParams(alpha=alpha, beta=beta, lam=0.7, mu=2.5)
            d_set = normalize(rng.standard_normal((3, d)))
            l_d = one_hot(rng.integers(0, c, size=3), c)
            fs_ref = 0.7 * (loop_affinity(f, d_set, 2.5) @ l_d) + tip_ref
            assert rel_close(kcl_fs_logits(f, w, cache, labels, d_set, l_d, hp), fs_ref)
            zs_ref = 0.7 * (loop_affinity(f, d_set, 2.5) @ l_d) + loop_clip(f, w)
            assert rel_close(kcl_zs_logits(f, w, d_set, l_d, hp), zs_ref)

    def test_shape_contract(self):
        rng = np.random.default_rng(20)
        f, w, cache, labels = random_bundle(rng, n=9, c=3)
        assert clip_logits(f, w).shape == (9, 3)
        assert tip_logits(f, w, cache, labels, 1.0, 1.0).shape == (9, 3)
        d = np.zeros((0, 5))
        assert kcl_zs_logits(f, w, d, one_hot([], 3), HyperParams()).shape == (9, 3)
