import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crowdseg.fusion import (
    FusionConfig,
    FusionError,
    QualityEstimate,
    confidence,
    confidence_weighted_mv,
    filter_by_threshold,
    majority_mu,
    majority_vote,
    staple,
    staple_qc,
)
from crowdseg.geometry import Mask

from oracles import staple_em_reference


def mask_of(*rows):
    return Mask(np.array(rows, dtype=np.uint8))


def random_mask(rng, h=8, w=8, p=0.5):
    return Mask((rng.random((h, w)) < p).astype(np.uint8))


class TestConfidence:
    def test_endpoints(self):
        assert confidence(0.9, 0.9) == 0.0
        assert confidence(1.0, 0.9) == 1.0

    def test_strictly_increasing(self):
        values = [confidence(s, 0.9) for s in (0.9, 0.92, 0.95, 0.99, 1.0)]
        assert all(a < b for a, b in zip(values, values[1:]))

    def test_below_threshold_rejected(self):
        with pytest.raises(FusionError):
            confidence(0.89, 0.9)

    def test_quality_estimate_invariants(self):
        QualityEstimate(0.95, kappa=0.5)
        with pytest.raises(FusionError):
            QualityEstimate(1.2)
        with pytest.raises(FusionError):
            QualityEstimate(0.95, kappa=1.5)


class TestFilter:
    def test_boundary_inclusive(self):
        m = mask_of([1])
        kept, s, r = filter_by_threshold([m], [0.9], 0.9)
        assert len(kept) == 1 and r == 0
        assert confidence(s[0], 0.9) == 0.0

    def test_all_below(self):
        masks = [mask_of([1]), mask_of([0])]
        kept, _, r = filter_by_threshold(masks, [0.1, 0.2], 0.9)
        assert kept == [] and r == 2

    def test_mixed(self):
        masks = [mask_of([1]), mask_of([1]), mask_of([1])]
        kept, s, r = filter_by_threshold(masks, [0.95, 0.85, 0.91], 0.9)
        assert len(kept) == 2 and r == 1
        assert s == [0.95, 0.91]


class TestConfidenceWeightedMV:
    def test_worked_example(self):
        # kappas (0.5, 0.2, 0.8); pixels: A in {1,3}, B in all, C in {2,3}, D in {1,2}
        m1 = mask_of([1, 1, 0, 1])
        m2 = mask_of([0, 1, 1, 1])
        m3 = mask_of([1, 1, 1, 0])
        s_hats = [0.95, 0.92, 0.98]
        kappas = [confidence(s, 0.9) for s in s_hats]
        np.testing.assert_allclose(kappas, [0.5, 0.2, 0.8], atol=1e-12)
        # accumulated confidences: A=1.3, B=1.5 (max), C=1.0, D=0.7; psi = 1.5/3*2 = 1.0
        fused = confidence_weighted_mv([m1, m2, m3], s_hats, 0.9)
        np.testing.assert_array_equal(fused.bits, [[1, 1, 1, 0]])

    def test_single_mask_identity(self):
        m = mask_of([1, 0, 1])
        fused = confidence_weighted_mv([m], [0.9], 0.9)  # kappa would be 0
        np.testing.assert_array_equal(fused.bits, m.bits)

    def test_identical_masks(self):
        m = mask_of([1, 0], [0, 1])
        fused = confidence_weighted_mv([m, m, m], [0.95, 0.92, 0.99], 0.9)
        np.testing.assert_array_equal(fused.bits, m.bits)

    def test_all_zero_confidence_empty(self):
        m1 = mask_of([1, 0])
        m2 = mask_of([0, 1])
        fused = confidence_weighted_mv([m1, m2], [0.9, 0.9], 0.9)
        assert fused.area() == 0

    @settings(max_examples=150, deadline=None)
    @given(
        st.integers(min_value=0, max_value=2**16 - 1),
        st.integers(min_value=0, max_value=2**16 - 1),
        st.integers(min_value=0, max_value=2**16 - 1),
        st.floats(min_value=0.901, max_value=1.0),
    )
    def test_equal_confidence_reduces_to_majority_vote(self, a, b, c, s):
        masks = [
            Mask(np.array([int(ch) for ch in f"{bits:016b}"], dtype=np.uint8).reshape(4, 4))
            for bits in (a, b, c)
        ]
        fused = confidence_weighted_mv(masks, [s, s, s], 0.9)
        np.testing.assert_array_equal(fused.bits, majority_vote(masks).bits)

    def test_permutation_invariance(self):
        rng = np.random.default_rng(1)
        masks = [random_mask(rng) for _ in range(4)]
        s_hats = [0.91, 0.93, 0.97, 0.99]
        base = confidence_weighted_mv(masks, s_hats, 0.9)
        order = [2, 0, 3, 1]
        permuted = confidence_weighted_mv(
            [masks[i] for i in order], [s_hats[i] for i in order], 0.9
        )
        np.testing.assert_array_equal(base.bits, permuted.bits)

    def test_bounded_by_union_and_intersection(self):
        rng = np.random.default_rng(2)
        for _ in range(25):
            masks = [random_mask(rng) for _ in range(5)]
            s_hats = rng.uniform(0.905, 1.0, size=5).tolist()
            fused = confidence_weighted_mv(masks, s_hats, 0.9)
            union = np.bitwise_or.reduce([m.bits for m in masks])
            inter = np.bitwise_and.reduce([m.bits for m in masks])
            assert not np.any(fused.bits & ~union)
            assert not np.any(inter & ~fused.bits)

    def test_empty_input_rejected(self):
        with pytest.raises(FusionError):
            confidence_weighted_mv([], [], 0.9)


class TestMajorityVote:
    def test_two_of_three(self):
        m1 = mask_of([1])
        m2 = mask_of([1])
        m3 = mask_of([0])
        assert majority_vote([m1, m2, m3]).bits[0, 0] == 1

    def test_two_of_four_not_majority(self):
        assert majority_mu(4) == 3
        masks = [mask_of([1]), mask_of([1]), mask_of([0]), mask_of([0])]
        assert majority_vote(masks).bits[0, 0] == 0

    def test_matches_counting_oracle(self):
        rng = np.random.default_rng(3)
        for lam in (1, 2, 3, 4, 5):
            masks = [random_mask(rng) for _ in range(lam)]
            fused = majority_vote(masks)
            counts = sum(m.bits.astype(int) for m in masks)
            expected = (counts > lam / 2).astype(np.uint8)
            np.testing.assert_array_equal(fused.bits, expected)

    def test_permutation_invariance(self):
        rng = np.random.default_rng(4)
        masks = [random_mask(rng) for _ in range(5)]
        base = majority_vote(masks)
        np.testing.assert_array_equal(base.bits, majority_vote(masks[::-1]).bits)

    def test_empty_rejected(self):
        with pytest.raises(FusionError):
            majority_vote([])


class TestStaple:
    def test_unanimous_identity(self):
        rng = np.random.default_rng(5)
        m = random_mask(rng, p=0.4)
        res = staple([m, m, m])
        np.testing.assert_array_equal(res.mask.bits, m.bits)
        assert res.converged
        assert np.all(res.sensitivity > 0.999)
        assert np.all(res.specificity > 0.999)

    def test_single_dissenter(self):
        rng = np.random.default_rng(6)
        m = random_mask(rng, p=0.4)
        empty = Mask(np.zeros_like(m.bits))
        res = staple([m, m, m, m, empty])
        np.testing.assert_array_equal(res.mask.bits, m.bits)

    def test_matches_reference_em(self):
        rng = np.random.default_rng(7)
        base = random_mask(rng, p=0.45)
        noisy = Mask((base.bits ^ (rng.random(base.bits.shape) < 0.1)).astype(np.uint8))
        empty = Mask(np.zeros_like(base.bits))
        pool = [base, base, noisy, empty]
        res = staple(pool, tol=1e-7, max_iter=200)
        ref_mask, ref_p, ref_q, _ = staple_em_reference(
            [m.bits for m in pool], tol=1e-7, max_iter=200
        )
        np.testing.assert_array_equal(res.mask.bits, ref_mask)
        np.testing.assert_allclose(res.sensitivity, ref_p, atol=1e-6)
        np.testing.assert_allclose(res.specificity, ref_q, atol=1e-6)

    def test_rater_order_invariance(self):
        rng = np.random.default_rng(8)
        pool = [random_mask(rng, p=0.4) for _ in range(4)]
        a = staple(pool)
        b = staple(pool[::-1])
        np.testing.assert_array_equal(a.mask.bits, b.mask.bits)
        np.testing.assert_allclose(a.sensitivity, b.sensitivity[::-1], atol=1e-12)

    def test_all_empty_flagged(self):
        empty = Mask(np.zeros((4, 4), dtype=np.uint8))
        res = staple([empty, empty])
        assert res.mask.area() == 0
        assert res.iterations == 0  # degenerate short-circuit

    def test_needs_two_masks(self):
        with pytest.raises(FusionError):
            staple([mask_of([1])])


class TestStapleQC:
    def test_filters_spam(self):
        rng = np.random.default_rng(9)
        good = random_mask(rng, p=0.4)
        spam1 = random_mask(rng, p=0.5)
        spam2 = Mask(np.ones_like(good.bits))
        pool = [good, good, good, spam1, spam2]
        s_hats = [0.95, 0.93, 0.96, 0.3, 0.1]
        res = staple_qc(pool, s_hats, 0.9)
        clean = staple([good, good, good])
        np.testing.assert_array_equal(res.mask.bits, clean.mask.bits)

    def test_all_accepted_is_native(self):
        rng = np.random.default_rng(10)
        pool = [random_mask(rng, p=0.4) for _ in range(3)]
        res = staple_qc(pool, [0.95, 0.96, 0.97], 0.9)
        native = staple(pool)
        np.testing.assert_array_equal(res.mask.bits, native.mask.bits)

    def test_single_survivor_returned_as_is(self):
        rng = np.random.default_rng(11)
        good = random_mask(rng, p=0.4)
        res = staple_qc([good, random_mask(rng)], [0.95, 0.2], 0.9)
        np.testing.assert_array_equal(res.mask.bits, good.bits)

    def test_nothing_survives(self):
        with pytest.raises(FusionError):
            staple_qc([mask_of([1]), mask_of([0])], [0.5, 0.5], 0.9)


class TestFusionConfig:
    def test_validation(self):
        FusionConfig(epsilon_t=0.9, lam=3, method="staple-qc")
        with pytest.raises(FusionError):
            FusionConfig(epsilon_t=1.0)
        with pytest.raises(FusionError):
            FusionConfig(lam=0)
        with pytest.raises(FusionError):
            FusionConfig(method="average")
