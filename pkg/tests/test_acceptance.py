"""Acceptance suite: one test per criterion, one PASS line per criterion.

Run with ``pytest tests/test_acceptance.py -v -s``. The synthetic dataset,
its featurization, the grouped CV and the fusion harness are shared
module-scoped fixtures, so the whole suite stays within a desk-scale
runtime budget (a few minutes).
"""
import math

import numpy as np
import pytest

from crowdseg.clickstream import (
    classify_strokes,
    segment_strokes,
)
from crowdseg.costs import CostParams, break_even, evaluate
from crowdseg.dataset import checksum_tree, dataset_from_memory
from crowdseg.features import extract_features
from crowdseg.forest import ForestParams, TrainingSet, train
from crowdseg.fusion import confidence, confidence_weighted_mv, majority_vote, staple
from crowdseg.geometry import Mask, Polygon, dice, rasterize
from crowdseg.imaging import GrayImage, gaussian_gradient, smooth
from crowdseg.pipeline import (
    estimate_dataset,
    run_fusion_harness,
    summarize_fusion,
    training_set_from_dataset,
)
from crowdseg.selection import grouped_cv
from crowdseg.simulator import build_dataset

from oracles import (
    classify_strokes_linear,
    dice_bruteforce,
    rasterize_bruteforce,
    staple_em_reference,
)
from streamgen import ev, random_stream, stream_of

# ---------------------------------------------------------------------------
# pinned configuration of the synthetic acceptance dataset (A3/A4/A5)

A3_MIX = {
    "diligent": 0.40,
    "sloppy": 0.20,
    "spammer": 0.25,
    "bounding-box": 0.10,
    "inverted": 0.05,
}
A3_IMAGES = 100
A3_WORKERS = 20
A3_SIZE = 96
A3_DATASET_SEED = 20170101
A3_CV_SEED = 5
A3_FOREST = ForestParams(n_trees=100)
A4_TRAIN_SEED = 914
A4_EPSILON = 0.9
SIGMA = 1.0


def ok(criterion: str, detail: str) -> None:
    print(f"\n{criterion} PASS: {detail}")


@pytest.fixture(scope="module")
def a3_dataset():
    sim = build_dataset(A3_IMAGES, A3_WORKERS, A3_MIX, seed=A3_DATASET_SEED, size=A3_SIZE)
    return dataset_from_memory(sim)


@pytest.fixture(scope="module")
def a3_training_set(a3_dataset):
    return training_set_from_dataset(a3_dataset, SIGMA)


@pytest.fixture(scope="module")
def a3_cv(a3_training_set):
    return grouped_cv(a3_training_set, k=10, params=A3_FOREST, seed=A3_CV_SEED)


@pytest.fixture(scope="module")
def a4_estimates(a3_dataset):
    # the estimator is trained on a separately simulated campaign
    # (disjoint synthetic workers and images), then applied to the
    # acceptance dataset, mirroring the train-once / apply-to-unseen flow
    sim = build_dataset(50, 14, A3_MIX, seed=A4_TRAIN_SEED, size=A3_SIZE)
    train_set = training_set_from_dataset(dataset_from_memory(sim), SIGMA)
    forest = train(train_set, A3_FOREST, seed=1)
    return estimate_dataset(a3_dataset, forest, SIGMA)


@pytest.fixture(scope="module")
def a3_masks(a3_dataset):
    pools = {}
    for image_id in a3_dataset.image_ids():
        rows = a3_dataset.rows_for_image(image_id)
        pools[image_id] = [rasterize(r.polygon, A3_SIZE, A3_SIZE) for r in rows]
    return pools


class TestA1GeometryOracle:
    def test_a1(self):
        rng = np.random.default_rng(101)
        for _ in range(50):
            n = int(rng.integers(3, 11))
            w = int(rng.integers(8, 65))
            h = int(rng.integers(8, 65))
            verts = np.column_stack(
                [rng.uniform(-5, w + 5, size=n), rng.uniform(-5, h + 5, size=n)]
            )
            mask = rasterize(Polygon(verts), w, h)
            oracle = rasterize_bruteforce(verts, w, h)
            np.testing.assert_array_equal(mask.bits, oracle)  # zero tolerance
            other = rasterize(
                Polygon(verts + rng.uniform(-2, 2, size=(n, 2))), w, h
            )
            assert dice(mask, other) == dice_bruteforce(mask.bits, other.bits)
        ok("A1", "rasterize + dice match the brute-force oracle on 50 random polygons")


class TestA2ConfidenceWeighting:
    def test_a2_worked_example(self):
        m1 = Mask(np.array([[1, 1, 0, 1]], dtype=np.uint8))
        m2 = Mask(np.array([[0, 1, 1, 1]], dtype=np.uint8))
        m3 = Mask(np.array([[1, 1, 1, 0]], dtype=np.uint8))
        s_hats = [0.95, 0.92, 0.98]
        kappas = [confidence(s, 0.9) for s in s_hats]
        assert kappas == [
            pytest.approx(0.5, abs=1e-12),
            pytest.approx(0.2, abs=1e-12),
            pytest.approx(0.8, abs=1e-12),
        ]
        fused = confidence_weighted_mv([m1, m2, m3], s_hats, 0.9)
        # accumulations 1.3 / 1.5 / 1.0 / 0.7 against psi = 1.5/3*2 = 1.0
        np.testing.assert_array_equal(fused.bits, [[1, 1, 1, 0]])
        ok("A2a", "hand-derived kappa=(0.5,0.2,0.8), psi=1.0 case reproduces bit-exactly")

    def test_a2_equal_kappa_equivalence(self):
        rng = np.random.default_rng(102)
        for trial in range(10_000):
            bits = rng.integers(0, 2, size=(3, 4, 4)).astype(np.uint8)
            masks = [Mask(b) for b in bits]
            s = float(rng.uniform(0.9, 1.0))
            fused = confidence_weighted_mv(masks, [s, s, s], 0.9)
            np.testing.assert_array_equal(fused.bits, majority_vote(masks).bits)
        ok("A2b", "equal-confidence fusion == majority vote on 10,000 sampled 4x4 triples")


class TestA3RegressionPower:
    def test_a3(self, a3_training_set, a3_cv):
        mean_r2 = a3_cv.mean_r2()
        assert mean_r2 >= 0.5
        y = a3_training_set.targets
        pos = [p for i, p in a3_cv.oof_predictions.items() if y[i] > 0.8]
        neg = [p for i, p in a3_cv.oof_predictions.items() if y[i] < 0.5]
        assert len(pos) >= 20 and len(neg) >= 20
        wins = sum(
            1.0 if p > n else (0.5 if p == n else 0.0) for p in pos for n in neg
        )
        auc = wins / (len(pos) * len(neg))
        assert auc >= 0.9
        ok(
            "A3",
            f"grouped 10-fold CV mean R^2 = {mean_r2:.3f} (>= 0.5), "
            f"ranking AUC = {auc:.3f} (>= 0.9)",
        )


class TestA4FusionSuperiority:
    def test_a4(self, a3_dataset, a4_estimates):
        outcomes = run_fusion_harness(
            a3_dataset,
            a4_estimates,
            lambdas=[1, 3, 5],
            epsilon_t=A4_EPSILON,
            seed=11,
            repeats=2,
        )
        med = {
            (s["method"], s["lam"]): s["median_dsc"] for s in summarize_fusion(outcomes)
        }
        for lam in (1, 3, 5):
            assert med[("cw-mv", lam)] >= med[("mv", lam)], f"cw-mv < mv at lambda={lam}"
            assert med[("staple-qc", lam)] >= med[("staple", lam)], (
                f"staple-qc < staple at lambda={lam}"
            )
        margin = med[("cw-mv", 3)] - med[("mv", 3)]
        assert margin >= 0.02
        ok(
            "A4",
            "median DSC cw-mv >= mv and staple-qc >= staple at lambda in {1,3,5}; "
            f"margin at lambda=3: {margin:.3f} (>= 0.02)",
        )


class TestA5Staple:
    def test_a5_unanimous_identity(self):
        rng = np.random.default_rng(105)
        m = Mask((rng.random((12, 12)) < 0.4).astype(np.uint8))
        res = staple([m, m, m, m])
        np.testing.assert_array_equal(res.mask.bits, m.bits)
        ok("A5a", "unanimous-input identity holds exactly")

    def test_a5_convergence_on_all_pools(self, a3_masks):
        worst = 0
        for image_id, pool in a3_masks.items():
            res = staple(pool, tol=1e-6, max_iter=100)
            assert res.converged, f"pool {image_id} did not converge"
            worst = max(worst, res.iterations)
        ok("A5b", f"EM converged on all {len(a3_masks)} pools (max {worst} iterations)")

    def test_a5_reference_em_agreement(self):
        rng = np.random.default_rng(106)
        base = Mask((rng.random((8, 8)) < 0.45).astype(np.uint8))
        noisy = Mask((base.bits ^ (rng.random((8, 8)) < 0.15)).astype(np.uint8))
        empty = Mask(np.zeros((8, 8), dtype=np.uint8))
        pool = [base, base, noisy, empty]
        res = staple(pool, tol=1e-7, max_iter=200)
        ref_mask, ref_p, ref_q, _ = staple_em_reference(
            [m.bits for m in pool], tol=1e-7, max_iter=200
        )
        np.testing.assert_array_equal(res.mask.bits, ref_mask)
        np.testing.assert_allclose(res.sensitivity, ref_p, atol=1e-6)
        np.testing.assert_allclose(res.specificity, ref_q, atol=1e-6)
        ok("A5c", "8x8 dissent case matches the independent EM oracle (pixels exact, params 1e-6)")


class TestA6GradientCorrectness:
    def test_a6_ramp(self):
        img = GrayImage(np.tile(np.arange(40, dtype=float), (40, 1)))
        f = gaussian_gradient(img, SIGMA)
        m = 5
        err_x = np.max(np.abs(f.gx[m:-m, m:-m] - 1.0))
        err_y = np.max(np.abs(f.gy[m:-m, m:-m]))
        assert err_x < 1e-3 and err_y < 1e-3
        ok("A6a", f"linear-ramp gradient error {max(err_x, err_y):.2e} (< 1e-3)")

    def test_a6_finite_difference(self):
        rng = np.random.default_rng(107)
        img = GrayImage(rng.uniform(0, 255, size=(32, 32)))
        f = gaussian_gradient(img, SIGMA)
        s = smooth(img, SIGMA)
        fd_x = (s[:, 2:] - s[:, :-2]) / 2.0
        fd_y = (s[2:, :] - s[:-2, :]) / 2.0
        err = max(
            float(np.max(np.abs(f.gx[:, 1:-1] - fd_x))),
            float(np.max(np.abs(f.gy[1:-1, :] - fd_y))),
        )
        assert err < 1e-3
        ok("A6b", f"finite-difference consistency {err:.2e} (< 1e-3, interior)")

    def test_a6_circle_over_radial_gradient(self):
        size = 96
        yy, xx = np.mgrid[0:size, 0:size]
        centre = size / 2.0
        cone = np.clip(255.0 - 4.0 * np.hypot(xx + 0.5 - centre, yy + 0.5 - centre), 0, 255)
        grad = gaussian_gradient(GrayImage(cone), SIGMA)
        ang = np.linspace(0, 2 * math.pi, 72, endpoint=False)
        circle = Polygon(
            np.column_stack([centre + 25 * np.cos(ang), centre + 25 * np.sin(ang)])
        )
        events = [ev(0, *circle.vertices[0], "mouse-down")]
        t = 0
        for v in circle.vertices[1:]:
            t += 12
            events.append(ev(t, v[0], v[1]))
        events.append(ev(t + 12, *circle.vertices[-1], "mouse-up"))
        fv = extract_features(stream_of(events, size=size), circle, grad)
        mean_angle = fv["normal_gradient_angle_mean"]
        assert mean_angle < 5.0
        ok("A6c", f"circle-over-radial-gradient mean vertex-normal angle {mean_angle:.2f} deg (< 5)")


class TestA7CostModel:
    def test_a7_hand_values(self):
        proposed = evaluate(
            "proposed", CostParams(s=0.3, a_t=10000, a_mv=1.0), 1000
        )
        assert proposed == pytest.approx(80000.0 / 7.0, abs=1e-6)  # 11428.57...
        baseline = evaluate("baseline", CostParams(a_mv=3, a_w=10, a_r=100), 1000)
        assert baseline == pytest.approx(3100.0 + 1000.0 / 3.0, abs=1e-6)  # 3433.33...
        manual = evaluate("manual-grading", CostParams(s=0.249), 1000)
        assert manual == pytest.approx(1000.0 / 0.751, abs=1e-6)  # 1331.56...
        ok("A7a", "hand-derived cost values (11428.6, 3433.33, 1331.56) reproduce to 1e-6")

    def test_a7_break_even(self):
        a_star = break_even(
            CostParams(s=0.3, a_t=10000, a_mv=1.0),
            ("proposed", "baseline"),
            CostParams(a_mv=3.0, a_w=10, a_r=100),
        )
        assert a_star == 5198
        ok("A7b", "break-even a* = 5198 for the lambda=1 vs a_mv=3 pairing")

    def test_a7_monotonicity_grid(self):
        for s in (0.0, 0.2, 0.4, 0.6):
            for a_mv in (1.0, 2.0, 3.0):
                for a_w in (2.0, 5.0, 20.0):
                    p = CostParams(s=s, a_mv=a_mv, a_w=a_w, a_t=100, a_r=50)
                    for method in ("proposed", "baseline", "manual-grading"):
                        values = [evaluate(method, p, a) for a in (0, 1, 10, 1000)]
                        assert all(b >= a for a, b in zip(values, values[1:]))
        ok("A7c", "all three cost functions non-decreasing in a over the parameter grid")


class TestA8Determinism:
    def test_a8(self, tmp_path):
        from crowdseg.cli import main

        outputs = []
        for name in ("run1", "run2"):
            root = tmp_path / name
            ds = root / "ds"
            args_sets = [
                ["simulate", "--images", "4", "--workers", "6", "--mix",
                 "diligent=0.5,sloppy=0.2,spammer=0.3", "--seed", "21",
                 "--size", "64", "--out", str(ds)],
                ["extract", "--dataset", str(ds), "--out", str(root / "features.tsv")],
                ["train", "--features", str(root / "features.tsv"), "--trees", "15",
                 "--seed", "2", "--out", str(root / "model.tsv")],
                ["estimate", "--model", str(root / "model.tsv"), "--features",
                 str(root / "features.tsv"), "--out", str(root / "est.tsv")],
                ["fuse", "--dataset", str(ds), "--estimates", str(root / "est.tsv"),
                 "--method", "cw-mv", "--lambda", "3", "--seed", "4",
                 "--out", str(root / "fusion.tsv")],
            ]
            for args in args_sets:
                assert main(args) == 0
            outputs.append(checksum_tree(root))
        assert outputs[0] == outputs[1]
        ok("A8", "simulate->extract->train->estimate->fuse rerun is byte-identical")


class TestA9Algorithm1:
    def test_a9_cases(self):
        first = stream_of(
            [ev(0, 5, 5, "mouse-down"), ev(1, 6, 6), ev(2, 7, 7, "mouse-up")]
        )
        draws, corrections = classify_strokes(segment_strokes(first), first)
        assert len(draws) == 1 and not corrections  # case 3: new contour

        chained = stream_of(
            [
                ev(0, 0, 0, "mouse-down"), ev(1, 1, 1), ev(2, 2, 2, "mouse-up"),
                ev(3, 2, 2, "mouse-down"), ev(4, 3, 3), ev(5, 4, 4, "mouse-up"),
            ]
        )
        draws, corrections = classify_strokes(segment_strokes(chained), chained)
        assert len(draws) == 2 and not corrections  # case 1: continue drawing

        grab = stream_of(
            [
                ev(0, 0, 0, "mouse-down"), ev(1, 1, 1), ev(2, 2, 2, "mouse-up"),
                ev(3, 2, 2, "mouse-down"), ev(4, 3, 3), ev(5, 4, 4, "mouse-up"),
                ev(6, 1, 1, "mouse-down"), ev(7, 1.5, 1.5), ev(8, 1.6, 1.6, "mouse-up"),
            ]
        )
        draws, corrections = classify_strokes(segment_strokes(grab), grab)
        assert len(draws) == 2 and len(corrections) == 1  # case 2: correction
        ok("A9a", "the three draw/correction classification cases hold")

    def test_a9_kdtree_equivalence(self):
        rng = np.random.default_rng(109)
        for _ in range(1000):
            s = random_stream(rng)
            strokes = segment_strokes(s)
            draws, corrections = classify_strokes(strokes, s)
            odraws, ocorr = classify_strokes_linear(strokes, s)
            assert [d.down.t for d in draws] == [d.down.t for d in odraws]
            assert [c.down.t for c in corrections] == [c.down.t for c in ocorr]
        ok("A9b", "kd-tree classification equals linear scan on 1,000 random streams")
