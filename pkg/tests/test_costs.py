import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crowdseg.costs import (
    CostError,
    CostParams,
    break_even,
    cost_baseline,
    cost_manual_grading,
    cost_proposed,
    evaluate,
    load_cost_params,
)


class TestProposed:
    def test_no_spam_no_training(self):
        p = CostParams(a=123, s=0.0, a_t=0.0, a_mv=1.0)
        assert cost_proposed(p) == 123.0

    def test_fig8_style_params(self):
        p = CostParams(a=1000, s=0.3, a_t=10000, a_mv=1.0)
        # 10000 + 1000 * (1 + 3/7) = 80000/7
        assert cost_proposed(p) == pytest.approx(80000.0 / 7.0, abs=1e-6)

    def test_zero_requests_costs_training_only(self):
        p = CostParams(a=0, s=0.5, a_t=777, a_mv=3)
        assert cost_proposed(p) == 777.0

    def test_increasing_in_spam(self):
        costs = [
            cost_proposed(CostParams(a=100, s=s, a_t=0, a_mv=1))
            for s in (0.0, 0.1, 0.3, 0.6, 0.9)
        ]
        assert all(a < b for a, b in zip(costs, costs[1:]))


class TestBaseline:
    def test_large_aw_limit(self):
        p = CostParams(a=1000, a_mv=3, a_w=1e9, a_r=0)
        assert cost_baseline(p) == pytest.approx(3000.0, abs=1e-3)
        # the quality-control term itself vanishes
        assert cost_baseline(p) - 3000.0 == pytest.approx(3e-6, abs=1e-6)

    def test_fig8_style_params(self):
        p = CostParams(a=1000, a_mv=3, a_w=10, a_r=100)
        assert cost_baseline(p) == pytest.approx(3100 + 1000.0 / 3.0, abs=1e-6)

    def test_zero_requests(self):
        assert cost_baseline(CostParams(a=0, a_mv=3, a_w=10, a_r=100)) == 100.0


class TestManualGrading:
    def test_plain(self):
        assert cost_manual_grading(CostParams(a=500, s=0.0)) == 500.0

    def test_fig9_style_spam(self):
        p = CostParams(a=1000, s=0.249)
        assert cost_manual_grading(p) == pytest.approx(1000.0 / 0.751, abs=1e-6)

    def test_verification_adds_linearly(self):
        base = cost_manual_grading(CostParams(a=100, s=0.1))
        with_v = cost_manual_grading(CostParams(a=100, s=0.1, v=42))
        assert with_v - base == pytest.approx(42.0)


class TestBreakEven:
    def test_fig8_pairing(self):
        # proposed at lambda=1 (a_mv=1) vs baseline needing a_mv=3:
        # 10000 + (10/7) a <= (10/3) a + 100  ->  a >= 9900 / (10/3 - 10/7)
        p_proposed = CostParams(s=0.3, a_t=10000, a_mv=1.0)
        p_baseline = CostParams(a_mv=3.0, a_w=10, a_r=100)
        hand = int(np.ceil(9900.0 / (10.0 / 3.0 - 10.0 / 7.0)))
        assert hand == 5198
        a = break_even(p_proposed, ("proposed", "baseline"), p_baseline)
        assert a == 5198
        assert evaluate("proposed", p_proposed, 5198) <= evaluate(
            "baseline", p_baseline, 5198
        )
        assert evaluate("proposed", p_proposed, 5197) > evaluate(
            "baseline", p_baseline, 5197
        )

    def test_identical_params(self):
        p = CostParams(a_mv=2, a_w=5, s=0.0, a_t=0, a_r=0)
        assert break_even(p, ("proposed", "baseline")) == 0

    def test_proposed_never_worse(self):
        p = CostParams(a_t=0, s=0.0, a_mv=1.0, a_w=10, a_r=0)
        assert break_even(p, ("proposed", "baseline")) == 0

    def test_parallel_lines_none(self):
        # same slope, proposed has a strictly larger intercept
        p = CostParams(a_t=100, s=0.0, a_mv=1.0, a_w=1e18, a_r=0)
        assert break_even(p, ("proposed", "baseline")) is None

    def test_bracketing_property(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            p = CostParams(
                a_t=float(rng.integers(0, 20000)),
                s=float(rng.uniform(0, 0.6)),
                a_mv=float(rng.integers(1, 5)),
                a_w=float(rng.integers(2, 30)),
                a_r=float(rng.integers(0, 500)),
            )
            a_star = break_even(p, ("proposed", "baseline"))
            if a_star is None:
                continue
            assert evaluate("proposed", p, a_star) <= evaluate("baseline", p, a_star)
            if a_star > 0:
                assert evaluate("proposed", p, a_star - 1) > evaluate(
                    "baseline", p, a_star - 1
                )


class TestMonotonicity:
    @settings(max_examples=60, deadline=None)
    @given(
        s=st.floats(min_value=0.0, max_value=0.9),
        a_mv=st.integers(min_value=1, max_value=5),
        a_w=st.integers(min_value=2, max_value=50),
    )
    def test_affine_nondecreasing_in_a(self, s, a_mv, a_w):
        p = CostParams(s=s, a_mv=float(a_mv), a_w=float(a_w), a_t=10, a_r=10)
        for method in ("proposed", "baseline", "manual-grading"):
            values = [evaluate(method, p, a) for a in (0, 10, 500, 10_000)]
            assert all(b >= a for a, b in zip(values, values[1:]))
            # affine: second differences vanish
            d1 = values[1] - values[0]
            d2 = (values[2] - values[1]) / 49.0
            d3 = (values[3] - values[2]) / 950.0
            assert d1 * 0.1 == pytest.approx(d2 * 0.1, rel=1e-9, abs=1e-9)
            assert d2 == pytest.approx(d3, rel=1e-9, abs=1e-9)


class TestValidation:
    def test_invariants(self):
        with pytest.raises(CostError):
            CostParams(s=1.0)
        with pytest.raises(CostError):
            CostParams(a_w=1.0)
        with pytest.raises(CostError):
            CostParams(a=-1.0)

    def test_loader_warns_on_missing(self, caplog):
        import logging

        with caplog.at_level(logging.WARNING, logger="crowdseg.costs"):
            p = load_cost_params({"a": 10, "s": 0.1})
        assert p.a == 10.0
        assert "defaulted" in caplog.text

    def test_loader_rejects_unknown(self):
        with pytest.raises(CostError, match="unknown"):
            load_cost_params({"bogus": 1})
