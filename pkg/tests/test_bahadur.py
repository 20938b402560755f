import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from powerdiv import (
    BahadurContext,
    CapacityError,
    DomainError,
    IndeterminateFormError,
    SequenceForm,
    TailUnderflowError,
    bahadur_efficiency,
    bahadur_function,
    check_rate_conditions,
    efficiency_ratio_closed_form,
    empirical_slope,
    generating_sequence,
    matching_sample_size,
    ratio_limit_probe,
    sanov_sandwich,
    uniform,
)
from powerdiv.alternatives import delta_half_support
from powerdiv.tails import TailEstimate, exact_tail


def tail_with_value(value, n=50, k=2, alpha=1.0):
    return TailEstimate(value=value, method="exact", ci_low=value, ci_high=value, reps=0,
                        delta=0.2, n=n, k=k, alpha=alpha,
                        log_value=math.log(value) if value > 0 else -math.inf)


def renyi_value(alpha, delta):
    """Renyi counterpart of a power divergence value, from its definition."""
    return math.log(1 + alpha * (alpha - 1) * delta) / (alpha - 1)


class TestBahadurFunction:
    def test_order_one(self):
        assert bahadur_function(1.0, 0.7) == 0.7

    def test_order_two(self):
        assert bahadur_function(2.0, 2.0) == pytest.approx(2.0, rel=1e-15)

    def test_half_support_half_order(self):
        delta = (2**-0.5 - 1) / -0.25
        assert bahadur_function(0.5, delta) == pytest.approx(math.log(2), rel=1e-14)

    @pytest.mark.parametrize("alpha", [0.1, 0.3, 0.5, 0.7, 0.9, 1.0])
    def test_half_support_identity(self, alpha):
        assert bahadur_function(alpha, delta_half_support(alpha)) == pytest.approx(
            math.log(2), abs=1e-12)

    @pytest.mark.parametrize("alpha", [1.5, 2.0, 3.0])
    def test_half_support_above_one(self, alpha):
        g = bahadur_function(alpha, delta_half_support(alpha))
        assert g == pytest.approx((2 ** (alpha - 1) - 1) ** (1 / alpha), rel=1e-14)

    @pytest.mark.parametrize("delta", [0.1, 0.7, 2.0])
    def test_continuous_from_below_one(self, delta):
        assert abs(bahadur_function(1 - 1e-7, delta) - delta) < 1e-5

    @pytest.mark.xfail(strict=True, reason="(alpha(alpha-1)delta)^(1/alpha) tends to 0, "
                       "not delta, as alpha decreases to 1")
    @pytest.mark.parametrize("delta", [0.1, 0.7, 2.0])
    def test_continuous_from_above_one(self, delta):
        assert abs(bahadur_function(1 + 1e-7, delta) - delta) < 1e-5

    @given(st.sampled_from([0.2, 0.5, 0.9, 1.0, 1.5, 3.0]), st.floats(0.01, 1.5),
           st.floats(0.01, 1.5))
    def test_increasing_in_delta(self, alpha, d1, d2):
        if d1 == d2:
            return
        lo, hi = sorted((d1, d2))
        assert bahadur_function(alpha, lo) < bahadur_function(alpha, hi)

    def test_domain(self):
        with pytest.raises(DomainError):
            bahadur_function(0.0, 1.0)
        with pytest.raises(DomainError):
            bahadur_function(0.5, 5.0)  # 1 + alpha(alpha-1) delta < 0


class TestGeneratingSequence:
    def test_constant_below_one(self):
        assert generating_sequence(0.3, 100, 7) == 1.0
        assert generating_sequence(1.0, 100, 7) == 1.0

    def test_order_two(self):
        assert generating_sequence(2.0, 100, 8) == pytest.approx(8**0.5 / math.log(8))

    def test_prefactor(self):
        assert generating_sequence(2.0, 100, 8, alpha_prefactor=True) == pytest.approx(
            2 * 8**0.5 / math.log(8))

    def test_jump_at_one(self):
        # just above 1 the sequence is near 1/ln k, far from the constant 1
        assert generating_sequence(1 + 1e-6, 100, 50) == pytest.approx(1 / math.log(50), rel=1e-4)

    def test_needs_two_cells_above_one(self):
        with pytest.raises(DomainError):
            generating_sequence(2.0, 100, 1)


class TestEmpiricalSlope:
    def test_certain_tail(self):
        ctx = BahadurContext(alpha=1.0, delta=0.2, n=50, k=2)
        assert empirical_slope(ctx, tail_with_value(1.0)) == 0.0

    def test_exponential_tail(self):
        ctx = BahadurContext(alpha=1.0, delta=0.2, n=50, k=2)
        assert empirical_slope(ctx, tail_with_value(math.exp(-50 * 0.2))) == pytest.approx(0.2)

    def test_underflow(self):
        ctx = BahadurContext(alpha=1.0, delta=0.2, n=50, k=2)
        with pytest.raises(TailUnderflowError):
            empirical_slope(ctx, tail_with_value(0.0))

    def test_exact_tail_slope_in_range(self):
        q = uniform(2)
        slopes = []
        for n in (20, 40, 60):
            ctx = BahadurContext(alpha=1.0, delta=0.2, n=n, k=2)
            slopes.append(empirical_slope(ctx, exact_tail(q, None, 1.0, n, 0.2)))
        assert all(0 < s <= math.log(2) for s in slopes)
        # moves toward the large-deviation rate 0.2 from above
        assert abs(slopes[-1] - 0.2) < abs(slopes[0] - 0.2)

    def test_context_validation(self):
        with pytest.raises(DomainError):
            BahadurContext(alpha=1.0, delta=0.2, n=5, k=6)
        with pytest.raises(DomainError):
            BahadurContext(alpha=1.0, delta=0.0, n=5, k=2)


class TestSanovSandwich:
    def test_contains_exact_slope(self):
        q = uniform(2)
        n = 50
        lower, upper = sanov_sandwich(q, 1.0, 0.1, n)
        slope = -exact_tail(q, None, 1.0, n, 0.1).log_value / n
        assert lower - 1e-9 <= slope <= upper + math.log(n + 1) / n

    def test_small_threshold(self):
        lower, upper = sanov_sandwich(uniform(3), 1.0, 1e-8, 30)
        assert upper == pytest.approx(1e-8, rel=1e-6)

    def test_point_mass_threshold(self):
        assert sanov_sandwich(uniform(2), 1.0, math.log(2), 10)[1] == pytest.approx(math.log(2))

    def test_power_threshold_is_mapped(self):
        # at alpha = 1/2 the constraint is on the Renyi value matching delta
        _, upper = sanov_sandwich(uniform(2), 0.5, 0.1, 40)
        assert upper >= renyi_value(0.5, 0.1) - 1e-9


class TestEfficiency:
    def test_half_support_example(self):
        value = bahadur_efficiency(0.5, delta_half_support(0.5), 1.0, math.log(2), 1.0)
        assert value == pytest.approx(1.0, abs=1e-12)

    def test_infinite_sequence_ratio(self):
        assert bahadur_efficiency(0.5, 0.3, 2.0, 0.3, math.inf) == math.inf

    def test_identical(self):
        assert bahadur_efficiency(1.3, 0.4, 1.3, 0.4, 1.0) == 1.0

    def test_zero_sequence_ratio(self):
        assert bahadur_efficiency(2.0, 0.3, 0.5, 0.3, 0.0) == 0.0

    def test_indeterminate(self, monkeypatch):
        import powerdiv.bahadur as mod

        monkeypatch.setattr(mod, "bahadur_function", lambda a, d: 0.0 if a < 1 else 1.0)
        with pytest.raises(IndeterminateFormError):
            mod.bahadur_efficiency(0.5, 0.1, 2.0, 0.1, math.inf)

    def test_negative_sequence_ratio(self):
        with pytest.raises(DomainError):
            bahadur_efficiency(1.0, 0.1, 1.0, 0.1, -1.0)

    @pytest.mark.parametrize("a1, a2", [(0.1, 0.5), (0.3, 0.9), (0.5, 1.0), (0.2, 1.0)])
    def test_closed_form_on_half_support(self, a1, a2):
        value = efficiency_ratio_closed_form(a1, delta_half_support(a1), a2, delta_half_support(a2))
        assert value == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("a1, a2, d1, d2", [(0.2, 0.6, 0.3, 0.5), (0.4, 1.0, 0.8, 0.2)])
    def test_closed_form_matches_function_ratio(self, a1, a2, d1, d2):
        ratio = bahadur_function(a1, d1) / bahadur_function(a2, d2)
        assert efficiency_ratio_closed_form(a1, d1, a2, d2) == pytest.approx(ratio, rel=1e-12)

    @pytest.mark.parametrize("a1, a2", [(0.3, 0.8), (0.5, 1.0)])
    def test_closed_form_small_delta(self, a1, a2):
        # ln(1 + a(a-1)d)/(a-1) = a d + O(d^2), so equal small thresholds give a1/a2
        assert efficiency_ratio_closed_form(a1, 1e-6, a2, 1e-6) == pytest.approx(a1 / a2, rel=1e-5)

    def test_closed_form_ordering(self):
        with pytest.raises(DomainError):
            efficiency_ratio_closed_form(0.8, 0.1, 0.3, 0.1)
        with pytest.raises(DomainError):
            efficiency_ratio_closed_form(0.5, 0.1, 2.0, 0.1)


def power_rule(n):
    return int(n**0.3 + 1e-9)


class TestMatchingSampleSize:
    @pytest.mark.parametrize("alpha", [0.5, 1.0, 2.0])
    def test_identical_statistics(self, alpha):
        assert matching_sample_size(alpha, 0.4, alpha, 0.4, 10**4, power_rule) == 10**4

    def test_linear_below_one(self):
        g1 = bahadur_function(0.3, 0.5)
        g2 = bahadur_function(0.8, 0.2)
        m = matching_sample_size(0.3, 0.5, 0.8, 0.2, 1000, power_rule)
        assert m == math.ceil(g1 / g2 * 1000)

    def test_order_one_against_two_on_half_support(self):
        n = 10**6
        m = matching_sample_size(1.0, math.log(2), 2.0, 0.5, n, power_rule)
        target = math.log(2) * n

        def scaled(size):
            k = power_rule(size)
            return size * math.log(k) / math.sqrt(k)

        assert scaled(m) >= target > scaled(m - 1)
        assert m == 1359842

    def test_capacity(self):
        with pytest.raises(CapacityError):
            matching_sample_size(1.0, 10.0, 1.0, 1e-6, 10**12, power_rule, cap=10**13)


class TestRatioProbe:
    def test_plain_power_forms(self):
        s1 = SequenceForm("power_of_n_plain", b=0.3)
        s2 = SequenceForm("power_of_n_plain", b=0.6)
        grid = [10**e for e in range(3, 11)]
        ratios = ratio_limit_probe(s1, s2, (0.5, 0.5), grid)
        # m_n = n^(0.7/0.4) and c2(m_n)/c1(n) = n^((0.6-0.3)/0.4)
        np.testing.assert_allclose(ratios, np.asarray(grid, float) ** 0.75, rtol=1e-9)

    def test_same_sequence_is_constant(self):
        s = SequenceForm("power_of_n_over_ln", b=0.4, alpha=2.0)
        ratios = ratio_limit_probe(s, s, (0.3, 0.3), [10**3, 10**5, 10**8])
        np.testing.assert_allclose(ratios, 1.0, rtol=1e-9)

    @pytest.mark.parametrize("form, k_rule", [
        ("power_of_n_plain", None),
        ("power_of_n_over_ln", None),
        ("power_of_k_over_ln", lambda n: n**0.5),
    ])
    def test_grows_on_grid_tail(self, form, k_rule):
        s1 = SequenceForm(form, b=0.3, alpha=1.5)
        s2 = SequenceForm(form, b=0.6, alpha=2.5)
        grid = [10**e for e in range(3, 13)]
        ratios = ratio_limit_probe(s1, s2, (0.4, 0.4), grid, k_rule=k_rule)
        assert np.all(np.diff(ratios[-5:]) > 0)

    def test_integer_mode_agrees(self):
        s1 = SequenceForm("power_of_n_plain", b=0.3)
        s2 = SequenceForm("power_of_n_plain", b=0.6)
        real = ratio_limit_probe(s1, s2, (0.5, 0.5), [10**3, 10**4])
        whole = ratio_limit_probe(s1, s2, (0.5, 0.5), [10**3, 10**4], integer=True)
        np.testing.assert_allclose(real, whole, rtol=1e-4)

    def test_empty_grid(self):
        s = SequenceForm("constant_one")
        assert ratio_limit_probe(s, s, (0.1, 0.1), []).size == 0

    def test_spec_validation(self):
        with pytest.raises(DomainError):
            SequenceForm("power_of_n_plain", b=1.2)
        with pytest.raises(DomainError):
            SequenceForm("quadratic", b=0.5)
        with pytest.raises(DomainError):
            SequenceForm("power_of_n_plain", b=0.5, d=0.0)


class TestRateConditions:
    def test_all_satisfied(self):
        rep = check_rate_conditions(10**6, 10, 2.0)
        applicable = {k: v for k, v in rep.flags.items() if v is not None}
        assert all(applicable.values())
        assert rep.flags["n_over_k_ln_k"] is None

    def test_cells_equal_to_sample_size(self):
        rep = check_rate_conditions(50, 50, 1.0)
        assert rep.values["n_over_k"] == 1.0
        assert rep.flags["cells_within_n"] and not rep.flags["n_over_k"]

    def test_order_one_not_applicable(self):
        rep = check_rate_conditions(1000, 5, 1.0)
        assert rep.flags["n_over_k_ln_k"] is None
        assert rep.flags["k_power_ln_n_over_n"] is None
        assert rep.flag_strings()["k_power_ln_n_over_n"] == "n/a"

    def test_values(self):
        rep = check_rate_conditions(1000, 8, 3.0)
        assert rep.values["k_ln_n_over_n"] == pytest.approx(8 * math.log(1000) / 1000)
        assert rep.values["k_power_ln_n_over_n"] == pytest.approx(
            8 ** (5 / 3) * math.log(1000) / 1000)
        assert rep.values["n_over_k_ln_k"] == pytest.approx(1000 / (8 * math.log(8)))
