"""
Tests for the joint statistic, linear and diagonal-null tests, thresholds, power and level.
"""
import math

import numpy as np
import pytest
from scipy import stats

from src.core import hypothesis
from src.core.benchmarks import FAMILY_PROBLEMS, breguet_model, example1, example2
from src.core.errors import DegenerateOutputError, DesignError, ParameterError
from src.core.runner import ReplicateRunner
from src.models.results import CovMatrix, StatisticKind, TestPlan, TestProblem
from src.models.sample import Design

IDENTITY2 = CovMatrix(entries=np.eye(2))


def _problem(u=None, v=None, w=None) -> TestProblem:
    return TestProblem(
        u=Design(subsets=u) if u else None,
        v=Design(subsets=v) if v else None,
        w=Design(subsets=w) if w else None,
    )


class TestThresholds:

    def test_abs_sum_density_integrates_to_one(self):
        assert hypothesis.abs_sum_cdf(40.0) == pytest.approx(1.0, abs=1e-8)
        assert hypothesis.abs_sum_density(-1.0) == 0.0

    def test_abs_sum_quantile_matches_simulation(self):
        rng = np.random.default_rng(314)
        draws = np.abs(rng.standard_normal((2_000_000, 2))).sum(axis=1)
        oracle = float(np.quantile(draws, 0.95))
        assert hypothesis.quantile_abs_sum(0.05) == pytest.approx(oracle, abs=0.01)

    def test_sum_of_squares_threshold(self):
        for alpha in (0.01, 0.05, 0.1):
            threshold = hypothesis.diagonal_threshold(StatisticKind.T4, alpha, 1.0)
            assert threshold == pytest.approx(-2.0 * math.log(alpha), abs=1e-9)
            assert threshold == pytest.approx(stats.chi2.ppf(1 - alpha, df=2), abs=1e-9)

    def test_max_threshold(self):
        assert hypothesis.diagonal_threshold(StatisticKind.T5, 0.05, 1.0) == pytest.approx(2.23468, abs=2e-3)

    def test_sum_thresholds(self):
        sigma0 = math.sqrt(3.0)
        t1 = hypothesis.diagonal_threshold(StatisticKind.T1, 0.05, sigma0)
        t3 = hypothesis.diagonal_threshold(StatisticKind.T3, 0.05, sigma0)
        assert t1 == pytest.approx(math.sqrt(6.0) * stats.norm.ppf(0.95))
        assert t3 == pytest.approx(math.sqrt(6.0) * stats.norm.ppf(0.975))

    def test_simulated_thresholds_match_closed_forms(self):
        for kind in (StatisticKind.T2, StatisticKind.T4, StatisticKind.T5):
            simulated = hypothesis.simulated_threshold(kind, IDENTITY2, 0.05, draws=400_000, seed=1)
            closed = hypothesis.diagonal_threshold(kind, 0.05, 1.0)
            assert simulated == pytest.approx(closed, rel=0.02)

    def test_invalid_alpha(self):
        with pytest.raises(ParameterError):
            hypothesis.diagonal_threshold(StatisticKind.T1, 0.0, 1.0)
        with pytest.raises(ParameterError):
            hypothesis.quantile_abs_sum(1.5)

    def test_higher_dimension(self):
        threshold = hypothesis.diagonal_threshold(StatisticKind.T4, 0.05, 2.0, dim=3)
        assert threshold == pytest.approx(4.0 * stats.chi2.ppf(0.95, df=3))

    @pytest.mark.parametrize("alpha", [0.5, 0.1, 0.05, 0.01])
    def test_abs_sum_quantile_closed_form(self, alpha):
        # |Z1| + |Z2| = √2·max(|U|, |V|)、U, V は独立な標準正規
        expected = math.sqrt(2.0) * stats.norm.ppf((1.0 + math.sqrt(1.0 - alpha)) / 2.0)
        assert hypothesis.quantile_abs_sum(alpha) == pytest.approx(expected, abs=1e-6)
        assert hypothesis.abs_sum_cdf(expected) == pytest.approx(1.0 - alpha, abs=1e-7)

    def test_abs_sum_median(self):
        assert hypothesis.quantile_abs_sum(0.5) == pytest.approx(1.48746, abs=1e-4)

    @pytest.mark.parametrize("dim", [2, 3])
    @pytest.mark.parametrize("kind", [StatisticKind.T1, StatisticKind.T2, StatisticKind.T3,
                                      StatisticKind.T4, StatisticKind.T5])
    def test_thresholds_decrease_in_alpha(self, kind, dim):
        alphas = [0.01, 0.05, 0.1, 0.2, 0.5]
        thresholds = [hypothesis.diagonal_threshold(kind, a, 1.5, dim=dim, draws=50_000) for a in alphas]
        assert all(high > low for high, low in zip(thresholds, thresholds[1:]))

    def test_threshold_is_cached(self):
        hypothesis._cached_diagonal_threshold.cache_clear()
        first = hypothesis.diagonal_threshold(StatisticKind.T2, 0.05, 1.0)
        second = hypothesis.diagonal_threshold("t2", 0.05, 1.0)
        info = hypothesis._cached_diagonal_threshold.cache_info()
        assert first == second
        assert info.misses == 1 and info.hits == 1

    def test_cache_keeps_arguments_apart(self):
        narrow = hypothesis.diagonal_threshold(StatisticKind.T2, 0.05, 1.0)
        wide = hypothesis.diagonal_threshold(StatisticKind.T2, 0.05, 2.0)
        assert wide == pytest.approx(2.0 * narrow)
        assert hypothesis.diagonal_threshold(StatisticKind.T2, 0.1, 1.0) < narrow

    def test_draws_reach_simulated_threshold(self):
        small = hypothesis.diagonal_threshold(StatisticKind.T2, 0.05, 1.0, dim=3, draws=5_000)
        large = hypothesis.diagonal_threshold(StatisticKind.T2, 0.05, 1.0, dim=3, draws=200_000)
        assert small != large
        assert small == pytest.approx(large, rel=0.05)


class TestStatistics:

    def test_statistic_values(self):
        g = np.array([1.0, -2.0])
        expected = {
            StatisticKind.T1: -1.0,
            StatisticKind.T2: 3.0,
            StatisticKind.T3: 1.0,
            StatisticKind.T4: 5.0,
            StatisticKind.T5: 2.0,
        }
        for kind, value in expected.items():
            assert hypothesis.statistic_value(kind, g) == value

    def test_reject_is_strict(self):
        threshold = hypothesis.diagonal_threshold(StatisticKind.T1, 0.05, 1.0)
        result = hypothesis.test_diagonal(StatisticKind.T1, [threshold, 0.0], 0.05, 1.0)
        assert result.statistic == threshold
        assert not result.reject

    def test_k2_requires_two_coordinates(self):
        with pytest.raises(DesignError):
            hypothesis.test_k2(StatisticKind.T1, [1.0, 2.0, 3.0], 0.05, 1.0)

    def test_linear(self):
        result = hypothesis.test_linear([1.0, -1.0], [3.0, 0.0], IDENTITY2, 0.05)
        assert result.statistic == pytest.approx(3.0 / math.sqrt(2.0))
        assert result.reject
        assert result.coefficients == [1.0, -1.0]

    def test_linear_degenerate(self):
        with pytest.raises(DegenerateOutputError):
            hypothesis.test_linear([1.0, 1.0], [1.0, 1.0], CovMatrix(entries=np.zeros((2, 2))), 0.05)

    def test_linear_shift_needs_n(self):
        with pytest.raises(ParameterError):
            hypothesis.test_linear([1.0, 0.0], [1.0, 1.0], IDENTITY2, 0.05, shift=0.1)

    def test_linear_length_mismatch(self):
        with pytest.raises(DesignError):
            hypothesis.test_linear([1.0], [1.0, 1.0], IDENTITY2, 0.05)


class TestJointStatistic:

    def test_dimensions_and_labels(self, ishigami):
        problem = _problem(u=[[3]], v=[[1]], w=[[2]])
        sample = hypothesis.generate_for_problem(ishigami.spec, problem, 5000, seed=1)
        joint = hypothesis.build_GN(sample, problem)
        assert joint.values.shape == (2,)
        assert joint.gamma.dim == 2
        assert joint.labels == ["S[3]", "S[1]-S[2]"]

    def test_missing_columns(self, ishigami):
        problem = _problem(u=[[3]])
        sample = hypothesis.generate_for_problem(ishigami.spec, _problem(u=[[1]]), 500, seed=1)
        with pytest.raises(DesignError):
            hypothesis.build_GN(sample, problem)

    def test_full_info_not_supported(self, ishigami):
        problem = _problem(u=[[3]])
        sample = hypothesis.generate_for_problem(ishigami.spec, problem, 500, seed=1)
        with pytest.raises(ParameterError):
            hypothesis.build_GN(sample, problem, "full")

    def test_one_sided_breguet(self):
        # S^{F} ≤ S^{SFC} は成り立つので棄却されない
        problem = _problem(v=[[2]], w=[[3]])
        sample = hypothesis.generate_for_problem(breguet_model().spec, problem, 10_000, seed=4)
        joint = hypothesis.build_GN(sample, problem)
        assert not hypothesis.test_one_sided(joint, [1.0], 0.05).reject

    def test_generic_uses_plugin_covariance(self, ishigami):
        problem = _problem(u=[[3]], v=[[1]], w=[[2]])
        sample = hypothesis.generate_for_problem(ishigami.spec, problem, 5000, seed=3)
        joint = hypothesis.build_GN(sample, problem)
        result = hypothesis.test_generic(StatisticKind.T1, joint, 0.05)
        sd = math.sqrt(float(np.ones(2) @ joint.gamma.entries @ np.ones(2)))
        assert result.threshold == pytest.approx(sd * stats.norm.ppf(0.95))


class TestPowerAndLevel:

    def test_closed_form_power_at_null_is_alpha(self):
        assert hypothesis.power_test1_closed_form(0.0, 1000, 0.05) == pytest.approx(0.05, abs=1e-12)

    def test_closed_form_power_increases(self):
        """λ1² = 0.3 では n = 500 で閉形式の検出力がほぼ1になり増加を比べられないため λ1² = 0.05 を使う"""
        powers = [hypothesis.power_test1_closed_form(math.sqrt(0.05), n, 0.05) for n in (100, 500, 1000)]
        assert powers[0] < powers[1] < powers[2]

    def test_rejection_rate_is_thread_invariant(self, ishigami):
        plan = TestPlan(problem=_problem(u=[[3]]), kind=StatisticKind.LINEAR, alpha=0.5, coefficients=[1.0])
        serial = hypothesis.rejection_rate(ishigami.spec, plan, 500, 40, seed=9, runner=ReplicateRunner(1))
        parallel = hypothesis.rejection_rate(ishigami.spec, plan, 500, 40, seed=9, runner=ReplicateRunner(4))
        assert serial == parallel

    def test_half_level_rejects_half(self, ishigami, serial_runner):
        plan = TestPlan(problem=_problem(u=[[3]]), kind=StatisticKind.LINEAR, alpha=0.5, coefficients=[1.0])
        rate = hypothesis.rejection_rate(ishigami.spec, plan, 1000, 300, seed=2, runner=serial_runner)
        assert 0.38 <= rate <= 0.62

    def test_power_curve_rows(self, serial_runner):
        plan = TestPlan(
            problem=_problem(u=[[1], [2]]), kind=StatisticKind.T1, alpha=0.05, sigma0=math.sqrt(3.0),
        )
        rows = hypothesis.power_curve(example1, plan, [0.0, 0.5], 200, 20, seed=1, runner=serial_runner)
        assert [row.parameter for row in rows] == [0.0, 0.5]
        assert all(row.closed_form_power is not None for row in rows)
        assert all(0.0 <= row.power <= 1.0 for row in rows)

    def test_level_study(self, ishigami, serial_runner):
        plan = TestPlan(problem=_problem(u=[[3]]), kind=StatisticKind.LINEAR, alpha=0.05, coefficients=[1.0])
        study = hypothesis.level_study(ishigami.spec, plan, 300, 20, 3, seed=5, runner=serial_runner)
        assert len(study.levels) == 3
        assert study.minimum <= study.mean <= study.maximum

    def test_invalid_replicates(self, ishigami):
        plan = TestPlan(problem=_problem(u=[[3]]), kind=StatisticKind.LINEAR, alpha=0.05, coefficients=[1.0])
        with pytest.raises(ParameterError):
            hypothesis.rejection_rate(ishigami.spec, plan, 100, 0, seed=1)
        with pytest.raises(ParameterError):
            hypothesis.level_study(ishigami.spec, plan, 100, 10, 0, seed=1)

    def test_power_curves_cross(self, rng):
        # 和の統計量は (d, d) 方向、最大値の統計量は (d, −d) 方向のずれに強い
        draws = rng.standard_normal((4000, 2))

        def power(kind, shift):
            threshold = hypothesis.diagonal_threshold(kind, 0.05, 1.0)
            values = [hypothesis.statistic_value(kind, g) for g in draws + np.asarray(shift)]
            return float(np.mean(np.asarray(values) > threshold))

        along = (2.0, 2.0)
        across = (2.5, -2.5)
        assert power(StatisticKind.T1, along) > power(StatisticKind.T5, along) + 0.1
        assert power(StatisticKind.T5, across) > power(StatisticKind.T1, across) + 0.5

    def test_plan_validation(self):
        with pytest.raises(ValueError):
            TestPlan(problem=_problem(u=[[1]]), kind=StatisticKind.LINEAR, alpha=0.05)
        with pytest.raises(ValueError):
            TestPlan(problem=_problem(u=[[1]]), kind=StatisticKind.LINEAR, alpha=0.05, coefficients=[1.0, 2.0])


@pytest.mark.slow
class TestAcceptance:

    def test_ishigami_null_level(self):
        from src.core.benchmarks import ishigami_model
        plan = TestPlan(problem=_problem(u=[[3]]), kind=StatisticKind.LINEAR, alpha=0.05, coefficients=[1.0])
        study = hypothesis.level_study(ishigami_model().spec, plan, 1000, 1000, 20, seed=2024)
        assert 0.041 <= study.mean <= 0.055

    @pytest.mark.parametrize("kind", [StatisticKind.T1, StatisticKind.T3, StatisticKind.T4, StatisticKind.T5])
    def test_power_increases_with_n(self, kind):
        """第1の例題は λ1² = 0.3 だと n = 500 で検出力が飽和するため λ1² = 0.05 を使う"""
        plan = TestPlan(problem=_problem(u=[[1], [2]]), kind=kind, alpha=0.05, sigma0=math.sqrt(3.0))
        lambda1 = math.sqrt(0.05)
        reps = 1000
        powers = [
            hypothesis.power_curve(example1, plan, [lambda1], n, reps, seed=77)[0].power
            for n in (100, 500, 1000)
        ]
        se = max(math.sqrt(p * (1 - p) / reps) for p in powers)
        assert powers[0] + 3 * se < powers[2]
        assert powers[0] < powers[1] < powers[2]

    def test_sum_power_matches_closed_form(self):
        """
        λ1² = 0.3 では n = 1000 で検出力が1に飽和するため、飽和しない λ1² = 0.05 でも比較する
        """
        plan = TestPlan(problem=_problem(u=[[1], [2]]), kind=StatisticKind.T1, alpha=0.05, sigma0=math.sqrt(3.0))
        reps = 2000
        for row in hypothesis.power_curve(example1, plan, [math.sqrt(0.05), math.sqrt(0.3)], 1000, reps, seed=8):
            p = row.closed_form_power
            se = math.sqrt(max(p * (1 - p), 1.0 / reps) / reps)
            assert abs(row.power - row.closed_form_power) <= 3 * se


@pytest.mark.slow
class TestExampleTwoAcceptance:

    @pytest.mark.parametrize("kind", [StatisticKind.T1, StatisticKind.T3, StatisticKind.T4, StatisticKind.T5])
    def test_power_increases_with_n(self, kind):
        """
        λ1² = 0.3 では n = 500 で検出力が飽和するため、S^{1,2} − S^{2} = 0.1 となる λ1² = 0.45 を使う
        """
        problem = FAMILY_PROBLEMS["example2"]
        plan = TestPlan(problem=_problem(**problem), kind=kind, alpha=0.05, sigma0=1.0)
        reps = 1000
        powers = [
            hypothesis.power_curve(example2, plan, [math.sqrt(0.45)], n, reps, seed=78)[0].power
            for n in (100, 500, 1000)
        ]
        se = max(math.sqrt(p * (1 - p) / reps) for p in powers)
        assert powers[0] + 3 * se < powers[1]
        assert powers[1] + 3 * se < powers[2]

    def test_null_level_of_linear_form(self):
        problem = FAMILY_PROBLEMS["example2"]
        plan = TestPlan(problem=_problem(**problem), kind=StatisticKind.LINEAR, alpha=0.05,
                        coefficients=[1.0, 1.0, 1.0])
        rate = hypothesis.rejection_rate(example2(math.sqrt(0.5)).spec, plan, 10_000, 1000, seed=79)
        assert rate == pytest.approx(0.05, abs=0.02)
