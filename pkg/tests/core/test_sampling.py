"""
Tests for pick-freeze sample generation and input laws.
"""
import numpy as np
import pytest

from src.core.errors import DesignError, ParameterError
from src.core.sampling import block_rng, derive_seed, generate_pick_freeze, sample_input, union_design
from src.models.sample import Design, InputDistribution, ModelSpec


class TestDeriveSeed:

    def test_same_keys_same_seed(self):
        assert derive_seed(7, "power", 3) == derive_seed(7, "power", 3)

    def test_keys_separate_streams(self):
        seeds = {derive_seed(7, "power", r) for r in range(50)}
        assert len(seeds) == 50
        assert derive_seed(7, "power", 0) != derive_seed(7, "level", 0)
        assert derive_seed(7, "power", 0) != derive_seed(8, "power", 0)

    def test_seed_fits_in_63_bits(self):
        assert 0 <= derive_seed(123, "x") < 2 ** 63

    def test_negative_seed_rejected(self):
        with pytest.raises(ParameterError):
            derive_seed(-1)
        with pytest.raises(ParameterError):
            block_rng(-3, 0)


class TestInputDistribution:

    def test_uniform_moments(self):
        dist = InputDistribution.uniform(-np.pi, np.pi)
        assert dist.mean() == pytest.approx(0.0)
        assert dist.variance() == pytest.approx((2 * np.pi) ** 2 / 12)

    def test_from_uniform_inverts_cdf(self):
        assert InputDistribution.normal().from_uniform(0.5) == pytest.approx(0.0, abs=1e-12)
        assert InputDistribution.uniform(2.0, 4.0).from_uniform(0.25) == pytest.approx(2.5)
        exp = InputDistribution.shifted_exponential(17.23, 3.45)
        assert exp.from_uniform(1.0) == pytest.approx(17.23)
        beta = InputDistribution.beta_on(7.0, 2.0, 18.7, 19.05)
        assert 18.7 <= beta.from_uniform(0.3) <= 19.05

    def test_sample_means_match_analytic(self, rng):
        laws = [
            InputDistribution.uniform(226.0, 234.0),
            InputDistribution.beta_on(7.0, 2.0, 18.7, 19.05),
            InputDistribution.shifted_exponential(17.23, 3.45),
            InputDistribution.discrete([0.0, 1.0, 5.0], [0.2, 0.5, 0.3]),
        ]
        for dist in laws:
            draws = dist.sample(rng, 200_000)
            se = np.sqrt(dist.variance() / draws.size)
            assert abs(draws.mean() - dist.mean()) < 5 * se

    def test_shifted_exponential_support(self, rng):
        draws = InputDistribution.shifted_exponential(17.23, 3.45).sample(rng, 10_000)
        assert draws.min() >= 17.23

    def test_discrete_frequencies(self, rng):
        dist = InputDistribution.discrete([1.0, 2.0], [0.25, 0.75])
        draws = dist.sample(rng, 100_000)
        assert set(np.unique(draws)) <= {1.0, 2.0}
        assert np.mean(draws == 2.0) == pytest.approx(0.75, abs=0.01)

    def test_invalid_parameters(self):
        with pytest.raises(ValueError):
            InputDistribution.uniform(1.0, 1.0)
        with pytest.raises(ValueError):
            InputDistribution.discrete([0.0, 1.0], [0.3, 0.3])
        with pytest.raises(ValueError):
            InputDistribution.shifted_exponential(0.0, -1.0)

    def test_sample_input_returns_scalar(self, rng):
        value = sample_input(InputDistribution.uniform(0.0, 1.0), rng)
        assert isinstance(value, float)
        assert 0.0 <= value <= 1.0


class TestDesign:

    def test_subsets_are_normalized(self):
        design = Design(subsets=[[3, 1, 1], [2]])
        assert design.subsets == [[1, 3], [2]]
        assert design.labels() == ["1,3", "2"]
        assert design.index_of([3, 1]) == 0
        assert design.index_of([1]) == -1

    def test_empty_design_rejected(self):
        with pytest.raises(ValueError):
            Design(subsets=[])
        with pytest.raises(ValueError):
            Design(subsets=[[]])

    def test_union_design(self):
        merged = union_design(Design(subsets=[[1]]), None, Design(subsets=[[1], [1, 2]]))
        assert merged.subsets == [[1], [1, 2]]
        with pytest.raises(DesignError):
            union_design(None, None)


class TestGeneratePickFreeze:

    def test_deterministic_for_seed(self, linear_model):
        design = Design(subsets=[[1], [2]])
        a = generate_pick_freeze(linear_model, design, 5000, seed=3)
        b = generate_pick_freeze(linear_model, design, 5000, seed=3)
        c = generate_pick_freeze(linear_model, design, 5000, seed=4)
        assert np.array_equal(a.y, b.y)
        assert np.array_equal(a.y_u, b.y_u)
        assert not np.array_equal(a.y, c.y)

    def test_shapes_and_read_only(self, linear_model):
        sample = generate_pick_freeze(linear_model, Design(subsets=[[1], [2]]), 10_000, seed=1, block_rows=1000)
        assert sample.n == 10_000
        assert sample.k == 2
        assert sample.y_u.shape == (10_000, 2)
        assert not sample.y.flags.writeable
        with pytest.raises(ValueError):
            sample.y[0] = 1.0

    def test_all_frozen_replica_equals_base(self, linear_model):
        sample = generate_pick_freeze(linear_model, Design(subsets=[[1, 2]]), 1000, seed=5)
        assert np.array_equal(sample.y, sample.column([1, 2]))

    def test_replica_covariance_is_frozen_variance(self, linear_model):
        # Y = X1 + 2 X2 で X1 を固定すると Cov(Y, Y^{1}) = Var(X1) = 1
        sample = generate_pick_freeze(linear_model, Design(subsets=[[1]]), 100_000, seed=9)
        cov = np.mean((sample.y - sample.y.mean()) * (sample.y_u[:, 0] - sample.y_u[:, 0].mean()))
        assert cov == pytest.approx(1.0, abs=0.05)
        # 複製の周辺分布は Y と同じ
        assert sample.y_u[:, 0].var() == pytest.approx(5.0, rel=0.03)

    def test_invalid_requests(self, linear_model):
        with pytest.raises(DesignError):
            generate_pick_freeze(linear_model, Design(subsets=[[1]]), 1, seed=0)
        with pytest.raises(DesignError):
            generate_pick_freeze(linear_model, Design(subsets=[[3]]), 10, seed=0)
        with pytest.raises(ParameterError):
            generate_pick_freeze(linear_model, Design(subsets=[[1]]), 10, seed=-2)

    def test_restrict_and_shift(self, linear_model):
        sample = generate_pick_freeze(linear_model, Design(subsets=[[1], [2]]), 100, seed=2)
        restricted = sample.restrict([[2]])
        assert np.array_equal(restricted.y_u[:, 0], sample.column([2]))
        shifted = sample.shifted(10.0)
        assert np.allclose(shifted.y, sample.y + 10.0)
        with pytest.raises(DesignError):
            sample.column([1, 2])

    def test_single_input_all_frozen(self):
        model = ModelSpec(inputs=[InputDistribution.normal()], evaluator=lambda x: x[:, 0])
        sample = generate_pick_freeze(model, Design(subsets=[[1]]), 50, seed=0)
        assert np.array_equal(sample.y, sample.y_u[:, 0])
