"""
共通フィクスチャと定数
"""
import numpy as np
import pytest

from src.core.benchmarks import example1, ishigami_model
from src.core.runner import ReplicateRunner
from src.core.sampling import generate_pick_freeze
from src.models.sample import Design, InputDistribution, ModelSpec

# Ishigami (a=7, b=0.1) の一次の閉指数
ISHIGAMI_FIRST_ORDER = (0.3139, 0.4424, 0.0)


@pytest.fixture
def ishigami():
    return ishigami_model()


@pytest.fixture
def ishigami_centered():
    return ishigami_model(centered=True)


@pytest.fixture
def example1_null():
    return example1(0.0)


@pytest.fixture
def linear_model():
    """Y = X1 + 2 X2、X ~ N(0, I₂)（S^{1} = 1/5）"""
    return ModelSpec(
        name="linear",
        inputs=[InputDistribution.normal(), InputDistribution.normal()],
        evaluator=lambda x: x[:, 0] + 2.0 * x[:, 1],
    )


@pytest.fixture
def ishigami_sample(ishigami):
    return generate_pick_freeze(ishigami.spec, Design(subsets=[[1], [2], [3]]), 20_000, seed=11)


@pytest.fixture
def serial_runner():
    return ReplicateRunner(threads=1)


@pytest.fixture
def rng():
    return np.random.default_rng(2024)
