import numpy as np
import pytest

from olgsim import (
    GBM,
    DiscountSpec,
    IncomeModel,
    PointLaw,
    RatePath,
    TimeGrid,
    UtilitySpec,
)


@pytest.fixture(scope="session")
def crra():
    return UtilitySpec(gamma=2.0)


@pytest.fixture(scope="session")
def discount():
    return DiscountSpec(delta=0.02, lam=100.0)


@pytest.fixture(scope="session")
def gbm_income():
    return IncomeModel(GBM(0.01, 0.1), PointLaw(1.0))


@pytest.fixture(scope="session")
def small_grid():
    return TimeGrid(0.0, 5.0, 25)


@pytest.fixture(scope="session")
def small_rate(small_grid):
    return RatePath.constant(0.03, small_grid)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)
