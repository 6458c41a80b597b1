import numpy as np
import pytest

from sfrestore.gallery import make_toy_gallery
from sfrestore.schedule import make_linear_schedule
from sfrestore.scores import EmpiricalPrior, EmpiricalScoreModel


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def sched100():
    return make_linear_schedule(100, 1e-3, 0.2)


@pytest.fixture
def small_prior():
    return EmpiricalPrior(make_toy_gallery(4, 8, 1, 7))


@pytest.fixture
def small_model(small_prior, sched100):
    return EmpiricalScoreModel(small_prior, sched100)
