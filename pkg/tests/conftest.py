import pytest
import torch

from styledomain import build_architecture, random_weights
from styledomain.losses import get_backend

torch.set_num_threads(2)


@pytest.fixture(scope="session")
def toy32_desc():
    return build_architecture("toy32")


@pytest.fixture(scope="session")
def toy32_parent(toy32_desc):
    return random_weights(toy32_desc, seed=0)


@pytest.fixture(scope="session")
def toy16_desc():
    return build_architecture("toy16")


@pytest.fixture(scope="session")
def toy16_parent(toy16_desc):
    return random_weights(toy16_desc, seed=0)


@pytest.fixture(scope="session")
def train_backend():
    return get_backend("stub-train")


@pytest.fixture(scope="session")
def eval_backend():
    return get_backend("stub-eval")
