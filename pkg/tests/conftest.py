import numpy as np
import pytest

from tscaled.transform import make_transform


@pytest.fixture
def rng():
    return np.random.default_rng(20240901)


@pytest.fixture(params=["dft", "dct"])
def kind(request):
    return request.param


@pytest.fixture
def spec4(kind):
    return make_transform(kind, 4)
