import numpy as np
import pytest

from dic.channel import builtin_channel, random_product_pmfs
from dic.noisy import ObservationChannel, bpsk_example
from dic.prob import ProductInput


def random_inputs(spec, n, seed=0):
    return [ProductInput(p) for p in random_product_pmfs(spec, n, seed)]


@pytest.fixture(scope="session")
def additive():
    return builtin_channel("additive3dic")


@pytest.fixture(scope="session")
def pairing():
    return builtin_channel("pairing-strong")


@pytest.fixture(scope="session")
def blackwell():
    return builtin_channel("blackwell2dic")


@pytest.fixture(scope="session")
def bpsk():
    return bpsk_example().to_channel_spec()


@pytest.fixture(scope="session")
def awgn():
    return ObservationChannel.gaussian(0.1)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
