import numpy as np
import pytest

from etcbandit import SystemParams, StreamSet, demo_system


@pytest.fixture
def demo():
    return demo_system()


@pytest.fixture
def demo_noiseless():
    base = demo_system()
    return SystemParams(base.a, base.b, base.c, np.zeros((3, 3)), 0.0)


def rng(seed):
    return np.random.Generator(np.random.Philox(seed))


def random_symmetric(m, seed):
    w = rng(seed).standard_normal((m, m))
    return 0.5 * (w + w.T)


def streams(seed, rep=0):
    return StreamSet(seed, rep)
