import pytest

from cogran.dataset import gen_synthetic, normalize, split


@pytest.fixture(scope="session")
def reference_split():
    """Synthetic stand-in at the reference scale: 600 train / 93 test, normalized on train."""
    data = gen_synthetic(693, 3, 0.05, seed=7)
    train, test = split(data, 600, 93, seed=1)
    train_n, info = normalize(train)
    return train_n, info.apply(test)


@pytest.fixture(scope="session")
def small_split():
    data = gen_synthetic(120, 2, 0.05, seed=3)
    train, test = split(data, 100, 20, seed=2)
    train_n, info = normalize(train)
    return train_n, info.apply(test)
