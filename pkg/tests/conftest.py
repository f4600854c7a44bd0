import numpy as np
import pytest

MASK = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15


def ref_mix64(z):
    """Plain-integer splitmix64 finalizer, independent of the compiled one."""
    z &= MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
    return z ^ (z >> 31)


def ref_hash64(x, seed):
    k = ref_mix64(seed + GOLDEN)
    return ref_mix64(ref_mix64(x ^ k) + k)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def emit(capsys):
    """Print a line straight to the terminal, bypassing output capture."""
    def _emit(line):
        with capsys.disabled():
            print("\n" + line)
    return _emit
