import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from dwid.container import RepetitionStack, SliceSet


def random_stack(rng, n=4, rows=8, cols=8, b_value=800.0, labels=None, scale=100.0):
    data = rng.uniform(0.0, scale, size=(n, rows, cols)).astype("<f4")
    return RepetitionStack(data, b_value, labels)


def random_slice_set(rng, n_low=2, n_high=4, rows=8, cols=8, labels=None):
    return SliceSet(
        random_stack(rng, n_low, rows, cols, b_value=50.0),
        random_stack(rng, n_high, rows, cols, b_value=800.0, labels=labels),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
