import sys

import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_configure(config):
    # acceptance tests print measured numbers; keep them visible under -v
    config.addinivalue_line("markers", "acceptance: end-to-end acceptance criteria")
