import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", max_examples=50, deadline=None)
settings.load_profile("default")


@pytest.fixture(scope="session")
def ca_codes():
    from gwmmse.prn import generate_ca_code

    return {p: generate_ca_code(p) for p in range(1, 33)}


@pytest.fixture
def rng():
    return np.random.default_rng(20261015)
