import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from modiste.masks import BinaryMask


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def random_mask(rng, width, height, density=0.2) -> BinaryMask:
    return BinaryMask(rng.random((height, width)) < density)
