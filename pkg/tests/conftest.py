import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from takeover.dataset import SynthConfig, scaled_counts, synthesize_events  # noqa: E402


@pytest.fixture(scope="session")
def events():
    """40 synthetic events covering every activity."""
    return synthesize_events(SynthConfig(counts=scaled_counts(40), seed=7))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
