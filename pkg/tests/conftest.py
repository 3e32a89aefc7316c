import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from posturekit.forest import ForestConfig, train
from posturekit.pipeline import training_samples
from posturekit.simulate import SimConfig, simulate_cohort


@pytest.fixture(scope="session")
def small_corpus():
    """Four participants, one 90-minute epoch each, defaults otherwise."""
    files, params = simulate_cohort(SimConfig(seed=11, duration_s=5400.0), 4, 1)
    return files, params


@pytest.fixture(scope="session")
def small_model(small_corpus):
    """Forest trained on the first three participants of the small corpus."""
    files, _ = small_corpus
    train_files = [d for d in files if d.participant_id != "p04"]
    samples, _ = training_samples(train_files)
    return train(samples, ForestConfig(seed=2, trees=60))
