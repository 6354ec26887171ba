import sys
from pathlib import Path

import hypothesis
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from tidyup import gamegen, kg

hypothesis.settings.register_profile("ci", deadline=None)
hypothesis.settings.load_profile("ci")


@pytest.fixture(scope="session")
def dataset():
    return gamegen.bundled_dataset()


@pytest.fixture(scope="session")
def pools(dataset):
    return gamegen.split_dataset(dataset.objects, seed=1234)


@pytest.fixture(scope="session")
def graph():
    return kg.bundled_graph()


@pytest.fixture(scope="session")
def stopwords():
    return kg.bundled_stopwords()


def easy_game(dataset, pool, seed=5):
    config = gamegen.DifficultyConfig.for_tier("easy")
    return gamegen.sample_game(dataset, pool, config, "train", seed=seed)


@pytest.fixture()
def easy_spec(dataset, pools):
    return easy_game(dataset, pools[0])
