import pytest

from malshort.core.io import save_corpus
from malshort.core.synthetic import GeneratorConfig, generate_world

SMALL = GeneratorConfig(n_benign=150, n_malicious=150, n_bot_encoders=2, links_per_malicious_domain=5)


@pytest.fixture(scope="session")
def small_world():
    return generate_world(SMALL, 7)


@pytest.fixture(scope="session")
def world_dir(tmp_path_factory, small_world):
    corpus, fixtures = small_world
    root = tmp_path_factory.mktemp("world") / "corpus"
    save_corpus(corpus, root)
    fixtures.write(root / "fixtures")
    return root
