import pytest

from mmrag.corpus import BenchmarkItem, Difficulty
from mmrag.embeddings import StubEmbedder
from mmrag.ingestion import FixtureParserClient, IngestionConfig
from mmrag.testing import make_synthetic_benchmark, write_fixture_corpus


@pytest.fixture(scope="session")
def fixture_corpus_dir(tmp_path_factory):
    directory = tmp_path_factory.mktemp("corpus")
    write_fixture_corpus(directory)
    return directory


@pytest.fixture(scope="session")
def fixture_documents(fixture_corpus_dir):
    client = FixtureParserClient(fixture_corpus_dir)
    return [client.parse(doc_id) for doc_id in client.doc_ids()]


@pytest.fixture
def stub_embedder():
    return StubEmbedder(dense_dim=64, patch_tokens=4)


@pytest.fixture
def ingestion_config():
    return IngestionConfig()


@pytest.fixture
def valid_item():
    return BenchmarkItem(
        id="q1",
        question="Which glycan increases with age?",
        options=("agalactosylated IgG", "core fucose", "bisecting GlcNAc", "high mannose"),
        gold="B",
        difficulty=Difficulty.EASY,
        source_doc="fx001",
    )


@pytest.fixture(scope="session")
def small_benchmark():
    return make_synthetic_benchmark(n_easy=6, n_medium=3, n_hard=3)
