import numpy as np
import pytest
from hypothesis import settings

from gclreplay.graphs import Graph
from gclreplay.streams import SplitSpec, build_task_stream
from gclreplay.synthetic import BenchmarkSpec, make_benchmark

settings.register_profile("suite", deadline=None, max_examples=30)
settings.load_profile("suite")


@pytest.fixture
def path_graph() -> Graph:
    """0-1-2-3 path with labels [0,0,1,1] and simple features."""
    features = np.arange(8, dtype=float).reshape(4, 2)
    return Graph(features, [0, 0, 1, 1], [(0, 1), (1, 2), (2, 3)])


@pytest.fixture(scope="session")
def tiny_benchmark() -> Graph:
    """A 6-class, ~240-node assortative graph for fast pipeline tests."""
    spec = BenchmarkSpec("tiny", 240, 480, 60, 6, homophily=0.8,
                         words_per_doc=8.0, topic_words=12, topic_prob=0.8)
    return make_benchmark(spec, 0)


@pytest.fixture(scope="session")
def tiny_stream(tiny_benchmark):
    return build_task_stream(tiny_benchmark, 2, 3, SplitSpec(seed=0))
