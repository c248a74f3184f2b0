import random

import pytest

from nodepack.model import AggregationStrategy, BenchmarkConfig


def random_small_config(rng: random.Random, max_nodes=3, max_cores=4, max_n=5, max_t=8):
    t = rng.randint(1, max_t)
    n = rng.randint(1, max_n)
    return BenchmarkConfig(
        task_time_us=t,
        job_time_per_processor_us=t * n,
        nodes=rng.randint(1, max_nodes),
        cores_per_node=rng.randint(1, max_cores),
    )


def random_strategy(rng: random.Random) -> AggregationStrategy:
    return rng.choice(list(AggregationStrategy))


@pytest.fixture
def rng():
    return random.Random(20240817)
