import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=100)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


FUNNEL_ONSET = 100


def run_scene(scenario, config=None):
    """Run the detector on an in-memory scene; returns (results, seconds)."""
    import time

    from lagrangian_bottleneck import BottleneckDetector, PipelineConfig
    from lagrangian_bottleneck.synth import sequences

    config = config or PipelineConfig()
    start = time.perf_counter()
    fwd, bwd = sequences(scenario, config.delta_t)
    results = list(BottleneckDetector(config).run(fwd, bwd))
    return results, time.perf_counter() - start


@pytest.fixture(scope="session")
def funnel_run():
    from lagrangian_bottleneck.synth import Scenario, ground_truth

    sc = Scenario("funnel", onset_frame=FUNNEL_ONSET)
    results, seconds = run_scene(sc)
    return sc, ground_truth(sc), results, seconds


@pytest.fixture(scope="session")
def funnel_dir(tmp_path_factory):
    from lagrangian_bottleneck.synth import Scenario, generate

    out = tmp_path_factory.mktemp("funnel")
    generate(Scenario("funnel", onset_frame=FUNNEL_ONSET), out)
    return out
