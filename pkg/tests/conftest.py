import numpy as np
import pytest

from hifdetect import synthgen
from hifdetect.autoencoder import TrainConfig
from hifdetect.pipeline import PipelineConfig, train_pipeline

# acceptance criterion number -> (passed, detail); printed in the terminal summary
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_models():
    """Quickly trained models on two short synthetic load profiles (shared, read-only)."""
    seeds = synthgen.corpus_seeds(0, 2)
    records = [synthgen.gen_load(synthgen.random_profile(s), 10.0) for s in seeds]
    config = PipelineConfig(train=TrainConfig(epochs=8, seed=3))
    models, summary = train_pipeline(records, config)
    return models, summary, records
