from __future__ import annotations

import numpy as np
import pytest

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def tone(freq: float, ms: int, rate: int = 16000, amp: float = 0.5) -> np.ndarray:
    t = np.arange(ms * rate // 1000) / rate
    return amp * np.sin(2 * np.pi * freq * t)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


# small networks so end-to-end runs finish in seconds
FAST_OVERRIDES = {
    "seq_hidden": 16,
    "seq_epochs": 40,
    "seq_lr": 0.01,
    "map_hidden": 16,
    "map_epochs": 40,
    "map_lr": 0.003,
    "map_max_iterations": 100000,
}


@pytest.fixture(scope="session")
def fast_config():
    from affectfuse.config import PipelineConfig

    return PipelineConfig(**FAST_OVERRIDES)


@pytest.fixture(scope="session")
def tiny_corpus(tmp_path_factory):
    from affectfuse.synth import make_corpus

    out = tmp_path_factory.mktemp("tiny")
    make_corpus(out, {"train": 2, "validation": 1, "test": 1}, seed=5, max_ms=1200)
    return out
