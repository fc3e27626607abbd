import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from robustexotic.corpus import generate_corpus  # noqa: E402
from robustexotic.examples import load_example  # noqa: E402

CORPUS_SEED = 2024
CORPUS_SIZE = 72


@pytest.fixture(scope="session")
def bin2():
    return load_example("bin2")


@pytest.fixture(scope="session")
def corpus():
    return generate_corpus(CORPUS_SEED, CORPUS_SIZE)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
