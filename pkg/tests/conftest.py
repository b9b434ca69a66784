import numpy as np
import pytest

from glyforge.model import GlycanModel
from glyforge.notation import parse_glycan
from glyforge.synthetic import generate_corpus


@pytest.fixture(scope="session")
def small_corpus():
    return [parse_glycan(s) for s in generate_corpus(24, seed=3)]


@pytest.fixture
def tiny_model(small_corpus):
    return GlycanModel.create(small_corpus, seed=0, hidden_dim=8, num_blocks=2)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
