import json
from pathlib import Path

import numpy as np
import pytest

from pathgrad.bundled import reference
from pathgrad.embeddings import SPECIAL_TOKENS, EmbeddingStore

GOLDEN_DIR = Path(__file__).parent / "golden"

ACCEPTANCE_RESULTS: list[tuple[str, bool, str]] = []


def random_store(rng: np.random.Generator, n_content: int = 20, dim: int = 16) -> EmbeddingStore:
    tokens = list(SPECIAL_TOKENS) + [f"w{i}" for i in range(n_content)]
    return EmbeddingStore(tuple(tokens), rng.normal(size=(len(tokens), dim)))


@pytest.fixture(scope="session")
def bundle():
    return reference()


@pytest.fixture(scope="session")
def golden():
    return json.loads((GOLDEN_DIR / "pinned_udig.json").read_text())


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
