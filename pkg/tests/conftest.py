from __future__ import annotations

import random

import pytest

from relq.corpus import Corpus, dangling_graph_g2, reference_graph_g1
from relq.model import Model


@pytest.fixture(scope="session")
def corpus() -> Corpus:
    return Corpus()


@pytest.fixture(scope="session")
def simple_graph_mm(corpus):
    return corpus.metamodel("SimpleGraph")


@pytest.fixture
def g1() -> Model:
    return reference_graph_g1()


@pytest.fixture
def g2() -> Model:
    return dangling_graph_g2()


def random_graph(
    rng: random.Random,
    mm,
    max_nodes: int = 8,
    max_edges: int = 16,
    dangling: float = 0.0,
) -> Model:
    """SimpleGraph with random (possibly parallel, looping or dangling) edges."""
    m = Model(mm)
    g = m.create("Graph", "g")
    n = rng.randint(0, max_nodes)
    ids = [f"v{i}" for i in range(n)]
    for i in ids:
        m.create("Node", i, {"name": i}, parent=g, ref="nodes")
    for j in range(rng.randint(0, max_edges) if ids else 0):
        refs = {}
        for end in ("src", "trg"):
            if rng.random() >= dangling:
                refs[end] = [rng.choice(ids)]
        m.create("Edge", f"x{j}", refs=refs, parent=g, ref="edges")
    return m


def edge_pairs(m: Model) -> list[tuple[str | None, str | None]]:
    out = []
    for e in m.elements_of_class("Edge"):
        src, trg = e.refs.get("src", []), e.refs.get("trg", [])
        out.append((src[0] if src else None, trg[0] if trg else None))
    return out


def pytest_configure(config):
    config.acceptance_lines = {}


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "acceptance_lines", {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for n in sorted(lines):
            terminalreporter.write_line(lines[n])


@pytest.fixture
def criterion(request):
    """Record the one-line verdict for an acceptance criterion; returns ``ok`` for asserting."""

    def record(number: int, ok: bool, detail: str, verdict: str | None = None) -> bool:
        word = verdict or ("PASS" if ok else "FAIL")
        line = f"criterion {number}: {word} {detail}"
        request.config.acceptance_lines[number] = line
        print(line)
        return ok

    return record
