"""The nine Hello World tasks: definitions, input models and golden outputs.

Layout under a corpus directory::

    metamodels/<Name>.mm   tasks/<task>.tdsl   models/<model>.xmi   golden/<task>.{xmi,html}
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

from ..engine import ExecutionReport, execute, execute_in_place
from ..metamodel import Metamodel, parse_metamodel
from ..model import Model
from ..tdsl import Transformation, parse_transformation
from ..xmi import read_model, write_model

CORPUS_DIR = Path(__file__).resolve().parent


@dataclass(frozen=True)
class TaskFixture:
    task_id: str
    title: str
    tdsl: str
    input_model: str
    inventory: str  # relations/queries/natives, as tabulated for the original solution

    def golden_name(self, output: str) -> str:
        return f"{self.task_id}.{'html' if output == 'html' else 'xmi'}"


TASKS: dict[str, TaskFixture] = {
    f.task_id: f
    for f in (
        TaskFixture("hello", "Hello world (constant)", "hello.tdsl", "g1.xmi", "1"),
        TaskFixture("hello_ext", "Hello world (extended constant)", "hello_ext.tdsl", "g1.xmi", "1"),
        TaskFixture("hello_text", "Hello world (model-to-text)", "hello_text.tdsl", "greeting_ext.xmi", "1"),
        TaskFixture("count", "Count matches", "count.tdsl", "g1.xmi", "2/5/2"),
        TaskFixture("reverse", "Reverse edges", "reverse.tdsl", "g1.xmi", "3"),
        TaskFixture("migrate", "Simple migration", "migrate.tdsl", "g1.xmi", "3"),
        TaskFixture("topology", "Topology-changing migration", "topology.tdsl", "g1.xmi", "2/1"),
        TaskFixture("delete", "Delete node", "delete.tdsl", "g1.xmi", "2"),
        TaskFixture("transitive", "Insert transitive edges", "transitive.tdsl", "g1.xmi", "5/2"),
    )
}


class Corpus:
    def __init__(self, root: Path | str = CORPUS_DIR):
        self.root = Path(root)
        self._metamodels: dict[str, Metamodel] = {}

    def path(self, *parts: str) -> Path:
        return self.root.joinpath(*parts)

    def metamodel(self, name: str) -> Metamodel:
        if name not in self._metamodels:
            p = self.path("metamodels", f"{name}.mm")
            self._metamodels[name] = parse_metamodel(p.read_text(encoding="utf-8"), str(p))
        return self._metamodels[name]

    def transformation(self, task_id: str) -> Transformation:
        p = self.path("tasks", TASKS[task_id].tdsl)
        return parse_transformation(p.read_text(encoding="utf-8"), str(p))

    def model(self, filename: str, metamodel: str) -> Model:
        return read_model(self.path("models", filename).read_bytes(), self.metamodel(metamodel))

    def golden(self, task_id: str, output: str) -> str:
        return self.path("golden", TASKS[task_id].golden_name(output)).read_text(encoding="utf-8")

    def run_task(
        self, task_id: str, overrides: Mapping[str, Any] | None = None
    ) -> tuple[str, ExecutionReport]:
        """Load, execute and serialize one task; elapsed time covers the whole round trip."""
        if task_id not in TASKS:
            raise KeyError(f"unknown task {task_id!r}; expected one of {', '.join(TASKS)}")
        start = time.perf_counter()
        fixture = TASKS[task_id]
        t = self.transformation(task_id)
        cfg = t.config
        source = self.model(fixture.input_model, cfg.source_metamodel)
        if cfg.in_place:
            result, _diff, report = execute_in_place(t, source, overrides)
        else:
            result, report = execute(t, source, overrides, self.metamodel(cfg.target_metamodel))
        text = write_model(result, cfg.output)
        report.elapsed_ms = (time.perf_counter() - start) * 1000
        return text, report


_default = Corpus()


def run_task(task_id: str, overrides: Mapping[str, Any] | None = None) -> tuple[str, ExecutionReport]:
    return _default.run_task(task_id, overrides)


def load_metamodel(name: str) -> Metamodel:
    return _default.metamodel(name)


def load_transformation(task_id: str) -> Transformation:
    return _default.transformation(task_id)


def reference_graph_g1() -> Model:
    """Eight nodes n1..n8, two triangles, one loop on n6, n7 and n8 isolated."""
    m = Model(load_metamodel("SimpleGraph"))
    g = m.create("Graph", "graph1")
    for i in range(1, 9):
        m.create("Node", f"n{i}", {"name": f"n{i}"}, parent=g, ref="nodes")
    edges = [("n1", "n2"), ("n2", "n3"), ("n3", "n1"), ("n3", "n4"), ("n4", "n5"), ("n5", "n3"), ("n6", "n6")]
    for i, (s, t) in enumerate(edges, start=1):
        m.create("Edge", f"e{i}", refs={"src": [s], "trg": [t]}, parent=g, ref="edges")
    return m


def dangling_graph_g2() -> Model:
    """Two nodes and two half-attached edges: d1 lacks a target, d2 lacks a source."""
    m = Model(load_metamodel("SimpleGraph"))
    g = m.create("Graph", "graph2")
    m.create("Node", "m1", {"name": "m1"}, parent=g, ref="nodes")
    m.create("Node", "m2", {"name": "m2"}, parent=g, ref="nodes")
    m.create("Edge", "d1", refs={"src": ["m1"]}, parent=g, ref="edges")
    m.create("Edge", "d2", refs={"trg": ["m2"]}, parent=g, ref="edges")
    return m
