from __future__ import annotations

import random

import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_graph
from relq.errors import AmbiguousKeyError, ModelError
from relq.model import Model, elements_of_class, key_lookup, validate_model
from relq.xmi import read_model, write_model


def test_g1_validates(g1, simple_graph_mm):
    assert validate_model(g1, simple_graph_mm) == []


def test_g1_class_extents(g1):
    assert [e.id for e in elements_of_class(g1, "Node", False)] == [f"n{i}" for i in range(1, 9)]
    assert [e.id for e in elements_of_class(g1, "Edge", False)] == [f"e{i}" for i in range(1, 8)]


def test_empty_model_extent(simple_graph_mm):
    assert elements_of_class(Model(simple_graph_mm), "Node", False) == []


def test_unknown_class_extent(g1):
    with pytest.raises(Exception, match="Vertex"):
        elements_of_class(g1, "Vertex", False)


def test_subclass_extent(corpus):
    mm = corpus.metamodel("EvolvedGraph")
    m = Model(mm)
    g = m.create("Graph", "g")
    m.create("Node", "a", {"text": "a"}, parent=g, ref="gcs")
    m.create("Edge", "e", refs={"src": ["a"]}, parent=g, ref="gcs")
    assert [e.id for e in elements_of_class(m, "GraphComponent", True)] == ["a", "e"]
    assert elements_of_class(m, "GraphComponent", False) == []


def test_key_lookup(g1):
    assert key_lookup(g1, "Node", "name", "n3").id == "n3"
    assert key_lookup(g1, "Node", "name", "n99") is None
    assert key_lookup(g1, "Node", "xmi:id", "n5").id == "n5"
    assert key_lookup(g1, "Node", "xmi:id", "e1") is None  # wrong class


def test_ambiguous_key(corpus):
    m = Model(corpus.metamodel("HelloWorld"))
    m.create("Greeting", "a", {"text": "Hello"})
    m.create("Greeting", "b", {"text": "Hello"})
    with pytest.raises(AmbiguousKeyError):
        key_lookup(m, "Greeting", "text", "Hello")


def test_undeclared_attribute_diagnostic(g1):
    g1.get("n2").attrs["color"] = "red"
    diags = validate_model(g1)
    assert len(diags) == 1
    assert diags[0].element == "n2" and "color" in diags[0].rule


def test_wrong_attribute_type_diagnostic(g1):
    g1.get("n2").attrs["name"] = 7
    assert len(validate_model(g1)) == 1


def test_dangling_edge_is_valid(g2):
    assert validate_model(g2) == []


def test_missing_target_diagnostic(g1):
    g1.get("e1").refs["trg"] = ["ghost"]
    assert [d.element for d in validate_model(g1)] == ["e1"]


def test_metamodel_mismatch(g1, corpus):
    diags = validate_model(g1, corpus.metamodel("HelloWorld"))
    assert len(diags) == 1


def test_duplicate_id_rejected(g1):
    with pytest.raises(ModelError, match="duplicate"):
        g1.create("Node", "n1", {"name": "again"}, parent="graph1", ref="nodes")


def test_remove_cascades_and_scrubs(g1):
    gone = g1.remove(["n1"])
    assert gone == ["n1"]
    assert g1.get("e1").refs.get("src") is None
    assert g1.get("e3").refs.get("trg") is None
    assert validate_model(g1) == []
    gone = g1.remove("graph1")
    assert len(gone) == 1 + 7 + 7 and len(g1) == 0


def test_copy_is_independent(g1):
    c = g1.copy()
    c.set_attr(c.get("n1"), "name", "changed")
    assert g1.get("n1").attrs["name"] == "n1"
    assert c.structure() != g1.structure()


def test_document_order_is_stable_through_serialization(g1, simple_graph_mm):
    order = [e.id for e in g1.document_order()]
    assert order == [e.id for e in g1.document_order()]
    again = read_model(write_model(g1), simple_graph_mm)
    assert [e.id for e in again.document_order()] == order


def test_navigation_helpers(g1):
    e1 = g1.get("e1")
    assert [n.id for n in e1.targets("src")] == ["n1"]
    assert e1.key("xmi:id") == "e1"
    assert g1.container_of("e1") == ("graph1", "edges")


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), name=st.sampled_from(["name", "xmi:id"]))
def test_key_lookup_never_returns_a_non_match(seed, name, simple_graph_mm):
    m = random_graph(random.Random(seed), simple_graph_mm)
    for probe in ["v0", "v3", "x1", "zzz"]:
        hit = key_lookup(m, "Node", name, probe)
        if hit is not None:
            assert m.metamodel.is_subclass(hit.cls, "Node")
            assert hit.key(name) == probe
