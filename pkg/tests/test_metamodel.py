from __future__ import annotations

import pytest

from relq.errors import MetamodelError, SyntaxErrorAt
from relq.metamodel import MANY, parse_metamodel


def test_simple_graph_shape(simple_graph_mm):
    mm = simple_graph_mm
    assert mm.name == "SimpleGraph"
    assert set(mm.classes) == {"Graph", "Node", "Edge"}
    nodes = mm.reference("Graph", "nodes")
    assert nodes.containment and nodes.many and nodes.target == "Node"
    src = mm.reference("Edge", "src")
    assert not src.containment and src.lower == 0 and src.upper == 1
    assert mm.attribute("Node", "name") == "string"


def test_empty_class_list():
    mm = parse_metamodel("metamodel Empty\n")
    assert mm.name == "Empty" and mm.classes == {}


def test_unknown_reference_target():
    with pytest.raises(MetamodelError, match="unknown reference target"):
        parse_metamodel("metamodel M\nclass A\n  ref g: Ghost\n")


def test_duplicate_class():
    with pytest.raises(MetamodelError, match="duplicate class"):
        parse_metamodel("metamodel M\nclass A\nclass A\n")


def test_cyclic_inheritance():
    with pytest.raises(MetamodelError, match="cyclic"):
        parse_metamodel("metamodel M\nclass A extends B\nclass B extends A\n")


def test_inherited_duplicate_property():
    text = "metamodel M\nclass A\n  attr x: string\nclass B extends A\n  attr x: int\n"
    with pytest.raises(MetamodelError, match="duplicate"):
        parse_metamodel(text)


def test_syntax_error_has_location():
    with pytest.raises(SyntaxErrorAt) as info:
        parse_metamodel("metamodel M\nclass A\n  attribute x string\n", "bad.mm")
    assert info.value.line == 3
    assert "bad.mm:3" in str(info.value)


def test_inheritance_queries(corpus):
    mm = corpus.metamodel("EvolvedGraph")
    assert mm.classes["GraphComponent"].abstract
    assert mm.is_subclass("Node", "GraphComponent")
    assert not mm.is_subclass("GraphComponent", "Node")
    assert sorted(mm.subclasses("GraphComponent")) == ["Edge", "GraphComponent", "Node"]
    gcs = mm.reference("Graph", "gcs")
    assert gcs.target == "GraphComponent" and gcs.containment


@pytest.mark.parametrize(
    "mult, bounds",
    [("", (0, 1)), ("[1]", (1, 1)), ("[0..1]", (0, 1)), ("[*]", (0, MANY)), ("[1..*]", (1, MANY))],
)
def test_multiplicities(mult, bounds):
    mm = parse_metamodel(f"metamodel M\nclass A\n  ref r: A {mult}\n")
    r = mm.reference("A", "r")
    assert (r.lower, r.upper) == bounds


def test_comments_and_type_aliases():
    mm = parse_metamodel("# header\nmetamodel M\nclass A  # trailing\n  attr n: integer\n  attr b: boolean\n")
    assert mm.attributes("A") == {"n": "int", "b": "bool"}


def test_all_corpus_metamodels_parse(corpus):
    names = sorted(p.stem for p in corpus.path("metamodels").glob("*.mm"))
    assert names == [
        "EvolvedGraph", "HelloWorld", "HelloWorldExt", "HtmlMetaModel", "MoreEvolvedGraph", "Result", "SimpleGraph",
    ]
    for name in names:
        assert corpus.metamodel(name).name == name
