from __future__ import annotations

import random

import pytest
from hypothesis import given, settings, strategies as st

from conftest import edge_pairs, random_graph
from relq.engine import Execution, execute, execute_in_place, match_domain
from relq.errors import EngineError
from relq.model import Model, validate_model
from relq.tdsl import parse_transformation
from relq.xmi import write_model

GRAPH_CONFIG = """
  config {
    source SimpleGraph key xmi:id as msrc;
    target SimpleGraph key xmi:id as mtrg;
  }
"""


def run(corpus, task_id, source, params=None, target=None):
    t = corpus.transformation(task_id)
    return execute(t, source, params, corpus.metamodel(t.config.target_metamodel), target)


def test_hello_world(corpus, g1):
    out, report = run(corpus, "hello", g1)
    greetings = out.elements_of_class("Greeting")
    assert len(greetings) == 1 and greetings[0].attrs == {"text": "Hello World"}
    assert report.created == 1 and report.fired == {"GraphToGreeting": 1}


def test_reverse_swaps_every_edge(corpus, g1):
    out, _ = run(corpus, "reverse", g1)
    assert len(out.elements_of_class("Node")) == 8
    before = dict(zip((e.id for e in g1.elements_of_class("Edge")), edge_pairs(g1)))
    after = dict(zip((e.id for e in out.elements_of_class("Edge")), edge_pairs(out)))
    assert after == {eid: (t, s) for eid, (s, t) in before.items()}
    assert after["e7"] == ("n6", "n6")


def test_reverse_dangling(corpus, g2):
    out, _ = run(corpus, "reverse", g2)
    assert out.get("d1").refs == {"trg": ["m1"]}
    assert out.get("d2").refs == {"src": ["m2"]}
    assert validate_model(out) == []


def test_migrate_empty_graph(corpus, simple_graph_mm):
    m = Model(simple_graph_mm)
    m.create("Graph", "g")
    out, _ = run(corpus, "migrate", m)
    assert [e.cls for e in out.document_order()] == ["Graph"]
    assert out.get("g").refs.get("gcs") is None


def test_migrate_preserves_counts(corpus, g1):
    out, _ = run(corpus, "migrate", g1)
    assert len(out.elements_of_class("Node")) == 8
    assert len(out.elements_of_class("Edge")) == 7
    assert out.get("n4").attrs == {"text": "n4"}


def test_topology_links(corpus, g1):
    out, _ = run(corpus, "topology", g1)
    assert out.get("n3").refs["linksTo"] == ["n1", "n4"]
    assert out.get("n6").refs["linksTo"] == ["n6"]
    assert "linksTo" not in out.get("n7").refs


def test_delete_node(corpus, g1):
    t = corpus.transformation("delete")
    result, diff, report = execute_in_place(t, g1)
    assert diff.summary() == [("remove", "n1"), ("remove", "e1"), ("remove", "e3")]
    assert len(result.elements_of_class("Node")) == 7
    assert len(result.elements_of_class("Edge")) == 5
    assert report.removed == 3 and report.created == 0
    assert "n1" in g1  # the input is not modified


def test_delete_without_match(corpus, g2):
    t = corpus.transformation("delete")
    result, diff, _ = execute_in_place(t, g2)
    assert len(diff) == 0
    assert write_model(result) == write_model(g2)


def test_delete_param_override(corpus, g1):
    t = corpus.transformation("delete")
    _result, diff, _ = execute_in_place(t, g1, {"nodeName": "n6"})
    assert diff.summary() == [("remove", "n6"), ("remove", "e7")]


def test_param_type_mismatch(corpus, g1):
    with pytest.raises(EngineError, match="nodeName"):
        execute_in_place(corpus.transformation("delete"), g1, {"nodeName": 5})


def test_unknown_param(corpus, g1):
    with pytest.raises(EngineError, match="unknown parameter"):
        execute_in_place(corpus.transformation("delete"), g1, {"colour": "red"})


def test_wrong_entry_point(corpus, g1):
    with pytest.raises(EngineError):
        execute(corpus.transformation("delete"), g1)
    with pytest.raises(EngineError):
        execute_in_place(corpus.transformation("reverse"), g1)


def test_count_where_clause(corpus, g1):
    out, report = run(corpus, "count", g1)
    entries = [(e.attrs["description"], e.attrs["value"]) for e in out.elements_of_class("IntResult")]
    assert entries[0] == ("The number of nodes", 8)
    assert report.fired == {"GraphToResult": 1, "ShowIntResult": 5}


def test_count_on_dangling_graph(corpus, g2):
    out, _ = run(corpus, "count", g2)
    values = [e.attrs["value"] for e in out.elements_of_class("IntResult")]
    assert values == [2, 0, 0, 0, 2]


def test_match_domain_looping_edge(g1):
    t = parse_transformation(
        "transformation T {" + GRAPH_CONFIG + """
          top relation Loop {
            domain msrc e:Edge { src = v; trg = v };
            domain mtrg e2:Edge {};
          }
        }"""
    )
    hits = match_domain(t.relation("Loop").source, g1, t)
    assert [(b["e"].id, b["v"].id) for b in hits] == [("e7", "n6")]
    assert match_domain(t.relation("Loop").source, Model(g1.metamodel), t) == []


def test_match_domain_document_order(g1):
    t = parse_transformation(
        "transformation T {" + GRAPH_CONFIG + "top relation N { domain msrc n:Node {}; domain mtrg m:Node {}; } }"
    )
    assert [b["n"].id for b in match_domain(t.relation("N").source, g1, t)] == [f"n{i}" for i in range(1, 9)]


def test_match_domain_with_seed(g1):
    t = parse_transformation(
        "transformation T {" + GRAPH_CONFIG
        + "top relation N { domain msrc n:Node { name = nm }; domain mtrg m:Node { name = nm }; } }"
    )
    hits = match_domain(t.relation("N").source, g1, t, {"nm": "n5"})
    assert [b["n"].id for b in hits] == ["n5"]


HELLO_TWICE = """
transformation Twice {
  config {
    source SimpleGraph key xmi:id as g;
    target HelloWorld key text as h;
  }
  top relation A { domain g x:Graph {}; domain h y:Greeting { text = "Hello World" }; }
  top relation B { domain g x:Graph {}; domain h y:Greeting { text = "Hello World" }; }
}
"""


def test_key_reuse(corpus, g1):
    t = parse_transformation(HELLO_TWICE)
    out, report = execute(t, g1, None, corpus.metamodel("HelloWorld"))
    assert len(out.elements_of_class("Greeting")) == 1
    assert report.created == 1 and report.fired == {"A": 1, "B": 1}


def test_key_collision_in_target(corpus, g1):
    mm = corpus.metamodel("HelloWorld")
    target = Model(mm)
    target.create("Greeting", "a", {"text": "Hello World"})
    target.create("Greeting", "b", {"text": "Hello World"})
    with pytest.raises(EngineError, match="ambiguous key"):
        execute(parse_transformation(HELLO_TWICE), g1, None, mm, target)


def test_id_copy_rule(corpus, g1):
    out, _ = run(corpus, "reverse", g1)
    assert out.get("n3").cls == "Node" and out.get("graph1").cls == "Graph"


def test_fresh_ids_when_keys_differ(corpus, g1):
    out, _ = run(corpus, "count", g1)
    assert [e.id for e in out.document_order()] == ["ResultSet_1"] + [f"IntResult_{i}" for i in range(1, 6)]


def test_recursive_call_terminates(g1):
    t = parse_transformation(
        "transformation T {" + GRAPH_CONFIG + """
          top relation Start {
            domain msrc g:Graph {};
            domain mtrg g2:Graph {};
            where { call Again(g, g2, "x"); }
          }
          relation Again(s: string) {
            domain msrc g:Graph {};
            domain mtrg g2:Graph {};
            where { call Again(g, g2, s); }
          }
        }"""
    )
    out, report = execute(t, g1)
    assert report.fired == {"Start": 1, "Again": 1}
    assert len(out) == 1


def test_run_query(corpus, g1):
    t = corpus.transformation("count")
    run_ = Execution(t, g1, Model(corpus.metamodel("Result")))
    assert [n.id for n in run_.run_query(t.query("GetLinkedNodes"), [g1.get("n3")])] == ["n1", "n4"]
    topo = corpus.transformation("topology")
    run2 = Execution(topo, g1, Model(corpus.metamodel("MoreEvolvedGraph")))
    assert run2.run_query(topo.query("GetTrgNodes"), [g1.get("n7")]) == []


def test_query_over_empty_model(corpus, simple_graph_mm):
    m = Model(simple_graph_mm)
    g = m.create("Graph", "g")
    t = corpus.transformation("count")
    run_ = Execution(t, m, Model(corpus.metamodel("Result")))
    assert run_.run_query(t.query("GetNodesNumber"), [g]) == 0
    assert run_.run_query(t.query("GetIsolatedNodes"), [g]) == 0


def test_report_formats(corpus, g1):
    _out, report = run(corpus, "reverse", g1)
    line = report.summary()
    assert "\n" not in line and "created=16" in line
    fields = dict(kv.split("=", 1) for kv in report.to_text().splitlines())
    assert fields["created"] == "16" and fields["fired.EdgeToEdge"] == "7"
    assert float(fields["elapsed_ms"]) >= 0


def test_determinism(corpus, g1):
    a, _ = run(corpus, "transitive", g1)
    b, _ = run(corpus, "transitive", g1)
    assert write_model(a) == write_model(b)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_migration_conservation(seed, corpus, simple_graph_mm):
    m = random_graph(random.Random(seed), simple_graph_mm, dangling=0.2)
    out, _ = run(corpus, "migrate", m)
    assert len(out.elements_of_class("Node")) == len(m.elements_of_class("Node"))
    assert len(out.elements_of_class("Edge")) == len(m.elements_of_class("Edge"))
    topo, _ = run(corpus, "topology", m)
    links = sum(len(n.refs.get("linksTo", [])) for n in topo.elements_of_class("Node"))
    connected = sum(1 for s, t in edge_pairs(m) if s and t)
    assert links == connected
