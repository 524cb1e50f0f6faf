"""Native functions callable from transformations.

``GetCircleNodes`` follows the recursive construction used for counting
k-circles: extend a path from its start node while the remaining budget
is positive, and emit a key once the budget is spent and the last node
links back to the start. ``GetAllCircleNodes`` unions those keys over all
nodes of a graph and counts the distinct ones.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable, Sequence

from .model import Element, Model

KEY_SEPARATOR = "|"


def linked_nodes(m: Model | None, nd: Element) -> list[Element]:
    """Targets of every edge whose ``src`` is ``nd``, in edge order; dangling targets skipped."""
    m = m or nd.model
    out = []
    for edge in m.elements_of_class("Edge", True):
        if edge.refs.get("src") == [nd.id]:
            out.extend(edge.targets("trg"))
    return out


def _adjacency(m: Model) -> dict[str, list[Element]]:
    adj: dict[str, list[Element]] = {}
    for edge in m.elements_of_class("Edge", True):
        src = edge.refs.get("src")
        if src:
            adj.setdefault(src[0], []).extend(edge.targets("trg"))
    return adj


def canonical_key(path: Sequence[Element], canonical: str = "rotation") -> str:
    """Key identifying a cycle independently of where the walk started.

    ``rotation`` keeps the visiting order, rotated so the smallest id comes
    first, so the two orientations of a triangle stay distinct. ``nodeset``
    sorts the member ids and identifies every cycle over the same nodes.
    """
    ids = [n.id for n in path]
    if canonical == "nodeset":
        return KEY_SEPARATOR.join(sorted(ids))
    if canonical != "rotation":
        raise ValueError(f"unknown canonical form {canonical!r}")
    start = ids.index(min(ids))
    return KEY_SEPARATOR.join(ids[start:] + ids[:start])


def circle_nodes(
    m: Model | None,
    nd: Element,
    path: list[Element],
    counter: int,
    linked: Callable[[Element], list[Element]] | None = None,
    canonical: str = "rotation",
) -> list[str]:
    if linked is None:
        linked = lambda n: linked_nodes(m, n)  # noqa: E731
    out: list[str] = []
    for cnd in linked(nd):
        if counter == 0 and path[0] is cnd:
            out.append(canonical_key(path, canonical))
        elif counter > 0 and all(p is not cnd for p in path):
            out.extend(circle_nodes(m, cnd, path + [cnd], counter - 1, linked, canonical))
    return out


def all_circle_count(
    m: Model,
    k: int,
    nodes: list[Element] | None = None,
    linked: Callable[[Element], list[Element]] | None = None,
    canonical: str = "rotation",
) -> int:
    """Number of distinct directed simple cycles through exactly ``k`` nodes."""
    if k < 2:
        raise ValueError(f"circle length must be at least 2, got {k}")
    if nodes is None:
        nodes = m.elements_of_class("Node", True)
    if linked is None:
        adjacency = _adjacency(m)
        linked = lambda n: adjacency.get(n.id, [])  # noqa: E731
    keys: list[str] = []
    for n in nodes:
        keys.extend(circle_nodes(m, n, [n], k - 1, linked, canonical))
    return len(set(keys))


# -- registry -----------------------------------------------------------------


@dataclass(frozen=True)
class NativeFn:
    name: str
    param_types: tuple[str, ...]
    result_type: str
    impl: Callable[..., Any]

    @property
    def arity(self) -> int:
        return len(self.param_types)


class InvocationContext:
    """What a native sees of the running transformation: a name-based invoker."""

    def __init__(self, invoke: Callable[[str, list[Any]], Any]):
        self._invoke = invoke

    def call(self, name: str, *args: Any) -> Any:
        return self._invoke(name, list(args))


def _linked_via(ctx: InvocationContext) -> Callable[[Element], list[Element]]:
    # Prefer the transformation's own GetLinkedNodes query when it defines one.
    def linked(n: Element) -> list[Element]:
        return ctx.call("GetLinkedNodes", n)

    return linked


def _get_linked_nodes(ctx: InvocationContext, nd: Element) -> list[Element]:
    return linked_nodes(None, nd)


def _get_circle_nodes(ctx: InvocationContext, nd: Element, path: list[Element], counter: int) -> list[str]:
    path = path if isinstance(path, list) else [path]
    return circle_nodes(None, nd, list(path), counter, _linked_via(ctx))


def _get_all_circle_nodes(ctx: InvocationContext, gp: Element) -> int:
    nodes = gp.targets("nodes")
    keys: list[str] = []
    for n in nodes:
        keys.extend(ctx.call("GetCircleNodes", n, [n], 2))
    return len(set(keys))


NATIVES: dict[str, NativeFn] = {
    fn.name: fn
    for fn in (
        NativeFn("GetLinkedNodes", ("Node",), "Collection(Node)", _get_linked_nodes),
        NativeFn("GetCircleNodes", ("Node", "Collection(Node)", "int"), "Collection(string)", _get_circle_nodes),
        NativeFn("GetAllCircleNodes", ("Graph",), "int", _get_all_circle_nodes),
    )
}
