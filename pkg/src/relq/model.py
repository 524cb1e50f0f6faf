"""In-memory models: identity-bearing elements with attributes and references.

Reference values are stored as ordered lists of element ids. Containment
references additionally define the ownership forest; the model keeps a
child -> (parent, reference) index so containment stays a forest under
mutation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Iterator

from .errors import AmbiguousKeyError, ModelError
from .metamodel import Metamodel

ID = "xmi:id"


@dataclass(eq=False)
class Element:
    id: str
    cls: str
    attrs: dict[str, Any] = field(default_factory=dict)
    refs: dict[str, list[str]] = field(default_factory=dict)
    model: "Model | None" = field(default=None, repr=False)

    def __repr__(self) -> str:
        return f"<{self.cls} {self.id}>"

    def targets(self, ref: str) -> list["Element"]:
        """Resolve a reference to elements; ids missing from the model are skipped."""
        assert self.model is not None
        out = []
        for rid in self.refs.get(ref, ()):
            el = self.model.elements.get(rid)
            if el is not None:
                out.append(el)
        return out

    def key(self, prop: str) -> Any:
        return self.id if prop == ID else self.attrs.get(prop)


@dataclass(frozen=True)
class Diagnostic:
    element: str
    rule: str

    def __str__(self) -> str:
        return f"{self.element}: {self.rule}"


class Model:
    def __init__(self, metamodel: Metamodel):
        self.metamodel = metamodel
        self.elements: dict[str, Element] = {}
        self.roots: list[str] = []
        self._container: dict[str, tuple[str, str]] = {}
        self._order: list[Element] | None = None

    @property
    def metamodel_name(self) -> str:
        return self.metamodel.name

    def __len__(self) -> int:
        return len(self.elements)

    def __contains__(self, eid: str) -> bool:
        return eid in self.elements

    def __getitem__(self, eid: str) -> Element:
        return self.elements[eid]

    def get(self, eid: str) -> Element | None:
        return self.elements.get(eid)

    def _touch(self) -> None:
        self._order = None

    # -- mutation -----------------------------------------------------------

    def create(
        self,
        cls: str,
        eid: str,
        attrs: dict[str, Any] | None = None,
        refs: dict[str, list[str]] | None = None,
        parent: Element | str | None = None,
        ref: str | None = None,
    ) -> Element:
        """Create an element; with ``parent`` it is appended to ``parent.ref``, else it becomes a root."""
        el = Element(eid, cls, dict(attrs or {}), {k: list(v) for k, v in (refs or {}).items()})
        self.add(el, parent, ref)
        return el

    def add(self, el: Element, parent: Element | str | None = None, ref: str | None = None) -> Element:
        if el.id in self.elements:
            raise ModelError(f"duplicate element id {el.id!r}")
        self.metamodel.require_class(el.cls)
        el.model = self
        self.elements[el.id] = el
        if parent is None:
            self.roots.append(el.id)
        else:
            pid = parent if isinstance(parent, str) else parent.id
            self._attach(el.id, pid, ref)
        self._touch()
        return el

    def _attach(self, eid: str, pid: str, ref: str | None) -> None:
        p = self.elements[pid]
        rdef = self.metamodel.reference(p.cls, ref) if ref else None
        if rdef is None or not rdef.containment:
            raise ModelError(f"{p.cls}.{ref} is not a containment reference")
        lst = p.refs.setdefault(ref, [])
        if not rdef.many and lst:
            raise ModelError(f"{pid}.{ref} already holds {lst[0]!r}")
        lst.append(eid)
        self._container[eid] = (pid, ref)

    def container_of(self, eid: str) -> tuple[str, str] | None:
        return self._container.get(eid)

    def detach(self, eid: str) -> None:
        """Unlink an element from its container (or the root list) without deleting it."""
        owner = self._container.pop(eid, None)
        if owner is None:
            if eid in self.roots:
                self.roots.remove(eid)
        else:
            pid, ref = owner
            self.elements[pid].refs[ref].remove(eid)
        self._touch()

    def move(self, eid: str, parent: Element | str | None, ref: str | None = None) -> None:
        self.detach(eid)
        if parent is None:
            self.roots.append(eid)
        else:
            self._attach(eid, parent if isinstance(parent, str) else parent.id, ref)
        self._touch()

    def set_attr(self, el: Element, name: str, value: Any) -> None:
        if value is None:
            el.attrs.pop(name, None)
        else:
            el.attrs[name] = value

    def set_refs(self, el: Element, name: str, ids: list[str]) -> None:
        """Assign a non-containment reference."""
        rdef = self.metamodel.reference(el.cls, name)
        if rdef is not None and rdef.containment:
            raise ModelError(f"use attach/detach for containment reference {el.cls}.{name}")
        if ids:
            el.refs[name] = list(ids)
        else:
            el.refs.pop(name, None)

    def descendants(self, eid: str) -> list[str]:
        """Containment descendants of ``eid`` in pre-order (``eid`` excluded)."""
        out = []
        el = self.elements[eid]
        for rname, rdef in self.metamodel.references(el.cls).items():
            if rdef.containment:
                for cid in el.refs.get(rname, ()):
                    out.append(cid)
                    out.extend(self.descendants(cid))
        return out

    def remove(self, eids: list[str] | str) -> list[str]:
        """Delete elements with their containment subtrees and scrub incoming idrefs.

        Returns the ids actually deleted, in pre-order per requested id.
        """
        if isinstance(eids, str):
            eids = [eids]
        doomed: list[str] = []
        for eid in eids:
            if eid not in self.elements:
                raise ModelError(f"cannot remove unknown element {eid!r}")
            for x in [eid, *self.descendants(eid)]:
                if x not in doomed:
                    doomed.append(x)
        gone = set(doomed)
        for eid in doomed:
            if eid in self.elements and eid not in self._container and eid in self.roots:
                self.roots.remove(eid)
        for eid in doomed:
            self._container.pop(eid, None)
            self.elements.pop(eid).model = None
        for el in self.elements.values():
            for rname in list(el.refs):
                kept = [r for r in el.refs[rname] if r not in gone]
                if kept:
                    el.refs[rname] = kept
                else:
                    del el.refs[rname]
        self._touch()
        return doomed

    # -- queries ------------------------------------------------------------

    def document_order(self) -> list[Element]:
        """Containment pre-order over roots; children grouped by reference declaration order."""
        if self._order is None:
            order: list[Element] = []

            def visit(eid: str) -> None:
                el = self.elements[eid]
                order.append(el)
                for rname, rdef in self.metamodel.references(el.cls).items():
                    if rdef.containment:
                        for cid in el.refs.get(rname, ()):
                            visit(cid)

            for rid in self.roots:
                visit(rid)
            self._order = order
        return self._order

    def __iter__(self) -> Iterator[Element]:
        return iter(self.document_order())

    def root_elements(self) -> list[Element]:
        return [self.elements[r] for r in self.roots]

    def elements_of_class(self, cls: str, include_subclasses: bool = True) -> list[Element]:
        self.metamodel.require_class(cls)
        if include_subclasses:
            ok = set(self.metamodel.subclasses(cls))
            return [e for e in self.document_order() if e.cls in ok]
        return [e for e in self.document_order() if e.cls == cls]

    def key_lookup(self, cls: str, key: str, value: Any) -> Element | None:
        if key != ID and key not in self.metamodel.attributes(cls):
            raise ModelError(f"{key!r} is not a key property of {cls}")
        if key == ID:
            el = self.elements.get(value)
            if el is not None and self.metamodel.is_subclass(el.cls, cls):
                return el
            return None
        hits = [e for e in self.elements_of_class(cls) if e.attrs.get(key) == value]
        if len(hits) > 1:
            raise AmbiguousKeyError(
                f"ambiguous key {cls}.{key}={value!r}: {', '.join(e.id for e in hits)}"
            )
        return hits[0] if hits else None

    def copy(self) -> "Model":
        new = Model(self.metamodel)
        for e in self.elements.values():
            c = Element(e.id, e.cls, dict(e.attrs), {k: list(v) for k, v in e.refs.items()}, new)
            new.elements[c.id] = c
        new.roots = list(self.roots)
        new._container = dict(self._container)
        return new

    def structure(self) -> tuple:
        """Comparable snapshot: roots plus (id, class, attrs, refs) in document order."""
        return (
            self.metamodel.name,
            tuple(self.roots),
            tuple(
                (e.id, e.cls, tuple(sorted(e.attrs.items())), tuple(sorted((k, tuple(v)) for k, v in e.refs.items() if v)))
                for e in self.document_order()
            ),
        )


def elements_of_class(m: Model, cls: str, include_subclasses: bool = False) -> list[Element]:
    return m.elements_of_class(cls, include_subclasses)


def key_lookup(m: Model, cls: str, key: str, value: Any) -> Element | None:
    return m.key_lookup(cls, key, value)


_PY_TYPES = {"string": str, "int": int, "bool": bool}


def _type_ok(value: Any, prim: str) -> bool:
    if prim == "int":
        return isinstance(value, int) and not isinstance(value, bool)
    return isinstance(value, _PY_TYPES[prim])


def validate_model(m: Model, mm: Metamodel | None = None) -> list[Diagnostic]:
    """Check ``m`` against ``mm`` (defaults to the model's own metamodel)."""
    mm = mm or m.metamodel
    diags: list[Diagnostic] = []
    if m.metamodel.name != mm.name:
        diags.append(Diagnostic("<model>", f"metamodel {m.metamodel.name} is not {mm.name}"))
        return diags
    owners: dict[str, list[str]] = {}
    for el in m.elements.values():
        if not mm.has_class(el.cls):
            diags.append(Diagnostic(el.id, f"undeclared class {el.cls}"))
            continue
        if mm.classes[el.cls].abstract:
            diags.append(Diagnostic(el.id, f"instance of abstract class {el.cls}"))
        attrs = mm.attributes(el.cls)
        for name, value in el.attrs.items():
            if name not in attrs:
                diags.append(Diagnostic(el.id, f"undeclared attribute {el.cls}.{name}"))
            elif not _type_ok(value, attrs[name]):
                diags.append(Diagnostic(el.id, f"{el.cls}.{name} expects {attrs[name]}, got {value!r}"))
        refs = mm.references(el.cls)
        for name, ids in el.refs.items():
            rdef = refs.get(name)
            if rdef is None:
                diags.append(Diagnostic(el.id, f"undeclared reference {el.cls}.{name}"))
                continue
            if not rdef.many and len(ids) > 1:
                diags.append(Diagnostic(el.id, f"{el.cls}.{name} holds {len(ids)} values, upper bound 1"))
            for rid in ids:
                tgt = m.elements.get(rid)
                if tgt is None:
                    diags.append(Diagnostic(el.id, f"{el.cls}.{name} refers to missing id {rid!r}"))
                elif not mm.is_subclass(tgt.cls, rdef.target):
                    diags.append(Diagnostic(el.id, f"{el.cls}.{name} target {rid} is {tgt.cls}, not {rdef.target}"))
                if rdef.containment:
                    owners.setdefault(rid, []).append(el.id)
        for name, rdef in refs.items():
            if rdef.lower >= 1 and not el.refs.get(name):
                diags.append(Diagnostic(el.id, f"{el.cls}.{name} requires at least one value"))
    for cid, parents in owners.items():
        if len(parents) > 1:
            diags.append(Diagnostic(cid, f"contained by several elements: {', '.join(parents)}"))
        if cid in m.roots:
            diags.append(Diagnostic(cid, "is both a root and contained"))
    seen = {e.id for e in m.document_order()}
    for eid in m.elements:
        if eid not in seen:
            diags.append(Diagnostic(eid, "unreachable from roots (containment cycle or orphan)"))
    return diags
