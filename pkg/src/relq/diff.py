"""Difference models: insert/remove/replace records applied to a model."""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import DiffConflictError, EngineError, ModelError
from .model import Element, Model

KINDS = ("insert", "remove", "replace")


@dataclass
class DiffOp:
    kind: str
    target_id: str
    payload: Element | None = None
    container: tuple[str, str] | None = None  # (parent id, containment reference) for inserts

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown diff kind {self.kind!r}")
        if self.kind != "remove" and self.payload is None:
            raise ValueError(f"{self.kind} of {self.target_id} needs a payload")

    def __str__(self) -> str:
        return f"{self.kind} {self.target_id}"


@dataclass
class DiffModel:
    ops: list[DiffOp] = field(default_factory=list)

    def __iter__(self):
        return iter(self.ops)

    def __len__(self) -> int:
        return len(self.ops)

    def summary(self) -> list[tuple[str, str]]:
        return [(op.kind, op.target_id) for op in self.ops]

    def check_conflicts(self) -> None:
        kinds: dict[str, set[str]] = {}
        for op in self.ops:
            kinds.setdefault(op.target_id, set()).add(op.kind)
        for eid, ks in kinds.items():
            if len(ks) > 1:
                raise DiffConflictError(f"conflicting diff operations on {eid}: {', '.join(sorted(ks))}")


def apply_diff(m: Model, d: DiffModel) -> Model:
    """Return a copy of ``m`` with ``d`` applied; removes run last and scrub incoming idrefs."""
    d.check_conflicts()
    out = m.copy()
    mm = out.metamodel
    removes: list[str] = []
    for op in d.ops:
        if op.kind == "insert":
            if op.target_id in out:
                raise EngineError(f"insert with colliding id {op.target_id!r}")
            src = op.payload
            assert src is not None
            refs = {
                k: list(v)
                for k, v in src.refs.items()
                if v and not (mm.reference(src.cls, k) and mm.reference(src.cls, k).containment)
            }
            el = Element(op.target_id, src.cls, dict(src.attrs), refs)
            try:
                if op.container is None:
                    out.add(el)
                else:
                    out.add(el, op.container[0], op.container[1])
            except (ModelError, KeyError) as exc:
                raise EngineError(f"cannot insert {op.target_id}: {exc}") from None
        elif op.kind == "replace":
            el = out.get(op.target_id)
            if el is None:
                raise EngineError(f"replace of unknown id {op.target_id!r}")
            src = op.payload
            assert src is not None
            el.attrs = dict(src.attrs)
            for name, rdef in mm.references(el.cls).items():
                if rdef.containment:
                    continue
                ids = src.refs.get(name)
                if ids:
                    el.refs[name] = list(ids)
                else:
                    el.refs.pop(name, None)
        else:
            if op.target_id not in out:
                raise EngineError(f"remove of unknown id {op.target_id!r}")
            if op.target_id not in removes:
                removes.append(op.target_id)
    present = [r for r in removes if r in out]
    if present:
        out.remove(present)
    return out
