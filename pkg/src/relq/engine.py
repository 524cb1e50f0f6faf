"""Transformation execution.

Top-level relations fire in declaration order over every source match in
document order. A match binds the source pattern variables, the when
clause filters it, where-variables are computed, the target pattern is
enforced (reusing an element with an equal target key when one exists),
and finally the where-clause relation calls run. Every firing is recorded
in a trace keyed by relation name and bindings; a repeated key is a no-op,
which makes recursive calls terminate.

In-place runs enforce into a scratch copy of the model while matching the
untouched original, record the resulting edits as a difference model, and
then apply that model to the original.
"""

from __future__ import annotations

import time
from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Iterator, Mapping

from . import expr as ex
from .diff import DiffModel, DiffOp, apply_diff
from .errors import AmbiguousKeyError, EngineError, EvalError, ModelError
from .metamodel import Metamodel
from .model import ID, Element, Model, validate_model
from .stdlib import NATIVES, InvocationContext
from .tdsl import DomainPattern, ObjectTemplate, Query, Relation, RelationCall, Slot, Transformation, VarDef

ROOT = "$root"  # hidden binding of the matched source domain root


@dataclass
class ExecutionReport:
    transformation: str
    fired: dict[str, int] = field(default_factory=dict)
    created: int = 0
    removed: int = 0
    replaced: int = 0
    elapsed_ms: float = 0.0

    def summary(self) -> str:
        fired = " ".join(f"{k}={v}" for k, v in self.fired.items())
        return (
            f"{self.transformation}: fired [{fired}] created={self.created} "
            f"removed={self.removed} replaced={self.replaced} time={self.elapsed_ms:.2f}ms"
        )

    def to_text(self) -> str:
        lines = [f"transformation={self.transformation}"]
        lines += [f"fired.{k}={v}" for k, v in self.fired.items()]
        lines += [
            f"created={self.created}",
            f"removed={self.removed}",
            f"replaced={self.replaced}",
            f"elapsed_ms={self.elapsed_ms:.3f}",
        ]
        return "\n".join(lines)


def coerce_param(value: Any, ptype: str, name: str) -> Any:
    """Convert a (possibly textual) parameter value to its declared primitive type."""
    if ptype == "string":
        if isinstance(value, str):
            return value
    elif ptype in ("int", "integer"):
        if isinstance(value, int) and not isinstance(value, bool):
            return value
        if isinstance(value, str):
            try:
                return int(value)
            except ValueError:
                pass
    elif ptype in ("bool", "boolean"):
        if isinstance(value, bool):
            return value
        if value in ("true", "false"):
            return value == "true"
    raise EngineError(f"parameter {name}: {value!r} is not a {ptype}")


def _freeze(v: Any) -> Any:
    if isinstance(v, Element):
        return ("e", id(v.model), v.id)
    if isinstance(v, list):
        return tuple(_freeze(x) for x in v)
    return v


def _safe_equal(a: Any, b: Any) -> bool:
    try:
        return ex.values_equal(a, b)
    except EvalError:
        return False


class _Globals(ex.Env):
    """Top-level scope: parameters plus live model aliases."""

    def __init__(self, params: Mapping[str, Any], aliases: Mapping[str, Model], invoke):
        super().__init__(params, invoke)
        self.aliases = dict(aliases)

    def lookup(self, name: str) -> Any:
        if name in self.aliases:
            return self.aliases[name].root_elements()
        return super().lookup(name)

    def __contains__(self, name: str) -> bool:
        return name in self.aliases or name in self.vars


class Execution:
    def __init__(
        self,
        t: Transformation,
        source: Model,
        target: Model,
        params: Mapping[str, Any] | None = None,
        in_place: bool = False,
    ):
        cfg = t.config
        if source.metamodel.name != cfg.source_metamodel:
            raise EngineError(f"source model is {source.metamodel.name}, expected {cfg.source_metamodel}")
        if target.metamodel.name != cfg.target_metamodel:
            raise EngineError(f"target model is {target.metamodel.name}, expected {cfg.target_metamodel}")
        self.t = t
        self.source = source
        self.target = target
        self.in_place = in_place
        self.id_copy = in_place or (cfg.source_key == ID and cfg.target_key == ID)
        self.params = self._bind_params(params or {})
        self.globals = _Globals(
            self.params, {cfg.source_name: source, cfg.target_name: target}, self.invoke
        )
        self.native_ctx = InvocationContext(self.invoke)
        self.trace: set[tuple] = set()
        self.image: dict[str, str] = {}
        self.fired: Counter[str] = Counter()
        self.created: list[str] = []
        self.replaced: list[str] = []
        self.removed: list[str] = []
        self.events: list[tuple[str, str]] = []
        self._counters: dict[str, int] = {}

    def _bind_params(self, given: Mapping[str, Any]) -> dict[str, Any]:
        declared = {p.name: p for p in self.t.config.params}
        for name in given:
            if name not in declared:
                raise EngineError(f"unknown parameter {name!r}")
        out = {}
        for p in self.t.config.params:
            if p.name in given:
                out[p.name] = coerce_param(given[p.name], p.type, p.name)
            elif p.default is not None:
                out[p.name] = coerce_param(p.default, p.type, p.name)
            else:
                raise EngineError(f"parameter {p.name!r} has no value")
        return out

    # -- functions ----------------------------------------------------------

    def invoke(self, name: str, args: list[Any]) -> Any:
        q = self.t.query(name)
        if q is not None:
            return self.run_query(q, args)
        fn = NATIVES.get(name)
        if fn is None:
            raise EvalError(f"unknown query or function {name!r}")
        if len(args) != fn.arity:
            raise EvalError(f"{name} takes {fn.arity} argument(s), got {len(args)}")
        return fn.impl(self.native_ctx, *args)

    def run_query(self, q: Query, args: list[Any]) -> Any:
        if len(args) != len(q.params):
            raise EvalError(f"query {q.name} takes {len(q.params)} argument(s), got {len(args)}")
        bindings = {}
        for p, a in zip(q.params, args):
            if p.type in ("string", "int", "bool"):
                a = coerce_param(a, p.type, f"{q.name}.{p.name}") if not isinstance(a, list) else a
            bindings[p.name] = a
        return ex.evaluate(q.body, self.globals.child(**bindings))

    # -- driver -------------------------------------------------------------

    def run(self) -> None:
        for rel in self.t.top_relations:
            if rel.primitives:
                raise EngineError(f"top-level relation {rel.name} cannot have primitive domains")
            for env in self._matches(rel, self.globals, None):
                self.fire(rel, env)

    def _matches(self, rel: Relation, base: ex.Env, root: Element | None) -> list[ex.Env]:
        if rel.source is None:
            envs = [base.child()]
        else:
            envs = list(self.match_domain(rel.source, self.source, base, root))
        return [env for env in envs if self._when(rel, env)]

    def _when(self, rel: Relation, env: ex.Env) -> bool:
        for e in rel.when:
            v = ex.evaluate(e, env)
            if not isinstance(v, bool):
                raise EngineError(f"relation {rel.name}: when-expression yielded {v!r}, not a boolean")
            if not v:
                return False
        return True

    def fire(self, rel: Relation, env: ex.Env, target_root: Element | None = None) -> bool:
        local = {k: v for k, v in env.flat().items() if k not in self.params}
        key = (
            rel.name,
            tuple(sorted((k, _freeze(v)) for k, v in local.items())),
            target_root.id if target_root is not None else None,
        )
        if key in self.trace:
            return False
        self.trace.add(key)
        scope = env.child()
        for stmt in rel.where:
            if isinstance(stmt, VarDef):
                if stmt.name in scope:
                    raise EngineError(f"relation {rel.name}: where-variable {stmt.name!r} shadows a binding")
                scope.vars[stmt.name] = ex.evaluate(stmt.expr, scope)
        if rel.target is not None:
            self.enforce(rel.target, scope, target_root)
        for stmt in rel.where:
            if isinstance(stmt, RelationCall):
                self.call(stmt, scope)
        self.fired[rel.name] += 1
        return True

    def call(self, stmt: RelationCall, env: ex.Env) -> None:
        callee = self.t.relation(stmt.relation)
        args = [ex.evaluate(a, env) for a in stmt.args]
        if len(args) != callee.arity:
            raise EngineError(f"{stmt.relation} takes {callee.arity} argument(s), got {len(args)}")
        seed: dict[str, Any] = {}
        src_root = trg_root = None
        for d, a in zip(callee.domains, args):
            model = self.source if d is callee.source else self.target
            if not isinstance(a, Element) or a.model is not model:
                raise EngineError(f"{stmt.relation}: argument for domain {d.alias} must be an element of that model")
            if not model.metamodel.is_subclass(a.cls, d.root.cls):
                raise EngineError(f"{stmt.relation}: {a.id} is a {a.cls}, not a {d.root.cls}")
            if d is callee.source:
                src_root = a
            else:
                trg_root = a
        for p, a in zip(callee.primitives, args[len(callee.domains) :]):
            seed[p.name] = coerce_param(a, p.type, f"{callee.name}.{p.name}")
        base = self.globals.child(**seed)
        for env2 in self._matches(callee, base, src_root):
            self.fire(callee, env2, trg_root)

    # -- matching -----------------------------------------------------------

    def match_domain(
        self, p: DomainPattern, model: Model, seed: ex.Env, root: Element | None = None
    ) -> Iterator[ex.Env]:
        tmpl = p.root
        mm = model.metamodel
        if root is None and tmpl.var and tmpl.var in seed:
            bound = seed.lookup(tmpl.var)
            root = bound if isinstance(bound, Element) else None
            if root is None:
                return
        if root is not None:
            candidates = [root] if root.model is model and mm.is_subclass(root.cls, tmpl.cls) else []
        else:
            candidates = model.elements_of_class(tmpl.cls, True)
        for el in candidates:
            b = {ROOT: el}
            if tmpl.var:
                b[tmpl.var] = el
            yield from self._match_slots([(el, s) for s in tmpl.slots], seed, b)

    def _match_slots(
        self, work: list[tuple[Element, Slot]], env: ex.Env, b: dict[str, Any]
    ) -> Iterator[ex.Env]:
        if not work:
            yield env.child(**b)
            return
        (el, s), rest = work[0], work[1:]
        mm = el.model.metamodel  # type: ignore[union-attr]
        _unbound = object()

        def bound(name: str) -> Any:
            if name in b:
                return b[name]
            if name in env:
                return env.lookup(name)
            return _unbound

        rdef = None
        if s.prop == ID:
            value: Any = el.id
        elif s.prop in mm.attributes(el.cls):
            value = el.attrs.get(s.prop, [])
        else:
            rdef = mm.reference(el.cls, s.prop)
            if rdef is None:
                raise EngineError(f"{el.cls} has no property {s.prop!r}")
            targets = el.targets(s.prop)
            value = targets if rdef.many else (targets[0] if targets else [])

        if s.kind == "lit":
            if _safe_equal(value, s.value):
                yield from self._match_slots(rest, env, b)
        elif s.kind == "var":
            cur = bound(s.value)
            if rdef is not None and rdef.many:
                if cur is _unbound:
                    for t in value:
                        yield from self._match_slots(rest, env, {**b, s.value: t})
                elif isinstance(cur, Element):
                    if any(t is cur for t in value):
                        yield from self._match_slots(rest, env, b)
                elif _safe_equal(cur, value):
                    yield from self._match_slots(rest, env, b)
            elif cur is _unbound:
                yield from self._match_slots(rest, env, {**b, s.value: value})
            elif _safe_equal(cur, value):
                yield from self._match_slots(rest, env, b)
        else:
            sub: ObjectTemplate = s.value
            if rdef is None:
                raise EngineError(f"object template on attribute {el.cls}.{s.prop}")
            members = value if rdef.many else ([value] if isinstance(value, Element) else [])
            for t in members:
                if not mm.is_subclass(t.cls, sub.cls):
                    continue
                b2 = b
                if sub.var:
                    cur = bound(sub.var)
                    if cur is _unbound:
                        b2 = {**b, sub.var: t}
                    elif cur is not t:
                        continue
                yield from self._match_slots([(t, ss) for ss in sub.slots] + rest, env, b2)

    # -- enforcement ----------------------------------------------------------

    def enforce(self, p: DomainPattern, env: ex.Env, prebound: Element | None = None) -> Element | None:
        if p.diff == "remove":
            el = prebound if prebound is not None else self._find(p.root, env, None, True)
            if p.root.var:
                env.vars[p.root.var] = el if el is not None else []
            if el is not None:
                self._record_remove(el.id)
            return el
        before = len(self.created)
        el = self._enforce_template(p.root, env, None, prebound, True)
        if p.diff == "replace" and self.created[before:before + 1] == [el.id]:
            raise EngineError(f"replace: no existing {p.root.cls} matches the target pattern")
        return el

    def _slot_value(self, s: Slot, env: ex.Env) -> Any:
        return s.value if s.kind == "lit" else env.lookup(s.value)

    def _key_value(self, tmpl: ObjectTemplate, env: ex.Env, is_root: bool) -> Any:
        key = self.t.config.target_key
        mm = self.target.metamodel
        if key == ID:
            s = tmpl.slot(ID)
            if s is not None and s.kind != "template":
                v = self._slot_value(s, env)
                return v if v != [] else None
            if is_root and self.id_copy and ROOT in env:
                return env.lookup(ROOT).id
            return None
        s = tmpl.slot(key)
        if key in mm.attributes(tmpl.cls) and s is not None and s.kind != "template":
            v = self._slot_value(s, env)
            return v if v != [] else None
        return None

    def _find(
        self, tmpl: ObjectTemplate, env: ex.Env, parent: tuple[Element, str] | None, is_root: bool
    ) -> Element | None:
        mm = self.target.metamodel
        key = self.t.config.target_key
        kv = self._key_value(tmpl, env, is_root)
        if kv is not None:
            if key == ID:
                el = self.target.get(kv)
                if el is not None and not mm.is_subclass(el.cls, tmpl.cls):
                    raise EngineError(f"key collision: id {kv!r} belongs to a {el.cls}, not a {tmpl.cls}")
                return el
            try:
                return self.target.key_lookup(tmpl.cls, key, kv)
            except AmbiguousKeyError as exc:
                raise EngineError(str(exc)) from None
        if parent is not None:
            pel, ref = parent
            candidates = pel.targets(ref)
        else:
            candidates = self.target.root_elements()
        for c in candidates:
            if mm.is_subclass(c.cls, tmpl.cls) and self._agrees(c, tmpl, env):
                return c
        return None

    def _agrees(self, el: Element, tmpl: ObjectTemplate, env: ex.Env) -> bool:
        mm = self.target.metamodel
        for s in tmpl.slots:
            if s.kind == "template":
                continue
            value = self._slot_value(s, env)
            if s.prop == ID:
                if value != [] and value != el.id:
                    return False
                continue
            if s.prop in mm.attributes(el.cls):
                if not _safe_equal(el.attrs.get(s.prop, []), value):
                    return False
                continue
            rdef = mm.reference(el.cls, s.prop)
            if rdef is None or rdef.containment:
                continue
            ids = self._ref_ids(value)
            current = el.refs.get(s.prop, [])
            if isinstance(value, Element) and rdef.many:
                if ids[0] not in current:
                    return False
            elif current != ids:
                return False
        return True

    def _image(self, src: Element) -> str:
        if src.id in self.image:
            return self.image[src.id]
        if self.id_copy:
            return src.id
        raise EngineError(f"source element {src.id} has no counterpart in the target model")

    def _ref_ids(self, value: Any) -> list[str]:
        items = value if isinstance(value, list) else [value]
        out = []
        for v in items:
            if not isinstance(v, Element):
                raise EngineError(f"reference slot needs elements, got {v!r}")
            if v.model is self.target:
                out.append(v.id)
            elif v.model is self.source:
                out.append(self._image(v))
            else:
                raise EngineError(f"element {v.id} belongs to neither model")
        return out

    def _fresh_id(self, cls: str) -> str:
        n = self._counters.get(cls, 0)
        while True:
            n += 1
            candidate = f"{cls}_{n}"
            if candidate not in self.target:
                self._counters[cls] = n
                return candidate

    def _new_id(self, tmpl: ObjectTemplate, env: ex.Env, is_root: bool) -> str:
        s = tmpl.slot(ID)
        if s is not None and s.kind != "template":
            v = self._slot_value(s, env)
            if isinstance(v, str) and v:
                return v
        if is_root and self.id_copy and ROOT in env:
            return env.lookup(ROOT).id
        return self._fresh_id(tmpl.cls)

    def _enforce_template(
        self,
        tmpl: ObjectTemplate,
        env: ex.Env,
        parent: tuple[Element, str] | None,
        prebound: Element | None,
        is_root: bool,
    ) -> Element:
        mm = self.target.metamodel
        created = False
        if prebound is not None:
            el = prebound
        else:
            found = self._find(tmpl, env, parent, is_root)
            if found is None:
                eid = self._new_id(tmpl, env, is_root)
                if eid in self.target:
                    raise EngineError(f"key collision: id {eid!r} already used by {self.target[eid]!r}")
                try:
                    el = self.target.create(
                        tmpl.cls, eid, parent=parent[0] if parent else None, ref=parent[1] if parent else None
                    )
                except ModelError as exc:
                    raise EngineError(str(exc)) from None
                created = True
                self.created.append(eid)
                self.events.append(("insert", eid))
                if is_root and ROOT in env:
                    src = env.lookup(ROOT)
                    if src.model is self.source:
                        self.image.setdefault(src.id, eid)
            else:
                el = found
                if parent is not None and self.target.container_of(el.id) != (parent[0].id, parent[1]):
                    if mm.reference(parent[0].cls, parent[1]).containment:  # type: ignore[union-attr]
                        self.target.move(el.id, parent[0], parent[1])
                        self._note_replaced(el)
        if tmpl.var:
            env.vars[tmpl.var] = el
        changed = False
        for s in tmpl.slots:
            if s.prop == ID:
                continue
            if s.kind == "template":
                rdef = mm.reference(el.cls, s.prop)
                if rdef is None:
                    raise EngineError(f"{el.cls} has no reference {s.prop!r}")
                if rdef.containment:
                    current = el.targets(s.prop)
                    if current and not rdef.many:
                        found = self._find(s.value, env, (el, s.prop), False)
                        if found is not current[0]:
                            # a different child occupies the single-valued slot
                            if self.in_place:
                                raise EngineError(f"{el.id}.{s.prop}: cannot swap a contained child in place")
                            self.target.remove(current[0].id)
                            changed = True
                    self._enforce_template(s.value, env, (el, s.prop), None, False)
                else:
                    child = self._enforce_template(s.value, env, None, None, False)
                    changed |= self._assign_ref(el, s.prop, child)
                continue
            value = self._slot_value(s, env)
            if s.prop in mm.attributes(el.cls):
                changed |= self._assign_attr(el, s.prop, value)
            else:
                rdef = mm.reference(el.cls, s.prop)
                if rdef is None:
                    raise EngineError(f"{el.cls} has no property {s.prop!r}")
                if rdef.containment:
                    for child in value if isinstance(value, list) else [value]:
                        if not isinstance(child, Element) or child.model is not self.target:
                            raise EngineError(f"{el.cls}.{s.prop} needs target elements")
                        if self.target.container_of(child.id) != (el.id, s.prop):
                            self.target.move(child.id, el, s.prop)
                            changed = True
                else:
                    changed |= self._assign_ref(el, s.prop, value)
        if changed and not created:
            self._note_replaced(el)
        return el

    def _assign_attr(self, el: Element, name: str, value: Any) -> bool:
        prim = self.target.metamodel.attribute(el.cls, name)
        if value == []:
            if name in el.attrs:
                del el.attrs[name]
                return True
            return False
        if isinstance(value, (list, Element)) or ex._category(value) != prim:
            raise EngineError(f"{el.cls}.{name} expects {prim}, got {value!r}")
        if el.attrs.get(name, _MISSING) == value and type(el.attrs.get(name)) is type(value):
            return False
        el.attrs[name] = value
        return True

    def _assign_ref(self, el: Element, name: str, value: Any) -> bool:
        rdef = self.target.metamodel.reference(el.cls, name)
        assert rdef is not None
        ids = self._ref_ids(value)
        current = el.refs.get(name, [])
        if isinstance(value, Element) and rdef.many:
            if ids[0] in current:
                return False
            new = current + ids
        else:
            new = ids
        if not rdef.many and len(new) > 1:
            raise EngineError(f"{el.cls}.{name} is single-valued, got {len(new)} values")
        if new == current:
            return False
        self.target.set_refs(el, name, new)
        return True

    def _note_replaced(self, el: Element) -> None:
        if el.id not in self.created and el.id not in self.replaced:
            self.replaced.append(el.id)
            self.events.append(("replace", el.id))

    def _record_remove(self, eid: str) -> None:
        if not self.in_place:
            raise EngineError("remove marks are only valid in in-place transformations")
        for x in [eid, *self.target.descendants(eid)]:
            if x not in self.removed:
                self.removed.append(x)
                self.events.append(("remove", x))

    def diff_model(self) -> DiffModel:
        mm = self.target.metamodel
        ops: list[DiffOp] = []
        for kind, eid in self.events:
            if kind == "remove":
                ops.append(DiffOp("remove", eid))
                continue
            el = self.target[eid]
            payload = Element(
                eid,
                el.cls,
                dict(el.attrs),
                {k: list(v) for k, v in el.refs.items() if not mm.reference(el.cls, k).containment},  # type: ignore[union-attr]
            )
            container = self.target.container_of(eid) if kind == "insert" else None
            ops.append(DiffOp(kind, eid, payload, container))
        return DiffModel(ops)

    def report(self, elapsed_ms: float) -> ExecutionReport:
        return ExecutionReport(
            self.t.name,
            {r.name: self.fired.get(r.name, 0) for r in self.t.relations},
            created=len(self.created),
            removed=len(self.removed),
            replaced=len(self.replaced),
            elapsed_ms=elapsed_ms,
        )


_MISSING = object()


def execute(
    t: Transformation,
    source: Model,
    params: Mapping[str, Any] | None = None,
    target_metamodel: Metamodel | None = None,
    target: Model | None = None,
) -> tuple[Model, ExecutionReport]:
    """Run a model-to-model transformation; ``target`` (copied, not mutated) seeds check-before-enforce."""
    if t.config.in_place:
        raise EngineError(f"{t.name} is in-place; use execute_in_place")
    start = time.perf_counter()
    if target is not None:
        out = target.copy()
    else:
        if target_metamodel is None:
            if t.config.target_metamodel != source.metamodel.name:
                raise EngineError(f"target metamodel {t.config.target_metamodel} not supplied")
            target_metamodel = source.metamodel
        out = Model(target_metamodel)
    run = Execution(t, source, out, params)
    run.run()
    diags = validate_model(out)
    if diags:
        raise EngineError("target model is invalid: " + "; ".join(map(str, diags)))
    return out, run.report((time.perf_counter() - start) * 1000)


def execute_in_place(
    t: Transformation, source: Model, params: Mapping[str, Any] | None = None
) -> tuple[Model, DiffModel, ExecutionReport]:
    if not t.config.in_place:
        raise EngineError(f"{t.name} is not an in-place transformation")
    start = time.perf_counter()
    scratch = source.copy()
    run = Execution(t, source, scratch, params, in_place=True)
    run.run()
    diff = run.diff_model()
    result = apply_diff(source, diff)
    diags = validate_model(result)
    if diags:
        raise EngineError("result model is invalid: " + "; ".join(map(str, diags)))
    return result, diff, run.report((time.perf_counter() - start) * 1000)


def match_domain(
    p: DomainPattern, m: Model, t: Transformation, seed: Mapping[str, Any] | None = None
) -> list[dict[str, Any]]:
    """Enumerate the bindings of source pattern ``p`` over ``m``, without enforcing anything."""
    cfg = t.config
    if cfg.target_metamodel == m.metamodel.name:
        scratch = Model(m.metamodel)
    else:
        scratch = Model(Metamodel(cfg.target_metamodel, {}))
    run = Execution(t, m, scratch)
    base = run.globals.child(**dict(seed or {}))
    return [
        {k: v for k, v in env.flat().items() if k not in run.params and k != ROOT}
        for env in run.match_domain(p, m, base)
    ]
