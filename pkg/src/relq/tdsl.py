"""Parser and static checks for the textual transformation language.

A transformation file looks like::

    transformation TTC_ReverseEdges {
      config {
        source SimpleGraph key xmi:id as msrc;
        target SimpleGraph key xmi:id as mtrg;
      }
      top relation NodeToNode {
        domain msrc g:Graph { nodes = n:Node { xmi:id = nid; name = nm } };
        domain mtrg g2:Graph { nodes = n2:Node { xmi:id = nid; name = nm } };
      }
    }

Static rules that need no metamodel (name resolution, arity, scoping,
diff placement) are enforced by :func:`parse_transformation`; metamodel
conformance is reported by :func:`check_transformation`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Iterator, Union

from . import expr as ex
from .errors import EvalError, SyntaxErrorAt, TransformationError
from .lexer import TokenStream, tokenize
from .metamodel import Metamodel
from .model import ID

DIFF_OPS = ("insert", "remove", "replace")
OUTPUT_MODES = ("xmi", "html")


@dataclass
class Param:
    name: str
    type: str
    default: Any = None


@dataclass
class Config:
    source_metamodel: str = ""
    source_key: str = ID
    source_name: str = "src"
    target_metamodel: str = ""
    target_key: str = ID
    target_name: str = "trg"
    in_place: bool = False
    output: str = "xmi"
    params: list[Param] = field(default_factory=list)


@dataclass
class Slot:
    prop: str
    kind: str  # lit | var | template
    value: Any  # literal value, variable name, or ObjectTemplate
    line: int = 0


@dataclass
class ObjectTemplate:
    var: str | None
    cls: str
    slots: list[Slot] = field(default_factory=list)
    line: int = 0

    def walk(self) -> Iterator["ObjectTemplate"]:
        yield self
        for s in self.slots:
            if s.kind == "template":
                yield from s.value.walk()

    def slot(self, prop: str) -> Slot | None:
        for s in self.slots:
            if s.prop == prop:
                return s
        return None


@dataclass
class DomainPattern:
    alias: str
    root: ObjectTemplate
    diff: str | None = None

    def variables(self) -> list[str]:
        """Template and slot variables in left-to-right order."""
        out: list[str] = []
        for tmpl in self.root.walk():
            if tmpl.var and tmpl.var not in out:
                out.append(tmpl.var)
            for s in tmpl.slots:
                if s.kind == "var" and s.value not in out:
                    out.append(s.value)
        return out


@dataclass
class VarDef:
    name: str
    expr: ex.Expr
    line: int = 0


@dataclass
class RelationCall:
    relation: str
    args: list[ex.Expr]
    line: int = 0


WhereStmt = Union[VarDef, RelationCall]


@dataclass
class Relation:
    name: str
    is_top: bool
    domains: list[DomainPattern]
    primitives: list[Param] = field(default_factory=list)
    when: list[ex.Expr] = field(default_factory=list)
    where: list[WhereStmt] = field(default_factory=list)
    source: DomainPattern | None = None
    target: DomainPattern | None = None
    line: int = 0

    @property
    def arity(self) -> int:
        return len(self.domains) + len(self.primitives)


@dataclass
class Query:
    name: str
    params: list[Param]
    body: ex.Expr
    line: int = 0


@dataclass
class Transformation:
    name: str
    config: Config
    relations: list[Relation] = field(default_factory=list)
    queries: list[Query] = field(default_factory=list)
    natives: list[str] = field(default_factory=list)

    def relation(self, name: str) -> Relation:
        for r in self.relations:
            if r.name == name:
                return r
        raise KeyError(name)

    def query(self, name: str) -> Query | None:
        for q in self.queries:
            if q.name == name:
                return q
        return None

    @property
    def top_relations(self) -> list[Relation]:
        return [r for r in self.relations if r.is_top]

    def inventory(self) -> str:
        """Relation/query/native counts in the ``2/5/2`` style."""
        r, q, n = len(self.relations), len(self.queries), len(self.natives)
        if n:
            return f"{r}/{q}/{n}"
        if q:
            return f"{r}/{q}"
        return str(r)


# -- parser -------------------------------------------------------------------


class _Parser:
    def __init__(self, text: str, source: str):
        self.ts = TokenStream(tokenize(text, source), source)
        self.source = source

    def parse(self) -> Transformation:
        ts = self.ts
        ts.expect_word("transformation")
        name = ts.expect_ident("transformation name")
        ts.expect_op("{")
        t = Transformation(name, Config())
        seen_config = False
        while not ts.peek.is_op("}"):
            tok = ts.peek
            if tok.is_word("config"):
                if seen_config:
                    raise ts.error("duplicate config block")
                t.config = self.config()
                seen_config = True
            elif tok.is_word("native"):
                ts.next()
                t.natives.append(ts.expect_ident("native function name"))
                ts.expect_op(";")
            elif tok.is_word("query"):
                t.queries.append(self.query())
            elif tok.is_word("top", "relation"):
                t.relations.append(self.relation())
            else:
                raise ts.error(f"expected config, native, query or relation, found {tok.value!r}")
        ts.expect_op("}")
        if ts.peek.kind != "eof":
            raise ts.error("trailing input after transformation")
        if not seen_config:
            raise SyntaxErrorAt("missing config block", 1, source=self.source)
        return t

    def type_name(self) -> str:
        base = self.ts.expect_ident("type")
        if self.ts.accept_op("("):
            inner = self.type_name()
            self.ts.expect_op(")")
            return f"{base}({inner})"
        return base

    def literal(self) -> Any:
        tok = self.ts.peek
        if tok.kind in ("string", "int"):
            self.ts.next()
            return tok.value
        if tok.is_word("true", "false"):
            self.ts.next()
            return tok.value == "true"
        raise self.ts.error(f"expected a literal, found {tok.value!r}")

    def params(self) -> list[Param]:
        out: list[Param] = []
        if not self.ts.accept_op("("):
            return out
        if not self.ts.peek.is_op(")"):
            while True:
                pname = self.ts.expect_ident("parameter name")
                self.ts.expect_op(":")
                out.append(Param(pname, self.type_name()))
                if not self.ts.accept_op(","):
                    break
        self.ts.expect_op(")")
        return out

    def config(self) -> Config:
        ts = self.ts
        ts.expect_word("config")
        ts.expect_op("{")
        cfg = Config()
        seen: set[str] = set()
        while not ts.peek.is_op("}"):
            tok = ts.peek
            word = ts.expect_ident("config entry")
            if word in ("source", "target"):
                if word in seen:
                    raise ts.error(f"duplicate {word} entry", tok)
                seen.add(word)
                mm = ts.expect_ident("metamodel name")
                ts.expect_word("key")
                key = ts.expect_ident("key property")
                ts.expect_word("as")
                alias = ts.expect_ident("model alias")
                if word == "source":
                    cfg.source_metamodel, cfg.source_key, cfg.source_name = mm, key, alias
                else:
                    cfg.target_metamodel, cfg.target_key, cfg.target_name = mm, key, alias
            elif word == "inplace":
                cfg.in_place = True
            elif word == "output":
                mode = ts.expect_ident("output mode")
                if mode not in OUTPUT_MODES:
                    raise ts.error(f"output mode must be xmi or html, got {mode!r}", tok)
                cfg.output = mode
            elif word == "param":
                pname = ts.expect_ident("parameter name")
                ts.expect_op(":")
                ptype = self.type_name()
                default = None
                if ts.accept_op("="):
                    default = self.literal()
                cfg.params.append(Param(pname, ptype, default))
            else:
                raise ts.error(f"unknown config entry {word!r}", tok)
            ts.expect_op(";")
        ts.expect_op("}")
        for req in ("source", "target"):
            if req not in seen:
                raise ts.error(f"config lacks a {req} entry")
        return cfg

    def query(self) -> Query:
        ts = self.ts
        line = ts.expect_word("query").line
        name = ts.expect_ident("query name")
        params = self.params()
        ts.expect_op("=")
        body = ex.parse_expr(ts)
        ts.expect_op(";")
        return Query(name, params, body, line)

    def relation(self) -> Relation:
        ts = self.ts
        line = ts.peek.line
        is_top = ts.accept_word("top")
        ts.expect_word("relation")
        name = ts.expect_ident("relation name")
        prims = self.params()
        ts.expect_op("{")
        rel = Relation(name, is_top, [], prims, line=line)
        while not ts.peek.is_op("}"):
            tok = ts.peek
            if tok.is_word("domain"):
                rel.domains.append(self.domain())
            elif tok.is_word("when"):
                ts.next()
                ts.expect_op("{")
                while not ts.peek.is_op("}"):
                    rel.when.append(ex.parse_expr(ts))
                    if not ts.accept_op(";"):
                        break
                ts.expect_op("}")
            elif tok.is_word("where"):
                ts.next()
                ts.expect_op("{")
                while not ts.peek.is_op("}"):
                    rel.where.append(self.where_stmt())
                    if not ts.accept_op(";"):
                        break
                ts.expect_op("}")
            else:
                raise ts.error(f"expected domain, when or where, found {tok.value!r}")
        ts.expect_op("}")
        return rel

    def where_stmt(self) -> WhereStmt:
        ts = self.ts
        tok = ts.peek
        if tok.is_word("call"):
            ts.next()
            callee = ts.expect_ident("relation name")
            args: list[ex.Expr] = []
            ts.expect_op("(")
            if not ts.peek.is_op(")"):
                args.append(ex.parse_expr(ts))
                while ts.accept_op(","):
                    args.append(ex.parse_expr(ts))
            ts.expect_op(")")
            return RelationCall(callee, args, tok.line)
        name = ts.expect_ident("variable name")
        ts.expect_op("=")
        return VarDef(name, ex.parse_expr(ts), tok.line)

    def domain(self) -> DomainPattern:
        ts = self.ts
        ts.expect_word("domain")
        alias = ts.expect_ident("model alias")
        root = self.template()
        diff = None
        if ts.accept_word("diff"):
            tok = ts.peek
            diff = ts.expect_ident("diff operation")
            if diff not in DIFF_OPS:
                raise ts.error(f"diff must be insert, remove or replace, got {diff!r}", tok)
        ts.expect_op(";")
        return DomainPattern(alias, root, diff)

    def template(self) -> ObjectTemplate:
        ts = self.ts
        tok = ts.peek
        first = ts.expect_ident("class or variable")
        var, cls = None, first
        if ts.accept_op(":"):
            var, cls = first, ts.expect_ident("class name")
        tmpl = ObjectTemplate(var, cls, line=tok.line)
        ts.expect_op("{")
        while not ts.peek.is_op("}"):
            ptok = ts.peek
            prop = ts.expect_ident("property name")
            ts.expect_op("=")
            tmpl.slots.append(self.slot(prop, ptok.line))
            if not (ts.accept_op(";") or ts.accept_op(",")):
                break
        ts.expect_op("}")
        return tmpl

    def slot(self, prop: str, line: int) -> Slot:
        ts = self.ts
        tok = ts.peek
        if tok.kind in ("string", "int") or tok.is_word("true", "false"):
            return Slot(prop, "lit", self.literal(), line)
        if tok.kind == "ident":
            nxt = ts.lookahead()
            if nxt.is_op(":") or nxt.is_op("{"):
                return Slot(prop, "template", self.template(), line)
            ts.next()
            return Slot(prop, "var", tok.value, line)
        raise ts.error(f"expected literal, variable or object template, found {tok.value!r}")


def parse_transformation(text: str, source: str = "<transformation>") -> Transformation:
    t = _Parser(text, source).parse()
    _validate(t, source)
    return t


# -- metamodel-free validation -----------------------------------------------


def _validate(t: Transformation, source: str) -> None:
    from .stdlib import NATIVES

    cfg = t.config

    def fail(msg: str, line: int = 0) -> None:
        prefix = f"{source}:{line}: " if line else f"{source}: "
        raise TransformationError(prefix + msg)

    names: set[str] = set()
    for kind, n, line in (
        [("relation", r.name, r.line) for r in t.relations]
        + [("query", q.name, q.line) for q in t.queries]
        + [("native", n, 0) for n in t.natives]
    ):
        if n in names:
            fail(f"duplicate name {n!r}", line)
        names.add(n)
    for n in t.natives:
        if n not in NATIVES:
            fail(f"unknown native function {n!r}")
    if cfg.in_place and cfg.source_metamodel != cfg.target_metamodel:
        fail("in-place transformations need identical source and target metamodels")
    if cfg.source_name == cfg.target_name:
        fail("source and target aliases must differ")
    if not t.top_relations:
        fail("no top-level relation")

    functions = {q.name for q in t.queries} | set(t.natives)
    globals_ = {p.name for p in cfg.params} | {cfg.source_name, cfg.target_name}

    def check_calls(e: ex.Expr, line: int) -> None:
        for fn in ex.called_functions(e):
            if fn not in functions:
                fail(f"unknown query or function {fn!r}", line)

    def check_free(e: ex.Expr, bound: set[str], line: int, what: str) -> None:
        missing = ex.free_variables(e) - bound
        if missing:
            fail(f"{what} uses unbound variable(s) {', '.join(sorted(missing))}", line)

    for q in t.queries:
        check_calls(q.body, q.line)
        check_free(q.body, {p.name for p in q.params} | globals_, q.line, f"query {q.name}")

    relations = {r.name: r for r in t.relations}
    for rel in t.relations:
        where = f"relation {rel.name}"
        if len(rel.domains) > 2:
            fail(f"{where}: at most one source and one target domain", rel.line)
        for d in rel.domains:
            if d.alias == cfg.source_name:
                if rel.source is not None:
                    fail(f"{where}: two source domains", rel.line)
                if d.diff is not None:
                    fail(f"{where}: diff marks belong on the target domain", d.root.line)
                rel.source = d
            elif d.alias == cfg.target_name:
                if rel.target is not None:
                    fail(f"{where}: two target domains", rel.line)
                rel.target = d
            else:
                fail(f"{where}: unknown model alias {d.alias!r}", d.root.line)
            if d.diff is not None and not cfg.in_place:
                fail(f"{where}: diff {d.diff} outside an in-place transformation", d.root.line)
        if not rel.domains:
            fail(f"{where}: no domain", rel.line)
        prims = {p.name for p in rel.primitives}
        bound = globals_ | prims
        if rel.source is not None:
            bound |= set(rel.source.variables())
        for e in rel.when:
            check_calls(e, rel.line)
            check_free(e, bound, rel.line, f"{where} when-clause")
        target_vars: set[str] = set()
        if rel.target is not None:
            for tmpl in rel.target.root.walk():
                if tmpl.var:
                    if tmpl.var in bound or tmpl.var in target_vars:
                        fail(f"{where}: target variable {tmpl.var!r} is already bound", tmpl.line)
                    target_vars.add(tmpl.var)
        for stmt in rel.where:
            if isinstance(stmt, VarDef):
                if stmt.name in bound or stmt.name in target_vars:
                    fail(f"{where}: where-variable {stmt.name!r} shadows an existing variable", stmt.line)
                check_calls(stmt.expr, stmt.line)
                check_free(stmt.expr, bound, stmt.line, f"{where} where-clause")
                bound.add(stmt.name)
        if rel.target is not None:
            for tmpl in rel.target.root.walk():
                for s in tmpl.slots:
                    if s.kind == "var" and s.value not in bound | target_vars:
                        fail(f"{where}: target slot {s.prop} uses unbound variable {s.value!r}", s.line)
        for stmt in rel.where:
            if isinstance(stmt, RelationCall):
                callee = relations.get(stmt.relation)
                if callee is None:
                    fail(f"{where}: call to unknown relation {stmt.relation!r}", stmt.line)
                    continue
                if len(stmt.args) != callee.arity:
                    fail(
                        f"{where}: {stmt.relation} takes {callee.arity} argument(s), got {len(stmt.args)}",
                        stmt.line,
                    )
                for a in stmt.args:
                    check_calls(a, stmt.line)
                    check_free(a, bound | target_vars, stmt.line, f"{where} call to {stmt.relation}")


# -- metamodel conformance ---------------------------------------------------


def _root_class(mm: Metamodel) -> str | None:
    contained = {r.target for c in mm.classes for r in mm.references(c).values() if r.containment}
    candidates = [c for c, cd in mm.classes.items() if c not in contained and not cd.abstract]
    return candidates[0] if len(candidates) == 1 else None


def alias_type(mm: Metamodel) -> ex.Type:
    root = _root_class(mm)
    return ex.CollT(ex.ElemT(root, mm) if root else ex.ANY)


def native_signatures(t: Transformation, mm: Metamodel) -> dict[str, ex.Signature]:
    from .stdlib import NATIVES

    def res(name: str) -> ex.Type:
        try:
            return ex.resolve_type(name, mm)
        except EvalError:
            return ex.ANY

    out = {}
    for n in t.natives:
        fn = NATIVES[n]
        out[n] = ex.Signature(tuple(res(p) for p in fn.param_types), res(fn.result_type))
    return out


def check_transformation(t: Transformation, src_mm: Metamodel, trg_mm: Metamodel) -> list[str]:
    """Diagnostics for classes, properties and slot/expression types; empty when consistent."""
    cfg = t.config
    diags: list[str] = []
    if src_mm.name != cfg.source_metamodel:
        diags.append(f"source metamodel is {cfg.source_metamodel}, got {src_mm.name}")
    if trg_mm.name != cfg.target_metamodel:
        diags.append(f"target metamodel is {cfg.target_metamodel}, got {trg_mm.name}")
    if diags:
        return diags

    def typ(name: str, mm: Metamodel, where: str) -> ex.Type:
        try:
            return ex.resolve_type(name, mm)
        except EvalError as exc:
            diags.append(f"{where}: {exc}")
            return ex.ANY

    globals_: dict[str, ex.Type] = {cfg.source_name: alias_type(src_mm), cfg.target_name: alias_type(trg_mm)}
    for p in cfg.params:
        pt = typ(p.type, src_mm, f"param {p.name}")
        globals_[p.name] = pt
        if p.default is not None and pt != ex.ANY and ex._category(p.default) != pt:
            diags.append(f"param {p.name}: default {p.default!r} is not {pt}")

    signatures = native_signatures(t, src_mm)
    for q in t.queries:
        scope = dict(globals_)
        for p in q.params:
            scope[p.name] = typ(p.type, src_mm, f"query {q.name}")
        signatures[q.name] = ex.Signature(tuple(scope[p.name] for p in q.params), ex.ANY)
    for q in t.queries:
        scope = dict(globals_)
        for p in q.params:
            scope[p.name] = signatures[q.name].params[q.params.index(p)]
        tc = ex.TypeChecker(scope, signatures)
        result = tc.check(q.body)
        diags.extend(f"query {q.name}: {d}" for d in tc.diagnostics)
        signatures[q.name] = ex.Signature(signatures[q.name].params, result)

    for rel in t.relations:
        where = f"relation {rel.name}"
        scope = dict(globals_)
        for p in rel.primitives:
            pt = typ(p.type, src_mm, f"{where} primitive domain {p.name}")
            if pt not in ex.PRIM_TYPES:
                diags.append(f"{where}: primitive domain {p.name} must be string, int or bool")
            scope[p.name] = pt
        if rel.source is not None:
            _check_template(rel.source.root, src_mm, scope, diags, where, enforce=False)
        tc = ex.TypeChecker(scope, signatures)
        for e in rel.when:
            t_ = tc.check(e)
            if t_ not in ("bool", ex.ANY):
                tc.diag(f"when-expression must be bool, got {t_}")
        for stmt in rel.where:
            if isinstance(stmt, VarDef):
                scope[stmt.name] = tc.check(stmt.expr, scope)
        if rel.target is not None:
            _check_template(rel.target.root, trg_mm, scope, diags, where, enforce=True)
        for stmt in rel.where:
            if isinstance(stmt, RelationCall):
                callee = t.relation(stmt.relation)
                expected: list[ex.Type] = []
                for d in callee.domains:
                    mm = src_mm if d is callee.source else trg_mm
                    expected.append(ex.ElemT(d.root.cls, mm) if mm.has_class(d.root.cls) else ex.ANY)
                for p in callee.primitives:
                    expected.append(typ(p.type, src_mm, f"{callee.name} primitive {p.name}"))
                for i, (a, et) in enumerate(zip(stmt.args, expected)):
                    at = tc.check(a, scope)
                    if not ex._conforms(at, et):
                        tc.diag(f"call {stmt.relation} argument {i + 1}: expected {et}, got {at}")
        diags.extend(f"{where}: {d}" for d in tc.diagnostics)
    return diags


def _check_template(
    tmpl: ObjectTemplate,
    mm: Metamodel,
    scope: dict[str, ex.Type],
    diags: list[str],
    where: str,
    enforce: bool,
) -> None:
    if not mm.has_class(tmpl.cls):
        diags.append(f"{where}: class {tmpl.cls} is not in metamodel {mm.name}")
        return
    if enforce and mm.classes[tmpl.cls].abstract:
        diags.append(f"{where}: cannot create instances of abstract class {tmpl.cls}")
    if tmpl.var:
        scope[tmpl.var] = ex.ElemT(tmpl.cls, mm)
    for s in tmpl.slots:
        label = f"{where}: {tmpl.cls}.{s.prop}"
        if s.prop == ID:
            ptype: ex.Type = "string"
            rdef = None
        else:
            attr = mm.attribute(tmpl.cls, s.prop)
            rdef = mm.reference(tmpl.cls, s.prop)
            if attr is None and rdef is None:
                diags.append(f"{label}: no such property")
                continue
            ptype = attr if attr is not None else ex.ElemT(rdef.target, mm)  # type: ignore[union-attr]
        if s.kind == "lit":
            if rdef is not None:
                diags.append(f"{label}: literal assigned to a reference")
            elif ex._category(s.value) != ptype:
                diags.append(f"{label}: literal {s.value!r} is not {ptype}")
        elif s.kind == "template":
            if rdef is None:
                diags.append(f"{label}: object template on an attribute")
                continue
            if rdef.many and not rdef.containment:
                diags.append(f"{label}: nested template under a many-valued non-containment reference")
            sub = s.value
            if mm.has_class(sub.cls) and not mm.is_subclass(sub.cls, rdef.target):
                diags.append(f"{label}: {sub.cls} does not conform to {rdef.target}")
            _check_template(sub, mm, scope, diags, where, enforce)
        else:
            name = s.value
            if enforce or name in scope:
                vt = scope.get(name, ex.ANY)
                if rdef is not None:
                    ok = vt == ex.ANY or isinstance(vt, (ex.ElemT, ex.CollT))
                    if isinstance(vt, ex.CollT) and not rdef.many:
                        ok = False
                else:
                    ok = vt in (ptype, ex.ANY) or (
                        isinstance(vt, ex.CollT) and vt.item == ex.ANY
                    )
                if not ok:
                    diags.append(f"{label}: variable {name} of type {vt} does not fit {ptype}")
            else:
                scope[name] = ptype
