"""The OCL subset used by queries, when/where clauses and slot values.

Values are Python ``str``/``int``/``bool``, :class:`~relq.model.Element`
references, or lists of those. The empty list doubles as the absent value:
navigating an unset 0..1 reference (or an unset attribute) yields ``[]``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable, Iterable, Mapping, Union

from .errors import EvalError
from .lexer import TokenStream, tokenize
from .metamodel import MANY, Metamodel
from .model import ID, Element

# -- syntax tree ------------------------------------------------------------


@dataclass(frozen=True)
class Lit:
    value: Any


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Nav:
    obj: "Expr"
    prop: str


@dataclass(frozen=True)
class Call:
    """Invocation of a query or native function by name."""

    name: str
    args: tuple["Expr", ...]


@dataclass(frozen=True)
class Method:
    obj: "Expr"
    name: str
    args: tuple["Expr", ...]


@dataclass(frozen=True)
class Iterate:
    obj: "Expr"
    op: str  # select | exists
    var: str
    body: "Expr"


@dataclass(frozen=True)
class Compare:
    op: str  # = | <>
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class BoolOp:
    op: str  # and | or
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Not:
    operand: "Expr"


Expr = Union[Lit, Var, Nav, Call, Method, Iterate, Compare, BoolOp, Not]

METHODS = {"size": 0, "isEmpty": 0, "notEmpty": 0, "first": 0, "distinct": 0, "excluding": 1, "concat": 1}
ITERATORS = ("select", "exists")
RESERVED = {"and", "or", "not", "true", "false"}


def free_variables(e: Expr) -> set[str]:
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, Lit):
        return set()
    if isinstance(e, Nav):
        return free_variables(e.obj)
    if isinstance(e, (Call, Method)):
        out = free_variables(e.obj) if isinstance(e, Method) else set()
        for a in e.args:
            out |= free_variables(a)
        return out
    if isinstance(e, Iterate):
        return free_variables(e.obj) | (free_variables(e.body) - {e.var})
    if isinstance(e, (Compare, BoolOp)):
        return free_variables(e.left) | free_variables(e.right)
    if isinstance(e, Not):
        return free_variables(e.operand)
    raise TypeError(e)


def called_functions(e: Expr) -> set[str]:
    out: set[str] = set()

    def walk(x: Expr) -> None:
        if isinstance(x, Call):
            out.add(x.name)
        for child in _children(x):
            walk(child)

    walk(e)
    return out


def _children(e: Expr) -> Iterable[Expr]:
    if isinstance(e, Nav):
        return (e.obj,)
    if isinstance(e, Call):
        return e.args
    if isinstance(e, Method):
        return (e.obj, *e.args)
    if isinstance(e, Iterate):
        return (e.obj, e.body)
    if isinstance(e, (Compare, BoolOp)):
        return (e.left, e.right)
    if isinstance(e, Not):
        return (e.operand,)
    return ()


# -- parsing ----------------------------------------------------------------


def parse_expr(ts: TokenStream) -> Expr:
    left = _parse_and(ts)
    while ts.accept_word("or"):
        left = BoolOp("or", left, _parse_and(ts))
    return left


def _parse_and(ts: TokenStream) -> Expr:
    left = _parse_not(ts)
    while ts.accept_word("and"):
        left = BoolOp("and", left, _parse_not(ts))
    return left


def _parse_not(ts: TokenStream) -> Expr:
    if ts.accept_word("not"):
        return Not(_parse_not(ts))
    left = _parse_postfix(ts)
    if ts.peek.is_op("=", "<>"):
        op = ts.next().value
        return Compare(op, left, _parse_postfix(ts))  # type: ignore[arg-type]
    return left


def _parse_args(ts: TokenStream) -> tuple[Expr, ...]:
    ts.expect_op("(")
    args: list[Expr] = []
    if not ts.peek.is_op(")"):
        args.append(parse_expr(ts))
        while ts.accept_op(","):
            args.append(parse_expr(ts))
    ts.expect_op(")")
    return tuple(args)


def _parse_postfix(ts: TokenStream) -> Expr:
    e = _parse_primary(ts)
    while ts.peek.is_op(".", "->"):
        ts.next()
        tok = ts.peek
        name = ts.expect_ident("property or operation name")
        if name in ITERATORS and ts.peek.is_op("("):
            ts.next()
            var = ts.expect_ident("iterator variable")
            ts.expect_op("|")
            body = parse_expr(ts)
            ts.expect_op(")")
            e = Iterate(e, name, var, body)
        elif ts.peek.is_op("("):
            if name not in METHODS:
                raise ts.error(f"unsupported operation {name}()", tok)
            args = _parse_args(ts)
            if len(args) != METHODS[name]:
                raise ts.error(f"{name}() takes {METHODS[name]} argument(s), got {len(args)}", tok)
            e = Method(e, name, args)
        else:
            e = Nav(e, name)
    return e


def _parse_primary(ts: TokenStream) -> Expr:
    tok = ts.peek
    if tok.kind in ("string", "int"):
        ts.next()
        return Lit(tok.value)
    if tok.is_word("true", "false"):
        ts.next()
        return Lit(tok.value == "true")
    if tok.is_op("("):
        ts.next()
        e = parse_expr(ts)
        ts.expect_op(")")
        return e
    if tok.kind == "ident" and tok.value not in RESERVED:
        ts.next()
        if ts.peek.is_op("("):
            return Call(tok.value, _parse_args(ts))  # type: ignore[arg-type]
        return Var(tok.value)  # type: ignore[arg-type]
    raise ts.error(f"expected an expression, found {tok.value!r}")


def parse(text: str) -> Expr:
    """Parse a standalone expression string."""
    ts = TokenStream(tokenize(text, "<expr>"), "<expr>")
    e = parse_expr(ts)
    if ts.peek.kind != "eof":
        raise ts.error(f"unexpected {ts.peek.value!r} after expression")
    return e


# -- evaluation -------------------------------------------------------------


class Env:
    """Variable bindings plus a function invoker for :class:`Call` nodes."""

    def __init__(
        self,
        vars: Mapping[str, Any] | None = None,
        invoke: Callable[[str, list[Any]], Any] | None = None,
        parent: "Env | None" = None,
    ):
        self.vars = dict(vars or {})
        self.parent = parent
        self._invoke = invoke if invoke is not None else (parent._invoke if parent else None)

    def lookup(self, name: str) -> Any:
        if name in self.vars:
            return self.vars[name]
        if self.parent is not None:
            return self.parent.lookup(name)
        raise EvalError(f"unbound variable {name!r}")

    def __contains__(self, name: str) -> bool:
        return name in self.vars or (self.parent is not None and name in self.parent)

    def child(self, **bindings: Any) -> "Env":
        return Env(bindings, parent=self)

    def flat(self) -> dict[str, Any]:
        chain = []
        env: Env | None = self
        while env is not None:
            chain.append(env.vars)
            env = env.parent
        out: dict[str, Any] = {}
        for vars in reversed(chain):
            out.update(vars)
        return out

    def invoke(self, name: str, args: list[Any]) -> Any:
        if self._invoke is None:
            raise EvalError(f"no function {name!r} available")
        return self._invoke(name, args)


def navigate(value: Any, prop: str) -> Any:
    if isinstance(value, list):
        out: list[Any] = []
        for item in value:
            v = navigate(item, prop)
            if isinstance(v, list):
                out.extend(v)
            else:
                out.append(v)
        return out
    if not isinstance(value, Element):
        raise EvalError(f"cannot navigate .{prop} on {type(value).__name__} value {value!r}")
    if prop == ID:
        return value.id
    mm = value.model.metamodel  # type: ignore[union-attr]
    if prop in mm.attributes(value.cls):
        return value.attrs.get(prop, [])
    rdef = mm.reference(value.cls, prop)
    if rdef is None:
        raise EvalError(f"{value.cls} has no property {prop!r}")
    targets = value.targets(prop)
    if rdef.many:
        return targets
    return targets[0] if targets else []


def _as_collection(value: Any, op: str) -> list[Any]:
    if isinstance(value, list):
        return value
    if isinstance(value, Element):
        return [value]
    raise EvalError(f"{op}() is not defined on scalar {value!r}")


def _category(v: Any) -> str:
    if isinstance(v, bool):
        return "bool"
    if isinstance(v, int):
        return "int"
    if isinstance(v, str):
        return "string"
    if isinstance(v, Element):
        return "element"
    return "collection"


def values_equal(a: Any, b: Any) -> bool:
    ca, cb = _category(a), _category(b)
    if ca == "collection" and cb == "collection":
        return len(a) == len(b) and all(values_equal(x, y) for x, y in zip(a, b))
    if ca == "collection" or cb == "collection":
        coll, other = (a, b) if ca == "collection" else (b, a)
        if not coll:
            return False
        raise EvalError(f"cannot compare collection {coll!r} with {other!r}")
    if ca != cb:
        raise EvalError(f"type mismatch comparing {a!r} with {b!r}")
    if ca == "element":
        return a is b
    return a == b


def _hash_key(v: Any) -> Any:
    if isinstance(v, Element):
        return ("e", id(v))
    if isinstance(v, list):
        return ("c", tuple(_hash_key(x) for x in v))
    return (_category(v), v)


def distinct(items: list[Any]) -> list[Any]:
    seen = set()
    out = []
    for item in items:
        k = _hash_key(item)
        if k not in seen:
            seen.add(k)
            out.append(item)
    return out


def _truth(v: Any, what: str) -> bool:
    if not isinstance(v, bool):
        raise EvalError(f"{what} must be boolean, got {v!r}")
    return v


def evaluate(e: Expr, env: Env) -> Any:
    if isinstance(e, Lit):
        return e.value
    if isinstance(e, Var):
        return env.lookup(e.name)
    if isinstance(e, Nav):
        return navigate(evaluate(e.obj, env), e.prop)
    if isinstance(e, Call):
        return env.invoke(e.name, [evaluate(a, env) for a in e.args])
    if isinstance(e, Method):
        return _method(e, evaluate(e.obj, env), [evaluate(a, env) for a in e.args])
    if isinstance(e, Iterate):
        items = _as_collection(evaluate(e.obj, env), e.op)
        if e.op == "select":
            return [x for x in items if _truth(evaluate(e.body, env.child(**{e.var: x})), "select body")]
        return any(_truth(evaluate(e.body, env.child(**{e.var: x})), "exists body") for x in items)
    if isinstance(e, Compare):
        eq = values_equal(evaluate(e.left, env), evaluate(e.right, env))
        return eq if e.op == "=" else not eq
    if isinstance(e, BoolOp):
        left = _truth(evaluate(e.left, env), f"left operand of {e.op}")
        if e.op == "and" and not left:
            return False
        if e.op == "or" and left:
            return True
        return _truth(evaluate(e.right, env), f"right operand of {e.op}")
    if isinstance(e, Not):
        return not _truth(evaluate(e.operand, env), "operand of not")
    raise TypeError(f"not an expression: {e!r}")


def _method(e: Method, target: Any, args: list[Any]) -> Any:
    name = e.name
    if name == "concat":
        if not isinstance(target, str) or not isinstance(args[0], str):
            raise EvalError(f"concat() needs strings, got {target!r} and {args[0]!r}")
        return target + args[0]
    items = _as_collection(target, name)
    if name == "size":
        return len(items)
    if name == "isEmpty":
        return not items
    if name == "notEmpty":
        return bool(items)
    if name == "first":
        return items[0] if items else []
    if name == "distinct":
        return distinct(items)
    if name == "excluding":
        return [x for x in items if not _safe_equal(x, args[0])]
    raise EvalError(f"unsupported operation {name}()")


def _safe_equal(a: Any, b: Any) -> bool:
    try:
        return values_equal(a, b)
    except EvalError:
        return False


def eval(e: Expr | str, env: Env | Mapping[str, Any]) -> Any:  # noqa: A001
    """Evaluate ``e`` (an AST or source text) under ``env``."""
    if isinstance(e, str):
        e = parse(e)
    if not isinstance(env, Env):
        env = Env(env)
    return evaluate(e, env)


# -- static types -------------------------------------------------------------


@dataclass(frozen=True)
class ElemT:
    cls: str
    mm: Metamodel

    def __eq__(self, other: object) -> bool:
        return isinstance(other, ElemT) and other.cls == self.cls and other.mm.name == self.mm.name

    def __hash__(self) -> int:
        return hash((self.cls, self.mm.name))

    def __str__(self) -> str:
        return self.cls


@dataclass(frozen=True)
class CollT:
    item: "Type"

    def __str__(self) -> str:
        return f"Collection({self.item})"


Type = Union[str, ElemT, CollT]  # str: "string" | "int" | "bool" | "any"
PRIM_TYPES = ("string", "int", "bool")
ANY = "any"


def resolve_type(text: str, mm: Metamodel | None) -> Type:
    """Turn a type name (``int``, ``Node``, ``Collection(Node)``) into a Type."""
    aliases = {"integer": "int", "boolean": "bool", "str": "string"}
    text = aliases.get(text.strip(), text.strip())
    if text in PRIM_TYPES or text == ANY:
        return text
    for prefix in ("Collection(", "Set(", "Sequence("):
        if text.startswith(prefix) and text.endswith(")"):
            return CollT(resolve_type(text[len(prefix) : -1], mm))
    if mm is None or not mm.has_class(text):
        raise EvalError(f"unknown type {text!r}")
    return ElemT(text, mm)


@dataclass(frozen=True)
class Signature:
    params: tuple[Type, ...]
    result: Type


def _item(t: Type) -> Type | None:
    """Element type when ``t`` is usable as a collection (elements act as singletons)."""
    if isinstance(t, CollT):
        return t.item
    if isinstance(t, ElemT) or t == ANY:
        return ANY if t == ANY else t
    return None


def _compatible(a: Type, b: Type) -> bool:
    if a == ANY or b == ANY:
        return True
    if isinstance(a, str) and isinstance(b, str):
        return a == b
    if isinstance(a, str) or isinstance(b, str):
        return False
    return True  # element/collection comparisons are total


def _conforms(actual: Type, expected: Type) -> bool:
    if actual == ANY or expected == ANY:
        return True
    if isinstance(expected, ElemT) and isinstance(actual, ElemT):
        return actual.mm.name == expected.mm.name and actual.mm.is_subclass(actual.cls, expected.cls)
    if isinstance(expected, CollT):
        if isinstance(actual, CollT):
            return _conforms(actual.item, expected.item)
        if isinstance(actual, ElemT):
            return _conforms(actual, expected.item)
        return False
    return actual == expected


class TypeChecker:
    def __init__(self, var_types: Mapping[str, Type], signatures: Mapping[str, Signature] | None = None):
        self.var_types = dict(var_types)
        self.signatures = dict(signatures or {})
        self.diagnostics: list[str] = []

    def diag(self, msg: str) -> Type:
        self.diagnostics.append(msg)
        return ANY

    def check(self, e: Expr, scope: Mapping[str, Type] | None = None) -> Type:
        scope = self.var_types if scope is None else scope
        if isinstance(e, Lit):
            return _category(e.value) if not isinstance(e.value, list) else CollT(ANY)
        if isinstance(e, Var):
            if e.name not in scope:
                return self.diag(f"unbound variable {e.name!r}")
            return scope[e.name]
        if isinstance(e, Nav):
            return self._nav(self.check(e.obj, scope), e.prop)
        if isinstance(e, Call):
            args = [self.check(a, scope) for a in e.args]
            sig = self.signatures.get(e.name)
            if sig is None:
                return self.diag(f"unknown query or function {e.name!r}")
            if len(args) != len(sig.params):
                return self.diag(f"{e.name} takes {len(sig.params)} argument(s), got {len(args)}")
            for i, (a, p) in enumerate(zip(args, sig.params)):
                if not _conforms(a, p):
                    self.diag(f"{e.name} argument {i + 1}: expected {p}, got {a}")
            return sig.result
        if isinstance(e, Method):
            return self._method(e, self.check(e.obj, scope), [self.check(a, scope) for a in e.args])
        if isinstance(e, Iterate):
            src = self.check(e.obj, scope)
            item = _item(src)
            if item is None:
                return self.diag(f"{e.op}() on scalar {src} not supported")
            inner = dict(scope)
            inner[e.var] = item
            body = self.check(e.body, inner)
            if body not in ("bool", ANY):
                self.diag(f"{e.op}() body must be bool, got {body}")
            return CollT(item) if e.op == "select" else "bool"
        if isinstance(e, Compare):
            lt, rt = self.check(e.left, scope), self.check(e.right, scope)
            if not _compatible(lt, rt):
                self.diag(f"cannot compare {lt} with {rt}")
            return "bool"
        if isinstance(e, BoolOp):
            for side in (e.left, e.right):
                t = self.check(side, scope)
                if t not in ("bool", ANY):
                    self.diag(f"operand of {e.op} must be bool, got {t}")
            return "bool"
        if isinstance(e, Not):
            t = self.check(e.operand, scope)
            if t not in ("bool", ANY):
                self.diag(f"operand of not must be bool, got {t}")
            return "bool"
        raise TypeError(e)

    def _prop_type(self, t: ElemT, prop: str) -> Type:
        if prop == ID:
            return "string"
        attr = t.mm.attribute(t.cls, prop)
        if attr is not None:
            return attr
        rdef = t.mm.reference(t.cls, prop)
        if rdef is None:
            return self.diag(f"{t.cls} has no property {prop!r}")
        target = ElemT(rdef.target, t.mm)
        return CollT(target) if rdef.upper == MANY else target

    def _nav(self, t: Type, prop: str) -> Type:
        if t == ANY:
            return ANY
        if isinstance(t, ElemT):
            return self._prop_type(t, prop)
        if isinstance(t, CollT):
            if t.item == ANY:
                return CollT(ANY)
            if isinstance(t.item, ElemT):
                pt = self._prop_type(t.item, prop)
                return pt if isinstance(pt, CollT) else CollT(pt)
            return self.diag(f"cannot navigate .{prop} on {t}")
        return self.diag(f"cannot navigate .{prop} on scalar {t}")

    def _method(self, e: Method, t: Type, args: list[Type]) -> Type:
        if e.name == "concat":
            if t not in ("string", ANY) or args[0] not in ("string", ANY):
                return self.diag(f"concat() needs strings, got {t} and {args[0]}")
            return "string"
        item = _item(t)
        if item is None:
            return self.diag(f"{e.name}() on scalar {t} not supported")
        if e.name == "size":
            return "int"
        if e.name in ("isEmpty", "notEmpty"):
            return "bool"
        if e.name == "first":
            return item
        if e.name == "excluding" and not _compatible(item, args[0]):
            self.diag(f"excluding() argument {args[0]} does not match {item}")
        return CollT(item)


def typecheck(
    e: Expr | str,
    mm: Metamodel | None,
    var_types: Mapping[str, Type | str],
    signatures: Mapping[str, Signature] | None = None,
) -> tuple[Type, list[str]]:
    """Principal type of ``e`` plus diagnostics (empty when well typed)."""
    if isinstance(e, str):
        e = parse(e)
    resolved = {k: resolve_type(v, mm) if isinstance(v, str) else v for k, v in var_types.items()}
    tc = TypeChecker(resolved, signatures)
    t = tc.check(e)
    return t, tc.diagnostics
