"""Class-diagram metamodels and their line-oriented text form.

Grammar::

    metamodel <Name>
    class <Name> [abstract] [extends <Name>]
      attr <name>: string|int|bool
      ref <name>: <Class> [0..1|1|*|0..*|1..*] [containment]

Blank lines and ``#`` comments are ignored. Indentation is cosmetic.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .errors import MetamodelError, SyntaxErrorAt

PRIMITIVES = ("string", "int", "bool")
_TYPE_ALIASES = {
    "string": "string",
    "str": "string",
    "int": "int",
    "integer": "int",
    "bool": "bool",
    "boolean": "bool",
}
MANY = -1


@dataclass(frozen=True)
class RefDef:
    name: str
    target: str
    containment: bool = False
    lower: int = 0
    upper: int = 1  # 1 or MANY

    @property
    def many(self) -> bool:
        return self.upper == MANY


@dataclass
class ClassDef:
    name: str
    abstract: bool = False
    superclass: str | None = None
    attributes: dict[str, str] = field(default_factory=dict)
    references: dict[str, RefDef] = field(default_factory=dict)


@dataclass
class Metamodel:
    name: str
    classes: dict[str, ClassDef] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self._validate()

    def _validate(self) -> None:
        for cls in self.classes.values():
            if cls.superclass is not None and cls.superclass not in self.classes:
                raise MetamodelError(f"class {cls.name}: unknown superclass {cls.superclass!r}")
            for ref in cls.references.values():
                if ref.target not in self.classes:
                    raise MetamodelError(
                        f"class {cls.name}: unknown reference target {ref.target!r} for {ref.name!r}"
                    )
        for name in self.classes:
            seen = []
            cur: str | None = name
            while cur is not None:
                if cur in seen:
                    raise MetamodelError(f"cyclic inheritance through {' -> '.join(seen + [cur])}")
                seen.append(cur)
                cur = self.classes[cur].superclass
        for name in self.classes:
            props: set[str] = set()
            for cdef in reversed(self.lineage(name)):
                for prop in [*cdef.attributes, *cdef.references]:
                    if prop in props:
                        raise MetamodelError(f"class {name}: duplicate property {prop!r}")
                    props.add(prop)

    def lineage(self, cls: str) -> list[ClassDef]:
        """The class followed by its ancestors, nearest first."""
        out = []
        cur: str | None = cls
        while cur is not None:
            cdef = self.classes[cur]
            out.append(cdef)
            cur = cdef.superclass
        return out

    def has_class(self, cls: str) -> bool:
        return cls in self.classes

    def require_class(self, cls: str) -> ClassDef:
        try:
            return self.classes[cls]
        except KeyError:
            raise MetamodelError(f"unknown class {cls!r} in metamodel {self.name}") from None

    def is_subclass(self, cls: str, ancestor: str) -> bool:
        cur: str | None = cls
        while cur is not None:
            if cur == ancestor:
                return True
            cur = self.classes[cur].superclass
        return False

    def subclasses(self, cls: str) -> list[str]:
        """All classes conforming to ``cls`` (the class itself included), in declaration order."""
        return [c for c in self.classes if self.is_subclass(c, cls)]

    def attributes(self, cls: str) -> dict[str, str]:
        """Attribute name -> primitive type, inherited ones first."""
        out: dict[str, str] = {}
        for cdef in reversed(self.lineage(cls)):
            out.update(cdef.attributes)
        return out

    def references(self, cls: str) -> dict[str, RefDef]:
        out: dict[str, RefDef] = {}
        for cdef in reversed(self.lineage(cls)):
            out.update(cdef.references)
        return out

    def attribute(self, cls: str, name: str) -> str | None:
        return self.attributes(cls).get(name)

    def reference(self, cls: str, name: str) -> RefDef | None:
        return self.references(cls).get(name)


_CLASS_RE = re.compile(r"^class\s+(\w+)((?:\s+abstract)?)(?:\s+extends\s+(\w+))?\s*$")
_ATTR_RE = re.compile(r"^attr\s+(\w+)\s*:\s*(\w+)\s*$")
_REF_RE = re.compile(r"^ref\s+(\w+)\s*:\s*(\w+)\s*(?:\[\s*([^\]]*)\s*\])?\s*(containment)?\s*$")


def _multiplicity(text: str | None, lineno: int, source: str) -> tuple[int, int]:
    if text is None:
        return 0, 1
    mult = text.replace(" ", "")
    table = {
        "0..1": (0, 1),
        "1": (1, 1),
        "1..1": (1, 1),
        "*": (0, MANY),
        "0..*": (0, MANY),
        "1..*": (1, MANY),
    }
    if mult not in table:
        raise SyntaxErrorAt(f"bad multiplicity [{text}]", lineno, source=source)
    return table[mult]


def parse_metamodel(text: str, source: str = "<metamodel>") -> Metamodel:
    name = None
    classes: dict[str, ClassDef] = {}
    current: ClassDef | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("metamodel"):
            parts = line.split()
            if len(parts) != 2 or name is not None:
                raise SyntaxErrorAt("expected a single 'metamodel <Name>' header", lineno, source=source)
            name = parts[1]
            continue
        if name is None:
            raise SyntaxErrorAt("missing 'metamodel <Name>' header", lineno, source=source)
        if m := _CLASS_RE.match(line):
            cname = m.group(1)
            if cname in classes:
                raise MetamodelError(f"{source}:{lineno}: duplicate class name {cname!r}")
            current = ClassDef(cname, abstract=bool(m.group(2).strip()), superclass=m.group(3))
            classes[cname] = current
        elif m := _ATTR_RE.match(line):
            if current is None:
                raise SyntaxErrorAt("attr outside class", lineno, source=source)
            aname, atype = m.groups()
            if atype not in _TYPE_ALIASES:
                raise SyntaxErrorAt(f"unknown attribute type {atype!r}", lineno, source=source)
            if aname in current.attributes or aname in current.references:
                raise MetamodelError(f"{source}:{lineno}: duplicate property {aname!r}")
            current.attributes[aname] = _TYPE_ALIASES[atype]
        elif m := _REF_RE.match(line):
            if current is None:
                raise SyntaxErrorAt("ref outside class", lineno, source=source)
            rname, target, mult, cont = m.groups()
            lower, upper = _multiplicity(mult, lineno, source)
            if rname in current.attributes or rname in current.references:
                raise MetamodelError(f"{source}:{lineno}: duplicate property {rname!r}")
            current.references[rname] = RefDef(rname, target, bool(cont), lower, upper)
        else:
            raise SyntaxErrorAt(f"cannot parse {line!r}", lineno, source=source)
    if name is None:
        raise SyntaxErrorAt("missing 'metamodel <Name>' header", 1, source=source)
    return Metamodel(name, classes)
