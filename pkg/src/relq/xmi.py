"""XMI-flavoured model serialization and the fixed HTML rendering.

One XML element per model element, tagged with its class. Primitive
attributes and non-containment references (space-separated ids) are XML
attributes; containment children are nested under a wrapper tag named
after the reference. Output is canonical: one element per line, xmi:id
first, then attributes and references alphabetically.
"""

from __future__ import annotations

import html
import xml.etree.ElementTree as ET
from typing import Any

from .errors import ModelError
from .metamodel import Metamodel
from .model import Element, Model

XMI_NS = "http://www.omg.org/XMI"
_ID = f"{{{XMI_NS}}}id"
_VERSION = f"{{{XMI_NS}}}version"
_ROOT = f"{{{XMI_NS}}}XMI"

HTML_METAMODEL = "HtmlMetaModel"


def _escape(text: str) -> str:
    return (
        text.replace("&", "&amp;")
        .replace("<", "&lt;")
        .replace(">", "&gt;")
        .replace('"', "&quot;")
        .replace("\n", "&#10;")
        .replace("\r", "&#13;")
        .replace("\t", "&#9;")
    )


def _format_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


def _parse_value(text: str, prim: str, where: str) -> Any:
    if prim == "string":
        return text
    if prim == "int":
        try:
            return int(text)
        except ValueError:
            raise ModelError(f"{where}: {text!r} is not an integer") from None
    if text in ("true", "false"):
        return text == "true"
    raise ModelError(f"{where}: {text!r} is not a boolean")


def read_model(text: str | bytes, mm: Metamodel) -> Model:
    try:
        doc = ET.fromstring(text)
    except ET.ParseError as exc:
        raise ModelError(f"XML syntax error: {exc}") from None
    if doc.tag != _ROOT:
        raise ModelError(f"document root must be xmi:XMI, found {doc.tag!r}")
    declared = doc.get("metamodel")
    if declared is not None and declared != mm.name:
        raise ModelError(f"document conforms to {declared}, not {mm.name}")
    model = Model(mm)
    pending: list[tuple[Element, str, list[str]]] = []

    def build(node: ET.Element, parent: Element | None, ref: str | None) -> None:
        cls = node.tag
        if not mm.has_class(cls):
            raise ModelError(f"class {cls!r} is not in metamodel {mm.name}")
        eid = node.get(_ID)
        if not eid:
            raise ModelError(f"<{cls}> element without xmi:id")
        if eid in model:
            raise ModelError(f"duplicate xmi:id {eid!r}")
        attrs_decl = mm.attributes(cls)
        refs_decl = mm.references(cls)
        el = Element(eid, cls)
        for name, raw in node.attrib.items():
            if name == _ID:
                continue
            if name in attrs_decl:
                el.attrs[name] = _parse_value(raw, attrs_decl[name], f"{eid}.{name}")
            elif name in refs_decl and not refs_decl[name].containment:
                pending.append((el, name, raw.split()))
            else:
                raise ModelError(f"{eid}: undeclared property {name!r} on {cls}")
        model.add(el, parent, ref)
        for wrapper in node:
            rdef = refs_decl.get(wrapper.tag)
            if rdef is None or not rdef.containment:
                raise ModelError(f"{eid}: {wrapper.tag!r} is not a containment reference of {cls}")
            for child in wrapper:
                build(child, el, wrapper.tag)

    for top in doc:
        build(top, None, None)
    for el, name, ids in pending:
        for rid in ids:
            if rid not in model:
                raise ModelError(f"{el.id}.{name}: unresolvable idref {rid!r}")
        if ids:
            el.refs[name] = ids
    return model


def write_model(m: Model, format: str = "xmi") -> str:
    if format == "xmi":
        return _write_xmi(m)
    if format == "html":
        return _write_html(m)
    raise ValueError(f"unknown format {format!r}")


def _write_xmi(m: Model) -> str:
    mm = m.metamodel
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<xmi:XMI xmlns:xmi="{XMI_NS}" xmi:version="2.0" metamodel="{_escape(mm.name)}">',
    ]

    def emit(el: Element, depth: int) -> None:
        pad = "  " * depth
        parts = [f'xmi:id="{_escape(el.id)}"']
        for name in sorted(el.attrs):
            parts.append(f'{name}="{_escape(_format_value(el.attrs[name]))}"')
        refs = mm.references(el.cls)
        for name in sorted(el.refs):
            if el.refs[name] and not refs[name].containment:
                parts.append(f'{name}="{_escape(" ".join(el.refs[name]))}"')
        children = [
            (name, el.refs[name])
            for name, rdef in refs.items()
            if rdef.containment and el.refs.get(name)
        ]
        head = f"{pad}<{el.cls} {' '.join(parts)}"
        if not children:
            lines.append(head + "/>")
            return
        lines.append(head + ">")
        for name, ids in children:
            lines.append(f"{pad}  <{name}>")
            for cid in ids:
                emit(m.elements[cid], depth + 2)
            lines.append(f"{pad}  </{name}>")
        lines.append(f"{pad}</{el.cls}>")

    for root in m.root_elements():
        emit(root, 1)
    lines.append("</xmi:XMI>")
    return "\n".join(lines) + "\n"


def _write_html(m: Model) -> str:
    if m.metamodel.name != HTML_METAMODEL:
        raise ModelError(f"html output needs a {HTML_METAMODEL} model, got {m.metamodel.name}")
    pages = m.root_elements()
    if len(pages) != 1 or pages[0].cls != "Html":
        raise ModelError("html output needs exactly one Html root element")
    page = pages[0]
    title = html.escape(str(page.attrs.get("title", "")), quote=False)
    paras = "".join(
        f"<p>{html.escape(str(p.attrs.get('text', '')), quote=False)}</p>" for p in page.targets("body")
    )
    return f"<html><head><title>{title}</title></head><body>{paras}</body></html>\n"
