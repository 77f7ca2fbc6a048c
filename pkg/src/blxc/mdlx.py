"""MDLX model file format: parsing and deterministic serialization.

MDLX is this toolchain's XML source format for hierarchical block diagrams:

    <model name="m" steps="1">
      <block name="in1" kind="Inport"><param k="dtype" v="scalar"/></block>
      <block name="g" kind="Gain"><param k="k" v="2.0"/></block>
      <block name="out1" kind="Outport"/>
      <subsystem name="S" masked="true"> ... </subsystem>
      <line src="in1:1" dst="g:1" dtype="scalar"/>
      <line src="g:1" dst="out1:1" dtype="scalar"/>
    </model>

Param values are JSON literals (numbers, arrays) or bare strings; multi-line
values (FunctionBlock bodies) go in element text instead of the v attribute.
A dst attribute may name several destinations separated by ";".
See docs/mdlx.md for the annotated example and docs/mdlx.xsd for the schema.
"""

from __future__ import annotations

import json
import xml.etree.ElementTree as ET
from xml.sax.saxutils import escape, quoteattr

from .dtypes import parse_dtype
from .errors import ModelSyntaxError, SchemaError
from .model import Block, Model, SignalLine, Subsystem, check_ident, kind_info


def parse_model(text: bytes | str) -> Model:
    """Parse MDLX bytes/text into a Model. Raises ModelSyntaxError for
    malformed XML, SchemaError for schema violations."""
    try:
        root = ET.fromstring(text)
    except ET.ParseError as err:
        raise ModelSyntaxError(f"malformed XML: {err}") from None
    if root.tag != "model":
        raise SchemaError(f"root element must be <model>, got <{root.tag}>")
    name = _req_attr(root, "name")
    check_ident(name, "model name")
    steps = int(root.get("steps", "1"))
    sub = _parse_subsystem_body(root, name, masked=False)
    return Model(name=name, root=sub, step_count_hint=steps)


def _parse_subsystem_body(elem: ET.Element, name: str, masked: bool) -> Subsystem:
    sub = Subsystem(name=name, masked=masked)
    for child in elem:
        if child.tag == "block":
            sub.children.append(_parse_block(child))
        elif child.tag == "subsystem":
            sname = _req_attr(child, "name")
            check_ident(sname, "subsystem name")
            smasked = child.get("masked", "false") == "true"
            sub.children.append(_parse_subsystem_body(child, sname, smasked))
        elif child.tag == "line":
            sub.lines.append(_parse_line(child))
        else:
            raise SchemaError(f"unexpected element <{child.tag}> in subsystem {name!r}")
    _check_line_endpoints(sub)
    return sub


def _check_line_endpoints(sub: Subsystem):
    """Post-parse guarantee: every line endpoint names an existing child and a
    port within its arity."""
    from .model import Subsystem as Sub

    by_name = {c.name: c for c in sub.children}

    def ports(node, side: str) -> int:
        if isinstance(node, Sub):
            return len(node.port_blocks("Outport" if side == "src" else "Inport"))
        return node.n_out if side == "src" else node.n_in

    for line in sub.lines:
        for (bname, port), side in ([(line.src, "src")]
                                    + [(d, "dst") for d in line.dsts]):
            node = by_name.get(bname)
            if node is None:
                raise SchemaError(f"line references unknown block {bname!r} "
                                  f"in subsystem {sub.name!r}")
            if not 1 <= port <= ports(node, side):
                raise SchemaError(f"line references missing port {bname}:{port} "
                                  f"in subsystem {sub.name!r}")


def _parse_block(elem: ET.Element) -> Block:
    name = _req_attr(elem, "name")
    kind = _req_attr(elem, "kind")
    kind_info(kind)  # reject unknown kinds before touching params
    params: dict[str, object] = {}
    for p in elem:
        if p.tag != "param":
            raise SchemaError(f"unexpected element <{p.tag}> in block {name!r}")
        key = _req_attr(p, "k")
        if "v" in p.attrib:
            params[key] = _parse_param_value(p.attrib["v"])
        else:
            params[key] = p.text or ""
    extra = frozenset((elem.get("attrs") or "").split())
    return Block.make(name, kind, params, extra)


def _parse_param_value(text: str):
    try:
        val = json.loads(text)
    except json.JSONDecodeError:
        return text
    return val if isinstance(val, (int, float, list)) else text


def _parse_line(elem: ET.Element) -> SignalLine:
    src = _parse_endpoint(_req_attr(elem, "src"))
    dst_text = _req_attr(elem, "dst")
    dsts = tuple(_parse_endpoint(d) for d in dst_text.split(";") if d.strip())
    dtype = parse_dtype(_req_attr(elem, "dtype"))
    return SignalLine(src=src, dsts=dsts, dtype=dtype)


def _parse_endpoint(text: str) -> tuple[str, int]:
    block, sep, port = text.strip().partition(":")
    if not sep or not port.isdigit() or int(port) < 1:
        raise SchemaError(f"bad line endpoint {text!r} (want block:port)")
    return block, int(port)


def _req_attr(elem: ET.Element, key: str) -> str:
    val = elem.get(key)
    if val is None:
        raise SchemaError(f"<{elem.tag}> missing required attribute {key!r}")
    return val


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def serialize_model(model: Model) -> bytes:
    """Deterministic MDLX bytes; parse_model(serialize_model(m)) is
    structurally equal to m."""
    out = ['<?xml version="1.0" encoding="UTF-8"?>']
    out.append(f"<model name={quoteattr(model.name)} steps=\"{model.step_count_hint}\">")
    _write_subsystem_body(model.root, out, indent=1)
    out.append("</model>")
    return ("\n".join(out) + "\n").encode("utf-8")


def _write_subsystem_body(sub: Subsystem, out: list[str], indent: int):
    pad = "  " * indent
    for child in sub.children:
        if isinstance(child, Subsystem):
            masked = ' masked="true"' if child.masked else ""
            out.append(f"{pad}<subsystem name={quoteattr(child.name)}{masked}>")
            _write_subsystem_body(child, out, indent + 1)
            out.append(f"{pad}</subsystem>")
        else:
            _write_block(child, out, indent)
    for line in sub.lines:
        src = f"{line.src[0]}:{line.src[1]}"
        dst = ";".join(f"{b}:{p}" for b, p in line.dsts)
        out.append(f"{pad}<line src={quoteattr(src)} dst={quoteattr(dst)} "
                   f"dtype={quoteattr(str(line.dtype))}/>")


def _write_block(blk: Block, out: list[str], indent: int):
    pad = "  " * indent
    extra = sorted(blk.attrs - kind_info(blk.kind).default_attrs)
    attrs = f" attrs={quoteattr(' '.join(extra))}" if extra else ""
    head = f"{pad}<block name={quoteattr(blk.name)} kind={quoteattr(blk.kind)}{attrs}"
    if not blk.params:
        out.append(head + "/>")
        return
    out.append(head + ">")
    for key in sorted(blk.params):
        val = blk.params[key]
        text = _format_param_value(val)
        if "\n" in text:
            out.append(f"{pad}  <param k={quoteattr(key)}>{escape(text)}</param>")
        else:
            out.append(f"{pad}  <param k={quoteattr(key)} v={quoteattr(text)}/>")
    out.append(f"{pad}</block>")


def _format_param_value(val) -> str:
    if isinstance(val, str):
        return val
    return json.dumps(val)
