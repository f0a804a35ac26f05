"""Minimal deterministic XML writer plus parsing helpers."""

from __future__ import annotations

from dataclasses import dataclass, field
from xml.sax.saxutils import escape, quoteattr

XML_DECLARATION = '<?xml version="1.0" encoding="UTF-8"?>'


@dataclass
class El:
    tag: str
    text: str | None = None
    children: list["El"] = field(default_factory=list)
    attrs: list[tuple[str, str]] = field(default_factory=list)

    def add(self, child: "El") -> "El":
        self.children.append(child)
        return child

    def leaf(self, tag: str, text: str) -> "El":
        return self.add(El(tag, text))


def _escape_text(text: str) -> str:
    # \r would be normalized away by any conforming parser.
    return escape(text, {"\r": "&#13;"})


def _render(el: El, depth: int, out: list[str], indent: str) -> None:
    pad = indent * depth
    attrs = "".join(f" {k}={quoteattr(v, {chr(13): '&#13;', chr(10): '&#10;', chr(9): '&#9;'})}" for k, v in el.attrs)
    if el.children:
        out.append(f"{pad}<{el.tag}{attrs}>")
        for c in el.children:
            _render(c, depth + 1, out, indent)
        out.append(f"{pad}</{el.tag}>")
    elif el.text is None:
        out.append(f"{pad}<{el.tag}{attrs}/>")
    else:
        out.append(f"{pad}<{el.tag}{attrs}>{_escape_text(el.text)}</{el.tag}>")


def render(root: El, indent: str = "  ") -> str:
    out = [XML_DECLARATION]
    _render(root, 0, out, indent)
    return "\n".join(out) + "\n"


def split_tag(tag: str) -> tuple[str | None, str]:
    if tag.startswith("{"):
        ns, _, local = tag[1:].partition("}")
        return ns, local
    return None, tag
