"""SVG overlay of a schema: one class-colored rectangle per element."""

from __future__ import annotations

import colorsys
import hashlib
from xml.sax.saxutils import escape, quoteattr

from .schema import ScreenSchema, dequantize_box


def class_color(name: str) -> str:
    """Stable color for a class name (hue from a hash of the name)."""
    hue = int.from_bytes(hashlib.sha1(name.encode()).digest()[:2], "big") / 65536
    r, g, b = colorsys.hls_to_rgb(hue, 0.45, 0.75)
    return "#{:02x}{:02x}{:02x}".format(round(r * 255), round(g * 255), round(b * 255))


def render_svg(schema: ScreenSchema, width: int = 1000, height: int = 1000) -> str:
    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" style="background:#ffffff">'
    ]
    for el in schema.walk():
        b = dequantize_box(el.box, width, height)
        color = class_color(el.cls)
        label = el.cls if el.payload is None else f"{el.cls} {el.payload}"
        lines.append(
            f'<rect x="{b.xmin:.1f}" y="{b.ymin:.1f}" width="{b.xmax - b.xmin:.1f}" '
            f'height="{b.ymax - b.ymin:.1f}" fill="none" stroke="{color}" stroke-width="2" '
            f'data-class={quoteattr(el.cls)}/>'
        )
        lines.append(
            f'<text x="{b.xmin + 2:.1f}" y="{b.ymin + 12:.1f}" font-size="10" fill="{color}">'
            f'{escape(label)}</text>'
        )
    lines.append("</svg>")
    return "\n".join(lines) + "\n"
