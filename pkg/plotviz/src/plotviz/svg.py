"""Minimal SVG document builder.

Coordinates are formatted with fixed precision so output bytes never
depend on float repr quirks; that is what makes golden-file tests
possible.
"""

from __future__ import annotations


def fmt(v) -> str:
    """Fixed two-decimal coordinate formatting, integers kept clean."""
    if isinstance(v, int):
        return str(v)
    return f"{v:.2f}"


def attrs(kv: dict) -> str:
    parts = []
    for k, v in kv.items():
        if v is None:
            continue
        name = k.rstrip("_").replace("_", "-")  # class_, stroke_width, ...
        value = fmt(v) if isinstance(v, (int, float)) else str(v)
        parts.append(f'{name}="{value}"')
    return " ".join(parts)


class Svg:
    def __init__(self, width: int, height: int, comment: str = ""):
        self.width = width
        self.height = height
        self.parts: list[str] = []
        if comment:
            self.parts.append(f"<!-- {comment} -->")

    def raw(self, text: str):
        self.parts.append(text)

    def rect(self, x, y, w, h, **kv):
        self.parts.append(f'<rect x="{fmt(x)}" y="{fmt(y)}" width="{fmt(w)}" '
                          f'height="{fmt(h)}" {attrs(kv)}/>')

    def line(self, x1, y1, x2, y2, **kv):
        self.parts.append(f'<line x1="{fmt(x1)}" y1="{fmt(y1)}" x2="{fmt(x2)}" '
                          f'y2="{fmt(y2)}" {attrs(kv)}/>')

    def circle(self, cx, cy, r, **kv):
        self.parts.append(f'<circle cx="{fmt(cx)}" cy="{fmt(cy)}" r="{fmt(r)}" '
                          f'{attrs(kv)}/>')

    def polygon(self, points, **kv):
        text = " ".join(f"{fmt(x)},{fmt(y)}" for x, y in points)
        self.parts.append(f'<polygon points="{text}" {attrs(kv)}/>')

    def text(self, x, y, content, **kv):
        body = (str(content).replace("&", "&amp;")
                .replace("<", "&lt;").replace(">", "&gt;"))
        self.parts.append(f'<text x="{fmt(x)}" y="{fmt(y)}" {attrs(kv)}>'
                          f'{body}</text>')

    def render(self) -> str:
        head = (f'<svg xmlns="http://www.w3.org/2000/svg" '
                f'width="{self.width}" height="{self.height}" '
                f'viewBox="0 0 {self.width} {self.height}">')
        return "\n".join([head] + self.parts + ["</svg>"]) + "\n"
