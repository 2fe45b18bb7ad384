"""Static SVG figures for staircase decompositions.

Draws the window frame, the upper boundary of every level staircase, and
glyphs for the points: filled circles for jump points (class ``jump``),
open circles for exposed corners that are joins rather than jumps
(class ``join``).
"""

from __future__ import annotations

import xml.etree.ElementTree as ET

from .geometry import SingleLineDecomposition, Staircase

__all__ = ["decomposition_svg", "save_decomposition_svg"]

_SIZE = 420.0
_MARGIN = 40.0
_LINE_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b", "#e377c2"]


def _mapper(window):
    span = _SIZE - 2 * _MARGIN
    sx = span / window.x_max
    sy = span / window.y_max

    def to_px(x: float, y: float) -> tuple[float, float]:
        return (_MARGIN + sx * x, _SIZE - _MARGIN - sy * y)

    return to_px


def _staircase_path(stair: Staircase, to_px) -> str:
    w = stair.window
    corners = list(stair.corners)
    if not corners:
        pts = [(0.0, w.y_max), (w.x_max, w.y_max), (w.x_max, 0.0)]
    else:
        pts = [(corners[0].x, w.y_max)]
        for i, c in enumerate(corners):
            pts.append((c.x, c.y))
            nxt = corners[i + 1].x if i + 1 < len(corners) else w.x_max
            pts.append((nxt, c.y))
    cmds = []
    for i, (x, y) in enumerate(pts):
        px, py = to_px(x, y)
        cmds.append(f"{'M' if i == 0 else 'L'}{px:.2f} {py:.2f}")
    return " ".join(cmds)


def decomposition_svg(d: SingleLineDecomposition) -> str:
    """Render a decomposition as a standalone SVG document string."""
    window = d.pattern.window
    to_px = _mapper(window)
    root = ET.Element(
        "svg",
        xmlns="http://www.w3.org/2000/svg",
        width=f"{_SIZE:.0f}",
        height=f"{_SIZE:.0f}",
        viewBox=f"0 0 {_SIZE:.0f} {_SIZE:.0f}",
    )
    x0, y0 = to_px(0.0, window.y_max)
    x1, y1 = to_px(window.x_max, 0.0)
    ET.SubElement(
        root,
        "rect",
        x=f"{x0:.2f}",
        y=f"{y0:.2f}",
        width=f"{x1 - x0:.2f}",
        height=f"{y1 - y0:.2f}",
        fill="none",
        stroke="black",
    )

    n_levels = len(d.pattern) + 1
    for k in range(1, n_levels + 1):
        stair = d.level(k)
        if stair.is_whole_window:
            continue
        color = _LINE_COLORS[(k - 1) % len(_LINE_COLORS)]
        ET.SubElement(
            root,
            "path",
            d=_staircase_path(stair, to_px),
            fill="none",
            stroke=color,
            attrib={"stroke-width": "1.5", "class": f"level-{k}"},
        )

    jumps = {p.as_tuple() for p in d.pattern.points}
    for k in range(1, n_levels + 1):
        for c in d.level(k).corners:
            if c.as_tuple() in jumps:
                continue
            px, py = to_px(c.x, c.y)
            ET.SubElement(
                root,
                "circle",
                cx=f"{px:.2f}",
                cy=f"{py:.2f}",
                r="4",
                fill="white",
                stroke="black",
                attrib={"class": "join"},
            )
    for idx, line in enumerate(d.lines):
        color = _LINE_COLORS[idx % len(_LINE_COLORS)]
        for p in line:
            px, py = to_px(p.x, p.y)
            ET.SubElement(
                root,
                "circle",
                cx=f"{px:.2f}",
                cy=f"{py:.2f}",
                r="4",
                fill=color,
                stroke="black",
                attrib={"class": "jump"},
            )
    return ET.tostring(root, encoding="unicode")


def save_decomposition_svg(path, d: SingleLineDecomposition) -> None:
    with open(path, "w") as fh:
        fh.write(decomposition_svg(d))
        fh.write("\n")
