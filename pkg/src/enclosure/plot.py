"""SVG overlays of the plate, the cracks and the recovered geometry."""

from __future__ import annotations

import math
import xml.etree.ElementTree as ET
from typing import Sequence

from .geometry import CrackConfig, PlateGeometry

SCALE = 100.0
MARGIN = 0.4
_COLORS = {"tip": "#c0392b", "non-tip": "#2c7bb6"}


def _f(v: float) -> str:
    return format(round(v, 4), "g")


class _Canvas:
    def __init__(self, geom: PlateGeometry, title: str):
        self.geom = geom
        top = geom.probe_height + MARGIN
        self.top = top
        w = (geom.a + 2 * MARGIN) * SCALE
        h = (top + MARGIN) * SCALE
        self.root = ET.Element("svg", xmlns="http://www.w3.org/2000/svg", width=_f(w), height=_f(h),
                               viewBox=f"0 0 {_f(w)} {_f(h)}")
        ET.SubElement(self.root, "title").text = title

    def xy(self, x1: float, x2: float) -> tuple[str, str]:
        return _f((x1 + MARGIN) * SCALE), _f((self.top - x2) * SCALE)

    def add(self, tag: str, cls: str, **attrs) -> ET.Element:
        return ET.SubElement(self.root, tag, {"class": cls, **{k.replace("_", "-"): v for k, v in attrs.items()}})

    def line(self, cls, p, q, **attrs):
        (x1, y1), (x2, y2) = self.xy(*p), self.xy(*q)
        return self.add("line", cls, x1=x1, y1=y1, x2=x2, y2=y2, **attrs)

    def circle(self, cls, centre, r_phys=None, r_px=None, **attrs):
        cx, cy = self.xy(*centre)
        r = _f(r_phys * SCALE) if r_phys is not None else _f(r_px)
        return self.add("circle", cls, cx=cx, cy=cy, r=r, **attrs)

    def text(self) -> str:
        ET.indent(self.root)
        return ET.tostring(self.root, encoding="unicode") + "\n"


def _base(geom: PlateGeometry, cracks: CrackConfig | None, probes: Sequence[float], title: str) -> _Canvas:
    cv = _Canvas(geom, title)
    x, y = cv.xy(0.0, geom.b)
    cv.add("rect", "domain", x=x, y=y, width=_f(geom.a * SCALE), height=_f(geom.b * SCALE),
           fill="#f4f4f4", stroke="black", stroke_width="1.5")
    cv.line("junction", (0.0, geom.c), (geom.a, geom.c), stroke="#777", stroke_dasharray="6 4")
    if cracks is not None:
        for lo, hi in cracks.segments():
            cv.line("crack", (lo, geom.c), (hi, geom.c), stroke="black", stroke_width="5")
    for x1 in probes:
        cv.circle("probe", (x1, geom.probe_height), r_px=3, fill="#333")
    return cv


def extraction_svg(geom: PlateGeometry, cracks: CrackConfig | None, results, marker_width: float = 0.1,
                   title: str = "enclosure: recovered tangent discs") -> str:
    """Tangent discs B_s(x - s e2) and recovered tips for each extraction result.

    Tip markers are vertical bars of physical width ``marker_width``.
    """
    cv = _base(geom, cracks, [r.x1 for r in results], title)
    for r in results:
        if not (math.isfinite(r.s_hat) and r.s_hat > 0):
            continue
        cv.circle("disc", (r.x1, geom.probe_height - r.s_hat), r_phys=r.s_hat, fill="none",
                  stroke="#2c7bb6", stroke_width="1")
    for r in results:
        if not math.isfinite(r.c_hat) or r.parity_hat == "indeterminate":
            continue
        x, y = cv.xy(r.c_hat - 0.5 * marker_width, geom.c + 0.08)
        cv.add("rect", "tip", x=x, y=y, width=_f(marker_width * SCALE), height=_f(0.16 * SCALE),
               fill="#c0392b", fill_opacity="0.6")
    return cv.text()


def scan_svg(geom: PlateGeometry, cracks: CrackConfig | None, results,
             title: str = "enclosure: tip scan with discs of radius s~") -> str:
    """Scan verdicts as coloured probe markers; tip verdicts also draw their s~ disc."""
    cv = _base(geom, cracks, [r.x1 for r in results], title)
    st = geom.s_tilde
    for r in results:
        ok = "confident" if r.confident else "tentative"
        cv.circle(f"verdict {r.verdict} {ok}", (r.x1, geom.probe_height + 0.15), r_px=4,
                  fill=_COLORS[r.verdict] if r.confident else "white", stroke=_COLORS[r.verdict])
        if r.verdict == "tip":
            cv.circle("disc", (r.x1, geom.probe_height - st), r_phys=st, fill="none", stroke="#c0392b")
    return cv.text()
