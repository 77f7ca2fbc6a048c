"""Allocation report: render a Schedule as an SVG Gantt chart.

One horizontal lane per used core, bar x-extents proportional to nanoseconds
(default 1 px per 10 ns), communication events drawn as arrows between lanes.
Output is deterministic for a given schedule.
"""

from __future__ import annotations

from xml.sax.saxutils import escape

from .scheduler import Schedule

PX_PER_NS = 0.1          # 1 px per 10 ns
LANE_HEIGHT = 24
LANE_GAP = 8
MARGIN_LEFT = 70
MARGIN_TOP = 40
MARGIN_RIGHT = 30
MARGIN_BOTTOM = 20
MIN_BAR_PX = 2.0

_BAR_FILL = "#4a90d9"
_COMM_STROKE = "#c0392b"


def emit_gantt(sched: Schedule, title: str = "", px_per_ns: float = PX_PER_NS) -> bytes:
    """Well-formed SVG bytes for the schedule."""
    cores = sorted(set(sched.assignment.values()))
    lane_y = {c: MARGIN_TOP + i * (LANE_HEIGHT + LANE_GAP)
              for i, c in enumerate(cores)}
    width = MARGIN_LEFT + max(1.0, sched.makespan_ns * px_per_ns) + MARGIN_RIGHT
    height = (MARGIN_TOP + len(cores) * (LANE_HEIGHT + LANE_GAP) + MARGIN_BOTTOM)

    def x(ns: int) -> float:
        return MARGIN_LEFT + ns * px_per_ns

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:.1f}" '
        f'height="{height:.1f}" viewBox="0 0 {width:.1f} {height:.1f}">',
        "<style>text{font-family:monospace;font-size:10px;}"
        ".lane-label{font-size:11px;}.title{font-size:12px;}</style>",
        f'<text class="title" x="{MARGIN_LEFT}" y="16">'
        f"{escape(title or 'schedule')} | makespan {sched.makespan_ns} ns | "
        f"{len(cores)} cores</text>",
    ]

    for c in cores:
        y = lane_y[c]
        out.append(f'<g id="lane-{c}">')
        out.append(f'<text class="lane-label" x="6" y="{y + LANE_HEIGHT - 8}">'
                   f"core {c}</text>")
        out.append(f'<line x1="{MARGIN_LEFT}" y1="{y + LANE_HEIGHT}" '
                   f'x2="{width - MARGIN_RIGHT:.1f}" y2="{y + LANE_HEIGHT}" '
                   'stroke="#999" stroke-width="0.5"/>')
        bars = sorted((sched.start_ns[u], sched.finish_ns[u], u)
                      for u, core in sched.assignment.items() if core == c)
        for s, f, u in bars:
            w = max(MIN_BAR_PX, (f - s) * px_per_ns)
            out.append(f'<rect x="{x(s):.2f}" y="{y}" width="{w:.2f}" '
                       f'height="{LANE_HEIGHT - 4}" fill="{_BAR_FILL}" '
                       f'stroke="#205080" stroke-width="0.5">'
                       f"<title>{escape(u)} [{s}, {f}) ns</title></rect>")
            if w >= 60:
                out.append(f'<text x="{x(s) + 2:.2f}" y="{y + 13}" fill="#fff">'
                           f"{escape(u[:int(w / 6)])}</text>")
        out.append("</g>")

    if sched.comm_events:
        out.append('<g id="comm">')
        for e in sorted(sched.comm_events,
                        key=lambda e: (e.depart_ns, e.var, e.dst_core)):
            if e.src_core not in lane_y or e.dst_core not in lane_y:
                continue
            y1 = lane_y[e.src_core] + LANE_HEIGHT - 4
            y2 = lane_y[e.dst_core]
            out.append(f'<line x1="{x(e.depart_ns):.2f}" y1="{y1}" '
                       f'x2="{x(e.arrive_ns):.2f}" y2="{y2}" '
                       f'stroke="{_COMM_STROKE}" stroke-width="0.8" '
                       f'stroke-dasharray="3,2">'
                       f"<title>{escape(e.var)}: core {e.src_core} -&gt; "
                       f"core {e.dst_core}</title></line>")
        out.append("</g>")

    out.append("</svg>")
    return ("\n".join(out) + "\n").encode("utf-8")
