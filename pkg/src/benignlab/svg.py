"""Minimal SVG line plots with a log-scaled x axis."""
import math
from xml.sax.saxutils import escape

COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#7f7f7f", "#9467bd", "#ff7f0e")


def _fmt(x):
    return f"{x:.2f}"


def line_plot(series, title="", xlabel="d", ylabel="", vline=None, ylim=None, width=640, height=420):
    """Render ``series`` as polylines with optional +-1 std whiskers.

    ``series`` is a list of dicts with keys ``label``, ``x``, ``y`` and
    optionally ``err``.  Non-finite points are skipped; values outside
    ``ylim`` are clipped to the frame.
    """
    ml, mr, mt, mb = 64, 140, 36, 48
    pw, ph = width - ml - mr, height - mt - mb
    xs = [x for s in series for x in s["x"] if x > 0]
    if not xs:
        raise ValueError("nothing to plot")
    lx0, lx1 = math.log10(min(xs)), math.log10(max(xs))
    if lx1 == lx0:
        lx0, lx1 = lx0 - 0.5, lx1 + 0.5
    if ylim is None:
        ys = [y for s in series for y in s["y"] if math.isfinite(y)]
        ylim = (min(ys + [0.0]), max(ys + [1.0]) * 1.05)
    y0, y1 = ylim

    def px(x):
        return ml + (math.log10(x) - lx0) / (lx1 - lx0) * pw

    def py(y):
        y = min(max(y, y0), y1)
        return mt + (1 - (y - y0) / (y1 - y0)) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
           f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
           f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="black"/>']
    if title:
        out.append(f'<text x="{ml + pw / 2:.1f}" y="20" text-anchor="middle">{escape(title)}</text>')
    for e in range(math.floor(lx0), math.ceil(lx1) + 1):
        if lx0 - 1e-9 <= e <= lx1 + 1e-9:
            x = px(10.0 ** e)
            out.append(f'<line x1="{_fmt(x)}" y1="{mt + ph}" x2="{_fmt(x)}" y2="{mt + ph + 5}" stroke="black"/>')
            out.append(f'<text x="{_fmt(x)}" y="{mt + ph + 18}" text-anchor="middle">1e{e}</text>')
    for i in range(6):
        yv = y0 + (y1 - y0) * i / 5
        y = py(yv)
        out.append(f'<line x1="{ml - 5}" y1="{_fmt(y)}" x2="{ml}" y2="{_fmt(y)}" stroke="black"/>')
        out.append(f'<text x="{ml - 8}" y="{_fmt(y + 4)}" text-anchor="end">{yv:.3g}</text>')
    out.append(f'<text x="{ml + pw / 2:.1f}" y="{height - 8}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="16" y="{mt + ph / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 16 {mt + ph / 2:.1f})">{escape(ylabel)}</text>')
    if vline is not None and min(xs) <= vline <= max(xs):
        x = px(vline)
        out.append(f'<line x1="{_fmt(x)}" y1="{mt}" x2="{_fmt(x)}" y2="{mt + ph}" stroke="black" '
                   f'stroke-dasharray="4 3"/>')
    for i, s in enumerate(series):
        color = s.get("color", COLORS[i % len(COLORS)])
        pts = [(x, y) for x, y in zip(s["x"], s["y"]) if x > 0 and math.isfinite(y)]
        if pts:
            path = " ".join(f"{_fmt(px(x))},{_fmt(py(y))}" for x, y in pts)
            out.append(f'<polyline points="{path}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        for x, y, e in zip(s["x"], s["y"], s.get("err") or []):
            if x > 0 and math.isfinite(y) and math.isfinite(e) and e > 0:
                xp = _fmt(px(x))
                out.append(f'<line x1="{xp}" y1="{_fmt(py(y - e))}" x2="{xp}" y2="{_fmt(py(y + e))}" '
                           f'stroke="{color}"/>')
        ly = mt + 14 + 18 * i
        out.append(f'<line x1="{ml + pw + 10}" y1="{ly}" x2="{ml + pw + 30}" y2="{ly}" stroke="{color}" '
                   f'stroke-width="2"/>')
        out.append(f'<text x="{ml + pw + 36}" y="{ly + 4}">{escape(s["label"])}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
