"""SVG trace plots.

Three series against record index on a log10 axis: the mean of the nu
parameters in red, eta in green and sigma in blue.  Traces hold natural
logs, so the plotted coordinate is ``value / ln 10``.
"""

import math

WIDTH, HEIGHT = 800, 300
LEFT, RIGHT, TOP, BOTTOM = 60, 20, 20, 40
SERIES = (("mean_log_nu", "red"), ("log_eta", "green"), ("log_sigma", "blue"))


def log10_values(records, name):
    return [getattr(r, name) / math.log(10) for r in records]


def y_range(records):
    vals = [v for name, _ in SERIES for v in log10_values(records, name) if math.isfinite(v)]
    if not vals:
        return -1.0, 1.0
    lo, hi = math.floor(min(vals)), math.ceil(max(vals))
    if lo == hi:
        lo, hi = lo - 1, hi + 1
    return float(lo), float(hi)


def pixel_points(records, name, yr=None):
    """``(x, y)`` pixel coordinates of one series."""
    lo, hi = yr or y_range(records)
    n = len(records)
    w = WIDTH - LEFT - RIGHT
    h = HEIGHT - TOP - BOTTOM
    pts = []
    for i, v in enumerate(log10_values(records, name)):
        x = LEFT + (w * i / (n - 1) if n > 1 else w / 2)
        y = TOP + (hi - v) / (hi - lo) * h
        pts.append((x, y))
    return pts


def render_svg(records, title="") -> str:
    if not records:
        raise ValueError("cannot plot an empty trace")
    lo, hi = y_range(records)
    h = HEIGHT - TOP - BOTTOM
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<rect x="{LEFT}" y="{TOP}" width="{WIDTH - LEFT - RIGHT}" height="{h}" fill="none" stroke="black"/>',
    ]
    for k in range(int(lo), int(hi) + 1):
        y = TOP + (hi - k) / (hi - lo) * h
        out.append(f'<line x1="{LEFT - 5}" y1="{y:.2f}" x2="{LEFT}" y2="{y:.2f}" stroke="black"/>')
        out.append(f'<text x="{LEFT - 8}" y="{y + 4:.2f}" font-size="11" text-anchor="end">1e{k}</text>')
    if title:
        out.append(f'<text x="{WIDTH / 2:.0f}" y="{HEIGHT - 10}" font-size="12" text-anchor="middle">{_escape(title)}</text>')
    for name, colour in SERIES:
        pts = " ".join(f"{x:.2f},{y:.2f}" for x, y in pixel_points(records, name, (lo, hi))
                       if math.isfinite(y))
        out.append(f'<polyline class="{name}" fill="none" stroke="{colour}" stroke-width="0.8" points="{pts}"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _escape(s):
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def write_svg(path, records, title=""):
    text = render_svg(records, title)
    with open(path, "w") as fh:
        fh.write(text)
