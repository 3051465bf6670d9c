"""Standalone SVG line charts (mean over seeds with a min-max band)."""

from __future__ import annotations

from collections import defaultdict
from pathlib import Path
from xml.sax.saxutils import escape

from ..trainer import MetricsRow
from .metrics import read_metrics

X_AXES = {"iteration": "iteration", "usv-count": "n_usvs", "uav-count": "n_uavs"}
Y_AXES = {"reward": "mean_episode_reward", "mean_episode_reward": "mean_episode_reward",
          "delay": "mean_task_delay", "mean_task_delay": "mean_task_delay"}
Y_LABELS = {"mean_episode_reward": "Average reward", "mean_task_delay": "Average execution delay (s)"}
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f")

W, H = 640, 420
LEFT, RIGHT, TOP, BOTTOM = 80, 170, 30, 60


def aggregate(rows: list[MetricsRow], x: str, y: str) -> dict[str, list[tuple[float, float, float, float]]]:
    """variant -> sorted [(x, mean, min, max)] over seeds.

    For scenario-count axes each (variant, scenario, seed) contributes its
    last iteration only.
    """
    xf, yf = X_AXES[x], Y_AXES[y]
    if xf != "iteration":
        latest: dict[tuple, MetricsRow] = {}
        for r in rows:
            key = (r.variant, r.n_usvs, r.n_uavs, r.n_gss, r.seed)
            if key not in latest or r.iteration >= latest[key].iteration:
                latest[key] = r
        rows = list(latest.values())
    groups: dict[str, dict[float, list[float]]] = defaultdict(lambda: defaultdict(list))
    for r in rows:
        groups[r.variant][float(getattr(r, xf))].append(float(getattr(r, yf)))
    out = {}
    for variant in sorted(groups):
        pts = []
        for xv in sorted(groups[variant]):
            vals = groups[variant][xv]
            pts.append((xv, sum(vals) / len(vals), min(vals), max(vals)))
        out[variant] = pts
    return out


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi == lo:
        return [lo]
    return [lo + (hi - lo) * i / (n - 1) for i in range(n)]


def render_svg(series: dict[str, list[tuple[float, float, float, float]]], x: str, y: str) -> str:
    if not series:
        raise ValueError("empty selection: no rows to plot")
    xs = [p[0] for pts in series.values() for p in pts]
    ys = [v for pts in series.values() for p in pts for v in (p[2], p[3])]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    if x0 == x1:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y0 == y1:
        pad = abs(y0) * 0.05 or 1.0
        y0, y1 = y0 - pad, y1 + pad
    pw, ph = W - LEFT - RIGHT, H - TOP - BOTTOM

    def sx(v):
        return LEFT + (v - x0) / (x1 - x0) * pw

    def sy(v):
        return TOP + ph - (v - y0) / (y1 - y0) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" '
           'font-family="sans-serif" font-size="12">',
           f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>',
           f'<line x1="{LEFT}" y1="{TOP + ph}" x2="{LEFT + pw}" y2="{TOP + ph}" stroke="black"/>',
           f'<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{TOP + ph}" stroke="black"/>']
    for t in _ticks(x0, x1):
        out.append(f'<text x="{_fmt(sx(t))}" y="{TOP + ph + 18}" text-anchor="middle">{t:.4g}</text>')
    for t in _ticks(y0, y1):
        out.append(f'<text x="{LEFT - 6}" y="{_fmt(sy(t) + 4)}" text-anchor="end">{t:.4g}</text>')
    out.append(f'<text x="{LEFT + pw / 2:.2f}" y="{H - 15}" text-anchor="middle">{escape(x)}</text>')
    out.append(f'<text x="15" y="{TOP + ph / 2:.2f}" text-anchor="middle" '
               f'transform="rotate(-90 15 {TOP + ph / 2:.2f})">{escape(Y_LABELS[Y_AXES[y]])}</text>')
    for i, (variant, pts) in enumerate(series.items()):
        color = PALETTE[i % len(PALETTE)]
        upper = [f"{_fmt(sx(p[0]))},{_fmt(sy(p[3]))}" for p in pts]
        lower = [f"{_fmt(sx(p[0]))},{_fmt(sy(p[2]))}" for p in reversed(pts)]
        out.append(f'<polygon points="{" ".join(upper + lower)}" fill="{color}" fill-opacity="0.15" stroke="none"/>')
        line = " ".join(f"{_fmt(sx(p[0]))},{_fmt(sy(p[1]))}" for p in pts)
        out.append(f'<polyline points="{line}" fill="none" stroke="{color}" stroke-width="2"/>')
        ly = TOP + 10 + 18 * i
        out.append(f'<line x1="{LEFT + pw + 15}" y1="{ly}" x2="{LEFT + pw + 35}" y2="{ly}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{LEFT + pw + 40}" y="{ly + 4}">{escape(variant)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_plot(metrics_path: str | Path, x: str, y: str, out_path: str | Path,
              usvs: int | None = None, uavs: int | None = None, gss: int | None = None) -> Path:
    if x not in X_AXES:
        raise ValueError(f"x must be one of {sorted(X_AXES)}")
    if y not in Y_AXES:
        raise ValueError(f"y must be one of {sorted(Y_AXES)}")
    rows = [r for r in read_metrics(metrics_path)
            if (usvs is None or r.n_usvs == usvs) and (uavs is None or r.n_uavs == uavs)
            and (gss is None or r.n_gss == gss)]
    svg = render_svg(aggregate(rows, x, y), x, y)
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_bytes(svg.encode("utf-8"))
    return out_path
