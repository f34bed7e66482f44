"""Minimal self-contained SVG scatter/line plots for sweep and profile results."""
from __future__ import annotations

import math
import os
from html import escape

W, H = 640, 480
M = dict(left=70, right=20, top=40, bottom=60)


def _f(row, key):
    try:
        v = float(row.get(key, "nan"))
    except (TypeError, ValueError):
        return math.nan
    return v


class Axes:
    def __init__(self, xlim, ylim, title, xlabel, ylabel, meta: dict | None = None):
        self.x0, self.x1 = xlim
        self.y0, self.y1 = ylim
        if self.x1 == self.x0:
            self.x1 = self.x0 + 1
        if self.y1 == self.y0:
            self.y1 = self.y0 + 1
        self.items: list[str] = []
        self.title, self.xlabel, self.ylabel = title, xlabel, ylabel
        self.meta = meta or {}

    def px(self, x):
        return M["left"] + (x - self.x0) / (self.x1 - self.x0) * (W - M["left"] - M["right"])

    def py(self, y):
        return H - M["bottom"] - (y - self.y0) / (self.y1 - self.y0) * (H - M["top"] - M["bottom"])

    def line(self, xs, ys, color="black", width=1.5, dash=None):
        pts = " ".join(f"{self.px(x):.2f},{self.py(y):.2f}" for x, y in zip(xs, ys)
                       if math.isfinite(x) and math.isfinite(y))
        d = f' stroke-dasharray="{dash}"' if dash else ""
        self.items.append(f'<polyline fill="none" stroke="{color}" stroke-width="{width}"{d} points="{pts}"/>')

    def scatter(self, xs, ys, color="#1f77b4", r=3.5, labels=None):
        for k, (x, y) in enumerate(zip(xs, ys)):
            if not (math.isfinite(x) and math.isfinite(y)):
                continue
            tip = f"<title>{escape(labels[k])}</title>" if labels else ""
            self.items.append(f'<circle cx="{self.px(x):.2f}" cy="{self.py(y):.2f}" r="{r}" fill="{color}">{tip}</circle>')

    def svg(self) -> str:
        out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
               "<metadata>" + escape(repr(self.meta)) + "</metadata>",
               '<rect width="100%" height="100%" fill="white"/>']
        x_a, x_b, y_a, y_b = self.px(self.x0), self.px(self.x1), self.py(self.y0), self.py(self.y1)
        out.append(f'<rect x="{x_a}" y="{y_b}" width="{x_b - x_a}" height="{y_a - y_b}" fill="none" stroke="black"/>')
        for k in range(6):
            xv = self.x0 + k * (self.x1 - self.x0) / 5
            yv = self.y0 + k * (self.y1 - self.y0) / 5
            out.append(f'<text x="{self.px(xv):.1f}" y="{y_a + 18}" font-size="11" text-anchor="middle">{xv:.3g}</text>')
            out.append(f'<text x="{x_a - 6}" y="{self.py(yv) + 4:.1f}" font-size="11" text-anchor="end">{yv:.3g}</text>')
        out.append(f'<text x="{W / 2}" y="22" font-size="14" text-anchor="middle">{escape(self.title)}</text>')
        out.append(f'<text x="{W / 2}" y="{H - 15}" font-size="12" text-anchor="middle">{escape(self.xlabel)}</text>')
        out.append(f'<text x="16" y="{H / 2}" font-size="12" text-anchor="middle" '
                   f'transform="rotate(-90 16 {H / 2})">{escape(self.ylabel)}</text>')
        out.extend(self.items)
        out.append("</svg>")
        return "\n".join(out)

    def save(self, path: str) -> str:
        with open(path, "w") as fh:
            fh.write(self.svg())
        return path


def angle_velocity(rows, out_dir) -> list[str]:
    pts = [(math.radians(_f(r, "xi0_deg")), _f(r, "v")) for r in rows if r.get("status", "ok") == "ok"]
    pts = [p for p in pts if all(map(math.isfinite, p))]
    if not pts:
        raise ValueError("no successful rows with (xi0, v)")
    dev = [abs(a + b - math.pi) / math.sqrt(2) for a, b in pts]
    ax = Axes((0, math.pi), (0, math.pi), "junction speed vs top dihedral angle", "xi0 [rad]", "v",
              meta=dict(n=len(pts), max_deviation=max(dev), within_0p1=sum(d <= 0.1 for d in dev)))
    band = 0.1 * math.sqrt(2)
    ax.line([0, math.pi], [math.pi, 0])
    ax.line([0, math.pi], [math.pi + band, band], color="gray", width=1, dash="4 3")
    ax.line([0, math.pi], [math.pi - band, -band], color="gray", width=1, dash="4 3")
    ax.scatter([p[0] for p in pts], [p[1] for p in pts])
    return [ax.save(os.path.join(out_dir, "angle_velocity.svg"))]


def profile(rows, out_dir) -> list[str]:
    x = [_f(r, "x") for r in rows]
    ym = [_f(r, "y_measured") for r in rows]
    ya = [_f(r, "y_analytic") for r in rows]
    if not any(map(math.isfinite, ym)):
        raise ValueError("profile CSV needs x, y_measured, y_analytic columns")
    ally = [v for v in ym + ya if math.isfinite(v)]
    ax = Axes((min(x), max(x)), (min(ally), max(ally)), "top boundary profile (junction at y = 0)", "x",
              "y - y_TJ")
    ax.line(x, ya, color="black")
    ax.line(x, ym, color="#17becf", width=2, dash="5 3")
    return [ax.save(os.path.join(out_dir, "profile.svg"))]


def _lambda_maps(rows, out_dir, keys, stem, label):
    ok = [r for r in rows if r.get("status", "ok") == "ok" and r.get("kind", "young") == "young"]
    if not ok:
        raise ValueError("no successful Young rows")
    paths = []
    for key in keys:
        vals = [_f(r, key) for r in ok]
        good = [v for v in vals if math.isfinite(v)]
        if not good:
            continue
        lo, hi = min(good), max(good)
        ax = Axes((0, 1), (0, 1), f"{key} over (lambda1, lambda2)", "lambda1", "lambda2",
                  meta=dict(key=key, min=lo, max=hi))
        for r, v in zip(ok, vals):
            if not math.isfinite(v):
                continue
            s = 0.0 if hi == lo else (v - lo) / (hi - lo)
            color = f"rgb({int(255 * s)},{int(80 + 60 * (1 - abs(2 * s - 1)))},{int(255 * (1 - s))})"
            ax.scatter([_f(r, "lambda1")], [_f(r, "lambda2")], color=color, r=7, labels=[f"{label} {v:.4g}"])
        paths.append(ax.save(os.path.join(out_dir, f"{stem}_{key}.svg")))
    if not paths:
        raise ValueError(f"no finite values for {keys}")
    return paths


def lambda_angle(rows, out_dir):
    return _lambda_maps(rows, out_dir, ("xi1_deg", "xi2_deg"), "lambda_angle", "deg")


def lambda_gamma(rows, out_dir):
    return _lambda_maps(rows, out_dir, ("gamma02", "gamma01"), "lambda_gamma", "gamma")


KINDS = {"angle-velocity": angle_velocity, "profile": profile, "lambda-angle": lambda_angle,
         "lambda-gamma": lambda_gamma}
