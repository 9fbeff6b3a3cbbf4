"""Text rendering of fitted models and Pareto exports (CSV, two-column data, SVG)."""

from __future__ import annotations

import csv
import io
import math
from html import escape
from pathlib import Path
from typing import Sequence

from .estimator import FitResult, ObjectiveValues, information_criteria

DASH = "—"
HEADER = ("Effect", "τ", "Coeff", "Std. Err", "z-values", "Prob |z|>Z")


def _fmt(v: float | None, digits: int = 4) -> str:
    if v is None or not math.isfinite(v):
        return DASH
    return f"{v:.{digits}f}"


def _p(v: float | None) -> str:
    if v is None or not math.isfinite(v):
        return DASH
    return "<0.0001" if v < 1e-4 else f"{v:.4f}"


def render_fit_table(fit: FitResult, objectives: ObjectiveValues | None = None) -> str:
    """Coefficient table with significance stars, headed by log-likelihood and BIC."""
    if objectives is None and math.isfinite(fit.loglik):
        objectives = information_criteria(fit.loglik, fit.n_params, fit.n_obs)
    family = "Negative Binomial" if fit.spec.dispersion == 1 else "Poisson"
    lines = [
        f"Model: {family}",
        f"Specification: {fit.spec.code()}",
        f"Log-Likelihood: {fit.loglik:.3f}",
        f"bic: {objectives.bic:.2f}" if objectives else f"bic: {DASH}",
    ]
    if objectives is not None:
        lines.append(f"aic: {objectives.aic:.2f}")
        if objectives.mspe is not None:
            lines.append(f"mspe: {objectives.mspe:.4f}")
    if not fit.converged:
        lines.append(f"Estimation did not converge: {fit.message}")
    body = []
    for r in fit.rows:
        se_ok = r.std_err is not None and math.isfinite(r.std_err)
        body.append((
            r.name,
            r.transformation or "",
            _fmt(r.estimate) + r.stars,
            _fmt(r.std_err) if se_ok else DASH,
            _fmt(r.z, 2) if se_ok else DASH,
            _p(r.p) if se_ok else DASH,
        ))
    widths = [max(len(h), *(len(b[c]) for b in body)) if body else len(h)
              for c, h in enumerate(HEADER)]
    def row(cells):
        return "  ".join(c.ljust(w) if i < 2 else c.rjust(w)
                         for i, (c, w) in enumerate(zip(cells, widths))).rstrip()
    rule = "-" * len(row(HEADER))
    lines += [rule, row(HEADER), rule, *(row(b) for b in body), rule,
              "Signif. codes: 0 '***' 0.001 '**' 0.01 '*' 0.05 '.' 0.1 ' ' 1"]
    return "\n".join(lines) + "\n"


def _csv_num(v) -> str:
    if v is None:
        return ""
    return repr(float(v))


def archive_rows(members, names: Sequence[str]) -> list[dict]:
    """One dict per archive member: spec code, search objectives and every criterion."""
    rows = []
    for ev in members:
        o = ev.objectives
        row = {"spec": ev.spec.code()}
        for n in names:
            row[f"objective:{n}"] = o.get(n)
        row.update(o.as_dict())
        rows.append(row)
    return rows


def archive_csv(members, names: Sequence[str]) -> str:
    rows = archive_rows(members, names)
    cols = ["spec", *(f"objective:{n}" for n in names),
            "loglik", "bic", "aic", "hqic", "caic", "aicc", "mspe"]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([r["spec"]] + [_csv_num(r[c]) for c in cols[1:]])
    return buf.getvalue()


def front_dat(members, names: Sequence[str]) -> str:
    """Whitespace-separated objective columns, sorted by the first objective."""
    pts = sorted(tuple(ev.objectives.get(n) for n in names) for ev in members)
    lines = ["# " + " ".join(names)]
    lines += [" ".join(repr(float(v)) for v in p) for p in pts]
    return "\n".join(lines) + "\n"


def front_svg(members, names: Sequence[str], width: int = 480, height: int = 360) -> str:
    """Static scatter of the front (first objective on x, second, if any, on y)."""
    pts = [tuple(ev.objectives.get(n) for n in names) for ev in members]
    if len(names) == 1:
        pts = [(p[0], 0.0) for p in pts]
        ylabel = ""
    else:
        ylabel = names[1]
    pad = 50
    xs = [p[0] for p in pts] or [0.0]
    ys = [p[1] for p in pts] or [0.0]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    sx = (width - 2 * pad) / (x1 - x0 if x1 > x0 else 1.0)
    sy = (height - 2 * pad) / (y1 - y0 if y1 > y0 else 1.0)
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
           f'<rect width="{width}" height="{height}" fill="white"/>',
           f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>',
           f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>',
           f'<text x="{width / 2}" y="{height - 12}" text-anchor="middle" font-size="12">{escape(names[0])}</text>',
           f'<text x="14" y="{height / 2}" text-anchor="middle" font-size="12" '
           f'transform="rotate(-90 14 {height / 2})">{escape(ylabel)}</text>']
    for x, y in pts:
        cx = pad + (x - x0) * sx
        cy = height - pad - (y - y0) * sy
        out.append(f'<circle cx="{cx:.1f}" cy="{cy:.1f}" r="4" fill="steelblue"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def pareto_summary(members) -> str:
    """Console line in the style ``Pareto Solutions: [{'aic': ..., 'bic': ...}]``."""
    items = []
    for ev in members:
        o = ev.objectives
        d = {"aic": round(o.aic, 3), "bic": round(o.bic, 4)}
        if o.mspe is not None:
            d["MSPE"] = round(o.mspe, 4)
        d["spec"] = ev.spec.code()
        items.append(d)
    return f"Pareto Solutions: {items}"


def write_text(path: Path, text: str) -> None:
    Path(path).write_text(text if text.endswith("\n") else text + "\n", encoding="utf-8")
