"""CSV tables and standalone HTML heatmaps."""

from __future__ import annotations

import csv
import io
from datetime import datetime, timezone
from html import escape
from typing import Sequence

import numpy as np

from .metrics import CSV_HEADER, MetricReport

POSITIVE_RGB = (0, 160, 60)
NEGATIVE_RGB = (210, 30, 30)


def csv_table(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def reports_csv(reports: Sequence[MetricReport], deterministic: bool = False) -> str:
    rows = []
    for r in reports:
        row = r.csv_row(deterministic)
        if r.spec.method == "ig":
            row[1] = "-"
        rows.append(row)
    return csv_table(CSV_HEADER, rows)


def token_colors(scores: Sequence[float]) -> list[tuple[str, float]]:
    """(``"positive"|"negative"|"neutral"``, opacity) per token, scaled by the row's max |score|."""
    scores = np.asarray(scores, dtype=np.float64)
    scale = float(np.max(np.abs(scores))) if scores.size else 0.0
    out = []
    for s in scores:
        if scale <= 0 or s == 0:
            out.append(("neutral", 0.0))
        elif s > 0:
            out.append(("positive", s / scale))
        else:
            out.append(("negative", -s / scale))
    return out


def _span(token: str, kind: str, opacity: float, score: float) -> str:
    if kind == "positive":
        r, g, b = POSITIVE_RGB
    elif kind == "negative":
        r, g, b = NEGATIVE_RGB
    else:
        r, g, b = (255, 255, 255)
    style = (f"background-color: rgba({r}, {g}, {b}, {opacity:.4f}); padding: 1px 3px; "
             "margin: 0 1px; border-radius: 3px; font-family: monospace;")
    return f'<span style="{style}" title="{score:+.4f}">{escape(token)}</span>'


def heatmap_html(
    tokens: Sequence[str],
    rows: Sequence[tuple[str, Sequence[float]]],
    predicted_label: str,
    title: str = "Attribution heatmap",
    deterministic: bool = False,
) -> str:
    """One row of coloured token spans per method, with a legend and the predicted label."""
    legend = " ".join([
        _span("Negative", "negative", 0.8, -1.0),
        _span("Neutral", "neutral", 0.0, 0.0),
        _span("Positive", "positive", 0.8, 1.0),
    ])
    body = []
    for method, scores in rows:
        spans = " ".join(_span(t, kind, op, float(s))
                         for t, (kind, op), s in zip(tokens, token_colors(scores), scores))
        body.append(
            f'<tr><td style="font-weight: bold; padding-right: 12px;">{escape(method.upper())}</td>'
            f'<td style="line-height: 2;">{spans}</td></tr>'
        )
    stamp = "" if deterministic else (
        f"<!-- generated {datetime.now(timezone.utc).isoformat(timespec='seconds')} -->\n")
    return (
        "<!DOCTYPE html>\n"
        f"{stamp}"
        '<html><head><meta charset="utf-8">'
        f"<title>{escape(title)}</title></head>\n"
        '<body style="font-family: sans-serif; margin: 24px;">\n'
        f"<h3>{escape(title)}</h3>\n"
        f'<p>Legend: {legend}</p>\n'
        f"<p>Predicted label: <b>{escape(predicted_label)}</b></p>\n"
        '<table style="border-collapse: collapse;">\n'
        + "\n".join(body)
        + "\n</table>\n</body></html>\n"
    )
