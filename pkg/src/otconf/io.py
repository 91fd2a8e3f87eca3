"""File formats: feature CSV, OTSF binary, score reports, traces, curves, SVG.

CSV feature files are comma-separated doubles, one sample per line, with an
optional single header line; the table carries labels iff a header is present
and its last column is named ``label`` (the label column is then last). Floats
are written with ``repr`` so load/save round-trips are bit-identical.

OTSF is a little-endian binary format: magic ``OTSF``, u32 n, u32 d,
u8 has_labels, n*d row-major f64 features, then n i32 labels if present.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .data import FeatureTable
from .exceptions import ValidationError
from .scoring import ScoreReport

_OTSF_MAGIC = b"OTSF"


def _fmt(x: float) -> str:
    return repr(float(x))


def _parse_csv_rows(text: str, path: str):
    lines = text.splitlines()
    start = 0
    has_labels = False
    if lines:
        first = [f.strip() for f in lines[0].split(",")]
        try:
            [float(f) for f in first]
        except ValueError:
            has_labels = first[-1].lower() == "label"
            start = 1
    rows = []
    for lineno in range(start, len(lines)):
        line = lines[lineno].strip()
        if not line:
            continue
        fields = line.split(",")
        try:
            rows.append([float(f) for f in fields])
        except ValueError as exc:
            raise ValidationError(f"{path}: line {lineno + 1}: {exc}") from None
    return rows, has_labels


def load_features(path, format: str = "csv") -> FeatureTable:
    """Read a feature table from ``path`` in the given format (csv or otsf)."""
    path = Path(path)
    if format == "csv":
        return _load_csv(path)
    if format == "otsf":
        return _load_otsf(path)
    raise ValidationError(f"unknown format {format!r} (expected csv or otsf)")


def save_features(table: FeatureTable, path, format: str = "csv") -> None:
    """Write a feature table; the inverse of :func:`load_features`."""
    path = Path(path)
    if format == "csv":
        _save_csv(table, path)
    elif format == "otsf":
        _save_otsf(table, path)
    else:
        raise ValidationError(f"unknown format {format!r} (expected csv or otsf)")


def _load_csv(path: Path) -> FeatureTable:
    rows, has_labels = _parse_csv_rows(path.read_text(), str(path))
    if not rows:
        raise ValidationError(f"{path}: no data rows")
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise ValidationError(f"{path}: inconsistent column counts {sorted(widths)}")
    data = np.array(rows, dtype=np.float64)
    labels = None
    if has_labels:
        if data.shape[1] < 2:
            raise ValidationError(f"{path}: label column present but no feature columns")
        labels = data[:, -1]
        if not np.all(labels == np.floor(labels)):
            bad = int(np.flatnonzero(labels != np.floor(labels))[0])
            raise ValidationError(f"{path}: row {bad}: label is not an integer")
        labels = labels.astype(np.int64)
        data = data[:, :-1]
    finite = np.isfinite(data).all(axis=1)
    if not finite.all():
        raise ValidationError(f"{path}: row {int(np.flatnonzero(~finite)[0])}: non-finite entry")
    return FeatureTable(features=data, labels=labels)


def _save_csv(table: FeatureTable, path: Path) -> None:
    cols = [f"f{j}" for j in range(table.d)]
    if table.labels is not None:
        cols.append("label")
    lines = [",".join(cols)]
    for i in range(table.n):
        fields = [_fmt(v) for v in table.features[i]]
        if table.labels is not None:
            fields.append(str(int(table.labels[i])))
        lines.append(",".join(fields))
    path.write_text("\n".join(lines) + "\n")


def _load_otsf(path: Path) -> FeatureTable:
    blob = path.read_bytes()
    if len(blob) < 13:
        raise ValidationError(f"{path}: truncated header at offset {len(blob)}")
    if blob[:4] != _OTSF_MAGIC:
        raise ValidationError(f"{path}: bad magic at offset 0")
    n, d = struct.unpack_from("<II", blob, 4)
    has_labels = blob[12]
    if has_labels not in (0, 1):
        raise ValidationError(f"{path}: bad has_labels byte at offset 12")
    expect = 13 + 8 * n * d + (4 * n if has_labels else 0)
    if len(blob) != expect:
        raise ValidationError(
            f"{path}: expected {expect} bytes, got {len(blob)} (offset {min(expect, len(blob))})"
        )
    data = np.frombuffer(blob, dtype="<f8", count=n * d, offset=13).reshape(n, d)
    finite = np.isfinite(data).all(axis=1)
    if not finite.all():
        raise ValidationError(f"{path}: row {int(np.flatnonzero(~finite)[0])}: non-finite entry")
    labels = None
    if has_labels:
        labels = np.frombuffer(blob, dtype="<i4", count=n, offset=13 + 8 * n * d).astype(np.int64)
    return FeatureTable(features=data.astype(np.float64), labels=labels)


def _save_otsf(table: FeatureTable, path: Path) -> None:
    has_labels = table.labels is not None
    parts = [
        _OTSF_MAGIC,
        struct.pack("<IIB", table.n, table.d, 1 if has_labels else 0),
        np.ascontiguousarray(table.features, dtype="<f8").tobytes(),
    ]
    if has_labels:
        parts.append(np.ascontiguousarray(table.labels, dtype="<i4").tobytes())
    path.write_bytes(b"".join(parts))


def load_vector(path) -> np.ndarray:
    """Read a single-column CSV of numbers (losses, labels, weights...)."""
    path = Path(path)
    rows, _ = _parse_csv_rows(path.read_text(), str(path))
    if not rows:
        raise ValidationError(f"{path}: no data rows")
    if any(len(r) != 1 for r in rows):
        raise ValidationError(f"{path}: expected exactly one column")
    return np.array([r[0] for r in rows], dtype=np.float64)


def load_matrix(path) -> np.ndarray:
    """Read an unlabeled numeric CSV matrix (e.g. n x K probabilities)."""
    path = Path(path)
    rows, has_labels = _parse_csv_rows(path.read_text(), str(path))
    if has_labels:
        raise ValidationError(f"{path}: unexpected label column")
    if not rows:
        raise ValidationError(f"{path}: no data rows")
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise ValidationError(f"{path}: inconsistent column counts {sorted(widths)}")
    return np.array(rows, dtype=np.float64)


def write_trace_csv(trace, path) -> None:
    """Write solver trace records as CSV (step, residual, update norm, objective)."""
    lines = ["step,residual,update_norm,objective"]
    for rec in trace:
        lines.append(
            f"{rec.step},{_fmt(rec.residual)},{_fmt(rec.update_norm)},{_fmt(rec.objective)}"
        )
    Path(path).write_text("\n".join(lines) + "\n")


def write_curve_csv(curve, path) -> None:
    """Write a risk-coverage curve as CSV (coverage, risk)."""
    lines = ["coverage,risk"]
    for c, r in zip(curve.coverage, curve.risk):
        lines.append(f"{_fmt(c)},{_fmt(r)}")
    Path(path).write_text("\n".join(lines) + "\n")


def report_to_dict(report: ScoreReport) -> dict:
    extrema = {
        str(c): [_maybe(lo), _maybe(hi)]
        for c, (lo, hi) in sorted(report.per_class_extrema.items())
    }
    return {
        "mean_score": report.mean_score,
        "normalized": None if report.normalized is None else [float(v) for v in report.normalized],
        "per_class_extrema": extrema,
        "pseudo_labels": [int(v) for v in report.pseudo_labels],
        "scores": [float(v) for v in report.scores],
    }


def _maybe(x: float):
    return None if x is None else float(x)


def write_report_json(report: ScoreReport, path) -> None:
    """Serialize a score report as deterministic JSON."""
    Path(path).write_text(json.dumps(report_to_dict(report), sort_keys=True, indent=2) + "\n")


def read_report_json(path) -> ScoreReport:
    try:
        payload = json.loads(Path(path).read_text())
        normalized = payload["normalized"]
        return ScoreReport(
            scores=np.asarray(payload["scores"], dtype=np.float64),
            pseudo_labels=np.asarray(payload["pseudo_labels"], dtype=np.int64),
            normalized=None if normalized is None else np.asarray(normalized, dtype=np.float64),
        )
    except (KeyError, TypeError, json.JSONDecodeError) as exc:
        raise ValidationError(f"{path}: not a score report: {exc}") from None


def write_report_csv(report: ScoreReport, path) -> None:
    """Serialize a score report as CSV, one row per sample."""
    lines = ["index,pseudo_label,score,normalized"]
    for i in range(report.scores.shape[0]):
        norm = "" if report.normalized is None else _fmt(report.normalized[i])
        lines.append(f"{i},{int(report.pseudo_labels[i])},{_fmt(report.scores[i])},{norm}")
    Path(path).write_text("\n".join(lines) + "\n")


# -- minimal self-contained SVG output (deterministic byte-for-byte) ---------

_SVG_W, _SVG_H, _SVG_PAD = 640, 440, 60


def _svg_header(title: str) -> list[str]:
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_SVG_W}" height="{_SVG_H}" '
        f'viewBox="0 0 {_SVG_W} {_SVG_H}">',
        f'<rect width="{_SVG_W}" height="{_SVG_H}" fill="white"/>',
        f'<text x="{_SVG_W // 2}" y="24" text-anchor="middle" font-family="sans-serif" '
        f'font-size="15">{title}</text>',
    ]


def _scale(values: np.ndarray, lo_px: float, hi_px: float):
    vmin, vmax = float(values.min()), float(values.max())
    span = vmax - vmin if vmax > vmin else 1.0

    def to_px(v):
        return lo_px + (np.asarray(v, dtype=float) - vmin) / span * (hi_px - lo_px)

    return to_px, vmin, vmax


def _axes(xmin, xmax, ymin, ymax, xlabel, ylabel) -> list[str]:
    x0, x1 = _SVG_PAD, _SVG_W - _SVG_PAD
    y0, y1 = _SVG_H - _SVG_PAD, _SVG_PAD
    parts = [
        f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>',
        f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>',
        f'<text x="{(x0 + x1) // 2}" y="{_SVG_H - 16}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="12">{xlabel}</text>',
        f'<text x="18" y="{(y0 + y1) // 2}" text-anchor="middle" font-family="sans-serif" '
        f'font-size="12" transform="rotate(-90 18 {(y0 + y1) // 2})">{ylabel}</text>',
        f'<text x="{x0}" y="{y0 + 16}" font-family="sans-serif" font-size="10">{xmin:.4g}</text>',
        f'<text x="{x1}" y="{y0 + 16}" text-anchor="end" font-family="sans-serif" '
        f'font-size="10">{xmax:.4g}</text>',
        f'<text x="{x0 - 4}" y="{y0}" text-anchor="end" font-family="sans-serif" '
        f'font-size="10">{ymin:.4g}</text>',
        f'<text x="{x0 - 4}" y="{y1 + 4}" text-anchor="end" font-family="sans-serif" '
        f'font-size="10">{ymax:.4g}</text>',
    ]
    return parts


def write_line_svg(xs, ys, path, title: str = "", xlabel: str = "", ylabel: str = "") -> None:
    """Write a single-series line plot as a standalone SVG file."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    to_x, xmin, xmax = _scale(xs, _SVG_PAD, _SVG_W - _SVG_PAD)
    to_y, ymin, ymax = _scale(ys, _SVG_H - _SVG_PAD, _SVG_PAD)
    pts = " ".join(f"{px:.2f},{py:.2f}" for px, py in zip(to_x(xs), to_y(ys)))
    parts = _svg_header(title)
    parts += _axes(xmin, xmax, ymin, ymax, xlabel, ylabel)
    parts.append(f'<polyline points="{pts}" fill="none" stroke="#1f6fb2" stroke-width="1.5"/>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n")


def write_scatter_svg(points, values, path, title: str = "",
                      xlabel: str = "", ylabel: str = "") -> None:
    """Write a 2-d scatter colored by ``values`` (blue = low, red = high)."""
    points = np.asarray(points, dtype=float)
    values = np.asarray(values, dtype=float)
    if points.ndim != 2 or points.shape[1] != 2:
        raise ValidationError("scatter plots need (n, 2) points")
    to_x, xmin, xmax = _scale(points[:, 0], _SVG_PAD, _SVG_W - _SVG_PAD)
    to_y, ymin, ymax = _scale(points[:, 1], _SVG_H - _SVG_PAD, _SVG_PAD)
    vmin, vmax = float(values.min()), float(values.max())
    span = vmax - vmin if vmax > vmin else 1.0
    parts = _svg_header(title)
    parts += _axes(xmin, xmax, ymin, ymax, xlabel, ylabel)
    xs_px, ys_px = to_x(points[:, 0]), to_y(points[:, 1])
    for i in range(points.shape[0]):
        frac = (float(values[i]) - vmin) / span
        r, b = int(round(255 * frac)), int(round(255 * (1 - frac)))
        parts.append(
            f'<circle cx="{xs_px[i]:.2f}" cy="{ys_px[i]:.2f}" r="2.5" '
            f'fill="rgb({r},60,{b})" fill-opacity="0.7"/>'
        )
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n")
