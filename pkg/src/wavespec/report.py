"""Run reports and artifacts: JSON report, CSV tables, SVG figures.

Everything except the timing section is a deterministic function of the
config and seed: floats are written with ``repr`` and infinities as the
string ``inf``.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__

STATUSES = ("pass", "fail", "skip", "warn")


def _clean(x):
    # JSON-safe, deterministic representation of measured values
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return x


@dataclass
class Check:
    name: str
    status: str
    measured: dict = field(default_factory=dict)
    tolerance: dict = field(default_factory=dict)
    wall_time: float = 0.0

    def __post_init__(self):
        if self.status not in STATUSES:
            raise ValueError(f"status must be one of {STATUSES}")


@dataclass
class RunReport:
    command: str
    config: dict
    checks: list = field(default_factory=list)
    artifacts: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    def add(self, name: str, passed: bool | None, measured=None, tolerance=None,
            wall_time: float = 0.0, warn: bool = False) -> Check:
        if passed is None:
            status = "skip"
        elif not passed:
            status = "fail"
        else:
            status = "warn" if warn else "pass"
        c = Check(name, status, measured or {}, tolerance or {}, wall_time)
        self.checks.append(c)
        return c

    @property
    def verdict(self) -> str:
        statuses = {c.status for c in self.checks}
        if "fail" in statuses:
            return "fail"
        if "warn" in statuses:
            return "warn"
        return "pass"

    @property
    def exit_code(self) -> int:
        return 1 if self.verdict == "fail" else 0

    def body(self) -> dict:
        return _clean({
            "tool": "wavespec",
            "version": __version__,
            "command": self.command,
            "verdict": self.verdict,
            "checks": [
                {"name": c.name, "status": c.status, "measured": c.measured, "tolerance": c.tolerance}
                for c in self.checks
            ],
            "artifacts": self.artifacts,
            "notes": self.notes,
            "config": self.config,
        })

    def to_json(self) -> str:
        doc = {"body": self.body(), "timing": {c.name: round(c.wall_time, 6) for c in self.checks}}
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    def summary_lines(self) -> list[str]:
        lines = [f"{c.status.upper():5s} {c.name}" for c in self.checks]
        lines.append(f"verdict: {self.verdict}")
        return lines


def sha256_file(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def format_value(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return repr(x)
    return str(x)


def csv_text(header: list[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([format_value(x) for x in row])
    return buf.getvalue()


def write_text(path: Path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(text)
    return path


# --- SVG ----------------------------------------------------------------------


def _svg(width: int, height: int, items: list[str]) -> str:
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" '
            f'height="{height}" viewBox="0 0 {width} {height}">')
    return "\n".join([head, f'<rect width="{width}" height="{height}" fill="white"/>', *items, "</svg>"]) + "\n"


def _color(v: float) -> str:
    # white -> dark blue ramp on [0, 1]
    v = min(max(v, 0.0), 1.0)
    r = int(round(255 * (1 - 0.85 * v)))
    g = int(round(255 * (1 - 0.65 * v)))
    return f"#{r:02x}{g:02x}ff" if v < 1 else "#264cff"


def heatmap_svg(matrix, title: str = "", cell: int = 12) -> str:
    """Rect-grid heatmap; infinite entries are drawn grey and labelled unreachable."""
    D = np.asarray(matrix, dtype=float)
    n = D.shape[0]
    finite = D[np.isfinite(D)]
    top = float(finite.max()) if finite.size and finite.max() > 0 else 1.0
    pad = 30
    items = [f'<text x="{pad}" y="18" font-family="sans-serif" font-size="12">{title}</text>']
    for i in range(n):
        for j in range(n):
            x, y = pad + j * cell, pad + i * cell
            fill = "#bbbbbb" if not np.isfinite(D[i, j]) else _color(D[i, j] / top)
            items.append(f'<rect x="{x}" y="{y}" width="{cell}" height="{cell}" fill="{fill}"/>')
    y = pad + n * cell + 16
    items.append(f'<text x="{pad}" y="{y}" font-family="sans-serif" font-size="10">'
                 f'max finite {format_value(top)}; grey = unreachable</text>')
    return _svg(2 * pad + n * cell, y + 10, items)


def scatter_svg(x, y, title: str = "", size: int = 360) -> str:
    """Scatter of reconstructed against true distances with the diagonal."""
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    pad = 40
    top = float(max(x.max(initial=0.0), y.max(initial=0.0))) or 1.0
    span = size - 2 * pad

    def px(v):
        return pad + span * v / top

    def py(v):
        return size - pad - span * v / top

    items = [
        f'<text x="{pad}" y="20" font-family="sans-serif" font-size="12">{title}</text>',
        f'<line x1="{px(0):.2f}" y1="{py(0):.2f}" x2="{px(top):.2f}" y2="{py(top):.2f}" stroke="#888"/>',
        f'<line x1="{pad}" y1="{size - pad}" x2="{size - pad}" y2="{size - pad}" stroke="black"/>',
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{size - pad}" stroke="black"/>',
        f'<text x="{size / 2:.0f}" y="{size - 8}" font-family="sans-serif" font-size="10">true distance</text>',
        f'<text x="4" y="{pad - 8}" font-family="sans-serif" font-size="10">reconstructed</text>',
    ]
    for a, b in zip(x, y):
        items.append(f'<circle cx="{px(a):.2f}" cy="{py(b):.2f}" r="2" fill="#264cff"/>')
    return _svg(size, size, items)
