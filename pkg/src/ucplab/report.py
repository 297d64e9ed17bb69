"""Experiment reports and their JSON / CSV / SVG renderings."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .io import atomic_write

# record statuses that do not make a run fail
OK_STATUSES = ("pass", "trivial-pass", "out-of-scope", "advisory", "info")


def clean(obj):
    """Recursively turn numpy scalars/arrays and tuples into JSON-native values."""
    if isinstance(obj, dict):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    return obj


@dataclass
class Report:
    kind: str
    header: dict
    records: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    wall_time: float = 0.0

    @property
    def status(self) -> str:
        statuses = {r.get("status", "info") for r in self.records}
        if statuses - set(OK_STATUSES):
            return "fail"
        if "advisory" in statuses:
            return "advisory"
        return "pass"

    @property
    def passed(self) -> bool:
        return self.status != "fail"

    def counts(self) -> dict:
        out = {}
        for r in self.records:
            s = r.get("status", "info")
            out[s] = out.get(s, 0) + 1
        return dict(sorted(out.items()))

    def advisory_bound_failures(self) -> int:
        """Advisory records whose bound check would have failed."""
        return sum(r.get("status") == "advisory" and r.get("bound_ok") is False for r in self.records)

    def as_dict(self) -> dict:
        return clean({"kind": self.kind, "header": self.header, "summary": self.summary,
                      "status": self.status, "counts": self.counts(),
                      "advisory_bound_failures": self.advisory_bound_failures(), "records": self.records})

    def to_json(self) -> str:
        # wall time is deliberately absent: identical inputs give identical bytes
        return json.dumps(self.as_dict(), indent=2, sort_keys=True, allow_nan=False) + "\n"

    def to_csv(self) -> str:
        rows = [clean(r) for r in self.records]
        keys = []
        for r in rows:
            for k in r:
                if k not in keys:
                    keys.append(k)
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=keys, lineterminator="\n")
        writer.writeheader()
        for r in rows:
            writer.writerow({k: json.dumps(v) if isinstance(v, (list, dict)) else v for k, v in r.items()})
        return buf.getvalue()

    def summary_table(self) -> str:
        lines = [f"{self.kind}: {self.status}"]
        for k, v in sorted(self.counts().items()):
            lines.append(f"  {k:<14} {v}")
        if self.advisory_bound_failures():
            lines.append(f"  advisory records failing their bound: {self.advisory_bound_failures()}")
        for k, v in sorted(self.summary.items()):
            if isinstance(v, (int, float, str, bool, np.floating)):
                lines.append(f"  {k:<14} {v}")
        return "\n".join(lines)

    def write(self, out_dir, formats=("json", "csv"), plot=False):
        out = Path(out_dir)
        written = []
        if "json" in formats:
            atomic_write(out / "report.json", self.to_json())
            written.append(out / "report.json")
        if "csv" in formats:
            atomic_write(out / "report.csv", self.to_csv())
            written.append(out / "report.csv")
        atomic_write(out / "timing.json", json.dumps({"wall_time_s": self.wall_time}) + "\n")
        if plot:
            svg = ratio_plot(self.records)
            if svg is not None:
                atomic_write(out / "plot.svg", svg)
                written.append(out / "plot.svg")
        return written


def ratio_plot(records, width=480, height=360) -> str | None:
    """Log-log SVG of observed ratio and bound (squared norms) against delta/M."""
    pts = [(r["delta_over_M"], r["ratio"], r.get("bound_sq")) for r in records
           if "delta_over_M" in r and r.get("ratio", 0) > 0]
    if not pts:
        return None
    xs = [math.log10(p[0]) for p in pts]
    ys = [math.log10(p[1]) for p in pts] + [math.log10(p[2]) for p in pts if p[2]]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    x1 = x1 if x1 > x0 else x0 + 1
    y1 = y1 if y1 > y0 else y0 + 1
    pad = 50

    def sx(v):
        return pad + (math.log10(v) - x0) / (x1 - x0) * (width - 2 * pad)

    def sy(v):
        return height - pad - (math.log10(v) - y0) / (y1 - y0) * (height - 2 * pad)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
           f'<rect width="{width}" height="{height}" fill="white"/>',
           f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>',
           f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>',
           f'<text x="{width / 2}" y="{height - 12}" text-anchor="middle" font-size="12">delta/M (log)</text>',
           f'<text x="14" y="{height / 2}" font-size="12" transform="rotate(-90 14 {height / 2})" '
           f'text-anchor="middle">squared ratio (log)</text>']
    for i, (dm, ratio, bound) in enumerate(pts):
        out.append(f'<circle cx="{sx(dm):.2f}" cy="{sy(ratio):.2f}" r="3" fill="steelblue"/>')
        if bound:
            out.append(f'<rect x="{sx(dm) - 3:.2f}" y="{sy(bound) - 3:.2f}" width="6" height="6" fill="firebrick"/>')
    out.append(f'<text x="{width - pad}" y="{pad - 20}" font-size="11" text-anchor="end" fill="steelblue">'
               f'observed</text>')
    out.append(f'<text x="{width - pad}" y="{pad - 6}" font-size="11" text-anchor="end" fill="firebrick">'
               f'bound</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
