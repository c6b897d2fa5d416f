"""Report files: JSON, CSV, ROC and MAE SVG charts, comparison tables."""
from __future__ import annotations

import csv
import io
import json
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence
from xml.sax.saxutils import escape

import jsonschema
from rich import box
from rich.console import Console
from rich.table import Table

from .errors import ConfigError, StorageError
from .metrics import EvalReport
from .paths import atomic_write_text
from .room.scenario import ScenarioKind

REPORT_JSON = "report.json"
REPORT_CSV = "report.csv"
ROC_SVG = "roc.svg"
COMPARISON_CSV = "comparison.csv"
MAE_CHART_SVG = "selfref_mae.svg"
METRICS = ("auc", "eer", "mae", "n")

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b")
_SIZE = 400
_PAD = 50


@lru_cache(maxsize=1)
def report_schema() -> Dict[str, Any]:
    text = resources.files("bargebench").joinpath("schemas/report.json").read_text(encoding="utf-8")
    return json.loads(text)


def load_report(path: Path) -> EvalReport:
    """Read and schema-validate a report JSON file."""
    p = Path(path)
    if not p.exists():
        raise StorageError(str(p), "report not found")
    try:
        data = json.loads(p.read_text(encoding="utf-8"))
    except OSError as e:
        raise StorageError(str(p), f"cannot read report: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(str(p), f"invalid JSON: {e.msg}") from e
    try:
        jsonschema.validate(data, report_schema())
    except jsonschema.ValidationError as e:
        where = ".".join(str(x) for x in e.absolute_path)
        raise ConfigError(str(p), f"not a report ({where or 'root'}: {e.message})") from e
    return EvalReport.from_json(data)


def roc_svg(report: EvalReport) -> str:
    """One ROC polyline per kind that has one; fixed layout so output is byte-stable."""
    span = _SIZE - 2 * _PAD

    def xy(fpr: float, tpr: float) -> str:
        return f"{_PAD + fpr * span:.2f},{_SIZE - _PAD - tpr * span:.2f}"

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_SIZE}" height="{_SIZE}" viewBox="0 0 {_SIZE} {_SIZE}">',
        f'<rect x="{_PAD}" y="{_PAD}" width="{span}" height="{span}" fill="none" stroke="#000"/>',
        f'<line x1="{_PAD}" y1="{_SIZE - _PAD}" x2="{_SIZE - _PAD}" y2="{_PAD}" stroke="#bbb" stroke-dasharray="4 4"/>',
        f'<text x="{_SIZE / 2:.0f}" y="{_SIZE - 15}" text-anchor="middle" font-size="12">false positive rate</text>',
        f'<text x="15" y="{_SIZE / 2:.0f}" text-anchor="middle" font-size="12" transform="rotate(-90 15 {_SIZE / 2:.0f})">true positive rate</text>',
    ]
    legend_y = _PAD + 15
    for i, (kind, m) in enumerate(k for k in report.kinds.items() if k[1].roc):
        color = _COLORS[i % len(_COLORS)]
        points = " ".join(xy(a, b) for a, b in m.roc)
        parts.append(f'<polyline points="{points}" fill="none" stroke="{color}" stroke-width="2"/>')
        label = f"{kind} (AUC {m.auc:.3f})" if m.auc is not None else kind
        parts.append(
            f'<text x="{_SIZE - _PAD - 5}" y="{legend_y + 15 * i}" text-anchor="end" font-size="11" fill="{color}">{escape(label)}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_report(report: EvalReport, out_dir: Path, with_roc: bool = True) -> Dict[str, Path]:
    """Write report.json, report.csv and (optionally) roc.svg into ``out_dir``."""
    out = Path(out_dir)
    written = {
        "report_json": atomic_write_text(out / REPORT_JSON, json.dumps(report.to_json(), indent=2, sort_keys=True) + "\n"),
        "report_csv": atomic_write_text(out / REPORT_CSV, report.to_csv()),
    }
    if with_roc:
        written["roc_svg"] = atomic_write_text(out / ROC_SVG, roc_svg(report))
    return written


def report_names(paths: Sequence[Path]) -> List[str]:
    """Column names for a comparison: file stems, or parent directory names when stems collide."""
    ps = [Path(p) for p in paths]
    names = [p.stem for p in ps]
    if len(set(names)) < len(names):
        names = [p.parent.name or p.stem for p in ps]
    seen: Dict[str, int] = {}
    out = []
    for n in names:
        seen[n] = seen.get(n, 0) + 1
        out.append(n if seen[n] == 1 else f"{n}#{seen[n]}")
    return out


def _check_kinds(reports: Mapping[str, EvalReport]) -> List[str]:
    items = list(reports.items())
    first_name, first = items[0]
    kinds = list(first.kinds)
    for name, r in items[1:]:
        if set(r.kinds) != set(kinds):
            raise ConfigError(
                "reports",
                f"{name} covers kinds {sorted(r.kinds)} but {first_name} covers {sorted(kinds)}",
            )
    return kinds


def comparison_rows(reports: Mapping[str, EvalReport]) -> List[List[str]]:
    """Long-form table: kind, metric, then one column per report."""
    if not reports:
        raise ConfigError("reports", "nothing to compare")
    kinds = _check_kinds(reports)
    rows = [["kind", "metric", *reports]]
    for kind in kinds:
        for metric in METRICS:
            row = [kind, metric]
            for r in reports.values():
                v = getattr(r.kinds[kind], metric)
                row.append("" if v is None else (str(v) if metric == "n" else repr(float(v))))
            rows.append(row)
    return rows


def comparison_csv(reports: Mapping[str, EvalReport]) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(comparison_rows(reports))
    return buf.getvalue()


def mae_chart_svg(reports: Mapping[str, EvalReport], kind: str = ScenarioKind.SELF_REFERENCING.value) -> str:
    """Bar chart of one kind's MAE per report, in percent."""
    values = [(name, r.kinds[kind].mae) for name, r in reports.items() if kind in r.kinds]
    width = max(_SIZE, 2 * _PAD + 80 * len(values))
    span = _SIZE - 2 * _PAD
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{_SIZE}" viewBox="0 0 {width} {_SIZE}">',
        f'<text x="{width / 2:.0f}" y="25" text-anchor="middle" font-size="13">{escape(kind)} MAE (%)</text>',
        f'<line x1="{_PAD}" y1="{_SIZE - _PAD}" x2="{width - _PAD}" y2="{_SIZE - _PAD}" stroke="#000"/>',
    ]
    if not values:
        parts.append(f'<text x="{width / 2:.0f}" y="{_SIZE / 2:.0f}" text-anchor="middle" font-size="12">no data</text>')
    for i, (name, v) in enumerate(values):
        h = v * span
        x = _PAD + 20 + 80 * i
        y = _SIZE - _PAD - h
        color = _COLORS[i % len(_COLORS)]
        parts.append(f'<rect x="{x}" y="{y:.2f}" width="50" height="{h:.2f}" fill="{color}"/>')
        parts.append(f'<text x="{x + 25}" y="{y - 5:.2f}" text-anchor="middle" font-size="11">{100 * v:.2f}</text>')
        parts.append(
            f'<text x="{x + 25}" y="{_SIZE - _PAD + 15}" text-anchor="middle" font-size="11">{escape(name)}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_comparison(reports: Mapping[str, EvalReport], out_dir: Path) -> Dict[str, Path]:
    out = Path(out_dir)
    return {
        "table_csv": atomic_write_text(out / COMPARISON_CSV, comparison_csv(reports)),
        "chart_svg": atomic_write_text(out / MAE_CHART_SVG, mae_chart_svg(reports)),
    }


def _pct(v: Optional[float]) -> str:
    return "-" if v is None else f"{100 * v:.2f}"


def print_report_table(report: EvalReport, console: Optional[Console] = None, title: str = "Evaluation") -> None:
    """Human-readable table; AUC, EER and MAE shown in percent."""
    console = console or Console(stderr=True)
    table = Table(title=title, show_header=True, header_style="bold magenta", box=box.SIMPLE)
    table.add_column("Kind", style="cyan")
    table.add_column("AUC (%)", justify="right")
    table.add_column("EER (%)", justify="right")
    table.add_column("MAE (%)", justify="right")
    table.add_column("n", justify="right", style="dim")
    for kind, m in report.kinds.items():
        table.add_row(kind, _pct(m.auc), _pct(m.eer), _pct(m.mae), str(m.n))
    console.print(table)
