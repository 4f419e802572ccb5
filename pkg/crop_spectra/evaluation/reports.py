"""Structured report and results-table export."""

import csv
import json
from pathlib import Path
from typing import Any, Dict, List, Sequence

from crop_spectra.core.constants import REPORT_VERSION
from crop_spectra.core.exceptions import ConfigError
from crop_spectra.evaluation.cross_validation import CVReport
from crop_spectra.evaluation.grid_search import GridSearchReport

RESULTS_TABLE_COLUMNS = ("algorithm", "mean_percent", "two_std_percent", "low_percent", "high_percent", "best")


def export_json_report(kind: str, body: Dict[str, Any], path: Path) -> Path:
    """Write ``{"report_version", "kind", **body}`` as indented JSON."""
    path = Path(path)
    document: Dict[str, Any] = {"report_version": REPORT_VERSION, "kind": kind}
    document.update(body)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as handle:
            json.dump(document, handle, indent=2, ensure_ascii=False)
            handle.write("\n")
    except OSError as exc:
        raise ConfigError(f"Cannot write {kind} report {path}: {exc}") from exc
    return path


def export_cv_report(report: CVReport, path: Path) -> Path:
    return export_json_report("cv", report.to_dict(), path)


def export_grid_report(report: GridSearchReport, path: Path) -> Path:
    return export_json_report("grid", report.to_dict(), path)


def build_results_rows(reports: Sequence[CVReport]) -> List[Dict[str, Any]]:
    """One row per algorithm in percent; the highest mean is marked best (first on ties)."""
    if not reports:
        return []
    best = max(r.mean for r in reports)
    rows: List[Dict[str, Any]] = []
    marked = False
    for report in reports:
        low, high = report.interval
        is_best = not marked and report.mean == best
        marked = marked or is_best
        rows.append(
            {
                "algorithm": report.algorithm,
                "mean_percent": round(100.0 * report.mean, 1),
                "two_std_percent": round(200.0 * report.std, 1),
                "low_percent": round(100.0 * low, 1),
                "high_percent": round(100.0 * high, 1),
                "best": is_best,
            }
        )
    return rows


def export_results_table_csv(rows: List[Dict[str, Any]], path: Path) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as handle:
            writer = csv.DictWriter(handle, fieldnames=list(RESULTS_TABLE_COLUMNS))
            writer.writeheader()
            for row in rows:
                writer.writerow({k: row[k] for k in RESULTS_TABLE_COLUMNS})
    except OSError as exc:
        raise ConfigError(f"Cannot write results table {path}: {exc}") from exc
    return path


def results_table(rows: List[Dict[str, Any]], title: str = "Classification accuracies") -> str:
    """Markdown table: algorithm, accuracy +/- 2 std (percent), best mark."""
    lines = [
        f"# {title}",
        "",
        "| Algorithm | Accuracy (%) | Best |",
        "| --- | ---: | :---: |",
    ]
    for row in rows:
        mark = "*" if row["best"] else ""
        lines.append(
            f"| {row['algorithm']} | {row['mean_percent']:.1f} ± {row['two_std_percent']:.1f} | {mark} |"
        )
    return "\n".join(lines) + "\n"


def export_results_table_markdown(rows: List[Dict[str, Any]], path: Path) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(results_table(rows), encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"Cannot write results table {path}: {exc}") from exc
    return path


def export_results_tables(
    reports: Sequence[CVReport], output_dir: Path, basename: str = "results"
) -> Dict[str, Path]:
    """Export the combined CSV and Markdown results table."""
    rows = build_results_rows(reports)
    output_dir = Path(output_dir)
    return {
        "csv": export_results_table_csv(rows, Path(output_dir, f"{basename}.csv")),
        "markdown": export_results_table_markdown(rows, Path(output_dir, f"{basename}.md")),
    }
