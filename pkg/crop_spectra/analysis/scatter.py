"""Score files and standalone SVG scatter plots of PCA scores."""

import csv
import logging
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

import numpy as np
from lxml import etree

from crop_spectra.analysis.pca import PCAModel, ScoreTable
from crop_spectra.core.constants import CROP_COLORS, CROPS, STAGE_COLORS, STAGES
from crop_spectra.core.exceptions import ConfigError, DatasetError
from crop_spectra.utils import slugify

logger = logging.getLogger(__name__)

SVG_NS = "http://www.w3.org/2000/svg"
GROUP_BY_CROP = "crop"
GROUP_BY_STAGE = "stage"
GROUP_BY_NONE = "none"
VALID_GROUP_BY = (GROUP_BY_CROP, GROUP_BY_STAGE, GROUP_BY_NONE)

WIDTH = 640
HEIGHT = 480
MARGIN_LEFT = 70
MARGIN_RIGHT = 160
MARGIN_TOP = 40
MARGIN_BOTTOM = 60
MARKER_RADIUS = 2.5


def _tag(name: str) -> str:
    return f"{{{SVG_NS}}}{name}"


def _fmt(value: float) -> str:
    return f"{value:.2f}"


def export_scores_csv(table: ScoreTable, path: Path) -> Path:
    """Write ``record_index, pc1..pcN, crop, stage``."""
    path = Path(path)
    header = ["record_index"] + [f"pc{j + 1}" for j in range(table.n_components)] + ["crop", "stage"]
    try:
        with open(path, "w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(header)
            for i in range(len(table)):
                writer.writerow(
                    [int(table.record_indices[i])]
                    + [repr(float(v)) for v in table.scores[i]]
                    + [table.crops[i].value, table.stages[i].value]
                )
    except OSError as exc:
        raise ConfigError(f"Cannot write score file {path}: {exc}") from exc
    return path


def _axis_range(values: np.ndarray) -> Tuple[float, float]:
    low, high = float(values.min()), float(values.max())
    if high - low <= 0.0:
        return low - 1.0, high + 1.0
    pad = 0.05 * (high - low)
    return low - pad, high + pad


def _axis_label(model: PCAModel, component: int) -> str:
    ratio = float(model.explained_variance_ratio[component])
    return f"PC{component + 1} ({100.0 * ratio:.1f}%)"


def render_scatter_svg(
    points: np.ndarray,
    colors: Sequence[str],
    legend: Sequence[Tuple[str, str]],
    title: str,
    x_label: str,
    y_label: str,
) -> etree._Element:
    """Build an SVG document: one circle per point, axes, labels and a legend."""
    root = etree.Element(
        _tag("svg"),
        nsmap={None: SVG_NS},
        width=str(WIDTH),
        height=str(HEIGHT),
        viewBox=f"0 0 {WIDTH} {HEIGHT}",
        version="1.1",
    )
    etree.SubElement(root, _tag("title")).text = title
    etree.SubElement(root, _tag("rect"), x="0", y="0", width=str(WIDTH), height=str(HEIGHT), fill="#ffffff")

    plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT
    plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM
    x_min, x_max = _axis_range(points[:, 0])
    y_min, y_max = _axis_range(points[:, 1])

    def sx(v: float) -> float:
        return MARGIN_LEFT + (v - x_min) / (x_max - x_min) * plot_w

    def sy(v: float) -> float:
        return MARGIN_TOP + plot_h - (v - y_min) / (y_max - y_min) * plot_h

    axes = etree.SubElement(root, _tag("g"), id="axes", stroke="#000000", fill="none")
    etree.SubElement(
        axes, _tag("rect"), x=str(MARGIN_LEFT), y=str(MARGIN_TOP), width=str(plot_w), height=str(plot_h)
    )

    labels = etree.SubElement(root, _tag("g"), id="labels", fill="#000000")
    labels.set("font-family", "sans-serif")
    labels.set("font-size", "12")
    title_el = etree.SubElement(labels, _tag("text"), x=_fmt(WIDTH / 2.0), y="24")
    title_el.set("text-anchor", "middle")
    title_el.text = title
    x_el = etree.SubElement(labels, _tag("text"), x=_fmt(MARGIN_LEFT + plot_w / 2.0), y=str(HEIGHT - 15))
    x_el.set("text-anchor", "middle")
    x_el.text = x_label
    y_mid = MARGIN_TOP + plot_h / 2.0
    y_el = etree.SubElement(labels, _tag("text"), x="18", y=_fmt(y_mid), transform=f"rotate(-90 18 {_fmt(y_mid)})")
    y_el.set("text-anchor", "middle")
    y_el.text = y_label
    for value, anchor_x, anchor_y, anchor in (
        (x_min, sx(x_min), MARGIN_TOP + plot_h + 16, "start"),
        (x_max, sx(x_max), MARGIN_TOP + plot_h + 16, "end"),
    ):
        tick = etree.SubElement(labels, _tag("text"), x=_fmt(anchor_x), y=_fmt(anchor_y))
        tick.set("text-anchor", anchor)
        tick.text = f"{value:.3g}"
    for value in (y_min, y_max):
        tick = etree.SubElement(labels, _tag("text"), x=str(MARGIN_LEFT - 6), y=_fmt(sy(value)))
        tick.set("text-anchor", "end")
        tick.text = f"{value:.3g}"

    markers = etree.SubElement(root, _tag("g"), id="points")
    for (x, y), color in zip(points, colors):
        etree.SubElement(
            markers, _tag("circle"), cx=_fmt(sx(x)), cy=_fmt(sy(y)), r=str(MARKER_RADIUS), fill=color
        )

    legend_el = etree.SubElement(root, _tag("g"), id="legend")
    legend_el.set("font-family", "sans-serif")
    legend_el.set("font-size", "12")
    left = WIDTH - MARGIN_RIGHT + 15
    for i, (name, color) in enumerate(legend):
        top = MARGIN_TOP + 18 * i
        etree.SubElement(legend_el, _tag("rect"), x=str(left), y=str(top), width="10", height="10", fill=color)
        entry = etree.SubElement(legend_el, _tag("text"), x=str(left + 16), y=str(top + 10))
        entry.text = name
    return root


def _write_svg(root: etree._Element, path: Path) -> Path:
    etree.ElementTree(root).write(str(path), pretty_print=True, xml_declaration=True, encoding="utf-8")
    return path


def _groups(table: ScoreTable, group_by: str) -> List[Tuple[str, np.ndarray]]:
    if group_by == GROUP_BY_NONE:
        return [("all", np.ones(len(table), dtype=bool))]
    if group_by == GROUP_BY_CROP:
        keys: Sequence = CROPS
        values: Sequence = table.crops
    else:
        keys, values = STAGES, table.stages
    groups = []
    for key in keys:
        mask = np.array([v == key for v in values], dtype=bool)
        if mask.any():
            groups.append((key.value, mask))
    return groups


def _coloring(table: ScoreTable, group_by: str) -> Tuple[List[str], List[Tuple[str, str]]]:
    """Stage colors within a crop plot; crop colors otherwise."""
    if group_by == GROUP_BY_CROP:
        present_stages = [s for s in STAGES if s in set(table.stages)]
        return (
            [STAGE_COLORS[s] for s in table.stages],
            [(s.value, STAGE_COLORS[s]) for s in present_stages],
        )
    present_crops = [c for c in CROPS if c in set(table.crops)]
    return (
        [CROP_COLORS[c] for c in table.crops],
        [(c.value, CROP_COLORS[c]) for c in present_crops],
    )


def emit_scatter(
    table: ScoreTable,
    model: PCAModel,
    output_dir: Path,
    group_by: str = GROUP_BY_CROP,
    components: Tuple[int, int] = (0, 1),
    prefix: str = "pca",
) -> Dict[str, Path]:
    """Write the score CSV and one SVG scatter per group.

    ``group_by`` ``crop`` gives one plot per crop colored by stage, ``stage``
    one per stage colored by crop, ``none`` a single plot colored by crop.

    Returns:
        Mapping of ``scores`` and each group name to the written file.
    """
    if group_by not in VALID_GROUP_BY:
        raise ConfigError(f"group_by must be one of {VALID_GROUP_BY}, got {group_by!r}")
    if len(table) == 0:
        raise DatasetError("Cannot plot an empty score table")
    cx, cy = components
    for c in (cx, cy):
        if not 0 <= c < table.n_components:
            raise ConfigError(f"Component {c} not available; table has {table.n_components}")

    output_dir = Path(output_dir)
    try:
        output_dir.mkdir(parents=True, exist_ok=True)
        written: Dict[str, Path] = {
            "scores": export_scores_csv(table, Path(output_dir, f"{prefix}_scores.csv"))
        }
        pair = f"pc{cx + 1}_pc{cy + 1}"
        for name, mask in _groups(table, group_by):
            group = table.subset(mask)
            colors, legend = _coloring(group, group_by)
            title = "All records" if group_by == GROUP_BY_NONE else name
            root = render_scatter_svg(
                group.scores[:, [cx, cy]],
                colors,
                legend,
                title,
                _axis_label(model, cx),
                _axis_label(model, cy),
            )
            path = Path(output_dir, f"{prefix}_{pair}_{slugify(name)}.svg")
            written[name] = _write_svg(root, path)
    except OSError as exc:
        raise ConfigError(f"Cannot write scatter output under {output_dir}: {exc}") from exc
    logger.info("Wrote %d scatter file(s) to %s", len(written) - 1, output_dir)
    return written
