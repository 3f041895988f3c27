"""Deterministic SVG heatmaps for 8x8 sensor grids.

Output is plain vector text with fixed formatting so golden-file tests can
assert byte equality. Row 0 renders at the top (shortest exposure), column 0
at the left (lowest ISO). Undefined cells (no ground truth) get a hatch
pattern instead of a color; the scale is linear between the printed min and
max.
"""

from __future__ import annotations

from dataclasses import dataclass

from .binning import EXPOSURE_EDGES_S, GRID_SIZE, ISO_EDGES

CELL_COLOR_LOW = (247, 251, 255)
CELL_COLOR_HIGH = (8, 48, 107)
_HATCH_FILL = "url(#no-data)"


@dataclass(frozen=True)
class HeatmapStyle:
    title: str = ""
    cell_size: int = 44
    margin_left: int = 88
    margin_top: int = 40
    margin_right: int = 16
    margin_bottom: int = 56
    show_values: bool = True
    value_format: str = ".3g"


def _lerp_color(t: float) -> str:
    channels = (
        round(low + (high - low) * t)
        for low, high in zip(CELL_COLOR_LOW, CELL_COLOR_HIGH)
    )
    return "#{:02x}{:02x}{:02x}".format(*channels)


def _fmt(value: float, spec: str = ".6g") -> str:
    return format(value, spec)


def _exposure_label(row: int) -> str:
    if row == GRID_SIZE - 1:
        return f"[{_fmt(EXPOSURE_EDGES_S[row], '.3g')}s, inf)"
    return f"[{_fmt(EXPOSURE_EDGES_S[row], '.3g')}, {_fmt(EXPOSURE_EDGES_S[row + 1], '.3g')})s"


def _iso_label(col: int) -> str:
    return str(ISO_EDGES[col])


def render_heatmap(cells: list[list[float | None]], style: HeatmapStyle | None = None) -> str:
    """Render an 8x8 cell matrix (None = undefined) to an SVG document."""
    style = style or HeatmapStyle()
    size = style.cell_size
    width = style.margin_left + GRID_SIZE * size + style.margin_right
    height = style.margin_top + GRID_SIZE * size + style.margin_bottom

    defined = [v for row in cells for v in row if v is not None]
    vmin = min(defined) if defined else 0.0
    vmax = max(defined) if defined else 0.0
    spread = vmax - vmin
    has_undefined = any(v is None for row in cells for v in row)

    parts: list[str] = []
    parts.append('<?xml version="1.0" encoding="UTF-8"?>')
    parts.append(
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="monospace" font-size="10">'
    )
    parts.append(
        '<defs><pattern id="no-data" width="6" height="6" patternUnits="userSpaceOnUse">'
        '<rect width="6" height="6" fill="#eeeeee"/>'
        '<path d="M0 6 L6 0" stroke="#999999" stroke-width="1"/>'
        "</pattern></defs>"
    )
    parts.append(f'<rect width="{width}" height="{height}" fill="#ffffff"/>')
    if style.title:
        parts.append(
            f'<text x="{style.margin_left}" y="16" font-size="12">{_escape(style.title)}</text>'
        )

    for row in range(GRID_SIZE):
        y = style.margin_top + row * size
        label_y = y + size // 2 + 3
        parts.append(
            f'<text x="{style.margin_left - 6}" y="{label_y}" text-anchor="end">'
            f"{_escape(_exposure_label(row))}</text>"
        )
        for col in range(GRID_SIZE):
            x = style.margin_left + col * size
            value = cells[row][col]
            if value is None:
                fill = _HATCH_FILL
            else:
                t = (value - vmin) / spread if spread > 0 else 0.0
                fill = _lerp_color(t)
            parts.append(
                f'<rect x="{x}" y="{y}" width="{size}" height="{size}" '
                f'fill="{fill}" stroke="#ffffff" stroke-width="1"/>'
            )
            if style.show_values and value is not None:
                tx = x + size // 2
                ty = y + size // 2 + 3
                text_color = "#000000" if (spread == 0 or (value - vmin) / spread < 0.6) else "#ffffff"
                parts.append(
                    f'<text x="{tx}" y="{ty}" text-anchor="middle" fill="{text_color}">'
                    f"{_fmt(value, style.value_format)}</text>"
                )

    tick_y = style.margin_top + GRID_SIZE * size + 12
    for col in range(GRID_SIZE):
        x = style.margin_left + col * size
        parts.append(f'<text x="{x}" y="{tick_y}">{_iso_label(col)}</text>')
    parts.append(
        f'<text x="{style.margin_left + GRID_SIZE * size}" y="{tick_y}" text-anchor="end">'
        f"{ISO_EDGES[-1]}</text>"
    )
    axis_y = tick_y + 14
    parts.append(f'<text x="{style.margin_left}" y="{axis_y}">ISO (bin lower edges)</text>')

    legend_y = axis_y + 16
    parts.append(
        f'<text x="{style.margin_left}" y="{legend_y}">'
        f"scale: min={_fmt(vmin)} max={_fmt(vmax)} (linear)</text>"
    )
    if has_undefined:
        parts.append(
            f'<text x="{style.margin_left}" y="{legend_y + 12}">hatched = no ground truth</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _escape(text: str) -> str:
    return (
        text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
    )
