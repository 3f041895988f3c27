"""The 8x8 exposure-time x ISO grid and corpus histogram accumulation.

Exposure times in (0, 1] s are split into 8 equal 0.125 s intervals; the
last bin also absorbs everything above 1 s. ISO bins follow the edges
[0, 100, 200, 400, 800, 1600, 3200, 6400, 10000], half-open on the left
edge, with ISO >= 10000 clamped into the last bin (counted, not dropped).

Grid orientation is fixed throughout the toolkit: row 0 is the shortest
exposure (rendered at the top), column 0 the lowest ISO (rendered at the
left).
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

from .exceptions import NonPositiveExposure, NonPositiveIso
from .exif import ExifRecord

GRID_SIZE = 8
EXPOSURE_BIN_WIDTH_S = 0.125
EXPOSURE_EDGES_S = tuple(i * EXPOSURE_BIN_WIDTH_S for i in range(GRID_SIZE + 1))
ISO_EDGES = (0, 100, 200, 400, 800, 1600, 3200, 6400, 10000)
ISO_CLAMP_THRESHOLD = ISO_EDGES[-1]


class GridKind(Enum):
    COUNT = "count"
    PERCENT = "percent"
    SCORE = "score"


@dataclass(frozen=True)
class GridIndex:
    """Cell address: row = exposure bin (shortest first), col = ISO bin."""

    row: int
    col: int

    def __post_init__(self) -> None:
        if not (0 <= self.row < GRID_SIZE and 0 <= self.col < GRID_SIZE):
            raise ValueError(f"grid index out of range: ({self.row}, {self.col})")


def exposure_bin(t: float) -> int:
    """Bin index for an exposure time in seconds.

    Half-open intervals [0.125*i, 0.125*(i+1)) for i = 0..6; bin 7 covers
    [0.875, inf), merging the top equal interval with the >1 s overflow rule.
    """
    if not t > 0:
        raise NonPositiveExposure(f"exposure time must be > 0 s, got {t!r}")
    # t * 8 is an exact power-of-two scaling, so truncation realizes the
    # half-open rule without edge jitter.
    return min(int(t * 8), GRID_SIZE - 1)


def iso_bin(iso: int) -> int:
    """Bin index for an ISO value over the fixed edges; >= 10000 clamps to 7."""
    if not iso >= 1:
        raise NonPositiveIso(f"ISO must be a positive integer, got {iso!r}")
    return min(bisect_right(ISO_EDGES, iso) - 1, GRID_SIZE - 1)


def grid_index(t: float, iso: int) -> GridIndex:
    return GridIndex(exposure_bin(t), iso_bin(iso))


def _zero_cells() -> list[list[float]]:
    return [[0.0] * GRID_SIZE for _ in range(GRID_SIZE)]


@dataclass
class SensorGrid:
    """8x8 grid of counts, percentages or scores plus bookkeeping counters."""

    cells: list[list[float]] = field(default_factory=_zero_cells)
    kind: GridKind = GridKind.COUNT
    total_assigned: int = 0
    clamped_iso_count: int = 0
    skipped_count: int = 0  # records lacking exposure time or ISO

    def cell(self, index: GridIndex) -> float:
        return self.cells[index.row][index.col]

    def row_sums(self) -> list[float]:
        return [sum(row) for row in self.cells]

    def col_sums(self) -> list[float]:
        return [sum(row[c] for row in self.cells) for c in range(GRID_SIZE)]

    def total(self) -> float:
        return sum(self.row_sums())


def accumulate_grid(
    records: Iterable[ExifRecord], kind: GridKind = GridKind.COUNT
) -> SensorGrid:
    """Assign records to grid cells and accumulate a Count or Percent grid.

    Records lacking exposure time or ISO are skipped and counted. A Percent
    grid over an empty corpus is all zeros with total_assigned = 0.
    """
    if kind is GridKind.SCORE:
        raise ValueError("score grids are produced by the evaluation module")
    grid = SensorGrid(kind=kind)
    for record in records:
        if not record.has_grid_fields:
            grid.skipped_count += 1
            continue
        index = grid_index(record.exposure_time_s, record.iso)
        if record.iso >= ISO_CLAMP_THRESHOLD:
            grid.clamped_iso_count += 1
        grid.cells[index.row][index.col] += 1.0
        grid.total_assigned += 1
    if kind is GridKind.PERCENT and grid.total_assigned > 0:
        scale = 100.0 / grid.total_assigned
        grid.cells = [[c * scale for c in row] for row in grid.cells]
    return grid


def marginal_histograms(
    records: Sequence[ExifRecord],
) -> tuple[list[float], list[float]]:
    """(exposure histogram, ISO histogram): row and column sums of the
    Count grid over the same records."""
    grid = accumulate_grid(records, GridKind.COUNT)
    return grid.row_sums(), grid.col_sums()


def merge_grids(a: SensorGrid, b: SensorGrid) -> SensorGrid:
    """Cell-wise sum of two Count grids (associative, commutative)."""
    if a.kind is not GridKind.COUNT or b.kind is not GridKind.COUNT:
        raise ValueError("only count grids merge by addition")
    merged = SensorGrid(
        cells=[[a.cells[r][c] + b.cells[r][c] for c in range(GRID_SIZE)] for r in range(GRID_SIZE)],
        kind=GridKind.COUNT,
        total_assigned=a.total_assigned + b.total_assigned,
        clamped_iso_count=a.clamped_iso_count + b.clamped_iso_count,
        skipped_count=a.skipped_count + b.skipped_count,
    )
    return merged


def describe_bins() -> str:
    """Human-readable description of the fixed bin edges."""
    lines = ["exposure-time bins (seconds, half-open, row 0 first):"]
    for i in range(GRID_SIZE - 1):
        lines.append(f"  row {i}: [{EXPOSURE_EDGES_S[i]:.3f}, {EXPOSURE_EDGES_S[i + 1]:.3f})")
    lines.append(f"  row 7: [{EXPOSURE_EDGES_S[7]:.3f}, inf)  (includes all > 1 s)")
    lines.append("ISO bins (half-open, col 0 first):")
    for i in range(GRID_SIZE - 1):
        lines.append(f"  col {i}: [{ISO_EDGES[i]}, {ISO_EDGES[i + 1]})")
    lines.append(
        f"  col 7: [{ISO_EDGES[7]}, {ISO_EDGES[8]})  (ISO >= {ISO_CLAMP_THRESHOLD} clamps here)"
    )
    return "\n".join(lines)
