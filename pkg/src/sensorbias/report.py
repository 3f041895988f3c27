"""Audit orchestration and deterministic report emission.

run_audit is a pure function of (inputs, config, tool version): the report
carries SHA-256 digests of every input document so published audits stay
attributable, and serialization uses canonical JSON so two runs on the same
inputs produce byte-identical artifacts.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .binning import GridKind, SensorGrid, accumulate_grid
from .evaluation import BinScoreGrid, DetectionSet, GroundTruthSet, per_bin_map
from .evaluation import DEFAULT_IOU_THRESHOLD, DEFAULT_MAX_DETECTIONS
from .exif import WarningRecord
from .heatmap import HeatmapStyle, render_heatmap
from .ingest import (
    CoverageStats,
    EmbeddedSource,
    JoinedCorpus,
    SidecarSource,
    join_metadata,
    load_annotations,
    load_detections,
)
from .photometry import (
    EvMode,
    IlluminationLevel,
    LOW_RANGE_BOTTOM_EV,
)

SCHEMA_VERSION = 1


@dataclass
class IlluminationTable:
    """Per-class image counts over the profiled part of the corpus."""

    counts: dict[IlluminationLevel, int] = field(
        default_factory=lambda: {level: 0 for level in IlluminationLevel}
    )
    profiled_images: int = 0
    below_low_range_count: int = 0  # EV under -4, still classified Low

    def percentages(self) -> dict[IlluminationLevel, float] | None:
        if self.profiled_images == 0:
            return None
        return {
            level: 100.0 * count / self.profiled_images
            for level, count in self.counts.items()
        }


@dataclass
class AuditConfig:
    annotations: Path
    detections: Path | None = None
    sidecars: list[Path] = field(default_factory=list)
    images_dir: Path | None = None
    ev_mode: EvMode = EvMode.PHOTOMETRIC
    max_dets: int = DEFAULT_MAX_DETECTIONS
    iou_threshold: float = DEFAULT_IOU_THRESHOLD
    workers: int = 1


@dataclass
class AuditReport:
    tool_version: str
    schema_version: int
    ev_mode: str
    input_digests: dict[str, str]
    coverage: CoverageStats
    count_grid: SensorGrid
    percent_grid: SensorGrid
    exposure_marginal: list[float]
    iso_marginal: list[float]
    illumination: IlluminationTable
    score_grid: BinScoreGrid | None
    warnings: list[WarningRecord]

    def to_dict(self) -> dict:
        percentages = self.illumination.percentages()
        payload: dict = {
            "schema_version": self.schema_version,
            "tool_version": self.tool_version,
            "ev_mode": self.ev_mode,
            "input_digests": dict(self.input_digests),
            "coverage": {
                "total_images": self.coverage.total_images,
                "with_any_exif": self.coverage.with_any_exif,
                "fully_tagged": self.coverage.fully_tagged,
                "grid_assignable": self.coverage.grid_assignable,
                "coverage_fraction": self.coverage.coverage_fraction,
            },
            "count_grid": _grid_dict(self.count_grid),
            "percent_grid": _grid_dict(self.percent_grid),
            "exposure_marginal": list(self.exposure_marginal),
            "iso_marginal": list(self.iso_marginal),
            "illumination": {
                "counts": {
                    level.value: self.illumination.counts[level]
                    for level in IlluminationLevel
                },
                "percentages": None
                if percentages is None
                else {level.value: percentages[level] for level in IlluminationLevel},
                "profiled_images": self.illumination.profiled_images,
                "below_low_range_count": self.illumination.below_low_range_count,
            },
            "warnings": [
                {"image_id": w.image_id, "field": w.field, "reason": w.reason}
                for w in self.warnings
            ],
            "warning_count": len(self.warnings),
        }
        if self.score_grid is not None:
            payload["score_grid"] = {
                "cells": self.score_grid.cells,
                "image_counts": self.score_grid.image_counts,
                "annotation_counts": self.score_grid.annotation_counts,
                "excluded_image_count": self.score_grid.excluded_image_count,
                "clamped_iso_count": self.score_grid.clamped_iso_count,
            }
        return payload

    def serialize(self) -> bytes:
        """Canonical byte form; identical inputs yield identical bytes."""
        return (
            json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"
        ).encode("utf-8")


def _grid_dict(grid: SensorGrid) -> dict:
    return {
        "kind": grid.kind.value,
        "cells": grid.cells,
        "total_assigned": grid.total_assigned,
        "clamped_iso_count": grid.clamped_iso_count,
        "skipped_count": grid.skipped_count,
    }


def _digest(path: Path) -> str:
    return "sha256:" + hashlib.sha256(path.read_bytes()).hexdigest()


def build_illumination_table(corpus: JoinedCorpus) -> IlluminationTable:
    table = IlluminationTable()
    for image_id in corpus.manifest.image_ids():
        exposure_profile = corpus.profiles.get(image_id)
        if exposure_profile is None:
            continue
        table.profiled_images += 1
        table.counts[exposure_profile.illumination] += 1
        if exposure_profile.ev < LOW_RANGE_BOTTOM_EV:
            table.below_low_range_count += 1
    return table


def run_audit(config: AuditConfig) -> AuditReport:
    """Run the full audit pipeline: ingest, photometry, binning, and, when
    detections are configured, per-bin evaluation."""
    digests = {"annotations": _digest(config.annotations)}
    manifest, ground_truth, warnings = load_annotations(
        config.annotations.read_text(encoding="utf-8")
    )

    detections: DetectionSet | None = None
    if config.detections is not None:
        digests["detections"] = _digest(config.detections)
        detections, det_warnings = load_detections(
            config.detections.read_text(encoding="utf-8"),
            manifest,
            max_dets=config.max_dets,
        )
        warnings.extend(det_warnings)

    sources: list = []
    for i, sidecar in enumerate(config.sidecars):
        digests[f"sidecar[{i}]"] = _digest(sidecar)
        sources.append(SidecarSource(sidecar.read_text(encoding="utf-8")))
    if config.images_dir is not None or any(e.path for e in manifest.images):
        sources.append(EmbeddedSource(config.images_dir))

    corpus = join_metadata(
        manifest,
        sources,
        ev_mode=config.ev_mode,
        ground_truth=ground_truth,
        detections=detections,
        workers=config.workers,
    )
    all_warnings = warnings + corpus.warnings

    records = corpus.records()
    count_grid = accumulate_grid(records, GridKind.COUNT)
    percent_grid = accumulate_grid(records, GridKind.PERCENT)

    score_grid: BinScoreGrid | None = None
    if detections is not None:
        score_grid = per_bin_map(
            detections, ground_truth, corpus.exif, config.iou_threshold
        )

    return AuditReport(
        tool_version=__version__,
        schema_version=SCHEMA_VERSION,
        ev_mode=config.ev_mode.value,
        input_digests=digests,
        coverage=corpus.coverage,
        count_grid=count_grid,
        percent_grid=percent_grid,
        exposure_marginal=count_grid.row_sums(),
        iso_marginal=count_grid.col_sums(),
        illumination=build_illumination_table(corpus),
        score_grid=score_grid,
        warnings=all_warnings,
    )


def csv_bytes(rows: list[list]) -> bytes:
    """RFC-style CSV encoding (fields with commas/quotes/newlines quoted)."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\r\n")
    writer.writerows(rows)
    return buffer.getvalue().encode("utf-8")


def _format_percent(value: float) -> str:
    return f"{round(value)}%"


def illumination_csv(table: IlluminationTable) -> bytes:
    """Count-(percent) layout, one row per illumination class."""
    percentages = table.percentages()
    rows: list[list] = [["illumination", "count", "percent"]]
    for level in (IlluminationLevel.HIGH, IlluminationLevel.MID, IlluminationLevel.LOW):
        percent = "" if percentages is None else _format_percent(percentages[level])
        rows.append([level.value, table.counts[level], percent])
    rows.append(["profiled_images", table.profiled_images, ""])
    rows.append(["below_low_range", table.below_low_range_count, ""])
    return csv_bytes(rows)


def grid_csv(cells: list[list], corner_label: str) -> bytes:
    """8x8 grid as CSV with exposure-row and ISO-column labels."""
    from .binning import ISO_EDGES
    from .heatmap import _exposure_label

    header = [corner_label] + [f"iso[{ISO_EDGES[c]},{ISO_EDGES[c + 1]})" for c in range(8)]
    rows: list[list] = [header]
    for r, row in enumerate(cells):
        rows.append([_exposure_label(r)] + ["" if v is None else v for v in row])
    return csv_bytes(rows)


def marginals_csv(exposure: list[float], iso: list[float]) -> bytes:
    rows: list[list] = [["bin", "exposure_count", "iso_count"]]
    for i in range(8):
        rows.append([i, exposure[i], iso[i]])
    return csv_bytes(rows)


def emit_tables(report: AuditReport, format: str = "structured") -> dict[str, bytes]:
    """Render the report's tables; returns {file name: content bytes}.

    ``format`` is "structured" (canonical JSON report) or "csv" (the
    illumination, grid and marginal tables).
    """
    if format == "structured":
        return {"report.json": report.serialize()}
    if format == "csv":
        out = {
            "illumination.csv": illumination_csv(report.illumination),
            "count_grid.csv": grid_csv(report.count_grid.cells, "exposure\\iso"),
            "percent_grid.csv": grid_csv(report.percent_grid.cells, "exposure\\iso"),
            "marginals.csv": marginals_csv(report.exposure_marginal, report.iso_marginal),
        }
        if report.score_grid is not None:
            out["map_grid.csv"] = grid_csv(report.score_grid.cells, "exposure\\iso")
        return out
    raise ValueError(f"unknown table format {format!r}")


def emit_heatmaps(report: AuditReport) -> dict[str, bytes]:
    """One vector heatmap per grid in the report."""
    out = {
        "count_grid.svg": render_heatmap(
            report.count_grid.cells, HeatmapStyle(title="image counts per sensor bin")
        ).encode("utf-8"),
        "percent_grid.svg": render_heatmap(
            report.percent_grid.cells,
            HeatmapStyle(title="% of grid-assignable images per sensor bin"),
        ).encode("utf-8"),
    }
    if report.score_grid is not None:
        out["map_grid.svg"] = render_heatmap(
            report.score_grid.cells,
            HeatmapStyle(title="mAP@IoU0.5 per sensor bin", value_format=".3f"),
        ).encode("utf-8")
    return out


def write_outputs(report: AuditReport, out_dir: Path, format: str = "all") -> list[Path]:
    """Write the selected artifact set into out_dir; returns written paths."""
    out_dir.mkdir(parents=True, exist_ok=True)
    artifacts: dict[str, bytes] = {}
    if format in ("structured", "all"):
        artifacts.update(emit_tables(report, "structured"))
    if format in ("csv", "all"):
        artifacts.update(emit_tables(report, "csv"))
    if format in ("svg", "all"):
        artifacts.update(emit_heatmaps(report))
    written = []
    for name in sorted(artifacts):
        path = out_dir / name
        path.write_bytes(artifacts[name])
        written.append(path)
    return written
