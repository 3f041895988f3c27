"""sensorbias: audit image datasets for sensor-setting (capture) bias.

Parses capture metadata (embedded EXIF, sidecar documents, remote
providers), derives exposure value and illumination class, places images on
the 8x8 exposure-time x ISO grid, and evaluates detection outputs per grid
cell with 101-point mAP at IoU 0.5.
"""

__version__ = "0.1.0"

from .binning import (
    EXPOSURE_EDGES_S,
    GRID_SIZE,
    GridIndex,
    GridKind,
    ISO_EDGES,
    SensorGrid,
    accumulate_grid,
    describe_bins,
    exposure_bin,
    grid_index,
    iso_bin,
    marginal_histograms,
)
from .evaluation import (
    Annotation,
    BinScoreGrid,
    Box,
    Detection,
    DetectionSet,
    GroundTruthSet,
    MatchResult,
    PrPoint,
    average_precision,
    iou,
    match_detections,
    mean_average_precision,
    per_bin_map,
    repeatability_pr,
    threshold_pr,
)
from .exif import (
    ByteOrder,
    ExifRecord,
    RationalValue,
    RawTagSet,
    TagEntry,
    WarningRecord,
    extract_exif_segment,
    parse_sidecar,
    parse_tag_set,
    read_exif_record,
    to_exif_record,
)
from .ingest import (
    Category,
    CorpusManifest,
    CoverageStats,
    EmbeddedSource,
    ImageEntry,
    JoinedCorpus,
    SidecarSource,
    join_metadata,
    load_annotations,
    load_detections,
)
from .photometry import (
    EvMode,
    ExposureProfile,
    IlluminationLevel,
    classify_illumination,
    compute_ev,
    ev_to_lux,
    profile,
)
from .remote import ProviderConfig, RemoteMetadataClient, RemoteSource
from .report import (
    AuditConfig,
    AuditReport,
    emit_tables,
    run_audit,
    write_outputs,
)
from .heatmap import HeatmapStyle, render_heatmap

__all__ = [
    "__version__",
    # exif
    "ByteOrder", "ExifRecord", "RationalValue", "RawTagSet", "TagEntry",
    "WarningRecord", "extract_exif_segment", "parse_sidecar", "parse_tag_set",
    "read_exif_record", "to_exif_record",
    # photometry
    "EvMode", "ExposureProfile", "IlluminationLevel", "classify_illumination",
    "compute_ev", "ev_to_lux", "profile",
    # binning
    "EXPOSURE_EDGES_S", "GRID_SIZE", "GridIndex", "GridKind", "ISO_EDGES",
    "SensorGrid", "accumulate_grid", "describe_bins", "exposure_bin",
    "grid_index", "iso_bin", "marginal_histograms",
    # evaluation
    "Annotation", "BinScoreGrid", "Box", "Detection", "DetectionSet",
    "GroundTruthSet", "MatchResult", "PrPoint", "average_precision", "iou",
    "match_detections", "mean_average_precision", "per_bin_map",
    "repeatability_pr", "threshold_pr",
    # ingest
    "Category", "CorpusManifest", "CoverageStats", "EmbeddedSource",
    "ImageEntry", "JoinedCorpus", "SidecarSource", "join_metadata",
    "load_annotations", "load_detections",
    # remote
    "ProviderConfig", "RemoteMetadataClient", "RemoteSource",
    # report
    "AuditConfig", "AuditReport", "emit_tables", "run_audit", "write_outputs",
    "HeatmapStyle", "render_heatmap",
]
