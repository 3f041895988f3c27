"""Loading and joining: annotations, detection results, capture metadata.

Annotation and detection documents follow the community JSON layout
(images/annotations/categories top-level lists; detections as a flat list
of scored entries). Image identifiers are treated as opaque strings; numeric
ids from JSON are normalized with str().

Metadata joining consults an ordered list of sources (sidecar documents,
embedded EXIF, remote providers); the first source supplying a field wins.
Missing metadata never aborts a run: affected images stay in the corpus,
count toward coverage statistics, and are excluded from grids.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .evaluation import (
    Annotation,
    Box,
    DEFAULT_MAX_DETECTIONS,
    Detection,
    DetectionSet,
    GroundTruthSet,
)
from .exceptions import DanglingReference, MalformedDocument, SensorBiasError
from .exif import ExifRecord, WarningRecord, parse_sidecar, read_exif_record
from .photometry import EvMode, ExposureProfile, profile


@dataclass(frozen=True)
class ImageEntry:
    image_id: str
    file_name: str
    path: Path | None = None  # optional byte source for embedded EXIF


@dataclass(frozen=True)
class Category:
    category_id: int
    name: str


@dataclass
class CorpusManifest:
    images: list[ImageEntry] = field(default_factory=list)
    categories: list[Category] = field(default_factory=list)

    def image_ids(self) -> list[str]:
        return [entry.image_id for entry in self.images]


@dataclass
class CoverageStats:
    """How much of the corpus carries usable capture metadata."""

    total_images: int = 0
    with_any_exif: int = 0  # at least one of the three fields present
    fully_tagged: int = 0  # exposure time, f-number and ISO all present
    grid_assignable: int = 0  # exposure time and ISO present

    @property
    def coverage_fraction(self) -> float:
        if self.total_images == 0:
            return 0.0
        return self.fully_tagged / self.total_images


@dataclass
class JoinedCorpus:
    manifest: CorpusManifest
    ground_truth: GroundTruthSet
    detections: DetectionSet | None
    exif: dict[str, ExifRecord]
    profiles: dict[str, ExposureProfile]
    ev_mode: EvMode
    coverage: CoverageStats
    warnings: list[WarningRecord]

    def records(self) -> list[ExifRecord]:
        """Per-image records in manifest order."""
        return [self.exif[image_id] for image_id in self.manifest.image_ids()]


def _ensure_parsed(document, what: str):
    if isinstance(document, (str, bytes)):
        try:
            return json.loads(document)
        except json.JSONDecodeError as exc:
            raise MalformedDocument(f"{what} is not valid JSON: {exc}") from exc
    return document


def _require(mapping: dict, key: str, what: str):
    if not isinstance(mapping, dict) or key not in mapping:
        raise MalformedDocument(f"{what} entry lacks required field {key!r}")
    return mapping[key]


def _parse_bbox(raw, what: str) -> tuple[float, float, float, float]:
    if (
        not isinstance(raw, (list, tuple))
        or len(raw) != 4
        or not all(isinstance(v, (int, float)) and math.isfinite(v) for v in raw)
    ):
        raise MalformedDocument(f"{what} bbox must be four finite numbers, got {raw!r}")
    return tuple(float(v) for v in raw)


def load_annotations(
    document,
) -> tuple[CorpusManifest, GroundTruthSet, list[WarningRecord]]:
    """Parse an annotation document into a manifest and ground-truth set.

    Boxes with zero or negative extent are dropped with warnings; every
    manifest image gets a ground-truth entry (possibly empty) so that later
    evaluation sees the full image set.
    """
    doc = _ensure_parsed(document, "annotation document")
    if not isinstance(doc, dict):
        raise MalformedDocument("annotation document must be a JSON object")
    for key in ("images", "annotations", "categories"):
        if not isinstance(doc.get(key), list):
            raise MalformedDocument(f"annotation document lacks list field {key!r}")

    manifest = CorpusManifest()
    seen_images: set[str] = set()
    for raw in doc["images"]:
        image_id = str(_require(raw, "id", "image"))
        if image_id in seen_images:
            raise MalformedDocument(f"duplicate image id {image_id!r}")
        seen_images.add(image_id)
        file_name = str(_require(raw, "file_name", "image"))
        path = Path(raw["path"]) if "path" in raw else None
        manifest.images.append(ImageEntry(image_id, file_name, path))

    seen_categories: set[int] = set()
    for raw in doc["categories"]:
        cat_id = _require(raw, "id", "category")
        if not isinstance(cat_id, int):
            raise MalformedDocument(f"category id must be an integer, got {cat_id!r}")
        if cat_id in seen_categories:
            raise MalformedDocument(f"duplicate category id {cat_id}")
        seen_categories.add(cat_id)
        manifest.categories.append(Category(cat_id, str(_require(raw, "name", "category"))))

    ground_truth = GroundTruthSet({image_id: [] for image_id in manifest.image_ids()})
    warnings: list[WarningRecord] = []
    for raw in doc["annotations"]:
        image_id = str(_require(raw, "image_id", "annotation"))
        category_id = _require(raw, "category_id", "annotation")
        if image_id not in seen_images:
            raise DanglingReference(f"annotation references unknown image {image_id!r}")
        if category_id not in seen_categories:
            raise DanglingReference(
                f"annotation references unknown category {category_id!r}"
            )
        x, y, w, h = _parse_bbox(_require(raw, "bbox", "annotation"), "annotation")
        if w <= 0 or h <= 0:
            warnings.append(
                WarningRecord(image_id, "bbox", f"degenerate box dropped (w={w}, h={h})")
            )
            continue
        ground_truth.by_image[image_id].append(Annotation(category_id, Box(x, y, w, h)))
    return manifest, ground_truth, warnings


def load_detections(
    document,
    manifest: CorpusManifest,
    max_dets: int = DEFAULT_MAX_DETECTIONS,
) -> tuple[DetectionSet, list[WarningRecord]]:
    """Parse a detection results document against a loaded manifest.

    Entries are grouped by image and truncated per image to ``max_dets`` by
    descending score (ties keep input order). Scores outside [0, 1] and
    degenerate boxes reject the single entry with a warning.
    """
    doc = _ensure_parsed(document, "detection document")
    if not isinstance(doc, list):
        raise MalformedDocument("detection document must be a top-level list")
    known_images = set(manifest.image_ids())
    known_categories = {c.category_id for c in manifest.categories}

    grouped: dict[str, list[Detection]] = {}
    warnings: list[WarningRecord] = []
    for raw in doc:
        image_id = str(_require(raw, "image_id", "detection"))
        category_id = _require(raw, "category_id", "detection")
        if image_id not in known_images:
            raise DanglingReference(f"detection references unknown image {image_id!r}")
        if category_id not in known_categories:
            raise DanglingReference(
                f"detection references unknown category {category_id!r}"
            )
        score = _require(raw, "score", "detection")
        if not isinstance(score, (int, float)) or not (0.0 <= score <= 1.0):
            warnings.append(
                WarningRecord(image_id, "score", f"score outside [0, 1]: {score!r}")
            )
            continue
        x, y, w, h = _parse_bbox(_require(raw, "bbox", "detection"), "detection")
        if w <= 0 or h <= 0:
            warnings.append(
                WarningRecord(image_id, "bbox", f"degenerate box dropped (w={w}, h={h})")
            )
            continue
        grouped.setdefault(image_id, []).append(
            Detection(category_id, Box(x, y, w, h), float(score))
        )

    detections = DetectionSet()
    for image_id, dets in grouped.items():
        ordered = sorted(dets, key=lambda d: -d.score)
        if len(ordered) > max_dets:
            ordered = ordered[:max_dets]
        detections.by_image[image_id] = ordered
    return detections, warnings


class SidecarSource:
    """Metadata source backed by a parsed sidecar document."""

    name = "sidecar"

    def __init__(self, document) -> None:
        records, self.document_warnings = parse_sidecar(document)
        self._by_id = {record.image_id: record for record in records}

    def lookup(self, entry: ImageEntry) -> tuple[ExifRecord | None, list[WarningRecord]]:
        return self._by_id.get(entry.image_id), []


class EmbeddedSource:
    """Metadata source reading EXIF out of the image files themselves."""

    name = "embedded"
    document_warnings: list[WarningRecord] = []

    def __init__(self, images_dir: Path | None = None) -> None:
        self.images_dir = images_dir

    def _path_for(self, entry: ImageEntry) -> Path | None:
        if entry.path is not None:
            return entry.path
        if self.images_dir is not None:
            return self.images_dir / entry.file_name
        return None

    def lookup(self, entry: ImageEntry) -> tuple[ExifRecord | None, list[WarningRecord]]:
        path = self._path_for(entry)
        if path is None:
            return None, []
        try:
            data = path.read_bytes()
        except OSError as exc:
            return None, [WarningRecord(entry.image_id, None, f"unreadable image: {exc}")]
        try:
            return read_exif_record(data, entry.image_id)
        except SensorBiasError as exc:
            return None, [
                WarningRecord(entry.image_id, None, f"{type(exc).__name__}: {exc}")
            ]


def join_metadata(
    manifest: CorpusManifest,
    sources: list,
    ev_mode: EvMode = EvMode.PHOTOMETRIC,
    ground_truth: GroundTruthSet | None = None,
    detections: DetectionSet | None = None,
    workers: int = 1,
) -> JoinedCorpus:
    """Join capture metadata onto the corpus with field-level precedence.

    For each image the sources are consulted in order and the first one
    supplying a field wins. Joining is deterministic and idempotent; with
    ``workers`` > 1 the per-image work runs on a thread pool and results are
    merged back in manifest order.
    """
    warnings: list[WarningRecord] = []
    for source in sources:
        warnings.extend(getattr(source, "document_warnings", []))

    def resolve(entry: ImageEntry) -> tuple[ExifRecord, list[WarningRecord]]:
        exposure = f_number = iso = None
        local: list[WarningRecord] = []
        for source in sources:
            if exposure is not None and f_number is not None and iso is not None:
                break
            record, source_warnings = source.lookup(entry)
            local.extend(source_warnings)
            if record is None:
                continue
            if exposure is None:
                exposure = record.exposure_time_s
            if f_number is None:
                f_number = record.f_number
            if iso is None:
                iso = record.iso
        return ExifRecord(entry.image_id, exposure, f_number, iso), local

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            resolved = list(pool.map(resolve, manifest.images))
    else:
        resolved = [resolve(entry) for entry in manifest.images]

    exif: dict[str, ExifRecord] = {}
    profiles: dict[str, ExposureProfile] = {}
    coverage = CoverageStats(total_images=len(manifest.images))
    for entry, (record, local_warnings) in zip(manifest.images, resolved):
        exif[entry.image_id] = record
        warnings.extend(local_warnings)
        fields_present = [
            record.exposure_time_s is not None,
            record.f_number is not None,
            record.iso is not None,
        ]
        if any(fields_present):
            coverage.with_any_exif += 1
        if record.has_grid_fields:
            coverage.grid_assignable += 1
        if record.is_complete:
            coverage.fully_tagged += 1
            exposure_profile, profile_warnings = profile(record, ev_mode)
            warnings.extend(profile_warnings)
            if exposure_profile is not None:
                profiles[entry.image_id] = exposure_profile

    return JoinedCorpus(
        manifest=manifest,
        ground_truth=ground_truth or GroundTruthSet(),
        detections=detections,
        exif=exif,
        profiles=profiles,
        ev_mode=ev_mode,
        coverage=coverage,
        warnings=warnings,
    )
