"""Shared fixture builders.

EXIF fixtures are produced with Pillow (an independent writer) and, where a
test needs a second opinion, read back with Pillow's own tag reader, so the
parser under test is never checked against itself.
"""

from __future__ import annotations

import io
import json
from pathlib import Path

import pytest
from PIL import Image
from PIL.TiffImagePlugin import IFDRational

from sensorbias.exif import TAG_EXPOSURE_TIME, TAG_F_NUMBER, TAG_ISO

EXIF_PREFIX = b"Exif\x00\x00"


def pillow_exif_payload(
    exposure: tuple[int, int] | None = (1, 60),
    f_number: tuple[int, int] | None = (28, 5),
    iso: int | None = 200,
    endian: str = "<",
    in_sub_ifd: bool = True,
) -> bytes:
    """TIFF-structured EXIF payload written by Pillow (no Exif\\0\\0 prefix)."""
    exif = Image.Exif()
    exif.endian = endian
    target = exif.get_ifd(0x8769) if in_sub_ifd else exif
    if exposure is not None:
        target[TAG_EXPOSURE_TIME] = IFDRational(*exposure)
    if f_number is not None:
        target[TAG_F_NUMBER] = IFDRational(*f_number)
    if iso is not None:
        target[TAG_ISO] = iso
    blob = exif.tobytes()
    assert blob.startswith(EXIF_PREFIX)
    return blob[len(EXIF_PREFIX) :]


def pillow_read_back(tiff_payload: bytes) -> dict[int, object]:
    """Independent read of the capture tags (base IFD and Exif sub-IFD)."""
    exif = Image.Exif()
    exif.load(EXIF_PREFIX + tiff_payload)
    tags: dict[int, object] = dict(exif)
    tags.update(exif.get_ifd(0x8769))
    return {
        k: v for k, v in tags.items() if k in (TAG_EXPOSURE_TIME, TAG_F_NUMBER, TAG_ISO)
    }


def jpeg_with_exif(tiff_payload: bytes, size: tuple[int, int] = (8, 8)) -> bytes:
    """Minimal JPEG carrying the payload in an APP1/Exif segment."""
    image = Image.new("RGB", size, (96, 128, 160))
    buffer = io.BytesIO()
    image.save(buffer, format="JPEG", exif=EXIF_PREFIX + tiff_payload)
    return buffer.getvalue()


def jpeg_without_exif(size: tuple[int, int] = (8, 8)) -> bytes:
    image = Image.new("RGB", size, (200, 180, 40))
    buffer = io.BytesIO()
    image.save(buffer, format="JPEG")
    data = buffer.getvalue()
    assert EXIF_PREFIX not in data
    return data


def write_annotations(path: Path, images: list[dict], annotations: list[dict],
                      categories: list[dict]) -> Path:
    path.write_text(json.dumps(
        {"images": images, "annotations": annotations, "categories": categories}
    ), encoding="utf-8")
    return path


def write_json(path: Path, payload) -> Path:
    path.write_text(json.dumps(payload), encoding="utf-8")
    return path


def build_golden_corpus(root: Path) -> dict[str, Path]:
    """12 synthetic images with hand-assigned EXIF and boxes.

    Grid placement (exposure row, ISO col), all with f/4:
      img0..img3  (0.01, 100)  -> cell (0, 1), category 1 ground truth
      img4..img6  (0.2, 450)   -> cell (1, 3), category 2 ground truth
      img7, img8  (0.95, 6400) -> cell (7, 7), categories 1 and 2
      img9        (0.5, 50)    -> cell (4, 0), category 1, no detections
      img10       ISO missing  -> skipped from grids
      img11       no EXIF      -> skipped from grids
    """
    root.mkdir(parents=True, exist_ok=True)
    ids = [f"img{i:02d}" for i in range(12)]
    gt_box = [10, 10, 20, 20]
    annotations = write_annotations(
        root / "annotations.json",
        images=[{"id": i, "file_name": f"{i}.jpg"} for i in ids],
        annotations=[
            {"image_id": "img00", "category_id": 1, "bbox": gt_box},
            {"image_id": "img01", "category_id": 1, "bbox": gt_box},
            {"image_id": "img02", "category_id": 1, "bbox": gt_box},
            {"image_id": "img03", "category_id": 1, "bbox": gt_box},
            {"image_id": "img04", "category_id": 2, "bbox": gt_box},
            {"image_id": "img05", "category_id": 2, "bbox": gt_box},
            {"image_id": "img06", "category_id": 2, "bbox": gt_box},
            {"image_id": "img07", "category_id": 1, "bbox": gt_box},
            {"image_id": "img08", "category_id": 2, "bbox": gt_box},
            {"image_id": "img09", "category_id": 1, "bbox": gt_box},
            {"image_id": "img10", "category_id": 1, "bbox": gt_box},
            {"image_id": "img11", "category_id": 2, "bbox": gt_box},
        ],
        categories=[{"id": 1, "name": "bottle"}, {"id": 2, "name": "chair"}],
    )
    detections = write_json(
        root / "detections.json",
        [
            # cell (0,1): TP .9, FP .85, TP .8 over 4 GT -> AP (26 + 25*2/3)/101
            {"image_id": "img00", "category_id": 1, "bbox": gt_box, "score": 0.9},
            {"image_id": "img01", "category_id": 1, "bbox": [10, 16, 20, 20], "score": 0.8},
            {"image_id": "img02", "category_id": 1, "bbox": [80, 80, 5, 5], "score": 0.85},
            # cell (1,3): all exact -> AP 1.0
            {"image_id": "img04", "category_id": 2, "bbox": gt_box, "score": 0.9},
            {"image_id": "img05", "category_id": 2, "bbox": gt_box, "score": 0.8},
            {"image_id": "img06", "category_id": 2, "bbox": gt_box, "score": 0.7},
            # cell (7,7): cat 1 perfect, cat 2 FP-only -> mAP 0.5
            {"image_id": "img07", "category_id": 1, "bbox": gt_box, "score": 0.9},
            {"image_id": "img08", "category_id": 2, "bbox": [80, 80, 5, 5], "score": 0.9},
        ],
    )
    sidecar_entries = [
        {"id": i, "ExposureTime": "1/100", "FNumber": "4", "ISO": "100"}
        for i in ids[:4]
    ]
    sidecar_entries += [
        {"id": i, "ExposureTime": "0.2", "FNumber": "4", "ISO": "450"}
        for i in ids[4:7]
    ]
    sidecar_entries += [
        {"id": i, "ExposureTime": "0.95", "FNumber": "4", "ISO": "6400"}
        for i in ids[7:9]
    ]
    sidecar_entries.append(
        {"id": "img09", "ExposureTime": "0.5", "FNumber": "4", "ISO": "50"}
    )
    sidecar_entries.append({"id": "img10", "ExposureTime": "0.01", "FNumber": "4"})
    sidecar = write_json(root / "sidecar.json", sidecar_entries)
    return {"annotations": annotations, "detections": detections,
            "sidecar": sidecar, "root": root}


@pytest.fixture
def golden_corpus(tmp_path: Path) -> dict[str, Path]:
    return build_golden_corpus(tmp_path / "golden")


@pytest.fixture
def small_corpus(tmp_path: Path) -> dict[str, Path]:
    """Four images, two categories, sidecar EXIF for three of them."""
    annotations = write_annotations(
        tmp_path / "annotations.json",
        images=[{"id": f"img{i}", "file_name": f"img{i}.jpg"} for i in range(4)],
        annotations=[
            {"image_id": "img0", "category_id": 1, "bbox": [10, 10, 20, 20]},
            {"image_id": "img1", "category_id": 1, "bbox": [0, 0, 30, 30]},
            {"image_id": "img1", "category_id": 2, "bbox": [50, 50, 10, 10]},
            {"image_id": "img2", "category_id": 2, "bbox": [5, 5, 40, 40]},
        ],
        categories=[{"id": 1, "name": "bottle"}, {"id": 2, "name": "chair"}],
    )
    detections = write_json(
        tmp_path / "detections.json",
        [
            {"image_id": "img0", "category_id": 1, "bbox": [11, 11, 20, 20], "score": 0.9},
            {"image_id": "img1", "category_id": 1, "bbox": [0, 0, 30, 30], "score": 0.8},
            {"image_id": "img1", "category_id": 2, "bbox": [100, 100, 5, 5], "score": 0.7},
            {"image_id": "img2", "category_id": 2, "bbox": [5, 5, 40, 40], "score": 0.95},
        ],
    )
    sidecar = write_json(
        tmp_path / "sidecar.json",
        [
            {"id": "img0", "ExposureTime": "1/60", "FNumber": "5.6", "ISO": "100"},
            {"id": "img1", "ExposureTime": "1/60", "FNumber": "5.6", "ISO": "100"},
            {"id": "img2", "ExposureTime": "0.2", "FNumber": "2.8", "ISO": "400"},
        ],
    )
    return {"annotations": annotations, "detections": detections, "sidecar": sidecar,
            "root": tmp_path}
