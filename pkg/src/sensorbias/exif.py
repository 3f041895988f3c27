"""Capture-metadata extraction from JPEG/TIFF EXIF blocks and sidecar JSON.

Only the three tags the audit needs are normalized: ExposureTime (0x829a),
FNumber (0x829d) and ISOSpeedRatings/PhotographicSensitivity (0x8827).
MakerNotes, thumbnails and everything GPS/lens/color related are ignored.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field
from enum import Enum

from .exceptions import (
    CyclicIfd,
    MalformedDocument,
    MalformedHeader,
    NoExifSegment,
    NotAnImage,
    TruncatedIfd,
)

TAG_EXPOSURE_TIME = 0x829A
TAG_F_NUMBER = 0x829D
TAG_ISO = 0x8827
TAG_EXIF_SUB_IFD = 0x8769

# TIFF field types: (kind name, byte size, struct code or None for raw)
_FIELD_TYPES: dict[int, tuple[str, int, str | None]] = {
    1: ("byte", 1, None),
    2: ("ascii", 1, None),
    3: ("short", 2, "H"),
    4: ("long", 4, "I"),
    5: ("rational", 8, None),
    6: ("sbyte", 1, "b"),
    7: ("undefined", 1, None),
    8: ("sshort", 2, "h"),
    9: ("slong", 4, "i"),
    10: ("srational", 8, None),
    11: ("float", 4, "f"),
    12: ("double", 8, "d"),
}

_JPEG_SOI = b"\xff\xd8"
_TIFF_LE = b"II*\x00"
_TIFF_BE = b"MM\x00*"
_EXIF_HEADER = b"Exif\x00\x00"


class ByteOrder(Enum):
    LITTLE_ENDIAN = "II"
    BIG_ENDIAN = "MM"

    @property
    def struct_prefix(self) -> str:
        return "<" if self is ByteOrder.LITTLE_ENDIAN else ">"


@dataclass(frozen=True)
class RationalValue:
    """TIFF rational: numerator/denominator pair, kept unevaluated.

    A zero denominator is representable (files in the wild contain them);
    ``as_float`` reports it as None and normalization turns it into a
    per-field warning.
    """

    numerator: int
    denominator: int

    def as_float(self) -> float | None:
        if self.denominator == 0:
            return None
        value = self.numerator / self.denominator
        return value if math.isfinite(value) else None

    def __str__(self) -> str:
        return f"{self.numerator}/{self.denominator}"


@dataclass(frozen=True)
class TagEntry:
    """One decoded IFD entry."""

    tag_id: int
    kind: str
    values: tuple

    def first(self):
        return self.values[0] if self.values else None


@dataclass
class RawTagSet:
    """All entries of IFD0 plus the Exif sub-IFD, in traversal order."""

    byte_order: ByteOrder
    entries: list[TagEntry] = field(default_factory=list)

    def first(self, tag_id: int) -> TagEntry | None:
        for entry in self.entries:
            if entry.tag_id == tag_id:
                return entry
        return None


@dataclass(frozen=True)
class ExifRecord:
    """Normalized capture metadata for one image.

    Fields are None when the tag was absent or unusable; values that are
    present satisfy exposure_time_s > 0, f_number > 0, iso >= 1.
    """

    image_id: str
    exposure_time_s: float | None = None
    f_number: float | None = None
    iso: int | None = None

    @property
    def is_complete(self) -> bool:
        return (
            self.exposure_time_s is not None
            and self.f_number is not None
            and self.iso is not None
        )

    @property
    def has_grid_fields(self) -> bool:
        """True when the record can be placed on the exposure/ISO grid."""
        return self.exposure_time_s is not None and self.iso is not None


@dataclass(frozen=True)
class WarningRecord:
    """Non-fatal problem attributed to one image/field; flows into reports."""

    image_id: str | None
    field: str | None
    reason: str


def extract_exif_segment(image_bytes: bytes) -> bytes:
    """Locate the TIFF-structured EXIF payload in a JPEG or bare TIFF stream.

    For a JPEG this is the APP1 segment body after the ``Exif\\0\\0`` header;
    a bare TIFF stream is returned unchanged.
    """
    if image_bytes.startswith((_TIFF_LE, _TIFF_BE)):
        return image_bytes
    if not image_bytes.startswith(_JPEG_SOI):
        raise NotAnImage("no JPEG SOI or TIFF magic at start of stream")

    pos = 2
    n = len(image_bytes)
    while pos + 1 < n:
        if image_bytes[pos] != 0xFF:
            break  # desynchronized; no point scanning further
        # skip fill bytes
        while pos + 1 < n and image_bytes[pos + 1] == 0xFF:
            pos += 1
        if pos + 1 >= n:
            break
        marker = image_bytes[pos + 1]
        pos += 2
        if marker in (0x01, 0xD8) or 0xD0 <= marker <= 0xD7:
            continue  # standalone markers carry no length
        if marker in (0xD9, 0xDA):
            break  # EOI / start of scan: no more metadata segments
        if pos + 2 > n:
            break
        (seg_len,) = struct.unpack(">H", image_bytes[pos : pos + 2])
        if seg_len < 2 or pos + seg_len > n:
            break
        body = image_bytes[pos + 2 : pos + seg_len]
        pos += seg_len
        if marker == 0xE1 and body.startswith(_EXIF_HEADER):
            return body[len(_EXIF_HEADER) :]
    raise NoExifSegment("JPEG stream has no APP1/Exif segment")


def parse_tag_set(tiff_bytes: bytes) -> RawTagSet:
    """Decode IFD0 and the Exif sub-IFD of a TIFF buffer into a RawTagSet.

    Raises MalformedHeader for a bad header, TruncatedIfd when any offset
    runs past the buffer, CyclicIfd when the IFD chain loops.
    """
    if len(tiff_bytes) < 8:
        raise MalformedHeader("buffer shorter than TIFF header")
    if tiff_bytes.startswith(_TIFF_LE):
        order = ByteOrder.LITTLE_ENDIAN
    elif tiff_bytes.startswith(_TIFF_BE):
        order = ByteOrder.BIG_ENDIAN
    else:
        raise MalformedHeader("bad byte-order mark or TIFF magic")

    prefix = order.struct_prefix
    (ifd0_offset,) = struct.unpack_from(prefix + "I", tiff_bytes, 4)

    tag_set = RawTagSet(byte_order=order)
    visited: set[int] = set()
    sub_ifd_offset = _parse_one_ifd(tiff_bytes, prefix, ifd0_offset, visited, tag_set)
    if sub_ifd_offset is not None:
        _parse_one_ifd(tiff_bytes, prefix, sub_ifd_offset, visited, tag_set)
    return tag_set


def _parse_one_ifd(
    buf: bytes,
    prefix: str,
    offset: int,
    visited: set[int],
    out: RawTagSet,
) -> int | None:
    """Append one IFD's entries to ``out``; return the Exif sub-IFD offset if
    a 0x8769 pointer is present."""
    if offset in visited:
        raise CyclicIfd(f"IFD offset 0x{offset:x} already traversed")
    visited.add(offset)
    if offset + 2 > len(buf):
        raise TruncatedIfd(f"IFD offset 0x{offset:x} beyond buffer end")
    (entry_count,) = struct.unpack_from(prefix + "H", buf, offset)
    table_end = offset + 2 + entry_count * 12
    if table_end > len(buf):
        raise TruncatedIfd("IFD entry table runs past buffer end")

    sub_ifd: int | None = None
    for i in range(entry_count):
        base = offset + 2 + i * 12
        tag_id, type_id, count = struct.unpack_from(prefix + "HHI", buf, base)
        raw_field = buf[base + 8 : base + 12]
        spec = _FIELD_TYPES.get(type_id)
        if spec is None:
            continue  # unknown field type: not needed for capture tags
        kind, size, code = spec
        total = size * count
        if total <= 4:
            payload = raw_field[:total]
        else:
            (value_offset,) = struct.unpack(prefix + "I", raw_field)
            if value_offset + total > len(buf):
                raise TruncatedIfd(
                    f"value of tag 0x{tag_id:04x} runs past buffer end"
                )
            payload = buf[value_offset : value_offset + total]
        values = _decode_values(kind, code, size, count, payload, prefix)
        out.entries.append(TagEntry(tag_id=tag_id, kind=kind, values=values))
        if tag_id == TAG_EXIF_SUB_IFD and values:
            first = values[0]
            if isinstance(first, int):
                sub_ifd = first
    return sub_ifd


def _decode_values(
    kind: str, code: str | None, size: int, count: int, payload: bytes, prefix: str
) -> tuple:
    if kind == "ascii":
        return (payload.split(b"\x00", 1)[0].decode("ascii", errors="replace"),)
    if kind in ("byte", "undefined"):
        return (bytes(payload),)
    if kind in ("rational", "srational"):
        code = "II" if kind == "rational" else "ii"
        pairs = struct.unpack(prefix + code * count, payload)
        return tuple(
            RationalValue(pairs[2 * i], pairs[2 * i + 1]) for i in range(count)
        )
    assert code is not None
    return struct.unpack(prefix + code * count, payload)


def _positive_real(entry: TagEntry) -> tuple[float | None, str | None]:
    """Evaluate the first value of a numeric tag; (value, reason-if-bad)."""
    value = entry.first()
    if isinstance(value, RationalValue):
        real = value.as_float()
        if real is None:
            return None, f"degenerate rational {value}"
    elif isinstance(value, (int, float)):
        real = float(value)
    else:
        return None, f"unexpected {entry.kind} payload"
    if not math.isfinite(real) or real <= 0:
        return None, f"non-positive value {real!r}"
    return real, None


def to_exif_record(
    tags: RawTagSet, image_id: str
) -> tuple[ExifRecord, list[WarningRecord]]:
    """Normalize a tag set into an ExifRecord.

    Unusable tag values never abort: the field stays absent and a warning
    with (image_id, field, reason) is emitted instead.
    """
    warnings: list[WarningRecord] = []
    exposure: float | None = None
    f_number: float | None = None
    iso: int | None = None

    entry = tags.first(TAG_EXPOSURE_TIME)
    if entry is not None:
        exposure, reason = _positive_real(entry)
        if reason:
            warnings.append(WarningRecord(image_id, "exposure_time_s", reason))

    entry = tags.first(TAG_F_NUMBER)
    if entry is not None:
        f_number, reason = _positive_real(entry)
        if reason:
            warnings.append(WarningRecord(image_id, "f_number", reason))

    entry = tags.first(TAG_ISO)
    if entry is not None:
        value = entry.first()  # multi-valued ISO: first entry wins
        if isinstance(value, RationalValue):
            real = value.as_float()
            value = None if real is None else real
        if isinstance(value, (int, float)) and float(value).is_integer() and value >= 1:
            iso = int(value)
        else:
            warnings.append(
                WarningRecord(image_id, "iso", f"unusable ISO value {value!r}")
            )

    return ExifRecord(image_id, exposure, f_number, iso), warnings


def read_exif_record(
    image_bytes: bytes, image_id: str
) -> tuple[ExifRecord, list[WarningRecord]]:
    """Parse JPEG/TIFF bytes straight to a normalized record."""
    segment = extract_exif_segment(image_bytes)
    return to_exif_record(parse_tag_set(segment), image_id)


def _parse_ratio_string(text: str) -> float | None:
    """Parse '1/60' or '0.005' into a positive float; None when unusable."""
    text = text.strip()
    if "/" in text:
        num_s, _, den_s = text.partition("/")
        try:
            num, den = int(num_s), int(den_s)
        except ValueError:
            return None
        if den == 0:
            return None
        value = num / den
    else:
        try:
            value = float(text)
        except ValueError:
            return None
    return value if math.isfinite(value) and value > 0 else None


def parse_sidecar(document: str | bytes | list) -> tuple[list[ExifRecord], list[WarningRecord]]:
    """Parse a sidecar metadata document into ExifRecords.

    The document is a JSON list of entries ``{"id": str, "ExposureTime"?,
    "FNumber"?, "ISO"?}`` where values are decimal strings or "a/b"
    fractions. Field errors degrade to absent fields with warnings; a
    structurally broken document raises MalformedDocument.
    """
    if isinstance(document, (str, bytes)):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise MalformedDocument(f"sidecar is not valid JSON: {exc}") from exc
    if not isinstance(document, list):
        raise MalformedDocument("sidecar must be a top-level list of entries")

    records: list[ExifRecord] = []
    warnings: list[WarningRecord] = []
    seen: set[str] = set()
    for i, entry in enumerate(document):
        if not isinstance(entry, dict) or "id" not in entry:
            raise MalformedDocument(f"sidecar entry {i} lacks an 'id' field")
        image_id = str(entry["id"])
        if image_id in seen:
            warnings.append(
                WarningRecord(image_id, None, "duplicate sidecar entry ignored")
            )
            continue
        seen.add(image_id)

        exposure = _sidecar_real(entry, "ExposureTime", image_id, warnings)
        f_number = _sidecar_real(entry, "FNumber", image_id, warnings)
        iso: int | None = None
        if "ISO" in entry:
            raw = entry["ISO"]
            try:
                iso_val = int(str(raw).strip())
            except ValueError:
                iso_val = 0
            if iso_val >= 1:
                iso = iso_val
            else:
                warnings.append(
                    WarningRecord(image_id, "iso", f"unusable ISO value {raw!r}")
                )
        records.append(ExifRecord(image_id, exposure, f_number, iso))
    return records, warnings


_SIDECAR_FIELDS = {"ExposureTime": "exposure_time_s", "FNumber": "f_number"}


def _sidecar_real(
    entry: dict, key: str, image_id: str, warnings: list[WarningRecord]
) -> float | None:
    if key not in entry:
        return None
    raw = entry[key]
    value = _parse_ratio_string(str(raw))
    if value is None:
        warnings.append(
            WarningRecord(image_id, _SIDECAR_FIELDS[key], f"unusable value {raw!r}")
        )
    return value
