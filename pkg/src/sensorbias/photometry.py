"""Exposure value, illuminance estimation and illumination classification.

Two EV readings are supported. The photometric mode uses the standard
multiplicative relation EV = log2(f^2/t * 100/ISO); the verbatim mode keeps
the additive ISO term, EV = log2(f^2/t + ISO/100), for strict reproduction
of published numbers. At ISO 100 with f^2/t >= 100 the two agree to within
log2(1.01) ~ 0.0144 EV.

The lux mapping is anchored so that 7 EV -> 320 lx, 8 -> 640, 10 -> 2560 and
11 -> 5120, which fixes lux = 2.5 * 2^EV. Illumination classes split at
7.5 and 10.5 EV, the nearest-integer extension of the published integer
ranges (low: -4..7, mid: 8..10, high: 11+).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .exceptions import NonPositiveInput, Overflow
from .exif import ExifRecord, WarningRecord

LUX_ANCHOR = 2.5  # lux at 0 EV, fixed by the published (EV, lux) anchor pairs
LOW_MID_BOUNDARY_EV = 7.5
MID_HIGH_BOUNDARY_EV = 10.5
LOW_RANGE_BOTTOM_EV = -4.0  # bottom of the published Low range; not a cutoff


class EvMode(Enum):
    PHOTOMETRIC = "photometric"
    PAPER_VERBATIM = "paper"


class IlluminationLevel(Enum):
    LOW = "low"
    MID = "mid"
    HIGH = "high"


@dataclass(frozen=True)
class ExposureProfile:
    """Derived exposure value, illuminance estimate and illumination class."""

    ev: float
    lux: float
    illumination: IlluminationLevel


def compute_ev(
    f_number: float,
    exposure_time_s: float,
    iso: int,
    mode: EvMode = EvMode.PHOTOMETRIC,
) -> float:
    """Exposure value in base-2 stops from aperture, exposure time and ISO."""
    for name, value in (
        ("f_number", f_number),
        ("exposure_time_s", exposure_time_s),
        ("iso", iso),
    ):
        if not math.isfinite(value) or value <= 0:
            raise NonPositiveInput(f"{name} must be strictly positive, got {value!r}")
    aperture_term = f_number * f_number / exposure_time_s
    if not math.isfinite(aperture_term):
        raise Overflow("f^2/t is not representable")
    if mode is EvMode.PAPER_VERBATIM:
        argument = aperture_term + iso / 100.0
    else:
        argument = aperture_term * (100.0 / iso)
    if not math.isfinite(argument) or argument <= 0:
        raise Overflow("EV argument is not representable")
    return math.log2(argument)


def ev_to_lux(ev: float) -> float:
    """Estimated scene illuminance in lux under the proper-exposure assumption."""
    return LUX_ANCHOR * 2.0**ev


def classify_illumination(
    ev: float,
    low_mid: float = LOW_MID_BOUNDARY_EV,
    mid_high: float = MID_HIGH_BOUNDARY_EV,
) -> IlluminationLevel:
    """Total, monotone step classification of EV into Low/Mid/High."""
    if ev < low_mid:
        return IlluminationLevel.LOW
    if ev < mid_high:
        return IlluminationLevel.MID
    return IlluminationLevel.HIGH


def profile(
    record: ExifRecord, mode: EvMode = EvMode.PHOTOMETRIC
) -> tuple[ExposureProfile | None, list[WarningRecord]]:
    """Build an ExposureProfile when all three settings are present.

    Records missing any of (f-number, exposure time, ISO) yield no profile;
    EV computation failures degrade to an absent profile plus a warning.
    """
    if not record.is_complete:
        return None, []
    try:
        ev = compute_ev(record.f_number, record.exposure_time_s, record.iso, mode)
    except (NonPositiveInput, Overflow) as exc:
        return None, [WarningRecord(record.image_id, "ev", str(exc))]
    return ExposureProfile(ev, ev_to_lux(ev), classify_illumination(ev)), []
