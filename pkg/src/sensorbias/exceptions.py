"""Exception types raised across the toolkit.

Parsing and loading errors are fatal for the single file or document they
describe; corpus-level code catches them and records warnings so one bad
file never aborts a whole audit.
"""


class SensorBiasError(Exception):
    """Base class for all toolkit errors."""


# --- image / EXIF parsing ---------------------------------------------------

class NotAnImage(SensorBiasError):
    """Input bytes are neither a JPEG stream nor a bare TIFF stream."""


class NoExifSegment(SensorBiasError):
    """JPEG stream contains no APP1/Exif segment."""


class MalformedHeader(SensorBiasError):
    """TIFF header is missing, truncated, or has a bad byte-order/magic."""


class TruncatedIfd(SensorBiasError):
    """An IFD or value offset points beyond the end of the buffer."""


class CyclicIfd(SensorBiasError):
    """IFD chain revisits an offset that was already traversed."""


class InvalidTagValue(SensorBiasError):
    """Tag payload is unusable (zero denominator, non-positive setting)."""


# --- documents --------------------------------------------------------------

class MalformedDocument(SensorBiasError):
    """Document does not follow its declared schema."""


class DanglingReference(SensorBiasError):
    """Annotation or detection references an unknown image or category."""


# --- photometry -------------------------------------------------------------

class NonPositiveInput(SensorBiasError):
    """Exposure-value inputs must be strictly positive and finite."""


class Overflow(SensorBiasError):
    """Intermediate exposure-value term is not representable."""


# --- binning ----------------------------------------------------------------

class NonPositiveExposure(SensorBiasError):
    """Exposure time must be > 0 seconds."""


class NonPositiveIso(SensorBiasError):
    """ISO must be a positive integer."""


# --- evaluation -------------------------------------------------------------

class NoPositives(SensorBiasError):
    """Average precision is undefined without ground-truth positives."""


# --- remote metadata provider -----------------------------------------------

class ProviderUnavailable(SensorBiasError):
    """Provider endpoint could not be reached or answered with a server error."""


class RateLimited(SensorBiasError):
    """Provider rejected the request rate even after honoring Retry-After."""


class NotFound(SensorBiasError):
    """Provider has no metadata for the requested image key."""
