"""Remote metadata provider client with verbatim response caching.

The provider contract is deliberately small so audits stay re-runnable
offline: a GET to an endpoint template with a ``{key}`` placeholder returns
one sidecar-style JSON entry for the image (``{"id": ..., "ExposureTime":
..., "FNumber": ..., "ISO": ...}``), or ``{"noExif": true}`` / HTTP 404 when
the image has no public metadata. Successful responses are persisted
byte-for-byte, one file per key, and cache hits never touch the network.

Requests are serialized through a rate limiter with a configured ceiling;
HTTP 429 honors Retry-After once before giving up.
"""

from __future__ import annotations

import json
import os
import threading
import time
import urllib.error
import urllib.parse
import urllib.request
from dataclasses import dataclass
from pathlib import Path

from .exceptions import (
    MalformedDocument,
    NotFound,
    ProviderUnavailable,
    RateLimited,
)
from .exif import (
    RationalValue,
    RawTagSet,
    ByteOrder,
    TagEntry,
    TAG_EXPOSURE_TIME,
    TAG_F_NUMBER,
    TAG_ISO,
    WarningRecord,
)
from .ingest import ImageEntry


@dataclass(frozen=True)
class ProviderConfig:
    """Where and how fast to ask for metadata.

    ``endpoint_template`` must contain ``{key}``; an optional
    ``{credential}`` placeholder is filled from the environment variable
    named by ``credential_env`` (otherwise the credential, when configured,
    travels as a bearer token header).
    """

    endpoint_template: str
    credential_env: str | None = None
    rate_limit_rps: float = 1.0
    timeout_s: float = 10.0

    def __post_init__(self) -> None:
        if "{key}" not in self.endpoint_template:
            raise ValueError("endpoint template must contain a {key} placeholder")
        if not self.rate_limit_rps > 0:
            raise ValueError("rate ceiling must be positive")

    def credential(self) -> str | None:
        if self.credential_env is None:
            return None
        return os.environ.get(self.credential_env)


class RateLimiter:
    """Serializes callers so requests never exceed the configured ceiling."""

    def __init__(self, ceiling_rps: float) -> None:
        self._min_interval = 1.0 / ceiling_rps
        self._lock = threading.Lock()
        self._next_allowed = 0.0

    def wait(self) -> None:
        with self._lock:
            now = time.monotonic()
            delay = self._next_allowed - now
            if delay > 0:
                time.sleep(delay)
                now = time.monotonic()
            self._next_allowed = now + self._min_interval


def response_to_tag_set(payload: bytes) -> RawTagSet:
    """Convert a provider response into a RawTagSet.

    Values reuse the sidecar conventions: "a/b" strings become rationals,
    decimal strings become doubles, ISO becomes a short. Raises NotFound on
    the no-EXIF marker and MalformedDocument on anything unparseable.
    """
    try:
        doc = json.loads(payload)
    except json.JSONDecodeError as exc:
        raise MalformedDocument(f"provider response is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise MalformedDocument("provider response must be a JSON object")
    if doc.get("noExif"):
        raise NotFound("provider reports no public EXIF for this image")

    entries: list[TagEntry] = []
    for key, tag_id in (("ExposureTime", TAG_EXPOSURE_TIME), ("FNumber", TAG_F_NUMBER)):
        if key not in doc:
            continue
        text = str(doc[key]).strip()
        if "/" in text:
            num_s, _, den_s = text.partition("/")
            try:
                value = RationalValue(int(num_s), int(den_s))
            except ValueError:
                continue
            entries.append(TagEntry(tag_id, "rational", (value,)))
        else:
            try:
                entries.append(TagEntry(tag_id, "double", (float(text),)))
            except ValueError:
                continue
    if "ISO" in doc:
        try:
            entries.append(TagEntry(TAG_ISO, "short", (int(str(doc["ISO"]).strip()),)))
        except ValueError:
            pass
    return RawTagSet(byte_order=ByteOrder.LITTLE_ENDIAN, entries=entries)


class RemoteMetadataClient:
    """Fetches, caches and parses per-image metadata from a provider."""

    def __init__(self, config: ProviderConfig, cache_dir: Path) -> None:
        self.config = config
        self.cache_dir = Path(cache_dir)
        self.cache_dir.mkdir(parents=True, exist_ok=True)
        self.request_count = 0
        self._limiter = RateLimiter(config.rate_limit_rps)
        self._write_lock = threading.Lock()

    def cache_path(self, image_key: str) -> Path:
        return self.cache_dir / (urllib.parse.quote(image_key, safe="") + ".json")

    def fetch(self, image_key: str) -> RawTagSet:
        """Return the tag set for one image key, from cache when possible.

        Raises NotFound (no metadata for the key), RateLimited (ceiling
        rejected even after honoring Retry-After) or ProviderUnavailable.
        """
        cached = self.cache_path(image_key)
        if cached.exists():
            return response_to_tag_set(cached.read_bytes())
        payload = self._request(image_key)
        with self._write_lock:
            tmp = cached.with_suffix(".tmp")
            tmp.write_bytes(payload)
            tmp.replace(cached)
        return response_to_tag_set(payload)

    def _request(self, image_key: str, retried: bool = False) -> bytes:
        url = self.config.endpoint_template.replace(
            "{key}", urllib.parse.quote(image_key, safe="")
        )
        credential = self.config.credential()
        if credential is not None and "{credential}" in url:
            url = url.replace("{credential}", urllib.parse.quote(credential, safe=""))
            credential = None
        request = urllib.request.Request(url)
        if credential is not None:
            request.add_header("Authorization", f"Bearer {credential}")

        self._limiter.wait()
        self.request_count += 1
        try:
            with urllib.request.urlopen(request, timeout=self.config.timeout_s) as resp:
                return resp.read()
        except urllib.error.HTTPError as exc:
            if exc.code == 404:
                raise NotFound(f"no metadata for key {image_key!r}") from exc
            if exc.code == 429:
                if retried:
                    raise RateLimited("provider still throttling after Retry-After") from exc
                retry_after = _parse_retry_after(exc.headers.get("Retry-After"))
                time.sleep(retry_after)
                return self._request(image_key, retried=True)
            raise ProviderUnavailable(f"provider answered HTTP {exc.code}") from exc
        except (urllib.error.URLError, TimeoutError, OSError) as exc:
            raise ProviderUnavailable(f"provider unreachable: {exc}") from exc


def _parse_retry_after(raw: str | None) -> float:
    if raw is None:
        return 1.0
    try:
        return max(0.0, float(raw))
    except ValueError:
        return 1.0


class RemoteSource:
    """join_metadata adapter: provider failures degrade to warnings."""

    name = "remote"
    document_warnings: list[WarningRecord] = []

    def __init__(self, client: RemoteMetadataClient) -> None:
        self.client = client

    def lookup(self, entry: ImageEntry) -> tuple[object, list[WarningRecord]]:
        from .exif import to_exif_record

        try:
            tags = self.client.fetch(entry.image_id)
        except (NotFound, ProviderUnavailable, RateLimited, MalformedDocument) as exc:
            return None, [
                WarningRecord(entry.image_id, None, f"{type(exc).__name__}: {exc}")
            ]
        record, warnings = to_exif_record(tags, entry.image_id)
        return record, warnings
