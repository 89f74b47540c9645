"""Release-history retrieval from the PyPI JSON API.

A package's history is the list of its published versions ordered
oldest-to-newest.  The JSON API reports per-file upload timestamps; a
release's timestamp is the earliest across its files.  Ordering is by
version precedence first and timestamp second, so a backfilled old
version does not scramble the series.

Network access goes through an injectable ``transport`` callable so
tests never touch the real index.  Responses are cached on disk with
atomic writes; ``offline=True`` serves from cache only.  A *snapshot*
bundles many ordered histories into one schema-versioned JSON document
so downstream stages are reproducible without any network at all.
"""

from __future__ import annotations

import json
import os
import re
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

from .errors import (
    OfflineCacheMissError,
    PackageNotFoundError,
    PayloadFormatError,
    SnapshotNotFoundError,
    SnapshotSchemaError,
    TransportError,
)
from .versions import Version, parse_version

__all__ = [
    "Release",
    "ReleaseHistory",
    "FetchFailure",
    "PyPIClient",
    "order_history",
    "normalize_name",
    "save_snapshot",
    "load_snapshot",
    "SNAPSHOT_SCHEMA_VERSION",
    "DEFAULT_ENDPOINT",
]

SNAPSHOT_SCHEMA_VERSION = 1
DEFAULT_ENDPOINT = "https://pypi.org/pypi"
_CACHE_ENV = "VULNSERIES_CACHE"

Transport = Callable[[str], tuple[int, bytes]]


def normalize_name(name: str) -> str:
    """Normalize a project name the way package indexes do."""
    return re.sub(r"[-_.]+", "-", name).lower()


@dataclass(frozen=True)
class Release:
    """One published version with its (earliest) upload timestamp."""

    version: Version
    raw: str
    upload_time: str | None

    def as_dict(self) -> dict:
        return {"version": self.raw, "upload_time": self.upload_time}


@dataclass(frozen=True)
class ReleaseHistory:
    """A package's releases, oldest first."""

    package: str
    releases: tuple[Release, ...]

    def __len__(self) -> int:
        return len(self.releases)

    def versions(self) -> tuple[Version, ...]:
        return tuple(r.version for r in self.releases)


@dataclass(frozen=True)
class FetchFailure:
    """Why one package could not be fetched during a bulk run."""

    package: str
    reason: str
    detail: str


def order_history(
    package: str,
    entries: Iterable[tuple[str, str | None]],
) -> tuple[ReleaseHistory, tuple[str, ...]]:
    """Build an ordered history from (version string, upload time) pairs.

    Sorting is by version precedence, then upload time (missing times
    last), then the raw string, which keeps the result deterministic.
    Consecutive entries that compare equal as versions are collapsed to
    the first one; each collapse is reported in the returned warnings.
    """
    parsed: list[Release] = []
    for raw, upload_time in entries:
        parsed.append(Release(parse_version(raw), raw, upload_time))

    def sort_key(release: Release):
        missing = release.upload_time is None
        return (release.version.sort_key, missing, release.upload_time or "", release.raw)

    parsed.sort(key=sort_key)
    deduped: list[Release] = []
    warnings: list[str] = []
    for release in parsed:
        if deduped and deduped[-1].version.sort_key == release.version.sort_key:
            warnings.append(
                f"{package}: duplicate release {release.raw!r} collapses into {deduped[-1].raw!r}"
            )
            continue
        deduped.append(release)
    latest_seen: str | None = None
    for release in deduped:
        if release.upload_time is None:
            continue
        if latest_seen is not None and release.upload_time < latest_seen:
            warnings.append(
                f"{package}: version order disagrees with upload order near {release.raw!r}"
            )
            break
        latest_seen = release.upload_time
    return ReleaseHistory(package, tuple(deduped)), tuple(warnings)


def _default_transport(url: str) -> tuple[int, bytes]:
    import requests

    try:
        response = requests.get(url, timeout=30)
    except requests.RequestException as exc:
        raise TransportError(f"request to {url} failed: {exc}") from exc
    return response.status_code, response.content


def _earliest_upload(files: object) -> str | None:
    if not isinstance(files, list):
        return None
    times = []
    for entry in files:
        if isinstance(entry, dict):
            stamp = entry.get("upload_time_iso_8601") or entry.get("upload_time")
            if isinstance(stamp, str) and stamp:
                times.append(stamp)
    return min(times) if times else None


class PyPIClient:
    """Fetches release histories, with retries, caching, and offline mode."""

    def __init__(
        self,
        transport: Transport | None = None,
        cache_dir: str | os.PathLike | None = None,
        offline: bool = False,
        endpoint: str = DEFAULT_ENDPOINT,
        max_attempts: int = 3,
        backoff: float = 0.5,
        sleep: Callable[[float], None] = time.sleep,
        workers: int = 4,
    ) -> None:
        if cache_dir is None:
            cache_dir = os.environ.get(_CACHE_ENV)
        self.transport = transport or _default_transport
        self.cache_dir = Path(cache_dir) if cache_dir else None
        self.offline = offline
        self.endpoint = endpoint.rstrip("/")
        self.max_attempts = max(1, max_attempts)
        self.backoff = backoff
        self.sleep = sleep
        self.workers = max(1, workers)

    # -- cache ---------------------------------------------------------

    def _cache_path(self, package: str) -> Path | None:
        if self.cache_dir is None:
            return None
        return self.cache_dir / f"{normalize_name(package)}.json"

    def _cache_read(self, package: str) -> bytes | None:
        path = self._cache_path(package)
        if path is None or not path.is_file():
            return None
        return path.read_bytes()

    def _cache_write(self, package: str, payload: bytes) -> None:
        path = self._cache_path(package)
        if path is None:
            return
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
        try:
            with os.fdopen(fd, "wb") as handle:
                handle.write(payload)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise

    # -- fetching ------------------------------------------------------

    def _request(self, package: str) -> bytes:
        url = f"{self.endpoint}/{package}/json"
        last_error: Exception | None = None
        for attempt in range(self.max_attempts):
            if attempt:
                self.sleep(self.backoff * (2 ** (attempt - 1)))
            try:
                status, body = self.transport(url)
            except TransportError as exc:
                last_error = exc
                continue
            if status == 404:
                raise PackageNotFoundError(f"package {package!r} not found on the index")
            if status == 200:
                return body
            last_error = TransportError(f"index returned HTTP {status} for {package!r}")
        raise last_error or TransportError(f"no response for {package!r}")

    def fetch_payload(self, package: str) -> bytes:
        """Return the raw JSON API payload, from cache when possible."""
        cached = self._cache_read(package)
        if cached is not None:
            return cached
        if self.offline:
            raise OfflineCacheMissError(
                f"offline mode and no cached payload for {package!r}"
            )
        body = self._request(package)
        self._cache_write(package, body)
        return body

    def fetch_history(self, package: str) -> tuple[ReleaseHistory, tuple[str, ...]]:
        """Fetch, parse, and order one package's release history."""
        body = self.fetch_payload(package)
        try:
            doc = json.loads(body)
        except json.JSONDecodeError as exc:
            raise PayloadFormatError(f"payload for {package!r} is not JSON: {exc}") from exc
        if not isinstance(doc, dict) or not isinstance(doc.get("releases"), dict):
            raise PayloadFormatError(f"payload for {package!r} has no releases map")
        entries = [
            (raw, _earliest_upload(files)) for raw, files in doc["releases"].items()
        ]
        if not entries:
            raise PackageNotFoundError(
                f"package {package!r} has no published releases"
            )
        return order_history(package, entries)

    def fetch_many(
        self, packages: Sequence[str]
    ) -> tuple[dict[str, ReleaseHistory], tuple[str, ...], tuple[FetchFailure, ...]]:
        """Fetch several packages concurrently.

        Failures never abort the batch: each becomes a
        :class:`FetchFailure` carrying a stable reason code.
        """
        histories: dict[str, ReleaseHistory] = {}
        warnings: list[str] = []
        failures: list[FetchFailure] = []

        def one(package: str):
            return package, self.fetch_history(package)

        with ThreadPoolExecutor(max_workers=self.workers) as pool:
            futures = [pool.submit(one, p) for p in packages]
            for future in futures:
                try:
                    package, (history, history_warnings) = future.result()
                except PackageNotFoundError as exc:
                    failures.append(FetchFailure(_failed_package(exc, packages), "not-found", str(exc)))
                    continue
                except OfflineCacheMissError as exc:
                    failures.append(FetchFailure(_failed_package(exc, packages), "offline-miss", str(exc)))
                    continue
                except PayloadFormatError as exc:
                    failures.append(FetchFailure(_failed_package(exc, packages), "bad-payload", str(exc)))
                    continue
                except TransportError as exc:
                    failures.append(FetchFailure(_failed_package(exc, packages), "transport", str(exc)))
                    continue
                histories[package] = history
                warnings.extend(history_warnings)
        return histories, tuple(warnings), tuple(failures)


def _failed_package(exc: Exception, packages: Sequence[str]) -> str:
    # Error messages quote the package name; recover it for the record.
    text = str(exc)
    for package in packages:
        if repr(package) in text:
            return package
    return "?"


# -- snapshots ----------------------------------------------------------


def save_snapshot(path: str | os.PathLike, histories: Mapping[str, ReleaseHistory]) -> None:
    """Write ordered histories to a schema-versioned JSON snapshot."""
    doc = {
        "schema_version": SNAPSHOT_SCHEMA_VERSION,
        "histories": {
            name: [release.as_dict() for release in history.releases]
            for name, history in sorted(histories.items())
        },
    }
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=target.parent, prefix=target.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            json.dump(doc, handle, indent=2, sort_keys=True)
            handle.write("\n")
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_snapshot(path: str | os.PathLike) -> dict[str, ReleaseHistory]:
    """Read a snapshot back into ordered histories.

    The stored order is trusted as-is; versions are re-parsed but not
    re-sorted, so a snapshot round-trips exactly.
    """
    target = Path(path)
    if not target.is_file():
        raise SnapshotNotFoundError(f"snapshot {target} does not exist")
    try:
        doc = json.loads(target.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SnapshotSchemaError(f"snapshot {target} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("schema_version") != SNAPSHOT_SCHEMA_VERSION:
        raise SnapshotSchemaError(
            f"snapshot {target} has unsupported schema "
            f"{doc.get('schema_version') if isinstance(doc, dict) else '?'!r}"
        )
    raw_histories = doc.get("histories")
    if not isinstance(raw_histories, dict):
        raise SnapshotSchemaError(f"snapshot {target} has no histories map")
    histories: dict[str, ReleaseHistory] = {}
    for name, rows in raw_histories.items():
        if not isinstance(rows, list):
            raise SnapshotSchemaError(f"snapshot history for {name!r} is not a list")
        releases = []
        for row in rows:
            if not isinstance(row, dict) or "version" not in row:
                raise SnapshotSchemaError(f"snapshot row for {name!r} is malformed")
            raw = row["version"]
            releases.append(Release(parse_version(raw), raw, row.get("upload_time")))
        histories[name] = ReleaseHistory(name, tuple(releases))
    return histories
