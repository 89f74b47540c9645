"""Exception types shared across the library."""

from __future__ import annotations


class VulnseriesError(Exception):
    """Base class for all library errors."""


class VersionParseError(VulnseriesError, ValueError):
    """Raised for version strings that cannot be accepted at all (empty input)."""


class SpecSyntaxError(VulnseriesError, ValueError):
    """A constraint token uses an operator outside the supported set.

    The offending token is kept on the ``token`` attribute.
    """

    def __init__(self, token: str, message: str):
        super().__init__(f"{message}: {token!r}")
        self.token = token


class DatabaseLoadError(VulnseriesError):
    """The advisory database file is not valid JSON or has the wrong shape."""


class RegistryError(VulnseriesError):
    """Base class for package index retrieval failures."""


class PackageNotFoundError(RegistryError):
    """The index does not know the package, or it has no usable releases."""


class TransportError(RegistryError):
    """Network failure that persisted through the retry budget."""


class OfflineCacheMissError(RegistryError):
    """Offline mode was requested but the package is not in the local cache."""


class PayloadFormatError(RegistryError):
    """The index returned a payload we cannot interpret."""


class SnapshotError(VulnseriesError):
    """Base class for snapshot file problems."""


class SnapshotNotFoundError(SnapshotError):
    pass


class SnapshotSchemaError(SnapshotError):
    """Snapshot file declares a schema version this code does not understand."""


class ClauseInvalidError(VulnseriesError):
    """A constraint boundary version is absent from the release history.

    Callers drop the whole clause when this is raised.
    """

    def __init__(self, message: str, *, package: str = "", constraint: str = ""):
        super().__init__(message)
        self.package = package
        self.constraint = constraint


class InsufficientDataError(VulnseriesError, ValueError):
    """A series is too short for the requested operation."""


class EstimationError(VulnseriesError):
    """Base class for model fitting failures."""


class SeparationError(EstimationError):
    """Perfect (or quasi) separation: the likelihood has no finite maximizer."""


class SingularModelError(EstimationError):
    """The weighted least-squares system is singular (collinear regressors)."""


class OrderSelectionError(EstimationError):
    """No candidate autoregression order produced a usable fit."""


class NotEligibleError(VulnseriesError):
    """The series fails the forecast experiment's eligibility filters."""


class ForecastError(VulnseriesError):
    """The training-window fit failed; the cause is chained."""
