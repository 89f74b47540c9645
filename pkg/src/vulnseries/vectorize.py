"""From advisories and release histories to per-package binary series.

For one advisory clause, each constraint is "filled" into a 0/1 vector
positioned against the release order: the boundary version's index in
the history decides which side (or point) gets ones.  Constraints of a
clause combine with AND, the clauses of an advisory with OR, and a
package's advisories add up into a count vector that binarizes into the
final series (1 = release affected by at least one advisory).

A constraint whose boundary version never appears in the history makes
the whole clause invalid; the advisory survives as long as one clause
remains.  Every drop is recorded in the attrition report.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .errors import ClauseInvalidError
from .registry import ReleaseHistory
from .safetydb import Advisory, Constraint, DatabaseLoadResult, SpecClause

__all__ = [
    "ConstraintVector",
    "SpecMatrix",
    "AffectedVector",
    "CountVector",
    "BinarySeries",
    "AttritionRecord",
    "AttritionReport",
    "PackageResult",
    "Corpus",
    "fill_constraint",
    "fill_clause",
    "collapse",
    "aggregate",
    "build_corpus",
    "corpus_rows",
]


@dataclass(frozen=True)
class ConstraintVector:
    """0/1 marks over the releases satisfying one constraint."""

    values: tuple[int, ...]


@dataclass(frozen=True)
class SpecMatrix:
    """The filled clause vectors of one advisory, one row per clause."""

    rows: tuple[ConstraintVector, ...]


@dataclass(frozen=True)
class AffectedVector:
    """Column-wise OR of a SpecMatrix: releases the advisory affects."""

    advisory_id: str
    values: tuple[int, ...]


@dataclass(frozen=True)
class CountVector:
    """How many advisories affect each release."""

    values: tuple[int, ...]


@dataclass(frozen=True)
class BinarySeries:
    """The per-package 0/1 series: 1 where any advisory applies."""

    package: str
    values: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class AttritionRecord:
    """One dropped or flagged item, with a stable reason code."""

    package: str
    advisory_id: str | None
    reason: str
    detail: str


@dataclass(frozen=True)
class AttritionReport:
    """Everything that fell out of the pipeline, and why."""

    clause_drops: tuple[AttritionRecord, ...]
    advisory_drops: tuple[AttritionRecord, ...]
    package_drops: tuple[AttritionRecord, ...]
    flags: tuple[AttritionRecord, ...]

    @property
    def dropped_advisories(self) -> int:
        return len(self.advisory_drops)

    @property
    def dropped_packages(self) -> int:
        return len(self.package_drops)


@dataclass(frozen=True)
class PackageResult:
    """One package's aggregated vectors and surviving advisories."""

    package: str
    history_length: int
    advisory_ids: tuple[str, ...]
    counts: CountVector
    series: BinarySeries


@dataclass(frozen=True)
class Corpus:
    """All surviving packages (sorted by name) plus the attrition report."""

    packages: tuple[PackageResult, ...]
    attrition: AttritionReport

    def series(self) -> tuple[BinarySeries, ...]:
        return tuple(p.series for p in self.packages)

    def __len__(self) -> int:
        return len(self.packages)


def _boundary_index(history: ReleaseHistory, strict: bool) -> dict:
    index: dict = {}
    for position, release in enumerate(history.releases):
        key = release.raw if strict else release.version.sort_key
        index.setdefault(key, position)
    return index


def fill_constraint(
    constraint: Constraint,
    history: ReleaseHistory,
    *,
    strict: bool = False,
    _index: Mapping | None = None,
) -> ConstraintVector:
    """Fill one constraint positionally against the release order.

    The boundary index b splits the series: "<" marks [0, b), "<=" marks
    [0, b], ">" marks (b, r), ">=" marks [b, r), "==" marks only b, and
    "!=" marks everything except b.  A boundary version that is not in
    the history raises :class:`ClauseInvalidError`.
    """
    index = _index if _index is not None else _boundary_index(history, strict)
    key = constraint.version.raw if strict else constraint.version.sort_key
    if key not in index:
        raise ClauseInvalidError(
            f"boundary version {constraint.version.raw!r} absent from "
            f"{history.package!r} history",
            package=history.package,
            constraint=constraint.text(),
        )
    b = index[key]
    r = len(history.releases)
    values = [0] * r
    op = constraint.op
    if op == "<":
        span = range(0, b)
    elif op == "<=":
        span = range(0, b + 1)
    elif op == ">":
        span = range(b + 1, r)
    elif op == ">=":
        span = range(b, r)
    elif op == "==":
        span = range(b, b + 1)
    elif op == "!=":
        for i in range(r):
            values[i] = 1
        values[b] = 0
        return ConstraintVector(tuple(values))
    else:  # pragma: no cover - parser only emits the operators above
        raise ValueError(f"unsupported operator {op!r}")
    for i in span:
        values[i] = 1
    return ConstraintVector(tuple(values))


def fill_clause(
    clause: SpecClause,
    history: ReleaseHistory,
    *,
    strict: bool = False,
    _index: Mapping | None = None,
) -> ConstraintVector:
    """AND together the filled vectors of a clause's constraints."""
    index = _index if _index is not None else _boundary_index(history, strict)
    combined: list[int] | None = None
    for constraint in clause.constraints:
        vector = fill_constraint(constraint, history, strict=strict, _index=index)
        if combined is None:
            combined = list(vector.values)
        else:
            combined = [a & b for a, b in zip(combined, vector.values)]
    if combined is None:
        raise ClauseInvalidError("clause has no constraints", package=history.package)
    return ConstraintVector(tuple(combined))


def collapse(matrix: SpecMatrix, advisory_id: str = "") -> AffectedVector:
    """OR the clause rows into the advisory's affected vector."""
    if not matrix.rows:
        raise ValueError("cannot collapse an empty matrix")
    r = len(matrix.rows[0].values)
    values = [0] * r
    for row in matrix.rows:
        if len(row.values) != r:
            raise ValueError("matrix rows differ in length")
        values = [a | b for a, b in zip(values, row.values)]
    return AffectedVector(advisory_id, tuple(values))


def aggregate(
    package: str, vectors: Sequence[AffectedVector]
) -> tuple[CountVector, BinarySeries]:
    """Sum affected vectors into counts, then binarize (count > 0)."""
    if not vectors:
        raise ValueError(f"no affected vectors for {package!r}")
    r = len(vectors[0].values)
    counts = [0] * r
    for vector in vectors:
        if len(vector.values) != r:
            raise ValueError("affected vectors differ in length")
        counts = [a + b for a, b in zip(counts, vector.values)]
    series = tuple(1 if c > 0 else 0 for c in counts)
    return CountVector(tuple(counts)), BinarySeries(package, series)


def build_corpus(
    db: DatabaseLoadResult | Mapping[str, tuple[Advisory, ...]],
    histories: Mapping[str, ReleaseHistory],
    *,
    strict: bool = False,
) -> Corpus:
    """Run the full advisory-to-series pipeline over a database.

    Nothing raises here: clause, advisory, and package failures all turn
    into attrition records.  Output is sorted by package name.
    """
    advisories_by_package = db.advisories if isinstance(db, DatabaseLoadResult) else db
    clause_drops: list[AttritionRecord] = []
    advisory_drops: list[AttritionRecord] = []
    package_drops: list[AttritionRecord] = []
    flags: list[AttritionRecord] = []
    results: list[PackageResult] = []

    for package in sorted(advisories_by_package):
        advisories = advisories_by_package[package]
        history = histories.get(package)
        if history is None or len(history.releases) == 0:
            package_drops.append(
                AttritionRecord(
                    package,
                    None,
                    "no-history",
                    f"{len(advisories)} advisories had no release history to fill",
                )
            )
            continue
        index = _boundary_index(history, strict)
        affected: list[AffectedVector] = []
        for advisory in advisories:
            rows: list[ConstraintVector] = []
            for clause in advisory.clauses:
                for constraint in clause.constraints:
                    if constraint.op == "!=":
                        flags.append(
                            AttritionRecord(
                                package,
                                advisory.id,
                                "not-equal-operator",
                                f"clause {clause.text()!r} uses !=; filled as "
                                "all-but-boundary",
                            )
                        )
                try:
                    rows.append(
                        fill_clause(clause, history, strict=strict, _index=index)
                    )
                except ClauseInvalidError as exc:
                    clause_drops.append(
                        AttritionRecord(
                            package,
                            advisory.id,
                            "boundary-version-absent",
                            f"clause {clause.text()!r}: {exc}",
                        )
                    )
            if rows:
                affected.append(collapse(SpecMatrix(tuple(rows)), advisory.id))
            else:
                advisory_drops.append(
                    AttritionRecord(
                        package,
                        advisory.id,
                        "no-valid-clause",
                        "every clause referenced versions missing from the history",
                    )
                )
        if not affected:
            package_drops.append(
                AttritionRecord(
                    package,
                    None,
                    "no-surviving-advisory",
                    "all advisories of the package were dropped",
                )
            )
            continue
        counts, series = aggregate(package, affected)
        results.append(
            PackageResult(
                package=package,
                history_length=len(history.releases),
                advisory_ids=tuple(v.advisory_id for v in affected),
                counts=counts,
                series=series,
            )
        )

    report = AttritionReport(
        clause_drops=tuple(clause_drops),
        advisory_drops=tuple(advisory_drops),
        package_drops=tuple(package_drops),
        flags=tuple(flags),
    )
    return Corpus(tuple(results), report)


def corpus_rows(corpus: Corpus) -> list[dict]:
    """Flatten a corpus into export rows for JSON or CSV."""
    rows = []
    for result in corpus.packages:
        rows.append(
            {
                "package": result.package,
                "r": result.history_length,
                "m": len(result.advisory_ids),
                "w": "".join(str(v) for v in result.series.values),
                "counts": list(result.counts.values),
            }
        )
    return rows
