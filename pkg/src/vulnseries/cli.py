"""Command-line pipeline: ingest, build, markov, forecast.

Exit codes: 0 success (warnings allowed), 1 usage error, 2 data error
(malformed database, snapshot, or spec), 3 environment error (network,
missing files, IO).  Outputs are deterministic: floats are rounded to
six decimals, JSON keys are sorted, and the timestamp field/line can be
suppressed with --no-timestamp so identical inputs give identical bytes.

All experiment constants are flags with the documented defaults, never
hard-coded, so sensitivity runs need no code changes.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Sequence

from . import autologistic, markov, registry, safetydb, vectorize
from .errors import (
    DatabaseLoadError,
    OfflineCacheMissError,
    SnapshotNotFoundError,
    SnapshotSchemaError,
    SpecSyntaxError,
    TransportError,
    VersionParseError,
    VulnseriesError,
)

__all__ = ["RunConfig", "main", "build_parser"]

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_ENVIRONMENT = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems instead of exiting 2."""

    def error(self, message: str) -> None:  # type: ignore[override]
        raise _UsageError(f"{self.prog}: {message}")


@dataclass
class RunConfig:
    """Validated knobs for one pipeline invocation."""

    db_path: str | None = None
    snapshot_path: str | None = None
    cache_dir: str | None = None
    offline: bool = False
    packages: tuple[str, ...] = ()
    horizons: tuple[int, ...] = (5, 10)
    min_releases: int = 25
    min_std: float = 0.25
    max_order_fraction: float = 0.1
    parsimony_margin: float = autologistic.PARSIMONY_MARGIN
    ridge_fallback: bool = False
    full_sample: bool = False
    tie_value: int = 1
    alpha: float = 0.0
    strict: bool = False
    output_format: str = "json"
    seed: int | None = None
    timestamp: bool = True
    workers: int = 4
    out: str | None = None
    summary_out: str | None = None
    histogram_out: str | None = None
    attrition_out: str | None = None

    def __post_init__(self) -> None:
        if any(t < 1 for t in self.horizons):
            raise ValueError("every horizon must be a positive integer")
        if not 0 < self.max_order_fraction <= 1:
            raise ValueError("max order fraction must be in (0, 1]")
        if self.parsimony_margin < 0:
            raise ValueError("AIC margin cannot be negative")
        if self.min_std < 0:
            raise ValueError("minimum standard deviation cannot be negative")
        if self.min_releases < 1:
            raise ValueError("minimum release count must be positive")
        if self.alpha < 0:
            raise ValueError("smoothing alpha cannot be negative")
        if self.output_format not in ("json", "csv"):
            raise ValueError(f"unknown output format {self.output_format!r}")
        if self.tie_value not in (0, 1):
            raise ValueError("tie value must be 0 or 1")


# -- output helpers ------------------------------------------------------


def _rounded(value):
    if isinstance(value, float):
        return round(value, 6)
    if isinstance(value, dict):
        return {k: _rounded(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_rounded(v) for v in value]
    return value


def _emit(text: str, path: str | None) -> None:
    if path:
        target = Path(path)
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _write_json(doc: dict, config: RunConfig, path: str | None) -> None:
    doc = _rounded(doc)
    if config.timestamp:
        doc["generated_at"] = datetime.now(timezone.utc).isoformat()
    _emit(json.dumps(doc, sort_keys=True, indent=2) + "\n", path)


def _csv_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(round(value, 6))
    if isinstance(value, (list, tuple)):
        return " ".join(_csv_cell(v) for v in value)
    return str(value)


def _write_csv(
    fieldnames: Sequence[str],
    rows: Sequence[dict],
    config: RunConfig,
    path: str | None,
) -> None:
    buffer = io.StringIO()
    if config.timestamp:
        buffer.write(f"# generated_at {datetime.now(timezone.utc).isoformat()}\n")
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(fieldnames)
    for row in rows:
        writer.writerow([_csv_cell(row.get(name)) for name in fieldnames])
    _emit(buffer.getvalue(), path)


def _warn(message: str) -> None:
    print(f"warning: {message}", file=sys.stderr)


# -- shared loading ------------------------------------------------------


def _load_db(config: RunConfig) -> safetydb.DatabaseLoadResult:
    if not config.db_path:
        raise _UsageError("a database path is required (--db)")
    result = safetydb.load_database_path(config.db_path)
    for record in result.skipped:
        _warn(f"skipped {record.package}/{record.advisory_id}: {record.reason} ({record.detail})")
    for record in result.warnings:
        _warn(f"{record.package}/{record.advisory_id}: {record.reason} ({record.detail})")
    return result


def _filter_packages(
    db: safetydb.DatabaseLoadResult, packages: Sequence[str]
) -> dict[str, tuple[safetydb.Advisory, ...]]:
    if not packages:
        return dict(db.advisories)
    wanted = set(packages)
    return {name: adv for name, adv in db.advisories.items() if name in wanted}


def _load_corpus(config: RunConfig) -> vectorize.Corpus:
    db = _load_db(config)
    if not config.snapshot_path:
        raise _UsageError("a snapshot path is required (--snapshot)")
    histories = registry.load_snapshot(config.snapshot_path)
    advisories = _filter_packages(db, config.packages)
    return vectorize.build_corpus(advisories, histories, strict=config.strict)


# -- commands ------------------------------------------------------------


def cmd_ingest(config: RunConfig, transport=None) -> int:
    db = _load_db(config)
    packages = sorted(_filter_packages(db, config.packages))
    client = registry.PyPIClient(
        transport=transport,
        cache_dir=config.cache_dir,
        offline=config.offline,
        workers=config.workers,
    )
    histories, warnings, failures = client.fetch_many(packages)
    for line in warnings:
        _warn(line)
    hard = [f for f in failures if f.reason in ("transport", "offline-miss")]
    payload_bad = [f for f in failures if f.reason == "bad-payload"]
    for failure in failures:
        _warn(f"{failure.package}: {failure.reason} ({failure.detail})")
    if hard:
        print(
            f"error: {len(hard)} packages unreachable; snapshot not written",
            file=sys.stderr,
        )
        return EXIT_ENVIRONMENT
    if payload_bad:
        print(
            f"error: {len(payload_bad)} malformed payloads; snapshot not written",
            file=sys.stderr,
        )
        return EXIT_DATA
    if not config.snapshot_path:
        raise _UsageError("a snapshot output path is required (--snapshot)")
    registry.save_snapshot(config.snapshot_path, histories)
    missing = len(failures) - len(hard) - len(payload_bad)
    print(
        f"ingest: {len(histories)} histories written to {config.snapshot_path}"
        f" ({missing} packages missing from the index)"
    )
    return EXIT_OK


def _attrition_doc(report: vectorize.AttritionReport) -> dict:
    def rows(records):
        return [
            {
                "package": rec.package,
                "advisory_id": rec.advisory_id,
                "reason": rec.reason,
                "detail": rec.detail,
            }
            for rec in records
        ]

    return {
        "counts": {
            "clause_drops": len(report.clause_drops),
            "advisory_drops": len(report.advisory_drops),
            "package_drops": len(report.package_drops),
            "flags": len(report.flags),
        },
        "clause_drops": rows(report.clause_drops),
        "advisory_drops": rows(report.advisory_drops),
        "package_drops": rows(report.package_drops),
        "flags": rows(report.flags),
    }


def cmd_build(config: RunConfig, transport=None) -> int:
    corpus = _load_corpus(config)
    rows = vectorize.corpus_rows(corpus)
    attrition = _attrition_doc(corpus.attrition)
    if config.output_format == "json":
        doc = {
            "meta": {"command": "build", "strict": config.strict},
            "corpus": rows,
            "attrition": attrition,
        }
        _write_json(doc, config, config.out)
    else:
        fieldnames = ["package", "r", "m", "w", "counts"]
        _write_csv(fieldnames, rows, config, config.out)
        if config.attrition_out:
            records = (
                attrition["clause_drops"]
                + attrition["advisory_drops"]
                + attrition["package_drops"]
                + attrition["flags"]
            )
            _write_csv(
                ["package", "advisory_id", "reason", "detail"],
                records,
                config,
                config.attrition_out,
            )
    counts = attrition["counts"]
    print(
        f"build: {len(rows)} packages kept; dropped {counts['advisory_drops']} "
        f"advisories and {counts['package_drops']} packages",
        file=sys.stderr,
    )
    return EXIT_OK


def cmd_markov(config: RunConfig, transport=None) -> int:
    corpus = _load_corpus(config)
    series = corpus.series()
    if not series:
        if config.output_format == "json":
            doc = {
                "meta": {"command": "markov", "alpha": config.alpha},
                "records": [],
                "note": "corpus is empty",
            }
            _write_json(doc, config, config.out)
        else:
            _write_csv(
                ["package", "r", "p_uncond", "p_11", "p_00", "p_11_defined", "p_00_defined"],
                [],
                config,
                config.out,
            )
        return EXIT_OK
    summary = markov.corpus_summary(series, alpha=config.alpha)
    records = [
        {
            "package": rec.package,
            "r": rec.r,
            "p_uncond": rec.p_uncond,
            "p_11": rec.p_11,
            "p_00": rec.p_00,
            "p_11_defined": rec.p_11 is not None,
            "p_00_defined": rec.p_00 is not None,
        }
        for rec in summary.records
    ]
    stats = {
        "releases": summary.release_stats,
        "p_uncond": summary.uncond_stats,
        "p_11": summary.p11_stats,
        "p_00": summary.p00_stats,
    }
    histogram_rows = [
        {"metric": metric, "bin_left": left, "bin_right": right, "count": count}
        for metric, bins in sorted(summary.histograms.items())
        for left, right, count in bins
    ]
    if config.output_format == "json":
        doc = {
            "meta": {"command": "markov", "alpha": config.alpha, "strict": config.strict},
            "records": records,
            "stats": stats,
            "histograms": histogram_rows,
        }
        _write_json(doc, config, config.out)
    else:
        _write_csv(
            ["package", "r", "p_uncond", "p_11", "p_00", "p_11_defined", "p_00_defined"],
            records,
            config,
            config.out,
        )
        if config.summary_out:
            stat_rows = [
                {"metric": metric, **{k: v for k, v in body.items()}}
                for metric, body in stats.items()
            ]
            _write_csv(
                ["metric", "n", "mean", "median", "q1", "q3", "min", "max"],
                stat_rows,
                config,
                config.summary_out,
            )
        if config.histogram_out:
            _write_csv(
                ["metric", "bin_left", "bin_right", "count"],
                histogram_rows,
                config,
                config.histogram_out,
            )
    return EXIT_OK


def cmd_forecast(config: RunConfig, transport=None) -> int:
    corpus = _load_corpus(config)
    result = autologistic.run_experiment(
        corpus.series(),
        horizons=config.horizons,
        min_releases=config.min_releases,
        min_std=config.min_std,
        max_order_fraction=config.max_order_fraction,
        parsimony_margin=config.parsimony_margin,
        ridge_fallback=config.ridge_fallback,
        full_sample=config.full_sample,
        tie_value=config.tie_value,
    )
    report_rows = [
        {
            "package": rep.package,
            "t": rep.t,
            "order": rep.order,
            "mean_abs_error": rep.mean_abs_error,
            "median_abs_error": rep.median_abs_error,
            "max_abs_error": rep.max_abs_error,
            "accuracy": rep.accuracy,
            "naive_accuracy": rep.naive_accuracy,
            "converged": rep.converged,
            "flags": list(rep.flags),
        }
        for rep in result.reports
    ]
    summary_rows = [
        {
            "t": s.t,
            "packages": s.packages,
            "mean_abs_error": s.mean_abs_error,
            "median_abs_error": s.median_abs_error,
            "max_abs_error": s.max_abs_error,
            "accuracy": s.accuracy,
            "naive_accuracy": s.naive_accuracy,
        }
        for s in result.summaries.values()
    ]
    exclusion_rows = [
        {"package": e.package, "t": e.t, "reason": e.reason, "detail": e.detail}
        for e in result.exclusions
    ]
    order_rows = [
        {
            "package": package,
            "order": sel.order,
            "aics": {str(k): v for k, v in sorted(sel.aics.items())},
        }
        for package, sel in sorted(result.orders.items())
    ]
    if config.output_format == "json":
        doc = {
            "meta": {
                "command": "forecast",
                "horizons": list(config.horizons),
                "min_releases": config.min_releases,
                "min_std": config.min_std,
                "max_order_fraction": config.max_order_fraction,
                "aic_margin": config.parsimony_margin,
                "ridge": config.ridge_fallback,
                "full_sample": config.full_sample,
                "tie_value": config.tie_value,
                "strict": config.strict,
                "seed": config.seed,
            },
            "reports": report_rows,
            "abs_errors": {
                f"{rep.package}@{rep.t}": list(rep.abs_errors) for rep in result.reports
            },
            "summaries": summary_rows,
            "exclusions": exclusion_rows,
            "orders": order_rows,
        }
        if not result.reports:
            doc["note"] = "no package passed the eligibility filters"
        _write_json(doc, config, config.out)
    else:
        _write_csv(
            [
                "package",
                "t",
                "order",
                "mean_abs_error",
                "median_abs_error",
                "max_abs_error",
                "accuracy",
                "naive_accuracy",
                "converged",
                "flags",
            ],
            report_rows,
            config,
            config.out,
        )
        if config.summary_out:
            _write_csv(
                [
                    "t",
                    "packages",
                    "mean_abs_error",
                    "median_abs_error",
                    "max_abs_error",
                    "accuracy",
                    "naive_accuracy",
                ],
                summary_rows,
                config,
                config.summary_out,
            )
    kept = len(result.reports)
    print(
        f"forecast: {kept} package-horizon reports, {len(exclusion_rows)} exclusions",
        file=sys.stderr,
    )
    return EXIT_OK


# -- argument parsing ----------------------------------------------------


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--db", help="advisory database JSON file")
    parser.add_argument("--snapshot", help="release-history snapshot file")
    parser.add_argument("--packages", help="comma-separated package filter")
    parser.add_argument("--format", choices=("json", "csv"), default="json")
    parser.add_argument("--out", help="primary output file (default stdout)")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument(
        "--no-timestamp",
        action="store_true",
        help="omit the generation timestamp for byte-identical reruns",
    )
    parser.add_argument(
        "--strict",
        action="store_true",
        help="match boundary versions by exact string instead of canonical equality",
    )


def build_parser() -> _Parser:
    parser = _Parser(prog="vulnseries", description=__doc__.splitlines()[0])
    commands = parser.add_subparsers(dest="command", required=True)

    ingest = commands.add_parser("ingest", help="fetch release histories into a snapshot")
    _add_common(ingest)
    ingest.add_argument("--cache", help="payload cache directory")
    ingest.add_argument("--offline", action="store_true", help="serve from cache only")
    ingest.add_argument("--workers", type=int, default=4)

    build = commands.add_parser("build", help="build the per-package binary series corpus")
    _add_common(build)
    build.add_argument("--attrition-out", help="CSV file for attrition records")

    markov_cmd = commands.add_parser("markov", help="probability and transition summary")
    _add_common(markov_cmd)
    markov_cmd.add_argument("--alpha", type=float, default=0.0, help="add-alpha smoothing")
    markov_cmd.add_argument("--summary-out", help="CSV file for distribution statistics")
    markov_cmd.add_argument("--histogram-out", help="CSV file for histogram bins")

    forecast = commands.add_parser("forecast", help="run the release-forecast experiment")
    _add_common(forecast)
    forecast.add_argument("--t", default="5,10", help="comma-separated horizons")
    forecast.add_argument("--min-releases", type=int, default=25)
    forecast.add_argument("--min-std", type=float, default=0.25)
    forecast.add_argument("--max-order-frac", type=float, default=0.1)
    forecast.add_argument(
        "--aic-margin",
        type=float,
        default=autologistic.PARSIMONY_MARGIN,
        help="orders within this AIC gap of the minimum count as tied (smallest wins)",
    )
    forecast.add_argument("--ridge", action="store_true", help="enable the ridge fallback")
    forecast.add_argument(
        "--full-sample",
        action="store_true",
        help="fit coefficients on the whole series instead of the training prefix",
    )
    forecast.add_argument("--tie", type=int, default=1, choices=(0, 1), help="naive tie prediction")
    forecast.add_argument("--summary-out", help="CSV file for the summary table")
    return parser


def _config_from(args: argparse.Namespace) -> RunConfig:
    horizons: tuple[int, ...] = (5, 10)
    if getattr(args, "t", None):
        try:
            horizons = tuple(int(tok) for tok in str(args.t).split(",") if tok.strip())
        except ValueError as exc:
            raise _UsageError(f"bad horizon list {args.t!r}") from exc
        if not horizons:
            raise _UsageError("at least one horizon is required")
    packages: tuple[str, ...] = ()
    if getattr(args, "packages", None):
        packages = tuple(p.strip() for p in args.packages.split(",") if p.strip())
    try:
        return RunConfig(
            db_path=getattr(args, "db", None),
            snapshot_path=getattr(args, "snapshot", None),
            cache_dir=getattr(args, "cache", None),
            offline=getattr(args, "offline", False),
            packages=packages,
            horizons=horizons,
            min_releases=getattr(args, "min_releases", 25),
            min_std=getattr(args, "min_std", 0.25),
            max_order_fraction=getattr(args, "max_order_frac", 0.1),
            parsimony_margin=getattr(
                args, "aic_margin", autologistic.PARSIMONY_MARGIN
            ),
            ridge_fallback=getattr(args, "ridge", False),
            full_sample=getattr(args, "full_sample", False),
            tie_value=getattr(args, "tie", 1),
            alpha=getattr(args, "alpha", 0.0),
            strict=getattr(args, "strict", False),
            output_format=getattr(args, "format", "json"),
            seed=getattr(args, "seed", None),
            timestamp=not getattr(args, "no_timestamp", False),
            workers=getattr(args, "workers", 4),
            out=getattr(args, "out", None),
            summary_out=getattr(args, "summary_out", None),
            histogram_out=getattr(args, "histogram_out", None),
            attrition_out=getattr(args, "attrition_out", None),
        )
    except ValueError as exc:
        raise _UsageError(str(exc)) from exc


_HANDLERS: dict[str, Callable[[RunConfig, object], int]] = {
    "ingest": cmd_ingest,
    "build": cmd_build,
    "markov": cmd_markov,
    "forecast": cmd_forecast,
}


def main(argv: Sequence[str] | None = None, transport=None) -> int:
    """Entry point; returns the exit code instead of raising SystemExit."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        config = _config_from(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help and friends
        return int(exc.code or 0)
    handler = _HANDLERS[args.command]
    try:
        return handler(config, transport)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DatabaseLoadError, SnapshotSchemaError, SpecSyntaxError, VersionParseError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (SnapshotNotFoundError, TransportError, OfflineCacheMissError, OSError) as exc:
        print(f"environment error: {exc}", file=sys.stderr)
        return EXIT_ENVIRONMENT
    except VulnseriesError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
