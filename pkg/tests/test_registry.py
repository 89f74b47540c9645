"""Release-history client: ordering, caching, retries, and snapshots."""

import json

import pytest

from vulnseries.errors import (
    OfflineCacheMissError,
    PackageNotFoundError,
    PayloadFormatError,
    SnapshotNotFoundError,
    SnapshotSchemaError,
    TransportError,
)
from vulnseries.registry import (
    PyPIClient,
    load_snapshot,
    normalize_name,
    order_history,
    save_snapshot,
)


def payload(releases: dict) -> bytes:
    return json.dumps({"info": {}, "releases": releases}).encode("utf-8")


def make_transport(responses):
    """A transport stub that pops canned (status, body) pairs per URL."""
    calls = []

    def transport(url: str):
        calls.append(url)
        item = responses.pop(0)
        if isinstance(item, Exception):
            raise item
        return item

    transport.calls = calls
    return transport


@pytest.mark.parametrize(
    "name,expected",
    [("Foo_Bar.baz", "foo-bar-baz"), ("simple", "simple"), ("A--B", "a-b")],
)
def test_normalize_name(name, expected):
    assert normalize_name(name) == expected


def test_order_history_sorts_by_version_precedence():
    history, warnings = order_history("pkg", [("1.0", None), ("0.9", None)])
    assert [r.raw for r in history.releases] == ["0.9", "1.0"]
    assert [str(v) for v in history.versions()] == ["0.9.0", "1.0.0"]
    assert not warnings


def test_order_history_places_prereleases_before_finals():
    history, _ = order_history("pkg", [("1.0", None), ("1.0rc1", None)])
    assert [r.raw for r in history.releases] == ["1.0rc1", "1.0"]


def test_equal_versions_collapse_to_one_with_warning():
    history, warnings = order_history("pkg", [("1.0.0", None), ("1.0", None)])
    assert len(history.releases) == 1
    assert history.releases[0].raw == "1.0"
    assert len(warnings) == 1 and "duplicate" in warnings[0]


def test_upload_order_disagreement_is_warned():
    entries = [("0.9", "2021-05-01T00:00:00Z"), ("1.0", "2020-01-01T00:00:00Z")]
    history, warnings = order_history("pkg", entries)
    assert [r.raw for r in history.releases] == ["0.9", "1.0"]
    assert any("disagrees" in w for w in warnings)


def test_timed_entry_wins_a_collapse_over_untimed():
    history, warnings = order_history(
        "pkg", [("1.0", None), ("1.0.0", "2020-01-01T00:00:00Z")]
    )
    assert [r.raw for r in history.releases] == ["1.0.0"]
    assert history.releases[0].upload_time == "2020-01-01T00:00:00Z"
    assert len(warnings) == 1


def test_fetch_history_parses_and_orders():
    transport = make_transport(
        [(200, payload({"1.10": [], "1.2": [{"upload_time": "2020-02-02T00:00:00Z"}]}))]
    )
    client = PyPIClient(transport=transport)
    history, warnings = client.fetch_history("pkg")
    assert [r.raw for r in history.releases] == ["1.2", "1.10"]
    assert history.releases[0].upload_time == "2020-02-02T00:00:00Z"
    assert transport.calls == ["https://pypi.org/pypi/pkg/json"]
    assert not warnings


def test_http_404_is_package_not_found_without_retry():
    transport = make_transport([(404, b"")])
    client = PyPIClient(transport=transport, sleep=lambda s: None)
    with pytest.raises(PackageNotFoundError):
        client.fetch_history("ghost")
    assert len(transport.calls) == 1


def test_server_errors_retry_with_exponential_backoff():
    transport = make_transport([(500, b""), (503, b""), (200, payload({"1.0": []}))])
    naps = []
    client = PyPIClient(transport=transport, sleep=naps.append, backoff=0.5)
    history, _ = client.fetch_history("pkg")
    assert len(history) == 1
    assert naps == [0.5, 1.0]


def test_exhausted_retries_raise_transport_error():
    transport = make_transport([(500, b""), (500, b""), (500, b"")])
    client = PyPIClient(transport=transport, sleep=lambda s: None, max_attempts=3)
    with pytest.raises(TransportError):
        client.fetch_history("pkg")
    assert len(transport.calls) == 3


def test_empty_releases_map_means_not_found():
    transport = make_transport([(200, payload({}))])
    client = PyPIClient(transport=transport)
    with pytest.raises(PackageNotFoundError):
        client.fetch_history("hollow")


@pytest.mark.parametrize("body", [b"not json", b'{"releases": 7}', b"[]"])
def test_malformed_payloads_raise_format_error(body):
    client = PyPIClient(transport=make_transport([(200, body)]))
    with pytest.raises(PayloadFormatError):
        client.fetch_history("pkg")


def test_cache_serves_second_fetch_without_transport(tmp_path):
    transport = make_transport([(200, payload({"1.0": []}))])
    client = PyPIClient(transport=transport, cache_dir=tmp_path)
    client.fetch_history("pkg")
    client.fetch_history("pkg")
    assert len(transport.calls) == 1
    assert (tmp_path / "pkg.json").is_file()


def test_offline_mode_uses_cache_or_fails(tmp_path):
    warm = PyPIClient(
        transport=make_transport([(200, payload({"1.0": []}))]), cache_dir=tmp_path
    )
    warm.fetch_history("pkg")

    def explode(url):
        raise AssertionError("offline client must not touch the network")

    offline = PyPIClient(transport=explode, cache_dir=tmp_path, offline=True)
    history, _ = offline.fetch_history("pkg")
    assert len(history) == 1
    with pytest.raises(OfflineCacheMissError):
        offline.fetch_history("never-cached")


def test_cache_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("VULNSERIES_CACHE", str(tmp_path))
    client = PyPIClient(transport=make_transport([(200, payload({"1.0": []}))]))
    client.fetch_history("pkg")
    assert (tmp_path / "pkg.json").is_file()


def test_fetch_many_collects_failures_without_aborting():
    bodies = {
        "good": (200, payload({"1.0": [], "1.1": []})),
        "gone": (404, b""),
        "broken": (200, b"not json"),
    }

    def transport(url):
        for name, response in bodies.items():
            if f"/{name}/" in url:
                return response
        raise AssertionError(url)

    client = PyPIClient(transport=transport, workers=2)
    histories, warnings, failures = client.fetch_many(["good", "gone", "broken"])
    assert set(histories) == {"good"}
    reasons = {f.package: f.reason for f in failures}
    assert reasons == {"gone": "not-found", "broken": "bad-payload"}


def test_snapshot_round_trip(tmp_path):
    history, _ = order_history(
        "pkg", [("1.0", "2020-01-01T00:00:00Z"), ("1.1", "2020-06-01T00:00:00Z")]
    )
    path = tmp_path / "snap.json"
    save_snapshot(path, {"pkg": history})
    loaded = load_snapshot(path)
    assert [r.raw for r in loaded["pkg"].releases] == ["1.0", "1.1"]
    assert [r.upload_time for r in loaded["pkg"].releases] == [
        "2020-01-01T00:00:00Z",
        "2020-06-01T00:00:00Z",
    ]


def test_snapshot_write_is_deterministic(tmp_path):
    history, _ = order_history("pkg", [("1.0", None)])
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    save_snapshot(a, {"pkg": history})
    save_snapshot(b, {"pkg": history})
    assert a.read_bytes() == b.read_bytes()


def test_missing_snapshot_raises_not_found(tmp_path):
    with pytest.raises(SnapshotNotFoundError):
        load_snapshot(tmp_path / "absent.json")


@pytest.mark.parametrize(
    "doc",
    [
        "{ not json",
        json.dumps({"schema_version": 999, "histories": {}}),
        json.dumps({"schema_version": 1}),
        json.dumps({"schema_version": 1, "histories": {"pkg": "nope"}}),
        json.dumps({"schema_version": 1, "histories": {"pkg": [{"nope": 1}]}}),
    ],
)
def test_corrupt_snapshots_raise_schema_error(tmp_path, doc):
    path = tmp_path / "snap.json"
    path.write_text(doc, encoding="utf-8")
    with pytest.raises(SnapshotSchemaError):
        load_snapshot(path)
