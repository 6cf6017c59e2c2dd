import json

import pytest

from phenosample.errors import ValidationError
from phenosample.manifest import (DatasetManifest, ManifestHeader, ManifestRecord, SeasonEntry,
                                  creation_timestamp, read_manifest, summarize, write_manifest)


def entry(season, cloud=0.05):
    starts = [(60, 152), (152, 244), (244, 335), (335, 60)]
    start, end = starts[season]
    day = {0: "2019-04-15", 1: "2019-07-15", 2: "2019-10-15", 3: "2019-01-15"}[season]
    return SeasonEntry(season, start, end, start + 10, f"S{season}", day, cloud)


def record(pid, seasons=(0, 1, 2, 3), cloud=0.05, weight=1.0):
    return ManifestRecord(pid, 10.0, 20.0, [entry(s, cloud) for s in seasons], weight)


def manifest(n=3, **kw):
    return DatasetManifest(ManifestHeader(), [record(i, **kw) for i in range(n)])


def test_empty_manifest_is_header_only(tmp_path):
    write_manifest(DatasetManifest(ManifestHeader()), tmp_path / "m.jsonl")
    lines = (tmp_path / "m.jsonl").read_text().splitlines()
    assert len(lines) == 1 and json.loads(lines[0])["format_version"] == 1
    assert read_manifest(tmp_path / "m.jsonl").records == []


def test_round_trip_and_byte_identical(tmp_path):
    m = manifest(1000)
    write_manifest(m, tmp_path / "a.jsonl")
    write_manifest(m, tmp_path / "b.jsonl")
    assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()
    assert read_manifest(tmp_path / "a.jsonl") == m


def test_one_season_fails_min_seasons(tmp_path):
    with pytest.raises(ValidationError, match="min seasons"):
        write_manifest(DatasetManifest(ManifestHeader(), [record(0, seasons=(1,))]),
                       tmp_path / "m.jsonl")


def test_duplicate_point_id(tmp_path):
    m = manifest(2)
    m.records[1].point_id = 0
    with pytest.raises(ValidationError, match="duplicate point_id"):
        write_manifest(m, tmp_path / "m.jsonl")


def _write_lines(path, lines):
    path.write_text("".join(json.dumps(x) + "\n" for x in lines))


@pytest.mark.parametrize("mutate, rule", [
    (lambda r: r["seasons"][0].update(cloud_fraction=0.2), "cloud bound"),
    (lambda r: r["seasons"][0].update(acquisition="2019-12-01"), "window"),
    (lambda r: r["seasons"][0].update(acquisition="2015-04-15"), "year range"),
    (lambda r: r.update(weight=0.0), "weight"),
    (lambda r: r.update(lat=95.0), "coordinates"),
    (lambda r: r["seasons"].reverse(), "season order"),
    (lambda r: r.update(extra=1), "record"),
])
def test_validation_rules(tmp_path, mutate, rule):
    header = json.loads(json.dumps(ManifestHeader().__dict__))
    rec = json.loads(json.dumps(record(0).to_json()))
    mutate(rec)
    _write_lines(tmp_path / "m.jsonl", [header, rec])
    with pytest.raises(ValidationError) as info:
        read_manifest(tmp_path / "m.jsonl")
    assert info.value.rule == rule and info.value.line == 2


def test_header_checks(tmp_path):
    header = dict(ManifestHeader().__dict__, format_version=99)
    _write_lines(tmp_path / "m.jsonl", [header])
    with pytest.raises(ValidationError, match="format version"):
        read_manifest(tmp_path / "m.jsonl")
    (tmp_path / "e.jsonl").write_text("")
    with pytest.raises(ValidationError):
        read_manifest(tmp_path / "e.jsonl")
    (tmp_path / "x.jsonl").write_text("{not json\n")
    with pytest.raises(ValidationError):
        read_manifest(tmp_path / "x.jsonl")


def test_summary():
    s = summarize(manifest(5))
    assert s["coverage"] == {2: 0, 3: 0, 4: 5}
    assert s["mean_cloud"] == pytest.approx(0.05)
    assert s["n_scenes"] == 20
    empty = summarize(DatasetManifest(ManifestHeader()))
    assert empty["n_records"] == 0 and empty["mean_cloud"] == 0.0
    assert empty["coverage"] == {2: 0, 3: 0, 4: 0}


def test_timestamp_honours_source_date_epoch(monkeypatch):
    monkeypatch.delenv("SOURCE_DATE_EPOCH", raising=False)
    assert creation_timestamp() == "1970-01-01T00:00:00Z"
    monkeypatch.setenv("SOURCE_DATE_EPOCH", "86400")
    assert creation_timestamp() == "1970-01-02T00:00:00Z"
