import json

import numpy as np
import pytest

from phenosample import MANIFEST_FORMAT_VERSION
from phenosample.cli import main
from phenosample.config import PipelineConfig, config_from_mapping, parse_config
from phenosample.errors import ConfigError
from phenosample.evalharness.io import write_embeddings, write_labels
from phenosample.manifest import read_manifest
from phenosample.synthetic import make_fixture


def test_empty_config_is_defaults(tmp_path):
    (tmp_path / "c.yaml").write_text("")
    assert parse_config(tmp_path / "c.yaml") == PipelineConfig()
    assert config_from_mapping({}) == PipelineConfig()


def test_bad_values_rejected():
    with pytest.raises(ConfigError, match="max_cloud"):
        config_from_mapping({"selection": {"max_cloud": 1.5}})
    with pytest.raises(ConfigError):
        config_from_mapping({"seed": "x"})
    with pytest.raises(ConfigError):
        config_from_mapping({"run": {"workers": 0}})


def test_unknown_key_suggests_fix():
    with pytest.raises(ConfigError, match="did you mean 'selection.max_cloud'"):
        config_from_mapping({"selection": {"maxcloud": 0.1}})
    with pytest.raises(ConfigError, match="did you mean 'selection'"):
        config_from_mapping({"selectoin": {}})


def test_paths_resolved_and_checked(tmp_path):
    (tmp_path / "cat.jsonl").write_text("")
    cfg = config_from_mapping({"paths": {"catalog": "cat.jsonl"}}, tmp_path)
    assert cfg.paths.catalog == str(tmp_path / "cat.jsonl")
    with pytest.raises(ConfigError, match="does not exist"):
        config_from_mapping({"paths": {"land_mask": "nope.json"}}, tmp_path)
    url = config_from_mapping({"paths": {"catalog": "https://x.test/search"}}, tmp_path)
    assert url.paths.catalog == "https://x.test/search"


def test_version(capsys):
    assert main(["--version"]) == 0
    assert f"manifest format {MANIFEST_FORMAT_VERSION}" in capsys.readouterr().out


@pytest.fixture(scope="module")
def fixture_dir(tmp_path_factory):
    return make_fixture(tmp_path_factory.mktemp("fx"), n_points=120, seed=1)


def test_cli_stages_and_validate(fixture_dir, tmp_path, capsys):
    cfg = str(fixture_dir / "config.yaml")
    out = str(tmp_path / "out")
    for stage in ("grid", "pheno", "select", "weights", "manifest"):
        assert main([stage, "--config", cfg, "--out", out, "--workers", "2"]) == 0, stage
    first = (tmp_path / "out" / "manifest.jsonl").read_bytes()
    assert main(["pipeline", "--config", cfg, "--out", out]) == 0
    assert (tmp_path / "out" / "manifest.jsonl").read_bytes() == first
    m = read_manifest(tmp_path / "out" / "manifest.jsonl")
    assert len(m.records) > 0
    capsys.readouterr()
    assert main(["manifest-validate", str(tmp_path / "out" / "manifest.jsonl")]) == 0
    assert main(["summarize", str(tmp_path / "out" / "manifest.jsonl")]) == 0
    summary = json.loads(capsys.readouterr().out.splitlines()[-1])
    assert summary["n_records"] == len(m.records)


def test_cli_overrides_reach_header(fixture_dir, tmp_path):
    out = tmp_path / "o"
    assert main(["pipeline", "--config", str(fixture_dir / "config.yaml"), "--out", str(out),
                 "--max-cloud", "0.3", "--years", "2018-2023", "--season-mode", "calendar",
                 "--mountain-multiplier", "3"]) == 0
    header = json.loads((out / "manifest.jsonl").read_text().splitlines()[0])
    assert header["policy"]["max_cloud"] == 0.3
    assert (header["policy"]["year_start"], header["policy"]["year_end"]) == (2018, 2023)
    assert header["pheno"]["mode"] == "calendar"
    assert header["weights"]["mountain_multiplier"] == 3.0


def test_cli_corrupted_manifest_fails(tmp_path, capsys):
    (tmp_path / "m.jsonl").write_text('{"format": "other"}\n')
    assert main(["manifest-validate", str(tmp_path / "m.jsonl")]) == 1
    err = capsys.readouterr().err
    assert "manifest-validate" in err and "format" in err


def test_cli_stage_error_names_stage(tmp_path, capsys):
    (tmp_path / "c.yaml").write_text(f"paths:\n  output_dir: {tmp_path / 'o'}\n")
    assert main(["select", "--config", str(tmp_path / "c.yaml")]) == 1
    assert "phenosample select: error:" in capsys.readouterr().err


def test_cli_eval(tmp_path, capsys):
    rng = np.random.Generator(np.random.PCG64(0))
    y = rng.integers(0, 3, 90)
    x = np.eye(3)[y] * 3 + rng.normal(scale=0.3, size=(90, 3))
    write_embeddings(x, tmp_path / "e.bin")
    write_labels(range(90), y.tolist(), tmp_path / "l.jsonl")
    report = tmp_path / "r.json"
    assert main(["eval", "knn", "--embeddings", str(tmp_path / "e.bin"), "--labels",
                 str(tmp_path / "l.jsonl"), "--task", "classification", "--folds", "3",
                 "--k-grid", "1,3,5", "--report", str(report)]) == 0
    out = capsys.readouterr().out
    assert out.splitlines()[0].split() == ["metric", "mean", "std"]
    data = json.loads(report.read_text())
    assert data["n_folds"] == 3 and data["mean"]["accuracy"] > 0.9
    assert all(f["k"] in (1, 3, 5) for f in data["folds"])
    assert main(["eval", "probe", "--embeddings", str(tmp_path / "e.bin"), "--labels",
                 str(tmp_path / "l.jsonl"), "--task", "classification", "--folds", "2",
                 "--lr", "0.01", "--patience", "5"]) == 0
