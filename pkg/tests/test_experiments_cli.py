import csv
import json

import pytest

from ogp_modlab.cli import main
from ogp_modlab.experiments import ConfigError, ExperimentConfig, run
from ogp_modlab.landscape.sweep import CSV_HEADER

MODEL = {"n": 150, "k": 3, "a": 3, "b": 1, "omega": 20}


def _write(tmp_path, body, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(body))
    return path


def test_config_roundtrip_and_hash(tmp_path):
    cfg = ExperimentConfig.from_dict({"kind": "score", "model": MODEL, "seeds": [0, 1]})
    path = tmp_path / "c.json"
    cfg.dump(path)
    again = ExperimentConfig.load(path)
    assert again == cfg and again.config_hash() == cfg.config_hash()
    moved = ExperimentConfig.from_dict(cfg.to_dict() | {"out": "elsewhere"})
    assert moved.config_hash() == cfg.config_hash()
    other = ExperimentConfig.from_dict(cfg.to_dict() | {"seeds": [0]})
    assert other.config_hash() != cfg.config_hash()


def test_probability_model_form():
    cfg = ExperimentConfig.from_dict(
        {"kind": "score", "model": {"n": 30, "k": 3, "p": 0.5, "q": 0.1}, "seeds": [0]})
    assert cfg.model.p == pytest.approx(0.5) and cfg.model.q == pytest.approx(0.1)


@pytest.mark.parametrize("raw,field", [
    ({"kind": "nope", "model": MODEL, "seeds": [0]}, "kind"),
    ({"kind": "score", "model": MODEL, "seeds": []}, "seeds"),
    ({"kind": "score", "model": MODEL}, "seeds"),
    ({"kind": "score", "model": MODEL | {"b": 5}, "seeds": [0]}, "model"),
    ({"kind": "score", "model": MODEL, "seeds": [0], "extra": 1}, None),
])
def test_bad_configs(raw, field):
    with pytest.raises(ConfigError) as err:
        ExperimentConfig.from_dict(raw)
    if field:
        assert err.value.field_name == field


def test_landscape_run_is_reproducible(tmp_path):
    body = {"kind": "landscape", "model": MODEL, "seeds": [0, 1],
            "options": {"d_grid": 11, "search_budget": 5}}
    cfg = ExperimentConfig.from_dict(body)
    first = run(cfg, str(tmp_path / "a"))
    second = run(cfg, str(tmp_path / "b"))
    rows = list(csv.reader(first.csv_files[0].open()))
    assert rows[0] == CSV_HEADER
    assert len(rows) == 1 + 22
    assert first.csv_files[0].read_bytes() == second.csv_files[0].read_bytes()
    meta = json.loads(first.metadata_file.read_text())
    assert meta["config_hash"] == cfg.config_hash()
    assert cfg.config_hash()[:12] in first.csv_files[0].name
    assert meta["seeds"] == [0, 1]


def test_cli_oracle(tmp_path, capsys):
    path = _write(tmp_path, {"kind": "oracle", "model": MODEL, "seeds": [0],
                             "options": {"t": [1.0], "resolution": 6}})
    assert main(["oracle", "--config", str(path), "--out", str(tmp_path / "o")]) == 0
    meta = next((tmp_path / "o").glob("*.json"))
    comp = json.loads(meta.read_text())["results"]["0"]["comparisons"][0]
    assert comp["closed_form"] == 4 and comp["grid_max"] == pytest.approx(4)


def test_cli_greedy_single_seed(tmp_path):
    path = _write(tmp_path, {"kind": "greedy", "model": MODEL, "seeds": [0, 1, 2],
                             "options": {"start": "decoy"}})
    assert main(["greedy", "--config", str(path), "--seed", "2", "--out", str(tmp_path)]) == 0
    files = list(tmp_path.glob("greedy_seed*.csv"))
    assert [f.name.split("_")[1] for f in files] == ["seed2"]


def test_cli_generate(tmp_path):
    path = _write(tmp_path, {"kind": "score", "model": MODEL, "seeds": [3]})
    assert main(["generate", "--config", str(path), "--out", str(tmp_path)]) == 0
    assert (tmp_path / "graph_seed3.txt").exists() and (tmp_path / "planted_seed3.txt").exists()


def test_cli_exit_codes(tmp_path):
    good = _write(tmp_path, {"kind": "score", "model": MODEL, "seeds": [0]})
    assert main(["landscape", "--config", str(good)]) == 1          # kind mismatch
    bad = _write(tmp_path, {"kind": "score", "model": MODEL | {"a": 0.5}, "seeds": [0]}, "bad.json")
    assert main(["score", "--config", str(bad)]) == 1
    assert main(["score", "--config", str(tmp_path / "missing.json")]) == 3
    with pytest.raises(SystemExit) as err:
        main(["frobnicate"])
    assert err.value.code == 1
