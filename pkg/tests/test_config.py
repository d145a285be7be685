import pytest
import yaml

from exemplar_dialog.config import WORKDIR_ENV, PipelineConfig
from exemplar_dialog.errors import ConfigError


def test_defaults_and_typed_sections():
    cfg = PipelineConfig.from_mapping({})
    assert cfg.seed == 0
    m = cfg.model_config(100, "exemplar")
    assert (m.embedding_dim, m.hidden_dim, m.dropout, m.max_decode_len) == (256, 512, 0.3, 50)
    t = cfg.train_config()
    assert (t.learning_rate, t.clip_norm, t.batch_size) == (0.001, 5.0, 32)
    i = cfg.index_config()
    assert (i.mode, i.tables, i.bits, i.probe_radius) == ("approximate", 16, 12, 2)


def test_unknown_key_rejected():
    with pytest.raises(ConfigError, match="modle"):
        PipelineConfig.from_mapping({"modle": {}})
    with pytest.raises(ConfigError, match="model.hiden_dim"):
        PipelineConfig.from_mapping({"model": {"hiden_dim": 3}})


def test_invalid_values_rejected():
    with pytest.raises(ConfigError):
        PipelineConfig.from_mapping({"train": {"patience": 60, "max_epochs": 50}})
    with pytest.raises(ConfigError):
        PipelineConfig.from_mapping({"retrieval": {"reranker": "bert"}})
    with pytest.raises(ConfigError):
        PipelineConfig.from_mapping({"model": {"dropout": 1.5}})


def test_dotted_overrides_and_seed_propagation():
    cfg = PipelineConfig.from_mapping({}).override({"train.max_epochs": 3, "train.patience": 1, "seed": 9,
                                                    "model.hidden_dim": None})
    assert cfg.train_config().max_epochs == 3
    assert cfg.train_config().seed == 9
    assert cfg.model_config(10, "hred").seed == 9
    assert cfg.index_config().seed == 9
    assert cfg.model_config(10, "hred").hidden_dim == 512


def test_relative_paths_resolve_against_file(tmp_path):
    (tmp_path / "sub").mkdir()
    path = tmp_path / "sub" / "c.yaml"
    path.write_text(yaml.safe_dump({"paths": {"data": "d.json", "work_dir": "w"}}))
    cfg = PipelineConfig.load(path)
    assert cfg.path("data") == (tmp_path / "sub" / "d.json").resolve()
    assert cfg.work_dir == (tmp_path / "sub" / "w").resolve()


def test_bad_files(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        PipelineConfig.load(tmp_path / "nope.yaml")
    (tmp_path / "bad.yaml").write_text("a: [1, 2\n")
    with pytest.raises(ConfigError, match="invalid YAML"):
        PipelineConfig.load(tmp_path / "bad.yaml")
    (tmp_path / "list.yaml").write_text("- 1\n")
    with pytest.raises(ConfigError, match="mapping"):
        PipelineConfig.load(tmp_path / "list.yaml")


def test_work_dir_falls_back_to_environment(monkeypatch, tmp_path):
    cfg = PipelineConfig.from_mapping({})
    monkeypatch.delenv(WORKDIR_ENV, raising=False)
    with pytest.raises(ConfigError, match=WORKDIR_ENV):
        cfg.work_dir
    monkeypatch.setenv(WORKDIR_ENV, str(tmp_path))
    assert cfg.work_dir == tmp_path


def test_missing_input_named(tmp_path):
    cfg = PipelineConfig.from_mapping({"paths": {"ontology": str(tmp_path / "ont.json")}})
    with pytest.raises(ConfigError, match="ont.json"):
        cfg.require_inputs(("ontology",))
    with pytest.raises(ConfigError, match="paths.data"):
        cfg.require_inputs(("data",))


def test_yaml_round_trip():
    cfg = PipelineConfig.from_mapping({"seed": 4, "train": {"max_epochs": 7, "patience": 2}})
    again = PipelineConfig.from_mapping(yaml.safe_load(cfg.to_yaml()))
    assert again.data == cfg.data
