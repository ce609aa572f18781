from pathlib import Path

import pytest

from riskprop.experiment import (
    ConfigError,
    ExperimentConfig,
    parse_experiment_config,
    write_experiment_config,
)

REPO_ROOT = Path(__file__).resolve().parent.parent


def test_config_roundtrip(tmp_path):
    cfg = ExperimentConfig(seeds=(3, 7), output_dir="elsewhere")
    write_experiment_config(cfg, tmp_path / "exp.config")
    assert parse_experiment_config(tmp_path / "exp.config") == cfg


def test_shipped_default_config_matches_code_defaults():
    parsed = parse_experiment_config(REPO_ROOT / "configs" / "default.config")
    assert parsed == ExperimentConfig()


def test_shipped_smoke_config_parses():
    cfg = parse_experiment_config(REPO_ROOT / "configs" / "smoke.config")
    assert cfg.pretrain.epochs < 100  # it must stay cheap


def test_partial_config_keeps_defaults(tmp_path):
    (tmp_path / "exp.config").write_text("gen.num_nodes=50\nseeds=1\n")
    cfg = parse_experiment_config(tmp_path / "exp.config")
    assert cfg.gen.num_nodes == 50
    assert cfg.seeds == (1,)
    assert cfg.pretrain == ExperimentConfig().pretrain


def test_comments_and_blank_lines_allowed(tmp_path):
    (tmp_path / "exp.config").write_text(
        "# a comment\n\ngen.num_nodes=64   # trailing comment\n"
    )
    assert parse_experiment_config(tmp_path / "exp.config").gen.num_nodes == 64


def test_all_problems_reported_together(tmp_path):
    (tmp_path / "exp.config").write_text(
        "gen.num_nodes=not-a-number\n"
        "gen.bogus_key=1\n"
        "mystery=2\n"
        "pretrain.mask_ratio=2.0\n"
    )
    with pytest.raises(ConfigError) as exc:
        parse_experiment_config(tmp_path / "exp.config")
    msg = str(exc.value)
    assert "gen.num_nodes" in msg
    assert "bogus_key" in msg
    assert "mystery" in msg
    assert "mask_ratio" in msg


def test_missing_config_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        parse_experiment_config(tmp_path / "absent.config")


def test_empty_seed_list_rejected():
    with pytest.raises(ConfigError, match="seeds"):
        ExperimentConfig(seeds=())
