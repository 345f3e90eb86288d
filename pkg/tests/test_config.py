import json
import math

import pytest

from core.config import (Config, ExperimentConfig, config_from_dict, emit_config, known_keys,
                         load_experiment_config, parse_config, parse_override,
                         write_resolved_config)
from core.exceptions import ConfigError


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


class TestParseConfig:
    def test_empty_document_gives_defaults(self):
        config = parse_config("")
        assert config == ExperimentConfig()
        assert config.scenario == "underdetermined"
        assert config.models == ("gp-avae", "half-gp-vae", "half-gp-avae")
        assert config.ee.enabled
        assert config.m == 2

    def test_empty_object(self):
        assert parse_config("{}") == ExperimentConfig()

    def test_determined_with_two_observations(self):
        with pytest.raises(ConfigError) as excinfo:
            parse_config('{"scenario": "determined", "data": {"m": 2, "n": 3}}')
        assert excinfo.value.key_path == "data.m"

    def test_determined_defaults_to_square_mixing(self):
        config = parse_config('{"scenario": "determined"}')
        assert config.m == 3
        assert config.train_config("half-gp-vae", 0).m == 3

    def test_underdetermined_needs_fewer_observations(self):
        with pytest.raises(ConfigError):
            parse_config('{"data": {"m": 3}}')

    def test_round_trip(self):
        config = parse_config(json.dumps({
            "scenario": "determined",
            "models": ["half-gp-avae"],
            "seeds": [3, 4],
            "data": {"T": 80, "mixing": "linear", "seed": 11},
            "training": {"epochs": 12, "decoder_hidden": [8], "adversarial_batch_size": 40},
            "ee": {"enabled": False},
        }))
        assert parse_config(emit_config(config)) == config
        assert config_from_dict(config.to_dict()) == config

    def test_unknown_key_is_named(self):
        with pytest.raises(ConfigError) as excinfo:
            parse_config('{"training": {"epoch": 5}}')
        assert excinfo.value.key_path == "training.epoch"

    def test_unknown_top_level_key(self):
        with pytest.raises(ConfigError) as excinfo:
            parse_config('{"model": "gp-avae"}')
        assert excinfo.value.key_path == "model"

    @pytest.mark.parametrize("document,key_path", [
        ('{"training": {"epochs": "many"}}', "training.epochs"),
        ('{"training": {"epochs": 2.5}}', "training.epochs"),
        ('{"seeds": [true]}', "seeds[0]"),
        ('{"ee": {"enabled": 1}}', "ee.enabled"),
        ('{"training": {"decoder_hidden": 32}}', "training.decoder_hidden"),
        ('{"data": []}', "data"),
    ])
    def test_type_mismatch(self, document, key_path):
        with pytest.raises(ConfigError) as excinfo:
            parse_config(document)
        assert excinfo.value.key_path == key_path

    def test_integers_accepted_for_floats(self):
        config = parse_config('{"training": {"lam": 2}}')
        assert config.training.lam == 2.0 and isinstance(config.training.lam, float)

    def test_invalid_json(self):
        with pytest.raises(ConfigError):
            parse_config("{not json")

    @pytest.mark.parametrize("document", [
        '{"scenario": "overdetermined"}',
        '{"models": []}',
        '{"models": ["vae"]}',
        '{"models": ["gp-avae", "gp-avae"]}',
        '{"seeds": []}',
        '{"data": {"T": 20}}',
        '{"data": {"n": 4}}',
        '{"data": {"mixing": "cubic"}}',
        '{"prior": {"base_jitter": 1.0, "max_jitter": 0.1}}',
        '{"ee": {"beta2": -1.0}}',
        '{"training": {"lam": -0.5}}',
        '{"prior": {"noise": -0.01}}',
        '{"prior": {"init_length_scales": [0.1, 0.2]}}',
        '{"prior": {"init_length_scales": [0.1, 0.0, 0.2]}}',
    ])
    def test_invalid_values(self, document):
        with pytest.raises(ConfigError):
            parse_config(document)


class TestExperimentConfig:
    def test_train_config_per_variant(self):
        config = ExperimentConfig()
        assert config.train_config("gp-avae", 5).encoder_hidden == (32, 32)
        assert config.train_config("half-gp-vae", 5).encoder_hidden is None
        half = config.train_config("half-gp-avae", 5)
        assert (half.seed, half.T, half.m, half.n, half.warmup) == (5, 200, 2, 3, 100)
        assert half.init_log_var == pytest.approx(math.log(0.01))
        assert half.prior_noise == pytest.approx(0.01)
        assert half.init_length_scales is None

    def test_prior_settings_reach_train_config(self):
        config = parse_config('{"prior": {"noise": 0.05, "init_length_scales": [0.05, 0.1, 0.2]}}')
        train = config.train_config("half-gp-vae", 0)
        assert train.prior_noise == 0.05
        assert train.init_length_scales == (0.05, 0.1, 0.2)

    def test_for_seed_pins_source_seed(self):
        config = parse_config('{"seeds": [0, 1, 2]}')
        single = config.for_seed(1, source_seed=4)
        assert single.seeds == (1,)
        assert single.data.seed == 4
        assert config.data.seed is None

    def test_hash_ignores_output_dir(self):
        a = parse_config('{"output_dir": "a"}')
        b = parse_config('{"output_dir": "b"}')
        assert a.config_hash() == b.config_hash()
        assert len(a.config_hash()) == 64

    def test_hash_tracks_content(self):
        assert parse_config('{"training": {"epochs": 10}}').config_hash() != \
            parse_config('{"training": {"epochs": 11}}').config_hash()

    def test_known_keys(self):
        keys = known_keys()
        assert "training.epochs" in keys
        assert "ee.enabled" in keys
        assert "data" not in keys


class TestOverrides:
    @pytest.mark.parametrize("item,expected", [
        ("training.epochs=5", ("training.epochs", 5)),
        ("ee.enabled=false", ("ee.enabled", False)),
        ('models=["half-gp-vae"]', ("models", ["half-gp-vae"])),
        ("data.mixing=linear", ("data.mixing", "linear")),
        ("data.m=null", ("data.m", None)),
    ])
    def test_parse_override(self, item, expected):
        assert parse_override(item) == expected

    def test_override_needs_equals(self):
        with pytest.raises(ConfigError):
            parse_override("training.epochs")

    def test_config_file_then_overrides(self, tmp_path):
        path = write(tmp_path, "run.json", json.dumps({"training": {"epochs": 9, "lam": 0.5}}))
        config = load_experiment_config(path, ["training.epochs=7", "ee.enabled=false"],
                                        out=str(tmp_path / "out"), seed=4)
        assert config.training.epochs == 7
        assert config.training.lam == 0.5
        assert not config.ee.enabled
        assert config.output_dir == str(tmp_path / "out")
        assert config.seeds == (4,)

    def test_yaml_file(self, tmp_path):
        path = write(tmp_path, "run.yml", "scenario: determined\ntraining:\n  epochs: 3\n")
        config = load_experiment_config(path)
        assert config.scenario == "determined"
        assert config.training.epochs == 3

    def test_bad_override_value(self, tmp_path):
        path = write(tmp_path, "run.json", "{}")
        with pytest.raises(ConfigError) as excinfo:
            load_experiment_config(path, ["training.epochs=many"])
        assert excinfo.value.key_path == "training.epochs"

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            Config(str(tmp_path / "absent.yml"))

    def test_non_mapping_document(self, tmp_path):
        with pytest.raises(ConfigError):
            Config(write(tmp_path, "list.yml", "- 1\n- 2\n"))

    def test_shipped_config_matches_defaults(self):
        assert Config().resolve() == ExperimentConfig()

    def test_get_and_set(self, tmp_path):
        cfg = Config(write(tmp_path, "run.json", '{"training": {"epochs": 4}}'))
        assert cfg.get("training.epochs") == 4
        assert cfg.get("training.missing", "fallback") == "fallback"
        cfg.set("data.T", 64)
        assert cfg.resolve().data.T == 64


def test_resolved_config_file_reloads(tmp_path):
    config = parse_config('{"seeds": [2], "training": {"epochs": 1}}')
    path = write_resolved_config(config, tmp_path / "config.json")
    assert load_experiment_config(path) == config
