import json

import pytest

from exprauth.config import ExperimentConfig, preset
from exprauth.errors import ConfigurationError


class TestRoundtrip:
    def test_default_roundtrip(self):
        cfg = ExperimentConfig()
        again = ExperimentConfig.from_dict(cfg.to_dict())
        assert again == cfg

    def test_partial_override(self):
        cfg = ExperimentConfig.from_dict({
            "model": {"L": 50, "model_dim": 64, "num_heads": 4},
            "training": {"epochs": 5},
            "seed": 3,
        })
        assert cfg.model.L == 50
        assert cfg.model.mlp_dim == 1024     # untouched default
        assert cfg.training.epochs == 5
        assert cfg.seed == 3

    def test_load_from_file(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"preset": "desk", "seed": 9}))
        cfg = ExperimentConfig.load(str(path))
        assert cfg.model.model_dim == 64
        assert cfg.seed == 9

    def test_preset_plus_override(self):
        cfg = ExperimentConfig.from_dict({
            "preset": "desk",
            "training": {"epochs": 2},
        })
        assert cfg.model.L == 50             # from the preset
        assert cfg.training.epochs == 2      # overridden
        assert cfg.training.batch_size == 64


class TestStrictness:
    def test_unknown_top_level_key(self):
        with pytest.raises(ConfigurationError):
            ExperimentConfig.from_dict({"modle": {}})

    def test_unknown_section_key(self):
        with pytest.raises(ConfigurationError):
            ExperimentConfig.from_dict({"model": {"model_dims": 64}})

    def test_invalid_value_propagates(self):
        with pytest.raises(ConfigurationError):
            ExperimentConfig.from_dict({"model": {"model_dim": 10, "num_heads": 4}})

    def test_invalid_json_file(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        with pytest.raises(ConfigurationError):
            ExperimentConfig.load(str(path))

    def test_non_object_root(self):
        with pytest.raises(ConfigurationError):
            ExperimentConfig.from_dict([1, 2, 3])


class TestPresets:
    def test_paper_preset(self):
        cfg = preset("paper")
        assert cfg.model.L == 200
        assert cfg.model.model_dim == 512
        assert cfg.model.mlp_dim == 1024
        assert cfg.model.num_heads == 8
        assert cfg.model.num_layers == 8
        assert cfg.training.batch_size == 256
        assert cfg.training.learning_rate == pytest.approx(4e-4)
        assert cfg.scoring.t_start == 201 and cfg.scoring.t_end == 800
        assert cfg.scoring.noise_count == 64
        assert cfg.schedule.T == 1000

    def test_desk_preset_is_consistent(self):
        cfg = preset("desk")
        assert cfg.model.model_dim % cfg.model.num_heads == 0
        assert cfg.model.L == 50
        assert cfg.synth.num_personas == 16

    def test_unknown_preset(self):
        with pytest.raises(ConfigurationError):
            preset("huge")
