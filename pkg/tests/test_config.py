"""
Tests for config.py - validated experiment configuration
"""
import json

import pytest

from config import (
    VARIANTS,
    VERSION,
    AlignConfig,
    EncoderConfig,
    ExperimentConfig,
    GenerateConfig,
    SimConfig,
    TrainConfig,
    echo_config,
    load_config,
)
from exceptions import ConfigurationError


class TestDefaults:
    """Test documented default values"""

    @pytest.mark.unit
    def test_train_defaults(self):
        """Test combined-objective defaults"""
        config = TrainConfig()
        assert config.lambda_inv == 0.1
        assert config.lambda_g == 0.01
        assert config.p_rev == 0.5
        assert config.horizon == 8
        assert config.ptr_resample is True
        assert config.views == ["static", "wrist"]

    @pytest.mark.unit
    def test_encoder_defaults(self):
        """Test 64x64 images give 64 tokens of dim 64"""
        config = EncoderConfig()
        assert config.num_tokens == 64
        assert config.channels == 64

    @pytest.mark.unit
    def test_align_defaults(self):
        """Test gaps and thumbnail size"""
        config = AlignConfig()
        assert config.gaps == [1, 2, 4, 8, 16, 32]
        assert config.pairs_per_gap == 200
        assert config.thumb_size == 16

    @pytest.mark.unit
    def test_experiment_defaults(self):
        """Test desk-scale comparison defaults"""
        config = ExperimentConfig()
        assert config.seeds == [0, 1, 2, 3, 4]
        assert config.n_demos == 500
        assert config.low_data_demos == 100
        assert len(config.probe_tasks) >= 4


class TestValidation:
    """Test field and model validators"""

    @pytest.mark.unit
    def test_patch_must_divide_image(self):
        """Test patch size divisibility"""
        with pytest.raises(ValueError):
            EncoderConfig(image_size=64, patch_size=7)

    @pytest.mark.unit
    def test_sim_geometry(self):
        """Test inconsistent heights are rejected"""
        with pytest.raises(ValueError):
            SimConfig(pick_height=0.19, lift_z=0.15)

    @pytest.mark.unit
    def test_thumb_size_against_image(self):
        """Test thumb_size must divide the image size it is checked against"""
        config = AlignConfig(thumb_size=16)
        config.check_image_size(64)
        with pytest.raises(ConfigurationError):
            config.check_image_size(40)

    @pytest.mark.unit
    def test_experiment_thumb_size(self):
        """Test the experiment rejects a thumbnail size that does not divide its simulator images"""
        with pytest.raises(ValueError):
            ExperimentConfig(generate=GenerateConfig(sim=SimConfig(image_size=16)), align=AlignConfig(thumb_size=6))
        ExperimentConfig(generate=GenerateConfig(sim=SimConfig(image_size=16)), align=AlignConfig(thumb_size=4))

    @pytest.mark.unit
    def test_unknown_views(self):
        """Test view names are checked"""
        with pytest.raises(ValueError):
            TrainConfig(views=["top"])

    @pytest.mark.unit
    def test_gaps_sorted_unique(self):
        """Test gaps are normalized"""
        assert AlignConfig(gaps=[4, 1, 4]).gaps == [1, 4]

    @pytest.mark.unit
    def test_extra_fields_forbidden(self):
        """Test typos in config files are caught"""
        with pytest.raises(ValueError):
            GenerateConfig(n_trajs=3)

    @pytest.mark.unit
    def test_task_entries(self):
        """Test task mix accepts template ids and keys"""
        config = GenerateConfig(tasks=["pick", "stack:red:blue"])
        assert config.tasks == ["pick", "stack:red:blue"]


class TestVariants:
    """Test ablation variant switches"""

    @pytest.mark.unit
    @pytest.mark.parametrize(
        "variant,aux,ptr",
        [("bc", False, False), ("aux", True, False), ("aux-ptr", True, True)],
    )
    def test_for_variant(self, variant, aux, ptr):
        """Test switches per variant"""
        config = TrainConfig().for_variant(variant)
        assert (config.aux, config.ptr) == (aux, ptr)
        assert config.use_ptr == (aux and ptr)

    @pytest.mark.unit
    def test_unknown_variant(self):
        """Test unknown variant is a configuration error"""
        with pytest.raises(ConfigurationError):
            TrainConfig().for_variant("ptr")

    @pytest.mark.unit
    def test_variant_names(self):
        """Test the three variant names"""
        assert VARIANTS == ("bc", "aux", "aux-ptr")


class TestLoadAndEcho:
    """Test loading JSON files and echoing configs"""

    @pytest.mark.unit
    def test_load_defaults(self):
        """Test no path gives defaults"""
        assert load_config(None, TrainConfig) == TrainConfig()

    @pytest.mark.unit
    def test_load_with_overrides(self, tmp_path):
        """Test file values and overrides; None overrides are skipped"""
        path = tmp_path / "train.json"
        path.write_text(json.dumps({"steps": 10, "lambda_inv": 0.5}))
        config = load_config(str(path), TrainConfig, seed=3, steps=None)
        assert (config.steps, config.lambda_inv, config.seed) == (10, 0.5, 3)

    @pytest.mark.unit
    def test_missing_file(self, tmp_path):
        """Test a missing file is a configuration error"""
        with pytest.raises(ConfigurationError):
            load_config(str(tmp_path / "nope.json"), TrainConfig)

    @pytest.mark.unit
    def test_invalid_json(self, tmp_path):
        """Test malformed JSON is a configuration error"""
        path = tmp_path / "bad.json"
        path.write_text("{steps: 1")
        with pytest.raises(ConfigurationError):
            load_config(str(path), TrainConfig)

    @pytest.mark.unit
    def test_invalid_value(self, tmp_path):
        """Test validation failures become configuration errors"""
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"p_rev": 1.5}))
        with pytest.raises(ConfigurationError):
            load_config(str(path), TrainConfig)

    @pytest.mark.unit
    def test_echo_roundtrip(self, tmp_path):
        """Test run.json carries version, command and a reloadable config"""
        config = TrainConfig(steps=12, seed=4)
        path = echo_config(tmp_path, "train", {"variant": "aux"}, {"train": config})
        payload = json.loads(path.read_text())
        assert payload["tool_version"] == VERSION
        assert payload["command"] == "train"
        assert payload["arguments"] == {"variant": "aux"}
        assert TrainConfig.model_validate(payload["configs"]["train"]) == config


@pytest.mark.smoke
class TestConfigSmoke:
    """Quick smoke tests for configuration"""

    def test_all_config_classes_instantiate(self):
        """Test that every config section builds with its defaults"""
        from config import BCProbeConfig, HeadConfig, StateProbeConfig

        configs = [
            SimConfig(),
            GenerateConfig(),
            EncoderConfig(),
            HeadConfig(),
            TrainConfig(),
            BCProbeConfig(),
            StateProbeConfig(),
            AlignConfig(),
            ExperimentConfig(),
        ]
        assert all(configs)
