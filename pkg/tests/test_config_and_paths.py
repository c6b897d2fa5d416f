"""Tests for Config hierarchy, validation and the paths module"""
import os

import pytest
import yaml

from bargebench.config import DEFAULTS, Config
from bargebench.errors import ConfigError, StorageError
from bargebench.paths import atomic_write_text, ensure_within, relative_to, resolve_relative
from bargebench.validate import FieldRule, FieldValidator, PathValidator


def _write(path, text):
    path.write_text(text)
    return path


class TestConfigHierarchy:
    """Test Config with hierarchical lookup"""

    def test_defaults(self):
        """Test built-in defaults without a file"""
        cfg = Config()
        assert cfg.get("model.kernel") == 4
        assert cfg.get("aec.taps") == 1024
        assert cfg.get("seed") is None
        assert cfg.get("dataset.counts") == DEFAULTS["dataset"]["counts"]

    def test_file_overrides_defaults(self, temp_dir):
        """Test values from the YAML file win over defaults"""
        path = _write(temp_dir / "run.yaml", "model:\n  kernel: 2\ntrain:\n  epochs: 9\n")
        cfg = Config(path)
        assert cfg.get("model.kernel") == 2
        assert cfg.get("model.n_mels") == 40
        assert cfg.get("train.epochs") == 9

    def test_explicit_overrides_win(self, temp_dir):
        """Test explicit overrides beat the file; None overrides are ignored"""
        path = _write(temp_dir / "run.yaml", "seed: 3\nthreads: 2\n")
        cfg = Config(path, {"seed": 5, "threads": None})
        assert cfg.get("seed") == 5
        assert cfg.get("threads") == 2

    def test_counts_replaced_whole(self, temp_dir):
        """Test a counts mapping replaces the default instead of merging"""
        path = _write(temp_dir / "run.yaml", "dataset:\n  counts:\n    NonPlayback: 3\n")
        assert Config(path).get("dataset.counts") == {"NonPlayback": 3}

    def test_get_default(self):
        """Test unknown keys return the supplied default"""
        assert Config().get("model.nothing", "x") == "x"

    def test_unknown_section(self, temp_dir):
        """Test unknown top-level sections are rejected"""
        path = _write(temp_dir / "run.yaml", "modle:\n  kernel: 2\n")
        with pytest.raises(ConfigError) as e:
            Config(path)
        assert e.value.name == "modle"

    def test_missing_file(self, temp_dir):
        """Test a missing config file is a config error"""
        with pytest.raises(ConfigError):
            Config(temp_dir / "absent.yaml")

    def test_invalid_yaml(self, temp_dir):
        """Test malformed YAML and non-mapping documents are rejected"""
        with pytest.raises(ConfigError):
            Config(_write(temp_dir / "a.yaml", "model: [unclosed\n"))
        with pytest.raises(ConfigError):
            Config(_write(temp_dir / "b.yaml", "- 1\n- 2\n"))

    def test_resolve_path_relative_to_file(self, temp_dir):
        """Test relative paths resolve against the config file's directory"""
        sub = temp_dir / "conf"
        sub.mkdir()
        cfg = Config(_write(sub / "run.yaml", "train:\n  manifest: data/manifest.jsonl\n"))
        assert cfg.resolve_path("train.manifest") == (sub / "data" / "manifest.jsonl").resolve()
        assert cfg.resolve_path("eval.manifest") is None

    def test_save_round_trip(self, temp_dir):
        """Test the resolved configuration is written as YAML"""
        cfg = Config(overrides={"seed": 11, "model.mask_subnet": "D"})
        path = cfg.save(temp_dir / "out" / "resolved_config.yaml")
        data = yaml.safe_load(path.read_text())
        assert data == cfg.resolved()
        assert data["model"]["mask_subnet"] == "D"


class TestSeed:
    """Test seed materialization"""

    def test_explicit_seed_flows_to_dataset(self):
        """Test the dataset seed follows the run seed"""
        cfg = Config(overrides={"seed": 9})
        assert cfg.materialize_seed() == 9
        assert cfg.get("dataset.seed") == 9

    def test_dataset_seed_kept(self):
        """Test an explicit dataset seed is not replaced"""
        cfg = Config(overrides={"seed": 9, "dataset.seed": 4})
        cfg.materialize_seed()
        assert cfg.get("dataset.seed") == 4

    def test_drawn_seed_recorded(self):
        """Test a drawn seed is stored so the resolved config reproduces the run"""
        cfg = Config()
        seed = cfg.materialize_seed()
        assert 0 <= seed < 2**63
        assert cfg.resolved()["seed"] == seed
        assert cfg.get("dataset.seed") == seed


class TestValidation:
    """Test scoped validation"""

    def test_defaults_valid_for_simulate(self):
        """Test the default configuration with toy sources validates"""
        cfg = Config(overrides={"seed": 1})
        cfg.materialize_seed()
        cfg.validate("simulate")

    def test_all_issues_named(self):
        """Test every bad field is reported in one error"""
        cfg = Config(overrides={"seed": 1, "dataset.positive_fraction": 1.5, "dataset.counts": {"Kitchen": 1}})
        cfg.materialize_seed()
        with pytest.raises(ConfigError) as e:
            cfg.validate("simulate")
        assert "dataset.positive_fraction" in e.value.name
        assert "dataset.counts.Kitchen" in e.value.name
        kinds = {i["kind"] for i in e.value.details["issues"]}
        assert kinds == {"range", "choice"}

    def test_train_needs_manifest(self):
        """Test training requires a manifest"""
        with pytest.raises(ConfigError, match="train.manifest"):
            Config(overrides={"seed": 1}).validate("train")

    def test_eval_paths_must_exist(self, temp_dir):
        """Test eval inputs must point at existing files"""
        cfg = Config(
            overrides={"seed": 1, "eval.manifest": str(temp_dir / "m.jsonl"), "eval.checkpoint": str(temp_dir / "c.json")}
        )
        with pytest.raises(ConfigError) as e:
            cfg.validate("eval")
        assert [i["kind"] for i in e.value.details["issues"]] == ["path_missing", "path_missing"]

    def test_model_choices(self):
        """Test an unknown mask subnet is a choice issue"""
        cfg = Config(overrides={"seed": 1, "model.mask_subnet": "E", "eval.manifest": "x", "eval.checkpoint": "y"})
        with pytest.raises(ConfigError, match="model.mask_subnet"):
            cfg.validate("eval")

    def test_aec_step_range(self):
        """Test the NLMS step must lie in (0, 2]"""
        with pytest.raises(ConfigError, match="aec.step"):
            Config(overrides={"seed": 1, "aec.step": 2.5}).validate("aec")
        Config(overrides={"seed": 1, "aec.step": 2.0}).validate("aec")

    def test_negative_seed(self):
        """Test seeds must be non-negative"""
        with pytest.raises(ConfigError, match="seed"):
            Config(overrides={"seed": -1}).validate("report")


class TestValidators:
    """Test the field and path validators"""

    def test_bool_is_not_a_number(self):
        """Test booleans are rejected for integer fields"""
        issues = FieldValidator([FieldRule("threads", (int,), low=1)]).run(Config(overrides={"threads": True}))
        assert [i.kind for i in issues] == ["type"]

    def test_optional_field(self):
        """Test optional fields may be absent"""
        assert FieldValidator([FieldRule("train.max_steps", (int,), required=False)]).run(Config()) == []

    def test_exclusive_low(self):
        """Test exclusive lower bounds reject the bound itself"""
        rule = FieldRule("aec.eps", (float,), low=0.0, low_exclusive=True)
        issues = FieldValidator([rule]).run(Config(overrides={"aec.eps": 0.0}))
        assert issues[0].kind == "range"

    def test_path_validator_skip(self, temp_dir):
        """Test built-in source names need no file but real paths must exist"""
        cfg = Config(overrides={"dataset.sources": {"speech": "toy", "music": "missing.jsonl", "playback_speech": "toy"}})
        keys = [f"dataset.sources.{k}" for k in ("speech", "music", "playback_speech")]
        issues = PathValidator(keys, temp_dir, skip=("toy",)).run(cfg)
        assert [i.name for i in issues] == ["dataset.sources.music"]
        assert issues[0].details["path"] == str(temp_dir / "missing.jsonl")


class TestPaths:
    """Test output confinement and path helpers"""

    def test_ensure_within(self, temp_dir):
        """Test relative targets resolve inside the root"""
        assert ensure_within(temp_dir, "a/b.wav") == (temp_dir / "a" / "b.wav").resolve()
        assert ensure_within(temp_dir, temp_dir) == temp_dir.resolve()

    def test_ensure_within_escape(self, temp_dir):
        """Test targets outside the root are refused"""
        with pytest.raises(StorageError):
            ensure_within(temp_dir / "out", "../elsewhere.wav")
        with pytest.raises(StorageError):
            ensure_within(temp_dir / "out", temp_dir / "outside.wav")

    def test_relative_round_trip(self, temp_dir):
        """Test manifest-relative paths resolve back to the same file"""
        target = temp_dir / "audio" / "000001_mixed.wav"
        rel = relative_to(temp_dir, target)
        assert rel == "audio/000001_mixed.wav"
        assert resolve_relative(temp_dir, rel) == target.resolve()

    def test_resolve_relative_absolute(self, temp_dir):
        """Test absolute paths pass through"""
        assert resolve_relative(temp_dir / "x", temp_dir / "y.wav") == temp_dir / "y.wav"

    def test_atomic_write(self, temp_dir):
        """Test atomic writes create parents and leave no temp files"""
        path = atomic_write_text(temp_dir / "deep" / "dir" / "file.txt", "hello\n")
        assert path.read_text() == "hello\n"
        atomic_write_text(path, "again\n")
        assert path.read_text() == "again\n"
        assert os.listdir(path.parent) == ["file.txt"]

    def test_atomic_write_failure(self, temp_dir):
        """Test an unwritable target is a storage error"""
        blocker = temp_dir / "blocker"
        blocker.write_text("")
        with pytest.raises(StorageError):
            atomic_write_text(blocker / "child.txt", "x")
