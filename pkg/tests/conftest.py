"""Pytest configuration and fixtures for bargebench tests"""
import tempfile
from pathlib import Path

import numpy as np
import pytest

from bargebench.model.config import ModelConfig, TrainConfig
from bargebench.model.data import PreparedExample
from bargebench.room.scenario import ScenarioKind

TINY_MELS = 8


@pytest.fixture
def temp_dir():
    """Provide a temporary directory for test files"""
    with tempfile.TemporaryDirectory() as tmpdir:
        yield Path(tmpdir)


@pytest.fixture
def rng():
    """Provide a fixed-seed numpy generator"""
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_config():
    """Provide a small model configuration (Subnet C) that runs in milliseconds"""
    return ModelConfig(mask_subnet="C", kernel=2, n_mels=TINY_MELS, conv_channels=(2, 2), embed_dim=8)


@pytest.fixture
def tiny_train_config():
    """Provide a short training configuration"""
    return TrainConfig(epochs=2, batch_size=4, learning_rate=1e-2, validation_fraction=0.25, seed=7)


def make_examples(n, t_f=6, n_mels=TINY_MELS, keyword=(18, 1, 17), kinds=None, seed=0):
    """Synthetic prepared examples; positives carry a feature offset so the task is learnable."""
    g = np.random.default_rng(seed)
    kinds = list(kinds or [ScenarioKind.NON_PLAYBACK])
    out = []
    for i in range(n):
        kind = kinds[i % len(kinds)]
        y = 0 if kind is ScenarioKind.SELF_REFERENCING else i % 2
        mixed = g.normal(0.0, 1.0, size=(t_f, n_mels)) + (1.5 if y else 0.0)
        playback = g.normal(0.0, 1.0, size=(t_f, n_mels))
        out.append(
            PreparedExample(
                id=f"{i:06d}",
                kind=kind,
                mixed=mixed,
                playback=playback,
                phoneme_ids=tuple(keyword),
                y_utt=y,
                y_phon=tuple([y] * len(keyword)),
            )
        )
    return out


@pytest.fixture
def example_factory():
    """Provide the synthetic example builder"""
    return make_examples


@pytest.fixture
def examples():
    """Provide 16 synthetic examples, alternating negative/positive"""
    return make_examples(16)


TINY_RUN_YAML = """\
dataset:
  counts:
    NonPlayback: 2
    PlaybackMusic: 2
    PlaybackSpeech: 2
    SelfReferencing: 2
  keywords: [hey, robot]
  max_duration_s: 0.5
  max_order: 2
model:
  mask_subnet: C
  kernel: 2
  n_mels: 8
  conv_channels: [2, 2]
  embed_dim: 8
train:
  epochs: 1
  batch_size: 4
  learning_rate: 0.01
  validation_fraction: 0.25
"""


@pytest.fixture
def tiny_run_config(temp_dir):
    """Provide a YAML run configuration for an end-to-end pipeline in seconds"""
    path = temp_dir / "run.yaml"
    path.write_text(TINY_RUN_YAML)
    return path
