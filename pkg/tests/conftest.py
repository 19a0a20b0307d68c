import numpy as np
import pytest
import torch

from videospeech.critic import Critic, CriticConfig
from videospeech.generator import Generator, GeneratorConfig


def tiny_generator_config(**overrides):
    params = dict(sample_rate=1000, encoder_channels=[2, 2, 4, 4, 4], gru_hidden=8, decoder_channels=4,
                  decoder_depth=2)
    params.update(overrides)
    return GeneratorConfig(**params)


def tiny_critic_config(**overrides):
    params = dict(sample_rate=1000, clip_seconds=0.2, base_channels=2, max_channels=8, n_layers=4)
    params.update(overrides)
    return CriticConfig(**params)


@pytest.fixture
def tiny_generator():
    return Generator(tiny_generator_config()).eval()


@pytest.fixture
def tiny_critic():
    return Critic(tiny_critic_config()).eval()


def random_video(t, seed=0, channels=1, batch=None):
    g = torch.Generator().manual_seed(seed)
    shape = (t, channels, 64, 96) if batch is None else (batch, t, channels, 64, 96)
    return torch.rand(shape, generator=g) * 2 - 1


@pytest.fixture
def rng():
    return np.random.default_rng(0)


def tiny_run_config(**overrides):
    """Flat run config for fast 8 kHz training tests."""
    flat = {
        "sample_rate": 8000,
        "generator.encoder_channels": [2, 2, 4, 4, 4],
        "generator.gru_hidden": 8,
        "generator.decoder_channels": 4,
        "generator.decoder_depth": 2,
        "critic.clip_seconds": 0.1,
        "critic.base_channels": 2,
        "critic.max_channels": 8,
        "critic.n_layers": 4,
        "trainer.batch_size": 2,
        "trainer.max_epochs": 2,
        "trainer.patience_epochs": 5,
    }
    flat.update(overrides)
    return flat


def synthetic_samples(n=4, frames=8, sample_rate=8000, seed=0):
    from videospeech.grid_data import VideoSample, preprocess_frames
    from videospeech.grid_data.synthetic import make_clip

    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        raw, anchors, audio, sentence = make_clip(rng, frames, sample_rate, speaker_id=1)
        out.append(VideoSample(f"s1/c{i}", 1, preprocess_frames(raw, anchors), audio, sentence))
    return out
