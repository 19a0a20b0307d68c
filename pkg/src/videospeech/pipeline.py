"""Glue between a RunConfig, the networks, and prepared data."""

import numpy as np
import torch

from .checkpoint import CheckpointError, load_checkpoint
from .config import RunConfig
from .critic import Critic
from .generator import Generator
from .grid_data import augment_mirror
from .speech_encoder import build_speech_encoder
from .trainer import Trainer


def build_trainer(cfg):
    if isinstance(cfg, dict):
        cfg = RunConfig.from_flat(cfg)
    phi = build_speech_encoder(cfg.speech_encoder.name, cfg.sample_rate, cfg.speech_encoder.weights or None)
    return Trainer(Generator(cfg.generator), Critic(cfg.critic), phi, cfg.trainer, cfg.losses,
                   run_config=cfg.to_flat())


def load_generator(path, use_best=True):
    """Generator (eval mode) and RunConfig from a checkpoint file."""
    data = load_checkpoint(path)
    try:
        cfg = RunConfig.from_flat(data["config"])
    except ValueError as exc:
        raise CheckpointError(f"{path}: stored configuration is invalid: {exc}") from exc
    gen = Generator(cfg.generator)
    state = data.get("best_generator") if use_best else None
    gen.load_state_dict(state or data["generator"])
    gen.eval()
    return gen, cfg


def synthesize(generator, frames):
    """Waveform (float32 numpy, T*H samples) for a preprocessed (T, C, 64, 96) array."""
    frames = np.asarray(frames, dtype=np.float32)
    if frames.ndim != 4 or frames.shape[0] == 0:
        raise ValueError(f"expected a non-empty (T, C, 64, 96) frame array, got shape {frames.shape}")
    return generator.generate(torch.from_numpy(frames)).numpy().astype(np.float32)


def training_samples(samples, mirror=True):
    """Training clips, followed by their mirrored copies when ``mirror`` is set."""
    samples = list(samples)
    return samples + [augment_mirror(s) for s in samples] if mirror else samples
