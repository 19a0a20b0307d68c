"""Toy critic experiment: band-limited tones (real) against white noise (fake)."""

import numpy as np
import torch

from .critic import Critic, CriticConfig
from .losses import adversarial_terms, gradient_penalty


def tones(rng, n, length, sample_rate):
    t = np.arange(length) / sample_rate
    f = rng.uniform(200.0, 1000.0, size=(n, 1))
    phase = rng.uniform(0, 2 * np.pi, size=(n, 1))
    amp = rng.uniform(0.3, 0.7, size=(n, 1))
    return torch.tensor(amp * np.sin(2 * np.pi * f * t + phase), dtype=torch.float32)


def noise(rng, n, length):
    # same RMS range as the tones
    scale = rng.uniform(0.3, 0.7, size=(n, 1)) / np.sqrt(2)
    return torch.tensor(np.clip(scale * rng.standard_normal((n, length)), -1, 1), dtype=torch.float32)


def critic_separation_run(seed=0, steps=200, batch=16, sample_rate=8000, clip_seconds=0.125, gp_weight=10.0,
                          lr=1e-4, held_out=64):
    """Train a fresh critic for ``steps`` WGAN-GP updates; return held-out mean(real) - mean(fake)."""
    cfg = CriticConfig(clip_seconds=clip_seconds, sample_rate=sample_rate, base_channels=16, max_channels=128,
                       seed=seed)
    critic = Critic(cfg)
    opt = torch.optim.Adam(critic.parameters(), lr=lr, betas=(0.5, 0.9))
    rng = np.random.default_rng(seed)
    gen = torch.Generator().manual_seed(seed)
    n = cfg.clip_length
    for _ in range(steps):
        real, fake = tones(rng, batch, n, sample_rate), noise(rng, batch, n)
        obj, _ = adversarial_terms(critic(real), critic(fake))
        loss = obj + gp_weight * gradient_penalty(critic, real, fake, gen)
        opt.zero_grad()
        loss.backward()
        opt.step()
    test_rng = np.random.default_rng(10_000 + seed)
    with torch.no_grad():
        real_score = critic(tones(test_rng, held_out, n, sample_rate)).mean()
        fake_score = critic(noise(test_rng, held_out, n)).mean()
    return float(real_score - fake_score)
