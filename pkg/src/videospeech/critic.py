"""Waveform critic for the Wasserstein objective, and the uniform clip sampler."""

from contextlib import contextmanager
from dataclasses import dataclass, asdict

import numpy as np
import torch
from torch import nn


@dataclass
class CriticConfig:
    clip_seconds: float = 1.0
    sample_rate: int = 50000
    n_layers: int = 7
    stride: int = 4
    kernel_size: int = 9
    base_channels: int = 32
    max_channels: int = 512
    seed: int = 1

    def __post_init__(self):
        n = self.clip_seconds * self.sample_rate
        if abs(n - round(n)) > 1e-9 or round(n) < 1:
            raise ValueError(f"clip_seconds * sample_rate must be a positive integer, got {n}")

    @property
    def clip_length(self):
        return int(round(self.clip_seconds * self.sample_rate))

    def to_dict(self):
        return asdict(self)


@dataclass
class AudioClip:
    samples: np.ndarray
    origin: str
    start_index: int


def sample_clip(waveform, length, rng, origin="real"):
    """Uniformly positioned copy of ``length`` samples from ``waveform``."""
    waveform = np.asarray(waveform)
    if len(waveform) < length:
        raise ValueError(f"waveform of {len(waveform)} samples is shorter than the clip length {length}")
    start = int(rng.integers(0, len(waveform) - length + 1))
    return AudioClip(waveform[start:start + length].copy(), origin, start)


def sample_clips(waveforms, length, generator):
    """Batched sampler on tensors: one uniform offset per row of (B, L) ``waveforms``.

    Returns ``(clips, starts)``; clips keep the autograd link to ``waveforms``.
    """
    b, n = waveforms.shape
    if n < length:
        raise ValueError(f"waveforms of {n} samples are shorter than the clip length {length}")
    starts = torch.randint(0, n - length + 1, (b,), generator=generator)
    idx = starts[:, None] + torch.arange(length)[None, :]
    return torch.gather(waveforms, 1, idx.to(waveforms.device)), starts


def pad_to_length(waveforms, length):
    """Reflection-pad (B, L) waveforms on the right to at least ``length`` samples."""
    n = waveforms.shape[1]
    while n < length:
        extra = min(length - n, n - 1)
        if extra < 1:
            return torch.nn.functional.pad(waveforms, (0, length - n), mode="replicate" if n else "constant")
        waveforms = torch.nn.functional.pad(waveforms.unsqueeze(1), (0, extra), mode="reflect").squeeze(1)
        n = waveforms.shape[1]
    return waveforms


@contextmanager
def batch_invariant_kernels():
    """Route convolutions to kernels whose per-row result does not depend on batch size.

    oneDNN picks blocking by batch size, which changes float summation order.
    """
    previous = torch.backends.mkldnn.enabled
    torch.backends.mkldnn.enabled = False
    try:
        yield
    finally:
        torch.backends.mkldnn.enabled = previous


class Critic(nn.Module):
    """Strided 1-D conv stack with LeakyReLU and a linear head. No normalization layers."""

    def __init__(self, config=None):
        super().__init__()
        self.config = config or CriticConfig()
        cfg = self.config
        layers = []
        c, length = 1, cfg.clip_length
        for i in range(cfg.n_layers):
            out = min(cfg.base_channels * 2**i, cfg.max_channels)
            pad = cfg.kernel_size // 2
            layers += [nn.Conv1d(c, out, cfg.kernel_size, stride=cfg.stride, padding=pad), nn.LeakyReLU(0.2)]
            length = (length + 2 * pad - cfg.kernel_size) // cfg.stride + 1
            c = out
        self.convs = nn.Sequential(*layers)
        self.head = nn.Linear(c * length, 1)
        gen = torch.Generator().manual_seed(cfg.seed)
        for m in self.modules():
            if isinstance(m, (nn.Conv1d, nn.Linear)):
                bound = (1.0 / m.weight[0].numel()) ** 0.5
                with torch.no_grad():
                    m.weight.uniform_(-bound, bound, generator=gen)
                    m.bias.uniform_(-bound, bound, generator=gen)

    def forward(self, clips):
        """(B, clip_length) -> (B,) scores."""
        if clips.ndim != 2 or clips.shape[1] != self.config.clip_length:
            raise ValueError(f"expected clips of shape (B, {self.config.clip_length}), got {tuple(clips.shape)}")
        with batch_invariant_kernels():
            x = self.convs(clips.unsqueeze(1))
        # row-wise reduction instead of addmm, whose blocking depends on B
        return (x.flatten(1) * self.head.weight).sum(1) + self.head.bias

    def score(self, clip):
        """Score one :class:`AudioClip` or 1-D array."""
        samples = clip.samples if isinstance(clip, AudioClip) else clip
        x = torch.as_tensor(np.asarray(samples), dtype=next(self.parameters()).dtype)
        with torch.no_grad():
            return float(self(x.unsqueeze(0))[0])
