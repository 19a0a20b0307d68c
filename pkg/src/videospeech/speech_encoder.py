"""Frozen speech-content encoders used as the feature map of the perceptual loss."""

import hashlib

import numpy as np
import torch
from torch import nn

from .dsp import frame_params, mel_filterbank, next_pow2


class SpeechFeatureMap(nn.Module):
    """Interface: a frozen, deterministic map from (B, L) waveforms to (B, F, frames) features.

    Subclasses set ``implementation_id``, ``feature_dim`` and ``receptive_context``
    (in samples) and implement ``forward``.
    """

    implementation_id = "abstract"
    feature_dim = 0
    receptive_context = 0

    def __init__(self, sample_rate):
        super().__init__()
        self.sample_rate = int(sample_rate)

    def freeze(self):
        for p in self.parameters():
            p.requires_grad_(False)
        self.eval()
        return self

    def train(self, mode=True):
        # frozen maps never enter training mode
        return super().train(False)

    def encode_speech(self, waveform, sample_rate):
        if int(sample_rate) != self.sample_rate:
            raise ValueError(f"encoder expects {self.sample_rate} Hz audio, got {sample_rate} Hz")
        x = torch.as_tensor(np.asarray(waveform) if not torch.is_tensor(waveform) else waveform,
                            dtype=torch.float32)
        squeeze = x.ndim == 1
        with torch.no_grad():
            out = self(x.unsqueeze(0) if squeeze else x)
        return out[0] if squeeze else out

    def checksum(self):
        h = hashlib.sha1()
        for name, p in sorted(self.state_dict().items()):
            h.update(name.encode())
            h.update(p.detach().cpu().numpy().tobytes())
        return h.hexdigest()

    def load_weights(self, path):
        """Load an external state dict; the encoder stays frozen."""
        state = torch.load(path, map_location="cpu", weights_only=True)
        if isinstance(state, dict) and "speech_encoder" in state:
            state = state["speech_encoder"]
        self.load_state_dict(state)
        return self.freeze()


class LogMelFrontend(nn.Module):
    """Differentiable log-mel spectrogram with unpadded framing (frame i starts at i * hop)."""

    def __init__(self, sample_rate, n_mels=40, window_ms=25.0, hop_ms=10.0, floor=1e-6):
        super().__init__()
        self.win, self.hop = frame_params(sample_rate, window_ms, hop_ms)
        self.n_fft = next_pow2(self.win)
        self.floor = floor
        self.register_buffer("window", torch.hann_window(self.win, periodic=False, dtype=torch.float64).float())
        fb = mel_filterbank(n_mels, self.n_fft, sample_rate)
        self.register_buffer("filterbank", torch.tensor(fb, dtype=torch.float32))

    def forward(self, x):
        if x.shape[-1] < self.win:
            raise ValueError(f"waveform of {x.shape[-1]} samples is shorter than one {self.win}-sample window")
        frames = x.unfold(-1, self.win, self.hop) * self.window
        power = torch.fft.rfft(frames, n=self.n_fft).abs().pow(2)
        mel = power @ self.filterbank.T
        return torch.log(mel + self.floor).transpose(-1, -2)


class FrozenMelEncoder(SpeechFeatureMap):
    """Log-mel frontend followed by a small conv stack with seed-frozen random weights."""

    implementation_id = "frozen-mel-conv"

    def __init__(self, sample_rate, n_mels=40, channels=64, n_layers=3, seed=1234):
        super().__init__(sample_rate)
        self.frontend = LogMelFrontend(sample_rate, n_mels)
        gen = torch.Generator().manual_seed(seed)
        layers, c = [], n_mels
        for i in range(n_layers):
            conv = nn.Conv1d(c, channels, kernel_size=3, padding=1)
            bound = (3.0 / (c * 3)) ** 0.5
            with torch.no_grad():
                conv.weight.uniform_(-bound, bound, generator=gen)
                conv.bias.zero_()
            layers.append(conv)
            if i < n_layers - 1:
                layers.append(nn.LeakyReLU(0.2))
            c = channels
        self.net = nn.Sequential(*layers)
        self.feature_dim = channels
        self.receptive_context = self.frontend.win + 2 * n_layers * self.frontend.hop
        self.freeze()

    def forward(self, x):
        logmel = self.frontend(x)
        # fixed affine squash of log energies into a unit-ish range
        return self.net((logmel + 6.0) / 6.0)


class LogMelEncoder(SpeechFeatureMap):
    """Bare log-mel features; a parameter-free alternative map."""

    implementation_id = "log-mel"

    def __init__(self, sample_rate, n_mels=40):
        super().__init__(sample_rate)
        self.frontend = LogMelFrontend(sample_rate, n_mels)
        self.feature_dim = n_mels
        self.receptive_context = self.frontend.win
        self.freeze()

    def forward(self, x):
        return self.frontend(x)


ENCODERS = {
    FrozenMelEncoder.implementation_id: FrozenMelEncoder,
    LogMelEncoder.implementation_id: LogMelEncoder,
}


def build_speech_encoder(name, sample_rate, weights=None):
    if name not in ENCODERS:
        raise ValueError(f"unknown speech encoder {name!r}; choose from {sorted(ENCODERS)}")
    encoder = ENCODERS[name](sample_rate)
    if weights:
        encoder.load_weights(weights)
    return encoder
