"""Video-to-waveform generator: 3D-CNN window encoder, GRU, per-frame audio decoder."""

from dataclasses import dataclass, field, asdict

import torch
from torch import nn

from .grid_data.preprocess import FPS, FRAME_HEIGHT, FRAME_WIDTH, sliding_windows


@dataclass
class GeneratorConfig:
    window_N: int = 7
    sample_rate: int = 50000
    fps: int = FPS
    channels: int = 1
    encoder_channels: list = field(default_factory=lambda: [32, 64, 128, 256, 512])
    gru_hidden: int = 256
    decoder_depth: int = 3
    decoder_channels: int = 128
    seed: int = 0

    def __post_init__(self):
        if self.window_N < 1 or self.window_N % 2 == 0:
            raise ValueError(f"window_N must be odd, got {self.window_N}")
        if len(self.encoder_channels) != 5:
            raise ValueError("the visual encoder has exactly 5 stages")
        if self.sample_rate % self.fps:
            raise ValueError(f"sample_rate {self.sample_rate} is not a multiple of fps {self.fps}")
        if self.samples_per_frame < 1:
            raise ValueError("samples per frame must be >= 1")

    @property
    def samples_per_frame(self):
        return self.sample_rate // self.fps

    @property
    def lookahead(self):
        return self.window_N // 2

    def to_dict(self):
        return asdict(self)


def upsampling_plan(h, depth):
    """Split ``h`` into a seed length and up to ``depth`` strides from {4, 2}.

    Returns ``(seed_length, strides)`` with ``seed_length * prod(strides) == h``.
    """
    strides = []
    rest = h
    while len(strides) < depth:
        if rest % 4 == 0 and rest // 4 >= 2:
            strides.append(4)
            rest //= 4
        elif rest % 2 == 0 and rest // 2 >= 2:
            strides.append(2)
            rest //= 2
        else:
            break
    return rest, strides


def _init_weights(module, generator):
    # uniform fan-in scaling drawn from a private generator
    for m in module.modules():
        if isinstance(m, (nn.Conv1d, nn.Conv3d, nn.ConvTranspose1d, nn.Linear)):
            fan_in = m.weight[0].numel() if not isinstance(m, nn.ConvTranspose1d) else m.weight.shape[0] * m.weight.shape[2]
            bound = (1.0 / fan_in) ** 0.5
            with torch.no_grad():
                m.weight.uniform_(-bound, bound, generator=generator)
                if m.bias is not None:
                    m.bias.uniform_(-bound, bound, generator=generator)
        elif isinstance(m, nn.GRU):
            bound = (1.0 / m.hidden_size) ** 0.5
            with torch.no_grad():
                for p in m.parameters():
                    p.uniform_(-bound, bound, generator=generator)


class VisualEncoder(nn.Module):
    """Five 3D conv stages over an N-frame window; the last stage is tanh without normalization."""

    def __init__(self, channels_in, channels):
        super().__init__()
        layers = []
        c = channels_in
        for i, out in enumerate(channels):
            last = i == len(channels) - 1
            layers.append(nn.Conv3d(c, out, kernel_size=3, stride=(1, 2, 2), padding=1, bias=last))
            if not last:
                layers += [nn.BatchNorm3d(out), nn.ReLU()]
            c = out
        self.net = nn.Sequential(*layers)
        self.out_dim = c

    def forward(self, windows):
        # windows: (B, N, C, H, W) -> (B, d_s)
        x = self.net(windows.transpose(1, 2))
        return torch.tanh(x.mean(dim=(2, 3, 4)))


class FrameDecoder(nn.Module):
    """Content vector -> one frame of audio (H samples in (-1, 1))."""

    def __init__(self, d_c, h, depth, channels):
        super().__init__()
        self.seed_len, self.strides = upsampling_plan(h, depth)
        self.channels = channels
        self.project = nn.Linear(d_c, channels * self.seed_len, bias=False)
        self.project_norm = nn.BatchNorm1d(channels * self.seed_len)
        ups = []
        for s in self.strides:
            ups += [
                nn.ConvTranspose1d(channels, channels, kernel_size=2 * s, stride=s, padding=s // 2, bias=False),
                nn.BatchNorm1d(channels),
                nn.ReLU(),
            ]
        self.upsample = nn.Sequential(*ups)
        self.out = nn.Conv1d(channels, 1, kernel_size=5, padding=2)
        self.h = h

    def forward(self, z):
        x = torch.relu(self.project_norm(self.project(z)))
        x = x.view(z.shape[0], self.channels, self.seed_len)
        x = self.upsample(x)
        return torch.tanh(self.out(x)).squeeze(1)


class Generator(nn.Module):
    def __init__(self, config=None):
        super().__init__()
        self.config = config or GeneratorConfig()
        cfg = self.config
        self.encoder = VisualEncoder(cfg.channels, cfg.encoder_channels)
        self.gru = nn.GRU(self.encoder.out_dim, cfg.gru_hidden, num_layers=1, batch_first=True)
        self.decoder = FrameDecoder(cfg.gru_hidden, cfg.samples_per_frame, cfg.decoder_depth, cfg.decoder_channels)
        _init_weights(self, torch.Generator().manual_seed(cfg.seed))

    @property
    def samples_per_frame(self):
        return self.config.samples_per_frame

    def _check_video(self, video):
        cfg = self.config
        if video.ndim != 5 or video.shape[2:] != (cfg.channels, FRAME_HEIGHT, FRAME_WIDTH):
            raise ValueError(
                f"expected video of shape (B, T, {cfg.channels}, {FRAME_HEIGHT}, {FRAME_WIDTH}), got {tuple(video.shape)}"
            )
        if video.shape[1] < 1:
            raise ValueError("video has no frames")

    def encode_visual(self, windows):
        """(B, N, C, 64, 96) windows -> (B, d_s) encodings in (-1, 1)."""
        cfg = self.config
        expected = (cfg.window_N, cfg.channels, FRAME_HEIGHT, FRAME_WIDTH)
        if windows.ndim != 5 or tuple(windows.shape[1:]) != expected:
            raise ValueError(f"expected windows of shape (B, {expected}), got {tuple(windows.shape)}")
        return self.encoder(windows)

    def encode_content(self, z_s, initial_state=None):
        """(B, T, d_s) -> ((B, T, d_c), final state). Strictly causal in time."""
        if z_s.shape[1] == 0:
            raise ValueError("empty encoding sequence")
        return self.gru(z_s, initial_state)

    def decode_frame_audio(self, z_c):
        """(M, d_c) -> (M, H) samples."""
        if z_c.ndim != 2 or z_c.shape[1] != self.config.gru_hidden:
            raise ValueError(f"expected (M, {self.config.gru_hidden}) content vectors, got {tuple(z_c.shape)}")
        return self.decoder(z_c)

    def forward(self, video):
        """(B, T, C, 64, 96) -> (B, T * H) waveform."""
        self._check_video(video)
        b, t = video.shape[:2]
        windows = sliding_windows(video, self.config.window_N)
        z_s = self.encode_visual(windows.reshape(b * t, *windows.shape[2:])).view(b, t, -1)
        z_c, _ = self.encode_content(z_s)
        frames = self.decode_frame_audio(z_c.reshape(b * t, -1))
        return frames.view(b, t * self.samples_per_frame)

    @torch.no_grad()
    def generate(self, video):
        """Inference on one (T, C, 64, 96) video; returns a 1-D float tensor of T*H samples."""
        video = torch.as_tensor(video, dtype=next(self.parameters()).dtype)
        if video.ndim != 4:
            raise ValueError(f"expected (T, C, {FRAME_HEIGHT}, {FRAME_WIDTH}), got {tuple(video.shape)}")
        was_training = self.training
        self.eval()
        try:
            return self(video.unsqueeze(0))[0]
        finally:
            self.train(was_training)
