"""Framing and mel filterbank helpers shared by the speech encoder and the metrics."""

import numpy as np


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def next_pow2(n):
    return 1 << (int(n) - 1).bit_length()


def mel_filterbank(n_mels, n_fft, sample_rate, fmin=0.0, fmax=None):
    """Triangular HTK-mel filters, shape (n_mels, n_fft // 2 + 1)."""
    fmax = sample_rate / 2.0 if fmax is None else fmax
    bins = np.linspace(0.0, sample_rate / 2.0, n_fft // 2 + 1)
    edges = mel_to_hz(np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_mels + 2))
    fb = np.zeros((n_mels, len(bins)))
    for m in range(n_mels):
        lo, mid, hi = edges[m], edges[m + 1], edges[m + 2]
        rising = (bins - lo) / (mid - lo)
        falling = (hi - bins) / (hi - mid)
        fb[m] = np.maximum(0.0, np.minimum(rising, falling))
    return fb


def frame_params(sample_rate, window_ms=25.0, hop_ms=10.0):
    win = int(round(sample_rate * window_ms / 1000.0))
    hop = int(round(sample_rate * hop_ms / 1000.0))
    return win, hop


def frame_count(n_samples, win, hop):
    if n_samples < win:
        return 0
    return (n_samples - win) // hop + 1


def frame_signal(x, win, hop):
    """(n_frames, win) strided view-copy of a 1-D signal; no padding."""
    x = np.asarray(x, dtype=np.float64)
    n = frame_count(len(x), win, hop)
    if n == 0:
        raise ValueError(f"signal of {len(x)} samples is shorter than one {win}-sample window")
    idx = np.arange(win)[None, :] + hop * np.arange(n)[:, None]
    return x[idx]
