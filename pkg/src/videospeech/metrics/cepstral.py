"""Mel-cepstrum frontend and mel-cepstral distortion."""

import math

import numpy as np
from scipy.fft import dct

from ..audio import WaveformClip
from ..dsp import frame_params, frame_signal, mel_filterbank, next_pow2

MCD_SCALE = 10.0 / math.log(10.0)


def _unwrap(x, sample_rate):
    if isinstance(x, WaveformClip):
        if sample_rate is not None and sample_rate != x.sample_rate:
            raise ValueError(f"clip is at {x.sample_rate} Hz, expected {sample_rate} Hz")
        return x.samples, x.sample_rate
    if sample_rate is None:
        raise ValueError("sample_rate is required for raw arrays")
    return np.asarray(x, dtype=np.float64).reshape(-1), sample_rate


def mel_cepstrum(waveform, sample_rate=None, n_mels=40, n_coeffs=13, window_ms=25.0, hop_ms=10.0,
                 floor=1e-10):
    """(frames, n_coeffs) matrix of c1..c13 from a log-mel filterbank and an orthonormal DCT-II."""
    x, sr = _unwrap(waveform, sample_rate)
    if sr < 8000:
        raise ValueError(f"sample rate must be >= 8 kHz, got {sr}")
    win, hop = frame_params(sr, window_ms, hop_ms)
    n_fft = next_pow2(win)
    frames = frame_signal(x, win, hop) * np.hanning(win)
    power = np.abs(np.fft.rfft(frames, n=n_fft, axis=1)) ** 2
    log_mel = np.log(np.maximum(power @ mel_filterbank(n_mels, n_fft, sr).T, floor))
    return dct(log_mel, type=2, norm="ortho", axis=1)[:, 1:n_coeffs + 1]


def mcd_from_cepstra(a, b):
    """Mean over frames of (10 / ln 10) * sqrt(2 * sum_d (a_d - b_d)^2)."""
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(b, dtype=np.float64))
    if abs(a.shape[0] - b.shape[0]) > 1:
        raise ValueError(f"frame counts differ by more than one: {a.shape[0]} vs {b.shape[0]}")
    n = min(a.shape[0], b.shape[0])
    diff = a[:n] - b[:n]
    return float(np.mean(MCD_SCALE * np.sqrt(2.0 * np.sum(diff**2, axis=1))))


def mcd(ref, gen, sample_rate=None, **kwargs):
    """Frame-wise mel-cepstral distortion in dB, no time warping (c0 excluded)."""
    ref_x, sr = _unwrap(ref, sample_rate)
    gen_x, sr_gen = _unwrap(gen, sr)
    return mcd_from_cepstra(mel_cepstrum(ref_x, sr, **kwargs), mel_cepstrum(gen_x, sr_gen, **kwargs))
