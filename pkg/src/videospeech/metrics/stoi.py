"""Short-Time Objective Intelligibility (Taal et al., 2011)."""

from math import gcd

import numpy as np
from scipy.signal import resample_poly

FS = 10000
FRAME_LEN = 256
NFFT = 512
NUM_BANDS = 15
MIN_FREQ = 150
SEGMENT = 30
BETA = -15.0
DYN_RANGE = 40.0
EPS = np.finfo(np.float64).eps


def third_octave_bands(fs=FS, nfft=NFFT, num_bands=NUM_BANDS, min_freq=MIN_FREQ):
    """Binary (num_bands, nfft//2 + 1) matrix grouping FFT bins into 1/3-octave bands."""
    f = np.linspace(0, fs, nfft + 1)[: nfft // 2 + 1]
    k = np.arange(num_bands)
    lo = min_freq * 2.0 ** ((2 * k - 1) / 6)
    hi = min_freq * 2.0 ** ((2 * k + 1) / 6)
    obm = np.zeros((num_bands, len(f)))
    for i in range(num_bands):
        a = int(np.argmin((f - lo[i]) ** 2))
        b = int(np.argmin((f - hi[i]) ** 2))
        obm[i, a:b] = 1.0
    return obm


def _window(n):
    return np.hanning(n + 2)[1:-1]


def _frames(x, n, hop):
    starts = range(0, len(x) - n, hop)
    return np.array([x[i:i + n] for i in starts]).reshape(-1, n)


def _overlap_add(frames, hop):
    n_frames, n = frames.shape
    out = np.zeros((n_frames - 1) * hop + n)
    for i, f in enumerate(frames):
        out[i * hop:i * hop + n] += f
    return out


def remove_silent_frames(x, y, dyn_range=DYN_RANGE, n=FRAME_LEN, hop=FRAME_LEN // 2):
    """Drop frames whose reference energy is more than ``dyn_range`` dB below the loudest one."""
    w = _window(n)
    xf = _frames(x, n, hop) * w
    yf = _frames(y, n, hop) * w
    if len(xf) == 0:
        return np.zeros(0), np.zeros(0)
    energy = 20 * np.log10(np.linalg.norm(xf, axis=1) + EPS)
    keep = energy > energy.max() - dyn_range
    return _overlap_add(xf[keep], hop), _overlap_add(yf[keep], hop)


def _stft_mag(x, n=FRAME_LEN, nfft=NFFT):
    frames = _frames(x, n, n // 2) * _window(n)
    return np.abs(np.fft.rfft(frames, n=nfft, axis=1)).T


def resample_to(x, fs_in, fs_out=FS):
    if fs_in == fs_out:
        return np.asarray(x, dtype=np.float64)
    g = gcd(int(fs_in), int(fs_out))
    return resample_poly(np.asarray(x, dtype=np.float64), fs_out // g, fs_in // g)


def stoi(ref, deg, sample_rate):
    """Intelligibility of ``deg`` against clean ``ref`` (both 1-D, same length)."""
    ref = np.asarray(ref, dtype=np.float64).reshape(-1)
    deg = np.asarray(deg, dtype=np.float64).reshape(-1)
    if ref.shape != deg.shape:
        raise ValueError(f"signals differ in length: {ref.shape[0]} vs {deg.shape[0]}")
    x = resample_to(ref, sample_rate)
    y = resample_to(deg, sample_rate)
    x, y = remove_silent_frames(x, y)
    x_spec = _stft_mag(x) if len(x) > FRAME_LEN else np.zeros((NFFT // 2 + 1, 0))
    y_spec = _stft_mag(y) if len(y) > FRAME_LEN else np.zeros((NFFT // 2 + 1, 0))
    if x_spec.shape[1] < SEGMENT:
        raise ValueError(
            f"only {x_spec.shape[1]} active frames after silence removal; STOI needs {SEGMENT} (384 ms)"
        )
    obm = third_octave_bands()
    x_tob = np.sqrt(obm @ x_spec**2)
    y_tob = np.sqrt(obm @ y_spec**2)
    n_frames = x_tob.shape[1]
    xs = np.stack([x_tob[:, m - SEGMENT:m] for m in range(SEGMENT, n_frames + 1)])
    ys = np.stack([y_tob[:, m - SEGMENT:m] for m in range(SEGMENT, n_frames + 1)])
    scale = np.linalg.norm(xs, axis=2, keepdims=True) / (np.linalg.norm(ys, axis=2, keepdims=True) + EPS)
    y_norm = ys * scale
    y_clip = np.minimum(y_norm, xs * (1 + 10 ** (-BETA / 20)))
    xc = xs - xs.mean(axis=2, keepdims=True)
    yc = y_clip - y_clip.mean(axis=2, keepdims=True)
    xc /= np.linalg.norm(xc, axis=2, keepdims=True) + EPS
    yc /= np.linalg.norm(yc, axis=2, keepdims=True) + EPS
    return float(np.sum(xc * yc) / (xs.shape[0] * xs.shape[1]))
