"""Audio-visual offset from mouth-motion energy vs. audio loudness envelope.

A lightweight stand-in for a learned synchrony model: its confidence scale is
not comparable to SyncNet's.
"""

import numpy as np


def motion_energy(video):
    """Mean absolute inter-frame difference; entry t compares frames t and t-1 (entry 0 is 0)."""
    v = np.asarray(video, dtype=np.float64)
    out = np.zeros(v.shape[0])
    if v.shape[0] > 1:
        out[1:] = np.abs(np.diff(v, axis=0)).reshape(v.shape[0] - 1, -1).mean(axis=1)
    return out


def audio_envelope(audio, n_frames, samples_per_frame):
    """Per-video-frame RMS of the audio; frames past the end of the audio are 0."""
    a = np.asarray(audio, dtype=np.float64).reshape(-1)
    env = np.zeros(n_frames)
    for t in range(n_frames):
        seg = a[t * samples_per_frame:(t + 1) * samples_per_frame]
        if len(seg):
            env[t] = np.sqrt(np.mean(seg**2))
    return env


def _pearson(a, b):
    a = a - a.mean()
    b = b - b.mean()
    denom = np.sqrt((a * a).sum() * (b * b).sum())
    return float((a * b).sum() / denom) if denom > 0 else 0.0


def correlation_curve(motion, envelope, search_range):
    """Pearson correlation of motion[t] with envelope[t + k] for k in [-R, R]."""
    n = len(motion)
    curve = []
    for k in range(-search_range, search_range + 1):
        lo, hi = max(0, -k), min(n, n - k)
        # skip t = 0, where motion energy is undefined
        lo = max(lo, 1)
        curve.append(_pearson(motion[lo:hi], envelope[lo + k:hi + k]))
    return np.array(curve)


def av_offset(video, audio, sample_rate, fps=25, search_range=10):
    """Return ``(offset_frames, confidence)``.

    A positive offset means the audio lags the video by that many frames.
    Confidence is the peak of the correlation curve minus its median.
    """
    video = np.asarray(video)
    n = video.shape[0]
    if search_range < 1:
        raise ValueError("search_range must be >= 1")
    if n < 2 * search_range:
        raise ValueError(f"clip of {n} frames is shorter than 2 x search range ({2 * search_range})")
    hop = sample_rate // fps
    audio = np.asarray(audio).reshape(-1)
    if abs(len(audio) / hop - n) > search_range:
        raise ValueError(f"audio ({len(audio) / hop:.1f} frames) and video ({n} frames) durations disagree")
    curve = correlation_curve(motion_energy(video), audio_envelope(audio, n, hop), search_range)
    best = int(np.argmax(curve))
    return best - search_range, float(curve[best] - np.median(curve))
