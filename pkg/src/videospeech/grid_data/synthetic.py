"""Procedurally generated GRID-style clips for smoke runs and tests.

Each clip is a cartoon face whose mouth opening follows a smooth random
trajectory; the audio is a harmonic voice whose loudness and brightness
track the same trajectory, so video and audio are genuinely coupled.
"""

import os

import numpy as np
from scipy import ndimage

from ..audio import WaveformClip, write_wav
from .grammar import ADVERBS, COLORS, COMMANDS, LETTERS, PREPOSITIONS, GridSentence
from .preprocess import CANONICAL_TEMPLATE, FPS


def random_sentence(rng):
    return GridSentence(
        str(rng.choice(COMMANDS)), str(rng.choice(COLORS)), str(rng.choice(PREPOSITIONS)),
        str(rng.choice(LETTERS)), int(rng.integers(10)), str(rng.choice(ADVERBS)),
    )


def mouth_trajectory(rng, n_frames):
    """Opening in [0, 1] per frame: six bumps (one per word) plus jitter."""
    t = np.arange(n_frames)
    opening = np.zeros(n_frames)
    centers = np.sort(rng.uniform(0.1, 0.9, size=6)) * n_frames
    for c in centers:
        width = rng.uniform(1.0, 2.5)
        opening += rng.uniform(0.5, 1.0) * np.exp(-0.5 * ((t - c) / width) ** 2)
    return np.clip(opening, 0.0, 1.0)


def render_face(opening, mouth_width=30.0, height=128, width=96):
    """Grayscale face on the canonical canvas, values in [0, 1]."""
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    img = np.full((height, width), 0.75)
    for x, y in ((28.0, 40.0), (68.0, 40.0)):
        img[((xx - x) / 10.0) ** 2 + ((yy - y) / 4.0) ** 2 <= 1.0] = 0.2
    nose = CANONICAL_TEMPLATE[4]
    img[((xx - nose[0]) / 4.0) ** 2 + ((yy - nose[1]) / 3.0) ** 2 <= 1.0] = 0.5
    half_h = 2.0 + 10.0 * opening
    lips = ((xx - 48.0) / (mouth_width / 2 + 3)) ** 2 + ((yy - 96.0) / (half_h + 3)) ** 2 <= 1.0
    inner = ((xx - 48.0) / (mouth_width / 2)) ** 2 + ((yy - 96.0) / half_h) ** 2 <= 1.0
    img[lips] = 0.45
    img[inner] = 0.05
    return img


def synthesize_voice(opening, sample_rate, f0, rng):
    """Harmonic source, amplitude and spectral tilt driven by the opening."""
    hop = sample_rate // FPS
    n = len(opening) * hop
    frame_t = (np.arange(len(opening)) + 0.5) * hop
    env = np.interp(np.arange(n), frame_t, opening)
    vibrato = 1.0 + 0.03 * np.sin(2 * np.pi * rng.uniform(3, 6) * np.arange(n) / sample_rate)
    phase = 2 * np.pi * np.cumsum(f0 * vibrato) / sample_rate
    voice = np.zeros(n)
    for k in range(1, 16):
        if k * f0 * 1.05 >= sample_rate / 2:
            break
        voice += np.exp(-k / (1.0 + 6.0 * env)) * np.sin(k * phase)
    voice /= np.abs(voice).max() + 1e-12
    noise = 0.02 * rng.standard_normal(n)
    return np.clip(0.8 * env * voice + noise * env, -1.0, 1.0)


def pose_frames(canvas_frames, rng, out_hw=(144, 112)):
    """Place canonical renders into a larger raw frame under a random similarity pose."""
    angle = rng.uniform(-0.12, 0.12)
    scale = rng.uniform(0.9, 1.1)
    shift = rng.uniform(-4, 4, size=2) + (np.array(out_hw[::-1]) - np.array([96, 128])) / 2
    rot = np.array([[np.cos(angle), -np.sin(angle)], [np.sin(angle), np.cos(angle)]])
    anchors = (scale * CANONICAL_TEMPLATE @ rot.T) + shift
    inv = rot.T / scale
    offset_xy = -inv @ shift
    frames = np.stack([
        ndimage.affine_transform(f, inv[::-1, ::-1], offset=offset_xy[::-1], output_shape=out_hw,
                                 order=1, mode="nearest")
        for f in canvas_frames
    ])
    return frames, np.repeat(anchors[None], len(canvas_frames), axis=0)


def make_clip(rng, n_frames, sample_rate, speaker_id=1, posed=True):
    """Return ``(raw_frames uint8, anchors, WaveformClip, GridSentence)``."""
    f0 = 90.0 + 7.0 * (speaker_id % 12)
    mouth_width = 24.0 + (speaker_id % 5) * 3.0
    opening = mouth_trajectory(rng, n_frames)
    canvas = np.stack([render_face(o, mouth_width) for o in opening])
    if posed:
        frames, anchors = pose_frames(canvas, rng)
    else:
        frames, anchors = canvas, np.repeat(CANONICAL_TEMPLATE[None], n_frames, axis=0)
    frames = np.round(np.clip(frames, 0, 1) * 255).astype(np.uint8)
    audio = WaveformClip(synthesize_voice(opening, sample_rate, f0, rng), sample_rate)
    return frames, anchors, audio, random_sentence(rng)


def write_synthetic_corpus(root, speakers, clips_per_speaker, n_frames=25, sample_rate=8000, seed=0):
    """Create a dataset root in the on-disk layout; returns the list of sample ids."""
    rng = np.random.default_rng(seed)
    ids = []
    for spk in speakers:
        spk_dir = os.path.join(root, f"s{spk}")
        os.makedirs(spk_dir, exist_ok=True)
        for i in range(clips_per_speaker):
            clip = f"c{i:04d}"
            frames, anchors, audio, sentence = make_clip(rng, n_frames, sample_rate, spk)
            base = os.path.join(spk_dir, clip)
            np.save(base + ".frames.npy", frames)
            np.save(base + ".anchors.npy", anchors)
            write_wav(base + ".wav", audio)
            with open(base + ".txt", "w") as fh:
                fh.write(str(sentence) + "\n")
            ids.append(f"s{spk}/{clip}")
    return ids
