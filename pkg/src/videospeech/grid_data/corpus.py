"""On-disk corpus layout and the prepared (preprocessed) cache.

Dataset root::

    <root>/s<speaker>/<clip>.frames.npy    (T, H, W) or (T, H, W, 3) raw frames
    <root>/s<speaker>/<clip>.anchors.npy   (T, 5, 2) landmark (x, y) positions
    <root>/s<speaker>/<clip>.wav           mono 16-bit PCM
    <root>/s<speaker>/<clip>.txt           six-word transcript

Prepared directory::

    <out>/manifest.json
    <out>/splits/{train,validation,test}.txt
    <out>/cache/s<speaker>_<clip>.npy      (T, C, 64, 96) float32 frames
"""

import hashlib
import json
import os
import re
from dataclasses import dataclass

import numpy as np

from ..audio import WaveformClip, read_wav
from .grammar import GridSentence, parse_grid_sentence
from .preprocess import FPS, PreprocessConfig, preprocess_frames
from .splits import DatasetSplit, speaker_of

_SPEAKER_DIR = re.compile(r"^s(\d+)$")


class CorpusError(ValueError):
    pass


@dataclass
class VideoSample:
    sample_id: str
    speaker_id: int
    frames: np.ndarray
    audio: WaveformClip
    sentence: GridSentence

    @property
    def n_frames(self):
        return self.frames.shape[0]


@dataclass(frozen=True)
class ClipRecord:
    sample_id: str
    speaker_id: int
    frames_path: str
    anchors_path: str
    wav_path: str
    transcript_path: str


def scan_corpus(root):
    """Find every clip under ``root``; raises naming the first incomplete clip."""
    if not os.path.isdir(root):
        raise CorpusError(f"dataset root {root!r} is not a directory")
    records = []
    for name in sorted(os.listdir(root)):
        m = _SPEAKER_DIR.match(name)
        spk_dir = os.path.join(root, name)
        if not m or not os.path.isdir(spk_dir):
            continue
        speaker = int(m.group(1))
        for fname in sorted(os.listdir(spk_dir)):
            if not fname.endswith(".frames.npy"):
                continue
            clip = fname[: -len(".frames.npy")]
            base = os.path.join(spk_dir, clip)
            rec = ClipRecord(f"s{speaker}/{clip}", speaker, base + ".frames.npy",
                             base + ".anchors.npy", base + ".wav", base + ".txt")
            for label, path in (("anchors", rec.anchors_path), ("audio", rec.wav_path),
                                ("transcript", rec.transcript_path)):
                if not os.path.exists(path):
                    raise CorpusError(f"clip {rec.sample_id}: missing {label} file {path}")
            records.append(rec)
    if not records:
        raise CorpusError(f"no clips found under {root!r}")
    return records


def read_transcript(path):
    with open(path) as fh:
        return parse_grid_sentence(fh.read())


def fit_audio(samples, n_frames, samples_per_frame):
    """Trim or zero-pad audio to exactly ``n_frames * samples_per_frame`` samples.

    The source must already match the video duration within one frame hop.
    """
    target = n_frames * samples_per_frame
    if abs(len(samples) - target) > samples_per_frame:
        raise CorpusError(
            f"audio has {len(samples)} samples but {n_frames} frames need {target} (+/- {samples_per_frame})"
        )
    out = np.zeros(target, dtype=np.float32)
    n = min(target, len(samples))
    out[:n] = samples[:n]
    return out


def load_raw_sample(record, config=PreprocessConfig(), sample_rate=None):
    frames = preprocess_frames(np.load(record.frames_path), np.load(record.anchors_path), config)
    audio = read_wav(record.wav_path)
    if sample_rate is not None and audio.sample_rate != sample_rate:
        raise CorpusError(f"clip {record.sample_id}: audio at {audio.sample_rate} Hz, expected {sample_rate} Hz")
    hop = audio.sample_rate // FPS
    audio = WaveformClip(fit_audio(audio.samples, frames.shape[0], hop), audio.sample_rate)
    return VideoSample(record.sample_id, record.speaker_id, frames, audio, read_transcript(record.transcript_path))


def cache_name(sample_id):
    return sample_id.replace("/", "_") + ".npy"


def _atomic_save_npy(path, array):
    tmp = path + ".tmp.npy"
    np.save(tmp, array)
    os.replace(tmp, path)


def prepare_corpus(root, out_dir, split, config=PreprocessConfig(), records=None):
    """Write split lists, preprocessed frame cache and a manifest; idempotent."""
    records = records if records is not None else scan_corpus(root)
    wanted = set(split.train) | set(split.validation) | set(split.test)
    os.makedirs(os.path.join(out_dir, "cache"), exist_ok=True)
    sample_rate = None
    clips = {}
    for rec in records:
        if rec.sample_id not in wanted:
            continue
        sample = load_raw_sample(rec, config, sample_rate)
        sample_rate = sample.audio.sample_rate
        _atomic_save_npy(os.path.join(out_dir, "cache", cache_name(rec.sample_id)), sample.frames)
        clips[rec.sample_id] = {
            "wav": os.path.abspath(rec.wav_path),
            "transcript": str(sample.sentence),
            "n_frames": int(sample.n_frames),
            "frames_sha1": hashlib.sha1(sample.frames.tobytes()).hexdigest(),
        }
    missing = wanted - set(clips)
    if missing:
        raise CorpusError(f"split references unknown clips: {sorted(missing)[:3]}")
    split.save(os.path.join(out_dir, "splits"))
    manifest = {
        "dataset_root": os.path.abspath(root),
        "sample_rate": sample_rate,
        "fps": FPS,
        "channels": config.channels,
        "mode": split.mode,
        "clips": clips,
    }
    path = os.path.join(out_dir, "manifest.json")
    with open(path + ".tmp", "w") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
    os.replace(path + ".tmp", path)
    return manifest


class PreparedCorpus:
    """Read access to a prepared directory."""

    def __init__(self, directory):
        self.directory = directory
        path = os.path.join(directory, "manifest.json")
        if not os.path.exists(path):
            raise CorpusError(f"{directory!r} is not a prepared corpus (no manifest.json)")
        with open(path) as fh:
            self.manifest = json.load(fh)
        self.split = DatasetSplit.load(os.path.join(directory, "splits"))
        self.sample_rate = self.manifest["sample_rate"]

    def ids(self, part):
        return list(self.split.part(part))

    def load(self, sample_id):
        info = self.manifest["clips"].get(sample_id)
        if info is None:
            raise CorpusError(f"unknown clip {sample_id!r}")
        frames = np.load(os.path.join(self.directory, "cache", cache_name(sample_id)))
        audio = read_wav(info["wav"])
        hop = audio.sample_rate // FPS
        audio = WaveformClip(fit_audio(audio.samples, frames.shape[0], hop), audio.sample_rate)
        return VideoSample(sample_id, speaker_of(sample_id), frames, audio,
                           parse_grid_sentence(info["transcript"]))

    def load_part(self, part):
        return [self.load(sid) for sid in self.ids(part)]
