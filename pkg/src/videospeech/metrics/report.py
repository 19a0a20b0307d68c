"""Per-clip metric rows, corpus means, CSV/JSON output and external-tool plugins."""

import csv
import io
import json
import math
import os
import shlex
import subprocess
import tempfile
from dataclasses import dataclass, field

import numpy as np

from ..audio import WaveformClip, write_wav
from .cepstral import mcd
from .stoi import stoi
from .sync import av_offset
from .wer import wer

FIELDS = ("clip_id", "mcd_db", "stoi", "wer", "pesq", "av_offset_frames", "av_confidence")
NUMERIC = FIELDS[1:]
ABSENT = "NA"


class PluginError(RuntimeError):
    pass


@dataclass
class MetricReport:
    rows: list = field(default_factory=list)
    notes: dict = field(default_factory=dict)

    def means(self):
        out = {}
        for name in NUMERIC:
            vals = [r[name] for r in self.rows if r.get(name) is not None]
            out[name] = float(np.mean(vals)) if vals else None
        return out

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(FIELDS)
        for r in self.rows:
            writer.writerow([r["clip_id"]] + [_fmt(r.get(k)) for k in NUMERIC])
        return buf.getvalue()

    def summary(self):
        return {"n_clips": len(self.rows), "means": self.means(), "notes": self.notes}

    def write(self, path_prefix):
        """Write ``<prefix>.csv`` and ``<prefix>.json`` atomically; returns both paths."""
        paths = (path_prefix + ".csv", path_prefix + ".json")
        payloads = (self.to_csv(), json.dumps(self.summary(), indent=2, sort_keys=True) + "\n")
        directory = os.path.dirname(os.path.abspath(path_prefix))
        os.makedirs(directory, exist_ok=True)
        tmps = []
        try:
            for payload in payloads:
                fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
                with os.fdopen(fd, "w") as fh:
                    fh.write(payload)
                tmps.append(tmp)
            for tmp, path in zip(tmps, paths):
                os.replace(tmp, path)
        finally:
            for tmp in tmps:
                if os.path.exists(tmp):
                    os.remove(tmp)
        return paths


def _fmt(v):
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ABSENT
    if isinstance(v, float):
        return repr(round(v, 10))
    return str(v)


class _WavTool:
    def __init__(self, command, timeout=120):
        self.argv = shlex.split(command) if isinstance(command, str) else list(command)
        self.timeout = timeout

    def _run(self, *paths):
        try:
            done = subprocess.run(self.argv + list(paths), capture_output=True, text=True,
                                  timeout=self.timeout, check=False)
        except (OSError, subprocess.TimeoutExpired) as exc:
            raise PluginError(f"{self.argv[0]}: {exc}") from exc
        if done.returncode != 0:
            raise PluginError(f"{self.argv[0]} exited with {done.returncode}: {done.stderr.strip()[:200]}")
        return done.stdout


class CommandRecognizer(_WavTool):
    """Speech recognizer plugin: ``<command> <wav path>`` prints one transcript line."""

    def __call__(self, clip: WaveformClip):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "hyp.wav")
            write_wav(path, clip)
            out = self._run(path)
        lines = out.strip().splitlines()
        return lines[0].split() if lines else []


class CommandPesq(_WavTool):
    """PESQ hook: ``<command> <reference wav> <degraded wav>`` prints one number."""

    def __call__(self, ref: WaveformClip, deg: WaveformClip):
        with tempfile.TemporaryDirectory() as tmp:
            paths = os.path.join(tmp, "ref.wav"), os.path.join(tmp, "deg.wav")
            write_wav(paths[0], ref)
            write_wav(paths[1], deg)
            out = self._run(*paths)
        try:
            return float(out.strip().split()[0])
        except (IndexError, ValueError) as exc:
            raise PluginError(f"PESQ tool printed {out.strip()[:80]!r}, expected a number") from exc


def clip_metrics(clip_id, frames, ref, gen, sentence=None, recognizer=None, pesq=None,
                 av_search_range=10, fps=25):
    """Metric row for one clip; ``ref`` and ``gen`` are WaveformClips at the same rate."""
    if ref.sample_rate != gen.sample_rate:
        raise ValueError(f"{clip_id}: sample rates differ ({ref.sample_rate} vs {gen.sample_rate})")
    n = min(len(ref), len(gen))
    ref_x, gen_x = ref.samples[:n], gen.samples[:n]
    row = dict.fromkeys(FIELDS)
    row["clip_id"] = clip_id
    row["mcd_db"] = mcd(ref_x, gen_x, ref.sample_rate)
    try:
        row["stoi"] = stoi(ref_x, gen_x, ref.sample_rate)
    except ValueError:
        row["stoi"] = None
    if recognizer is not None:
        if sentence is None:
            raise ValueError(f"{clip_id}: WER needs a reference transcript")
        row["wer"] = wer(sentence.words(), recognizer(WaveformClip(gen_x, gen.sample_rate)))
    if pesq is not None:
        row["pesq"] = pesq(WaveformClip(ref_x, ref.sample_rate), WaveformClip(gen_x, gen.sample_rate))
    if frames is not None:
        r = min(av_search_range, frames.shape[0] // 2)
        if r >= 1:
            offset, conf = av_offset(frames, gen_x, gen.sample_rate, fps, r)
            row["av_offset_frames"] = offset
            row["av_confidence"] = conf
    return row


def evaluate_corpus(synthesize, samples, recognizer=None, pesq=None, av_search_range=10):
    """Score every sample. ``synthesize(frames) -> samples`` or ``None`` to score references against themselves."""
    samples = list(samples)
    if not samples:
        raise ValueError("cannot evaluate an empty split")
    report = MetricReport(notes={
        "mode": "ground_truth" if synthesize is None else "model",
        "wer": "recognizer plugin" if recognizer is not None else "absent (no recognizer configured)",
        "pesq": "external tool" if pesq is not None else "absent (no external tool configured)",
        "av_sync": "envelope-correlation estimator; confidence not on SyncNet scale",
    })
    for s in samples:
        if s.audio is None:
            raise ValueError(f"{s.sample_id}: missing reference audio")
        gen = s.audio if synthesize is None else WaveformClip(synthesize(s.frames), s.audio.sample_rate)
        report.rows.append(clip_metrics(s.sample_id, s.frames, s.audio, gen, s.sentence, recognizer, pesq,
                                        av_search_range))
    return report
