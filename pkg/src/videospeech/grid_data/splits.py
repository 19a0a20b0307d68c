"""Speaker-dependent and speaker-independent dataset splits."""

import os
import re
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

SPEAKER_DEPENDENT_SUBJECTS = (1, 2, 4, 29)
ALL_SPEAKERS = tuple(range(1, 34))
INDEPENDENT_SIZES = (15, 8, 10)
PARTS = ("train", "validation", "test")

_SID = re.compile(r"^s(\d+)/")


class SplitError(ValueError):
    pass


def speaker_of(sample_id: str) -> int:
    m = _SID.match(sample_id)
    if not m:
        raise SplitError(f"sample id {sample_id!r} is not of the form 's<speaker>/<clip>'")
    return int(m.group(1))


def _sample_id(sample):
    return sample if isinstance(sample, str) else sample.sample_id


@dataclass
class DatasetSplit:
    train: list = field(default_factory=list)
    validation: list = field(default_factory=list)
    test: list = field(default_factory=list)
    mode: str = "speaker_dependent"

    def __post_init__(self):
        if self.mode not in ("speaker_dependent", "speaker_independent"):
            raise SplitError(f"unknown split mode {self.mode!r}")
        parts = [set(self.train), set(self.validation), set(self.test)]
        for i in range(3):
            for j in range(i + 1, 3):
                common = parts[i] & parts[j]
                if common:
                    raise SplitError(f"{PARTS[i]} and {PARTS[j]} share clips: {sorted(common)[:3]}")
        if self.mode == "speaker_independent":
            spk = [{speaker_of(s) for s in p} for p in parts]
            for i in range(3):
                for j in range(i + 1, 3):
                    if spk[i] & spk[j]:
                        raise SplitError(f"speakers {sorted(spk[i] & spk[j])} in both {PARTS[i]} and {PARTS[j]}")

    def part(self, name):
        if name not in PARTS:
            raise SplitError(f"unknown split part {name!r}")
        return getattr(self, name)

    def save(self, directory):
        os.makedirs(directory, exist_ok=True)
        for name in PARTS:
            path = os.path.join(directory, f"{name}.txt")
            tmp = path + ".tmp"
            with open(tmp, "w") as fh:
                fh.writelines(f"{sid}\n" for sid in self.part(name))
            os.replace(tmp, path)
        with open(os.path.join(directory, "mode.txt"), "w") as fh:
            fh.write(self.mode + "\n")

    @classmethod
    def load(cls, directory):
        lists = {}
        for name in PARTS:
            with open(os.path.join(directory, f"{name}.txt")) as fh:
                lists[name] = [line.strip() for line in fh if line.strip()]
        mode_path = os.path.join(directory, "mode.txt")
        mode = "speaker_dependent"
        if os.path.exists(mode_path):
            with open(mode_path) as fh:
                mode = fh.read().strip()
        return cls(mode=mode, **lists)


def make_speaker_dependent_split(samples, seed, speakers=SPEAKER_DEPENDENT_SUBJECTS,
                                 ratios=(0.90, 0.05, 0.05)):
    """Random per-speaker 90/5/5 partition of the clips of ``speakers``.

    Clips of other speakers are ignored. Validation and test sizes are
    rounded (at least one each for speakers with three or more clips);
    training takes the remainder.
    """
    by_speaker = defaultdict(list)
    for s in samples:
        sid = _sample_id(s)
        if speaker_of(sid) in speakers:
            by_speaker[speaker_of(sid)].append(sid)
    if not by_speaker:
        raise SplitError(f"no clips from speakers {sorted(speakers)}")
    rng = np.random.default_rng(seed)
    train, val, test = [], [], []
    for spk in sorted(by_speaker):
        ids = sorted(by_speaker[spk])
        order = rng.permutation(len(ids))
        n_val = int(round(ratios[1] * len(ids)))
        n_test = int(round(ratios[2] * len(ids)))
        if len(ids) >= 3:
            # small corpora: keep one clip each for validation and test
            n_val, n_test = max(n_val, 1), max(n_test, 1)
        shuffled = [ids[i] for i in order]
        val += shuffled[:n_val]
        test += shuffled[n_val:n_val + n_test]
        train += shuffled[n_val + n_test:]
    return DatasetSplit(sorted(train), sorted(val), sorted(test), "speaker_dependent")


def check_assignment(assignment, universe=ALL_SPEAKERS, sizes=INDEPENDENT_SIZES):
    """Validate a ``{"train": [...], "validation": [...], "test": [...]}`` speaker assignment."""
    missing = [p for p in PARTS if p not in assignment]
    if missing:
        raise SplitError(f"assignment lacks {missing}")
    lists = [[int(x) for x in assignment[p]] for p in PARTS]
    for name, lst in zip(PARTS, lists):
        if not lst:
            raise SplitError(f"assignment for {name} is empty")
        if len(set(lst)) != len(lst):
            raise SplitError(f"assignment for {name} repeats a speaker")
    seen = {}
    for name, lst in zip(PARTS, lists):
        for spk in lst:
            if spk in seen:
                raise SplitError(f"speaker {spk} assigned to both {seen[spk]} and {name}")
            seen[spk] = name
    if universe is not None and set(seen) != set(universe):
        extra = sorted(set(seen) - set(universe))
        absent = sorted(set(universe) - set(seen))
        raise SplitError(f"assignment is not a partition of the speakers: extra={extra} missing={absent}")
    if sizes is not None and tuple(len(x) for x in lists) != tuple(sizes):
        raise SplitError(f"assignment sizes {[len(x) for x in lists]} differ from {list(sizes)}")
    return dict(zip(PARTS, lists))


def make_speaker_independent_split(samples, speaker_assignment, universe=ALL_SPEAKERS,
                                   sizes=INDEPENDENT_SIZES):
    assignment = check_assignment(speaker_assignment, universe, sizes)
    route = {spk: name for name, lst in assignment.items() for spk in lst}
    parts = {p: [] for p in PARTS}
    for s in samples:
        sid = _sample_id(s)
        spk = speaker_of(sid)
        if spk not in route:
            raise SplitError(f"clip {sid} belongs to unassigned speaker {spk}")
        parts[route[spk]].append(sid)
    return DatasetSplit(sorted(parts["train"]), sorted(parts["validation"]), sorted(parts["test"]),
                        "speaker_independent")
