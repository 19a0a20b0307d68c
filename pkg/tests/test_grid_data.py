import hashlib

import numpy as np
import pytest
import torch
from hypothesis import given, settings, strategies as st

from videospeech.audio import WaveformClip
from videospeech.grid_data import (
    CANONICAL_TEMPLATE,
    AlignmentError,
    CorpusError,
    DatasetSplit,
    GridGrammarError,
    PreparedCorpus,
    SplitError,
    VideoSample,
    augment_mirror,
    estimate_similarity,
    make_speaker_dependent_split,
    make_speaker_independent_split,
    parse_grid_sentence,
    prepare_corpus,
    preprocess_frames,
    scan_corpus,
    sliding_windows,
)
from videospeech.grid_data.synthetic import write_synthetic_corpus


# grammar

def test_parse_valid_sentences():
    s = parse_grid_sentence(["bin", "blue", "at", "a", "9", "again"])
    assert (s.command, s.color, s.preposition, s.letter, s.digit, s.adverb) == ("bin", "blue", "at", "a", 9, "again")
    s = parse_grid_sentence(["set", "white", "with", "z", "0", "soon"])
    assert s.letter == "z" and s.digit == 0


def test_parse_accepts_spelled_digits_and_case():
    assert parse_grid_sentence("Place RED in Q seven please").digit == 7


def test_letter_w_rejected_with_position():
    with pytest.raises(GridGrammarError) as err:
        parse_grid_sentence(["bin", "blue", "at", "w", "9", "again"])
    assert err.value.position == 3
    assert "'w'" in str(err.value)


@pytest.mark.parametrize("tokens,position", [
    (["bin", "blue", "at", "a", "9"], None),
    (["bin", "blue", "at", "a", "9", "again", "now"], None),
    (["put", "blue", "at", "a", "9", "again"], 0),
    (["bin", "pink", "at", "a", "9", "again"], 1),
    (["bin", "blue", "on", "a", "9", "again"], 2),
    (["bin", "blue", "at", "a", "10", "again"], 4),
    (["bin", "blue", "at", "a", "9", "later"], 5),
])
def test_parse_errors(tokens, position):
    with pytest.raises(GridGrammarError) as err:
        parse_grid_sentence(tokens)
    assert err.value.position == position


def test_sentence_words_round_trip():
    s = parse_grid_sentence("lay green by f two now")
    assert parse_grid_sentence(s.words()) == s


# preprocessing

def test_similarity_recovers_known_transform():
    rng = np.random.default_rng(3)
    angle, scale, shift = 0.2, 1.3, np.array([5.0, -2.0])
    rot = np.array([[np.cos(angle), -np.sin(angle)], [np.sin(angle), np.cos(angle)]])
    src = rng.uniform(0, 100, size=(5, 2))
    dst = scale * src @ rot.T + shift
    s, r, t = estimate_similarity(src, dst)
    assert s == pytest.approx(scale)
    np.testing.assert_allclose(r, rot, atol=1e-10)
    np.testing.assert_allclose(t, shift, atol=1e-9)


def test_identity_alignment():
    s, r, t = estimate_similarity(CANONICAL_TEMPLATE, CANONICAL_TEMPLATE)
    assert s == pytest.approx(1.0)
    np.testing.assert_allclose(r, np.eye(2), atol=1e-12)
    np.testing.assert_allclose(t, 0.0, atol=1e-9)
    rng = np.random.default_rng(0)
    frames = rng.integers(0, 256, size=(3, 128, 96), dtype=np.uint8)
    anchors = np.repeat(CANONICAL_TEMPLATE[None], 3, axis=0)
    out = preprocess_frames(frames, anchors)
    expected = frames[:, 64:, :].astype(np.float32) / 255.0 * 2 - 1
    np.testing.assert_allclose(out[:, 0], expected, atol=1e-5)


def test_output_shape_three_seconds():
    frames = np.zeros((75, 140, 110), dtype=np.uint8)
    anchors = np.repeat(CANONICAL_TEMPLATE[None] + 7.0, 75, axis=0)
    assert preprocess_frames(frames, anchors).shape == (75, 1, 64, 96)


def test_constant_frames_stay_constant():
    frames = np.full((4, 150, 120, 3), 200, dtype=np.uint8)
    anchors = np.repeat(CANONICAL_TEMPLATE[None] * 1.2 + 3.0, 4, axis=0)
    out = preprocess_frames(frames, anchors)
    np.testing.assert_allclose(out, 200 / 255 * 2 - 1, atol=1e-6)


def test_rgb_channels_option():
    from videospeech.grid_data import PreprocessConfig

    frames = np.zeros((2, 128, 96, 3), dtype=np.uint8)
    anchors = np.repeat(CANONICAL_TEMPLATE[None], 2, axis=0)
    assert preprocess_frames(frames, anchors, PreprocessConfig(channels=3)).shape == (2, 3, 64, 96)


def test_preprocessing_is_deterministic():
    rng = np.random.default_rng(1)
    frames = rng.integers(0, 256, size=(5, 130, 100), dtype=np.uint8)
    anchors = np.repeat(CANONICAL_TEMPLATE[None] + rng.normal(0, 1, size=(1, 5, 2)), 5, axis=0)
    a = preprocess_frames(frames, anchors)
    b = preprocess_frames(frames, anchors)
    assert a.tobytes() == b.tobytes()


@pytest.mark.parametrize("anchors", [
    np.zeros((5, 2)) + 10.0,
    np.stack([np.linspace(0, 40, 5), np.linspace(0, 20, 5)], axis=1),
])
def test_degenerate_anchors_rejected(anchors):
    frames = np.zeros((1, 128, 96), dtype=np.uint8)
    with pytest.raises(AlignmentError):
        preprocess_frames(frames, anchors[None])


def test_wrong_anchor_count_rejected():
    with pytest.raises(AlignmentError):
        preprocess_frames(np.zeros((2, 128, 96)), np.zeros((2, 4, 2)))


# mirroring

def _sample(frames):
    audio = WaveformClip(np.linspace(-0.5, 0.5, 640), 8000)
    return VideoSample("s1/x", 1, frames, audio, parse_grid_sentence("bin blue at a 1 now"))


def test_mirror_is_involution_and_leaves_audio():
    rng = np.random.default_rng(0)
    s = _sample(rng.standard_normal((2, 1, 64, 96)).astype(np.float32))
    m = augment_mirror(s)
    assert np.array_equal(augment_mirror(m).frames, s.frames)
    assert hashlib.sha1(m.audio.samples.tobytes()).hexdigest() == hashlib.sha1(s.audio.samples.tobytes()).hexdigest()
    assert m.sentence == s.sentence


def test_mirror_reverses_columns():
    frames = np.tile(np.arange(96, dtype=np.float32), (1, 1, 64, 1))
    m = augment_mirror(_sample(frames))
    assert np.array_equal(m.frames[0, 0, 0], np.arange(96)[::-1])


# splits

def _ids(speakers, n):
    return [f"s{s}/c{i:04d}" for s in speakers for i in range(n)]


def test_speaker_dependent_sizes():
    split = make_speaker_dependent_split(_ids([1], 1000), seed=0)
    assert (len(split.train), len(split.validation), len(split.test)) == (900, 50, 50)


def test_speaker_dependent_small_speakers_keep_held_out_clips():
    split = make_speaker_dependent_split(_ids([1, 2], 4), seed=0, speakers=(1, 2))
    assert (len(split.train), len(split.validation), len(split.test)) == (4, 2, 2)
    split = make_speaker_dependent_split(_ids([1], 2), seed=0, speakers=(1,))
    assert (len(split.train), len(split.validation), len(split.test)) == (2, 0, 0)


def test_speaker_dependent_filters_subjects():
    split = make_speaker_dependent_split(_ids([1, 2, 3, 4, 29], 20), seed=0)
    used = {int(s.split("/")[0][1:]) for s in split.train + split.validation + split.test}
    assert used == {1, 2, 4, 29}
    with pytest.raises(SplitError):
        make_speaker_dependent_split(_ids([3, 5], 10), seed=0)


def test_speaker_dependent_determinism_and_seed_sensitivity():
    ids = _ids([1, 2, 4, 29], 100)
    a = make_speaker_dependent_split(ids, seed=7)
    b = make_speaker_dependent_split(ids, seed=7)
    c = make_speaker_dependent_split(ids, seed=8)
    assert a == b
    assert set(a.train) != set(c.train)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), n=st.integers(1, 60))
def test_speaker_dependent_disjoint_for_all_seeds(seed, n):
    split = make_speaker_dependent_split(_ids([1, 2, 4, 29], n), seed=seed)
    parts = [set(split.train), set(split.validation), set(split.test)]
    assert not (parts[0] & parts[1] or parts[0] & parts[2] or parts[1] & parts[2])
    assert sum(map(len, parts)) == 4 * n


def _assignment():
    speakers = list(range(1, 34))
    return {"train": speakers[:15], "validation": speakers[15:23], "test": speakers[23:]}


def test_speaker_independent_sizes():
    split = make_speaker_independent_split(_ids(range(1, 34), 10), _assignment())
    assert (len(split.train), len(split.validation), len(split.test)) == (150, 80, 100)
    spk = [{s.split("/")[0] for s in p} for p in (split.train, split.validation, split.test)]
    assert not (spk[0] & spk[1] or spk[0] & spk[2] or spk[1] & spk[2])


def test_speaker_independent_rejects_overlap_and_empty():
    bad = _assignment()
    bad["test"] = bad["test"] + [1]
    with pytest.raises(SplitError):
        make_speaker_independent_split(_ids(range(1, 34), 1), bad)
    empty = _assignment()
    empty["test"] = []
    with pytest.raises(SplitError):
        make_speaker_independent_split(_ids(range(1, 34), 1), empty)


def test_speaker_independent_requires_partition():
    partial = _assignment()
    partial["test"] = partial["test"][:-1]
    with pytest.raises(SplitError, match="partition"):
        make_speaker_independent_split(_ids(range(1, 33), 1), partial, sizes=None)


def test_split_rejects_shared_clip():
    with pytest.raises(SplitError):
        DatasetSplit(["s1/a"], ["s1/a"], [], "speaker_dependent")


def test_split_files_round_trip(tmp_path):
    split = make_speaker_dependent_split(_ids([1, 2], 40), seed=1)
    split.save(tmp_path)
    assert DatasetSplit.load(tmp_path) == split


# windows

def test_windows_count_and_edges():
    video = np.arange(75)[:, None, None, None] * np.ones((1, 1, 2, 2))
    w = sliding_windows(video, 7)
    assert w.shape == (75, 7, 1, 2, 2)
    assert list(w[0, :, 0, 0, 0]) == [0, 0, 0, 0, 1, 2, 3]
    assert list(w[74, :, 0, 0, 0]) == [71, 72, 73, 74, 74, 74, 74]
    assert list(w[10, :, 0, 0, 0]) == list(range(7, 14))


def test_window_of_one_is_the_frame():
    video = np.random.default_rng(0).standard_normal((5, 1, 3, 3))
    np.testing.assert_array_equal(sliding_windows(video, 1)[:, 0], video)


def test_even_window_rejected():
    with pytest.raises(ValueError):
        sliding_windows(np.zeros((4, 1, 2, 2)), 6)


@settings(max_examples=60, deadline=None)
@given(t=st.integers(1, 40), half=st.integers(0, 5))
def test_window_length_property(t, half):
    n = 2 * half + 1
    video = torch.arange(t, dtype=torch.float32).view(t, 1, 1, 1)
    w = sliding_windows(video, n)
    assert w.shape[0] == t
    centers = w[:, half, 0, 0, 0]
    assert torch.equal(centers, torch.arange(t, dtype=torch.float32))


# corpus layout

def test_prepare_and_load(tmp_path):
    root = tmp_path / "data"
    ids = write_synthetic_corpus(str(root), [1, 2], 3, n_frames=10, sample_rate=8000, seed=0)
    records = scan_corpus(str(root))
    assert [r.sample_id for r in records] == sorted(ids)
    split = make_speaker_dependent_split(ids, seed=0, speakers=(1, 2))
    prepare_corpus(str(root), str(tmp_path / "prep"), split)
    corpus = PreparedCorpus(str(tmp_path / "prep"))
    sample = corpus.load(split.train[0])
    assert sample.frames.shape == (10, 1, 64, 96)
    assert len(sample.audio) == 10 * 320


def test_missing_transcript_named(tmp_path):
    root = tmp_path / "data"
    write_synthetic_corpus(str(root), [1], 2, n_frames=5, sample_rate=8000)
    (root / "s1" / "c0001.txt").unlink()
    with pytest.raises(CorpusError, match="s1/c0001"):
        scan_corpus(str(root))
