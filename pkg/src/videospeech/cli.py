"""Command-line entry points: prepare, train, synthesize, evaluate (plus a synthetic corpus writer).

Failures exit nonzero with a single stderr line of the form

    videospeech: error category=<name> message="<text>"
"""

import argparse
import json
import logging
import os
import sys

import numpy as np
import yaml

from .audio import WaveformClip, write_wav
from .checkpoint import CheckpointError
from .config import ConfigError, PRESETS, load_config
from .grid_data import (
    AlignmentError,
    CorpusError,
    GridGrammarError,
    PreparedCorpus,
    PreprocessConfig,
    SplitError,
    make_speaker_dependent_split,
    make_speaker_independent_split,
    prepare_corpus,
    preprocess_frames,
    scan_corpus,
)
from .grid_data.synthetic import write_synthetic_corpus
from .metrics import CommandPesq, CommandRecognizer, PluginError, evaluate_corpus
from .pipeline import build_trainer, load_generator, synthesize, training_samples
from .trainer import TrainingError, load_trainer, train

log = logging.getLogger("videospeech")

DATA_ROOT_ENV = "VIDEOSPEECH_DATA_ROOT"

# exception type -> (category, exit code); first match wins
ERROR_CATEGORIES = (
    (ConfigError, "config", 2),
    ((CorpusError, SplitError, GridGrammarError, AlignmentError), "data", 3),
    (CheckpointError, "checkpoint", 4),
    (TrainingError, "training", 5),
    (PluginError, "plugin", 6),
    (ValueError, "input", 7),
    (OSError, "io", 8),
)


class UsageError(ConfigError):
    pass


def _config(args, extra=()):
    return load_config(args.config, list(args.overrides) + list(extra), args.preset)


def _data_root(args):
    root = args.data_root or os.environ.get(DATA_ROOT_ENV)
    if not root:
        raise UsageError(f"no dataset root: pass --data-root or set {DATA_ROOT_ENV}")
    if not os.path.isdir(root):
        raise CorpusError(f"dataset root {root!r} is not a directory")
    return root


def _atomic_text(path, text):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path + ".tmp", "w") as fh:
        fh.write(text)
    os.replace(path + ".tmp", path)


def cmd_prepare(args):
    extra = []
    if args.split_mode:
        extra.append(f"data.split_mode={args.split_mode}")
    if args.seed is not None:
        extra.append(f"data.split_seed={args.seed}")
    if args.assignment:
        extra.append(f"data.assignment_file={args.assignment}")
    cfg = _config(args, extra)
    root = _data_root(args)
    records = scan_corpus(root)
    data = cfg.data
    if data.split_mode == "speaker_dependent":
        split = make_speaker_dependent_split(records, data.split_seed)
    elif data.split_mode == "speaker_independent":
        if not data.assignment_file:
            raise UsageError("speaker_independent splits need an assignment file (--assignment)")
        with open(data.assignment_file) as fh:
            assignment = yaml.safe_load(fh)
        if not isinstance(assignment, dict):
            raise SplitError(f"{data.assignment_file}: expected a mapping of train/validation/test speaker lists")
        split = make_speaker_independent_split(records, assignment)
    else:
        raise ConfigError(f"unknown data.split_mode {data.split_mode!r}")
    manifest = prepare_corpus(root, args.out, split, PreprocessConfig(channels=data.channels), records)
    log.info("prepared %d clips (%s)", len(manifest["clips"]), split.mode)
    print(json.dumps({"out": args.out, "mode": split.mode, "train": len(split.train),
                      "validation": len(split.validation), "test": len(split.test)}, sort_keys=True))
    return 0


def cmd_synthetic_corpus(args):
    ids = write_synthetic_corpus(args.out, args.speakers, args.clips, args.frames, args.sample_rate, args.seed)
    print(json.dumps({"out": args.out, "clips": len(ids)}))
    return 0


def _check_corpus_rate(corpus, sample_rate):
    if corpus.sample_rate != sample_rate:
        raise ConfigError(f"prepared corpus is at {corpus.sample_rate} Hz but the configuration uses "
                          f"{sample_rate} Hz")


def cmd_train(args):
    corpus = PreparedCorpus(args.prepared)
    last = os.path.join(args.out, "last.pt")
    if args.resume:
        trainer = load_trainer(last, build_trainer)
        log.info("resuming from %s at epoch %d", last, trainer.state.epoch)
    else:
        cfg = _config(args)
        trainer = build_trainer(cfg)
    # budgets may change on resume; everything else comes from the checkpoint
    if args.max_generator_steps is not None:
        trainer.config.max_generator_steps = args.max_generator_steps
    if args.max_epochs is not None:
        trainer.config.max_epochs = args.max_epochs
    _check_corpus_rate(corpus, trainer.generator.config.sample_rate)
    mirror = trainer.run_config.get("data.mirror_augment", True)
    train_set = training_samples(corpus.load_part("train"), mirror)
    val_set = corpus.load_part("validation")
    os.makedirs(args.out, exist_ok=True)
    _atomic_text(os.path.join(args.out, "config.yaml"), yaml.safe_dump(trainer.run_config, sort_keys=True))
    state = train(trainer, train_set, val_set, out_dir=args.out, resume=args.resume,
                  max_wall_seconds=args.max_wall_seconds)
    print(json.dumps({"best": os.path.join(args.out, "best.pt"), "epochs": state.epoch,
                      "generator_steps": state.generator_steps, "critic_steps": state.critic_steps,
                      "best_val_mcd": state.best_val_mcd, "stopped_early": state.stopped}, sort_keys=True))
    return 0


def _load_frames(path, anchors_path, channels):
    frames = np.load(path)
    if anchors_path:
        return preprocess_frames(frames, np.load(anchors_path), PreprocessConfig(channels=channels))
    if frames.ndim != 4:
        raise ValueError(f"{path}: expected preprocessed (T, C, 64, 96) frames or raw frames with --anchors, "
                         f"got shape {frames.shape}")
    return frames.astype(np.float32)


def cmd_synthesize(args):
    generator, cfg = load_generator(args.checkpoint, use_best=not args.use_last)
    if args.config or args.preset or args.overrides:
        wanted = _config(args)
        if wanted.sample_rate != cfg.sample_rate:
            raise ConfigError(f"configuration asks for {wanted.sample_rate} Hz but the checkpoint was trained at "
                              f"{cfg.sample_rate} Hz")
    frames = _load_frames(args.frames, args.anchors, generator.config.channels)
    if frames.shape[0] == 0:
        raise ValueError(f"{args.frames}: no frames")
    audio = synthesize(generator, frames)
    write_wav(args.out, WaveformClip(audio, cfg.sample_rate))
    print(json.dumps({"out": args.out, "samples": int(audio.shape[0]), "sample_rate": cfg.sample_rate}))
    return 0


def cmd_evaluate(args):
    corpus = PreparedCorpus(args.prepared)
    samples = corpus.load_part(args.part)
    if not samples:
        raise CorpusError(f"split part {args.part!r} is empty")
    cfg = _config(args)
    if args.ground_truth:
        synth = None
    else:
        if not args.checkpoint:
            raise UsageError("pass --checkpoint or --ground-truth")
        generator, gen_cfg = load_generator(args.checkpoint, use_best=not args.use_last)
        _check_corpus_rate(corpus, gen_cfg.sample_rate)
        synth = lambda frames: synthesize(generator, frames)  # noqa: E731
    rec_cmd = args.recognizer or cfg.metrics.recognizer_cmd
    pesq_cmd = args.pesq or cfg.metrics.pesq_cmd
    report = evaluate_corpus(synth, samples, CommandRecognizer(rec_cmd) if rec_cmd else None,
                             CommandPesq(pesq_cmd) if pesq_cmd else None, cfg.metrics.av_search_range)
    csv_path, json_path = report.write(args.report)
    print(json.dumps({"csv": csv_path, "json": json_path, "n_clips": len(report.rows),
                      "means": report.means()}, sort_keys=True))
    return 0


def _add_config_args(p):
    p.add_argument("--config", help="YAML file of dotted keys or nested sections")
    p.add_argument("--preset", choices=sorted(PRESETS), help="named base configuration")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override one configuration key (repeatable)")


def build_parser():
    parser = argparse.ArgumentParser(prog="videospeech", description="Video-to-speech WGAN-GP toolkit")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", help="split a dataset root and cache preprocessed frames")
    p.add_argument("--data-root", help=f"dataset root (default: ${DATA_ROOT_ENV})")
    p.add_argument("--out", required=True, help="prepared corpus directory")
    p.add_argument("--split-mode", choices=("speaker_dependent", "speaker_independent"))
    p.add_argument("--seed", type=int)
    p.add_argument("--assignment", help="YAML/JSON {train, validation, test} speaker lists")
    _add_config_args(p)
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("synthetic-corpus", help="write a small synthetic talking-face corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--speakers", type=int, nargs="+", default=[1, 2, 4, 29])
    p.add_argument("--clips", type=int, default=4, help="clips per speaker")
    p.add_argument("--frames", type=int, default=25)
    p.add_argument("--sample-rate", type=int, default=8000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synthetic_corpus)

    p = sub.add_parser("train", help="train on a prepared corpus")
    p.add_argument("--prepared", required=True)
    p.add_argument("--out", required=True, help="run directory (checkpoints and log)")
    p.add_argument("--resume", action="store_true", help="continue from <out>/last.pt")
    p.add_argument("--max-epochs", type=int)
    p.add_argument("--max-generator-steps", type=int)
    p.add_argument("--max-wall-seconds", type=float)
    _add_config_args(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("synthesize", help="generate a WAV from a frame array")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--frames", required=True, help=".npy of preprocessed (T, C, 64, 96) or raw frames")
    p.add_argument("--anchors", help=".npy of (T, 5, 2) anchors; marks --frames as raw")
    p.add_argument("--out", required=True)
    p.add_argument("--use-last", action="store_true", help="use the latest rather than the best generator")
    _add_config_args(p)
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("evaluate", help="score a split and write CSV + JSON reports")
    p.add_argument("--prepared", required=True)
    p.add_argument("--part", default="test", choices=("train", "validation", "test"))
    p.add_argument("--checkpoint")
    p.add_argument("--ground-truth", action="store_true", help="score reference audio against itself")
    p.add_argument("--report", required=True, help="output path prefix")
    p.add_argument("--recognizer", help="command: <cmd> <wav> prints one transcript line")
    p.add_argument("--pesq", help="command: <cmd> <ref wav> <deg wav> prints a score")
    p.add_argument("--use-last", action="store_true")
    _add_config_args(p)
    p.set_defaults(func=cmd_evaluate)
    return parser


def _categorize(exc):
    for types, name, code in ERROR_CATEGORIES:
        if isinstance(exc, types):
            return name, code
    return "internal", 1


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except Exception as exc:  # noqa: BLE001 - every failure becomes one categorized line
        name, code = _categorize(exc)
        if args.verbose:
            log.exception("command failed")
        message = " ".join(str(exc).split()) or exc.__class__.__name__
        print(f"videospeech: error category={name} message={json.dumps(message)}", file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
