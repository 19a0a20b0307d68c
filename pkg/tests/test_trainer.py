import math

import pytest
import torch

from videospeech.checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from videospeech.losses import LossWeights
from videospeech.pipeline import build_trainer
from videospeech.trainer import (
    TrainConfig,
    TrainingError,
    collate,
    load_trainer,
    parameter_checksum,
    train,
)

from conftest import synthetic_samples, tiny_run_config


@pytest.fixture(scope="module")
def samples():
    return synthetic_samples(4)


@pytest.fixture
def trainer():
    return build_trainer(tiny_run_config())


def batch_of(samples, trainer):
    return collate(samples[:2], trainer.generator.samples_per_frame)


def test_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(critic_updates_per_gen=0)
    with pytest.raises(ValueError):
        TrainConfig(patience_epochs=0)


def test_critic_step_leaves_generator(trainer, samples):
    batch = batch_of(samples, trainer)
    g0, c0 = parameter_checksum(trainer.generator), parameter_checksum(trainer.critic)
    bundle = trainer.train_step_critic(batch)
    assert parameter_checksum(trainer.generator) == g0
    assert parameter_checksum(trainer.critic) != c0
    assert bundle.gp >= 0 and bundle.side == "critic"
    assert all(p.requires_grad for p in trainer.generator.parameters())


def test_generator_step_leaves_critic(trainer, samples):
    batch = batch_of(samples, trainer)
    g0, c0 = parameter_checksum(trainer.generator), parameter_checksum(trainer.critic)
    bundle = trainer.train_step_generator(batch)
    assert parameter_checksum(trainer.critic) == c0
    assert parameter_checksum(trainer.generator) != g0
    assert bundle.consistent(trainer.weights)
    assert all(p.requires_grad for p in trainer.critic.parameters())


def test_gp_reported_non_negative(trainer, samples):
    batch = batch_of(samples, trainer)
    for _ in range(10):
        assert trainer.train_step_critic(batch).gp >= 0


def test_round_ratio_and_speech_encoder_frozen(trainer, samples):
    phi0 = trainer.phi.checksum()
    batch = batch_of(samples, trainer)
    kinds = []
    for _ in range(3):
        trainer.train_round(batch, lambda kind, b: kinds.append(kind))
    assert kinds == (["critic"] * 6 + ["generator"]) * 3
    assert trainer.state.critic_steps == 6 * trainer.state.generator_steps
    assert trainer.phi.checksum() == phi0


def test_non_finite_loss_aborts(trainer, samples):
    batch = batch_of(samples, trainer)
    batch.audio[0] = math.nan
    with pytest.raises(TrainingError):
        trainer.train_step_critic(batch)
    with pytest.raises(TrainingError):
        trainer.train_step_generator(batch)


def test_patience_one_constant_metric_stops_after_two_epochs(samples):
    trainer = build_trainer(tiny_run_config(**{"trainer.patience_epochs": 1, "trainer.max_epochs": 50}))
    state = train(trainer, samples, samples, validate_fn=lambda t: 7.0)
    assert state.stopped and state.epoch == 2
    assert state.best_epoch == 1
    assert state.critic_steps == 6 * state.generator_steps


@pytest.mark.parametrize("patience", [2, 4])
def test_constant_metric_stops_after_patience_plus_one(samples, patience):
    trainer = build_trainer(tiny_run_config(**{"trainer.patience_epochs": patience, "trainer.max_epochs": 50,
                                               "trainer.batch_size": 4}))
    assert train(trainer, samples, samples, validate_fn=lambda t: 3.0).epoch == patience + 1


def test_improvement_resets_counter(samples):
    trainer = build_trainer(tiny_run_config(**{"trainer.patience_epochs": 2, "trainer.max_epochs": 50,
                                               "trainer.batch_size": 4}))
    values = iter([5.0, 4.0, 4.0, 3.0, 3.0 - 5e-5, 3.0])
    state = train(trainer, samples, samples, validate_fn=lambda t: next(values))
    # 3.0 - 5e-5 is within min_delta, so it does not count as an improvement
    assert state.epoch == 6 and state.best_epoch == 4 and state.best_val_mcd == 3.0


def test_empty_splits_rejected(trainer, samples):
    with pytest.raises(TrainingError):
        train(trainer, [], samples)
    with pytest.raises(TrainingError):
        train(trainer, samples, [])


def test_fixed_seed_identical_trajectory(tmp_path, samples):
    logs = []
    for run in ("a", "b"):
        trainer = build_trainer(tiny_run_config())
        train(trainer, samples, samples, out_dir=str(tmp_path / run))
        logs.append((tmp_path / run / "train_log.jsonl").read_bytes())
    assert logs[0] == logs[1]
    assert logs[0].count(b'"kind": "generator"') == 4
    for field in (b'"adv"', b'"gp"', b'"l1"', b'"tv"', b'"perceptual"'):
        assert field in logs[0]


def test_checkpoint_round_trip(tmp_path, trainer, samples):
    trainer.train_round(batch_of(samples, trainer))
    path = trainer.save(tmp_path / "ck.pt")
    restored = load_trainer(path, build_trainer)
    assert parameter_checksum(restored.generator) == parameter_checksum(trainer.generator)
    assert parameter_checksum(restored.critic) == parameter_checksum(trainer.critic)
    assert restored.state == trainer.state
    batch = batch_of(samples, trainer)
    a, b = trainer.train_round(batch), restored.train_round(batch)
    assert a.as_dict() == b.as_dict()


def test_resume_matches_uninterrupted(tmp_path, samples):
    full = build_trainer(tiny_run_config(**{"trainer.max_epochs": 3}))
    train(full, samples, samples, out_dir=str(tmp_path / "full"))

    part = build_trainer(tiny_run_config(**{"trainer.max_epochs": 3}))
    part.config.max_epochs = 1
    train(part, samples, samples, out_dir=str(tmp_path / "part"))
    resumed = load_trainer(str(tmp_path / "part" / "last.pt"), build_trainer)
    assert resumed.config.max_epochs == 3
    train(resumed, samples, samples, out_dir=str(tmp_path / "part"), resume=True)

    assert (tmp_path / "full" / "train_log.jsonl").read_bytes() == (tmp_path / "part" / "train_log.jsonl").read_bytes()
    assert parameter_checksum(resumed.generator) == parameter_checksum(full.generator)


def test_truncated_checkpoint_clean_error(tmp_path, trainer, samples):
    path = trainer.save(tmp_path / "ck.pt")
    blob = open(path, "rb").read()
    bad = tmp_path / "bad.pt"
    bad.write_bytes(blob[: len(blob) // 2])
    with pytest.raises(CheckpointError):
        load_checkpoint(str(bad))


def test_failed_restore_leaves_trainer_untouched(tmp_path, trainer):
    data = load_checkpoint(trainer.save(tmp_path / "ck.pt"))
    data["critic"] = {k: v[..., :1] for k, v in data["critic"].items()}
    before = parameter_checksum(trainer.generator), parameter_checksum(trainer.critic), trainer.state
    with pytest.raises(RuntimeError):
        trainer.restore(data)
    assert (parameter_checksum(trainer.generator), parameter_checksum(trainer.critic), trainer.state) == before


def test_version_mismatch(tmp_path, trainer):
    payload = trainer.checkpoint_payload()
    path = save_checkpoint(tmp_path / "ck.pt", payload)
    data = torch.load(path, weights_only=True)
    data["version"] = 99
    torch.save(data, path)
    with pytest.raises(CheckpointError, match="version"):
        load_checkpoint(path)


def test_missing_and_foreign_files(tmp_path):
    with pytest.raises(CheckpointError):
        load_checkpoint(str(tmp_path / "nope.pt"))
    torch.save({"a": 1}, tmp_path / "x.pt")
    with pytest.raises(CheckpointError):
        load_checkpoint(str(tmp_path / "x.pt"))


def test_best_checkpoint_holds_best_generator(tmp_path, samples):
    trainer = build_trainer(tiny_run_config(**{"trainer.max_epochs": 3}))
    values = iter([2.0, 1.0, 5.0])
    train(trainer, samples, samples, out_dir=str(tmp_path), validate_fn=lambda t: next(values))
    best = load_checkpoint(str(tmp_path / "best.pt"))
    assert best["state"]["best_epoch"] == 2 and best["state"]["epoch"] == 2
    last = load_checkpoint(str(tmp_path / "last.pt"))
    assert last["state"]["epoch"] == 3
    from videospeech.checkpoint import state_checksum

    assert state_checksum(last["best_generator"]) == state_checksum(best["generator"])


def test_validation_mcd_is_finite(trainer, samples):
    v = trainer.validation_mcd(samples[:2])
    assert math.isfinite(v) and v > 0
