"""WGAN-GP training loop: 6 critic updates per generator update, early stopping on validation MCD."""

import json
import logging
import math
import os
import time
from dataclasses import dataclass, field, asdict

import numpy as np
import torch

from .checkpoint import load_checkpoint, save_checkpoint, state_checksum
from .critic import Critic, pad_to_length, sample_clips
from .generator import Generator
from .losses import (
    LossWeights,
    adversarial_terms,
    gradient_penalty,
    l1_loss,
    perceptual_loss,
    total_critic_loss,
    total_generator_loss,
    tv_loss,
)
from .metrics.cepstral import mcd

log = logging.getLogger(__name__)


class TrainingError(RuntimeError):
    pass


@dataclass
class TrainConfig:
    critic_updates_per_gen: int = 6
    lr: float = 1e-4
    betas: tuple = (0.5, 0.9)
    patience_epochs: int = 10
    min_delta: float = 1e-4
    batch_size: int = 8
    max_epochs: int = 1000
    max_generator_steps: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.critic_updates_per_gen < 1:
            raise ValueError("critic_updates_per_gen must be >= 1")
        if self.patience_epochs < 1:
            raise ValueError("patience_epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        self.betas = tuple(self.betas)


@dataclass
class TrainState:
    epoch: int = 0
    step: int = 0
    generator_steps: int = 0
    critic_steps: int = 0
    best_val_mcd: float = math.inf
    best_epoch: int = -1
    epochs_since_improvement: int = 0
    stopped: bool = False

    def to_dict(self):
        return asdict(self)


@dataclass
class Batch:
    video: torch.Tensor
    audio: torch.Tensor
    ids: list = field(default_factory=list)


def collate(samples, samples_per_frame):
    """Stack samples, cropping every clip to the shortest one in the batch."""
    t = min(s.frames.shape[0] for s in samples)
    video = torch.stack([torch.as_tensor(s.frames[:t]) for s in samples]).float()
    audio = torch.stack([torch.as_tensor(s.audio.samples[:t * samples_per_frame]) for s in samples]).float()
    return Batch(video, audio, [s.sample_id for s in samples])


def parameter_checksum(module):
    return state_checksum(module.named_parameters())


class Trainer:
    """Holds both networks, the frozen speech encoder, optimizers, RNG and progress."""

    def __init__(self, generator, critic, speech_encoder, config=None, weights=None, run_config=None):
        self.generator = generator
        self.critic = critic
        self.phi = speech_encoder.freeze()
        self.config = config or TrainConfig()
        self.weights = weights or LossWeights()
        self.run_config = run_config or {}
        cfg = self.config
        self.opt_g = torch.optim.Adam(generator.parameters(), lr=cfg.lr, betas=cfg.betas)
        self.opt_c = torch.optim.Adam(critic.parameters(), lr=cfg.lr, betas=cfg.betas)
        self.rng = torch.Generator().manual_seed(cfg.seed)
        self.state = TrainState()
        self.last_gp = 0.0
        self.best_generator_state = None
        if generator.config.sample_rate != critic.config.sample_rate:
            raise ValueError("generator and critic sample rates differ")
        if speech_encoder.sample_rate != generator.config.sample_rate:
            raise ValueError("speech encoder sample rate differs from the generator's")

    @property
    def clip_length(self):
        return self.critic.config.clip_length

    def _critic_inputs(self, waveforms):
        return pad_to_length(waveforms, self.clip_length)

    def train_step_critic(self, batch, fake=None):
        """One critic update on -(Eq. 1) + lambda_gp * penalty. Generator weights untouched."""
        self.generator.requires_grad_(False)
        self.critic.requires_grad_(True)
        try:
            if fake is None:
                with torch.no_grad():
                    fake = self.generator(batch.video)
            real_clips, _ = sample_clips(self._critic_inputs(batch.audio), self.clip_length, self.rng)
            fake_clips, _ = sample_clips(self._critic_inputs(fake.detach()), self.clip_length, self.rng)
            critic_obj, _ = adversarial_terms(self.critic(real_clips), self.critic(fake_clips))
            penalty = gradient_penalty(self.critic, real_clips, fake_clips, self.rng)
            total, bundle = total_critic_loss(critic_obj, penalty, self.weights)
        except FloatingPointError as exc:
            raise TrainingError(f"critic step {self.state.critic_steps}: {exc}") from exc
        finally:
            self.generator.requires_grad_(True)
        self.opt_c.zero_grad(set_to_none=True)
        total.backward()
        self.opt_c.step()
        self.last_gp = bundle.gp
        self.state.critic_steps += 1
        self.state.step += 1
        return bundle

    def generator_terms(self, batch):
        """Differentiable loss terms for the generator on ``batch`` (critic frozen)."""
        fake = self.generator(batch.video)
        fake_clips, _ = sample_clips(self._critic_inputs(fake), self.clip_length, self.rng)
        _, adv = adversarial_terms(torch.zeros(1), self.critic(fake_clips))
        return {
            "adv": adv,
            "l1": l1_loss(batch.audio, fake),
            "tv": tv_loss(fake),
            "perceptual": perceptual_loss(self.phi, batch.audio, fake),
            "gp": self.last_gp,
        }

    def train_step_generator(self, batch):
        """One generator update on the weighted objective (penalty excluded)."""
        self.critic.requires_grad_(False)
        try:
            terms = self.generator_terms(batch)
            total, bundle = total_generator_loss(terms, self.weights)
        except FloatingPointError as exc:
            raise TrainingError(f"generator step {self.state.generator_steps}: {exc}") from exc
        finally:
            self.critic.requires_grad_(True)
        self.opt_g.zero_grad(set_to_none=True)
        total.backward()
        self.opt_g.step()
        self.state.generator_steps += 1
        self.state.step += 1
        return bundle

    def train_round(self, batch, on_step=None):
        """``critic_updates_per_gen`` critic updates then one generator update on the same batch.

        The generator is fixed during the critic updates, so its output is
        computed once and each critic update draws fresh clip offsets.
        """
        with torch.no_grad():
            fake = self.generator(batch.video)
        for _ in range(self.config.critic_updates_per_gen):
            bundle = self.train_step_critic(batch, fake)
            if on_step:
                on_step("critic", bundle)
        bundle = self.train_step_generator(batch)
        if on_step:
            on_step("generator", bundle)
        return bundle

    def validation_mcd(self, samples):
        scores = []
        for s in samples:
            gen = self.generator.generate(s.frames).numpy()
            scores.append(mcd(s.audio.samples, gen, s.audio.sample_rate))
        return float(np.mean(scores))

    def end_epoch(self, val_mcd):
        """Apply the early-stopping rule; returns True when training should stop."""
        st = self.state
        st.epoch += 1
        if val_mcd < st.best_val_mcd - self.config.min_delta:
            st.best_val_mcd = float(val_mcd)
            st.best_epoch = st.epoch
            st.epochs_since_improvement = 0
            self.best_generator_state = {k: v.clone() for k, v in self.generator.state_dict().items()}
            improved = True
        else:
            st.epochs_since_improvement += 1
            improved = False
        if st.epochs_since_improvement >= self.config.patience_epochs:
            st.stopped = True
        return improved

    def epoch_batches(self, samples):
        order = torch.randperm(len(samples), generator=self.rng).tolist()
        bs = self.config.batch_size
        h = self.generator.samples_per_frame
        for i in range(0, len(order), bs):
            yield collate([samples[j] for j in order[i:i + bs]], h)

    # checkpointing

    def checkpoint_payload(self):
        return {
            "config": self.run_config,
            "generator": self.generator.state_dict(),
            "critic": self.critic.state_dict(),
            "opt_generator": self.opt_g.state_dict(),
            "opt_critic": self.opt_c.state_dict(),
            "state": self.state.to_dict() | {"last_gp": self.last_gp},
            "rng": self.rng.get_state(),
            "best_generator": self.best_generator_state or self.generator.state_dict(),
            "speech_encoder_checksum": self.phi.checksum(),
        }

    def save(self, path):
        return save_checkpoint(path, self.checkpoint_payload())

    def restore(self, data):
        """Load a validated checkpoint dict. All loads are staged before any attribute changes."""
        gen = Generator(self.generator.config)
        gen.load_state_dict(data["generator"])
        critic = Critic(self.critic.config)
        critic.load_state_dict(data["critic"])
        opt_g = torch.optim.Adam(gen.parameters(), lr=self.config.lr, betas=self.config.betas)
        opt_g.load_state_dict(data["opt_generator"])
        opt_c = torch.optim.Adam(critic.parameters(), lr=self.config.lr, betas=self.config.betas)
        opt_c.load_state_dict(data["opt_critic"])
        rng = torch.Generator()
        rng.set_state(data["rng"])
        raw_state = dict(data["state"])
        last_gp = float(raw_state.pop("last_gp", 0.0))
        state = TrainState(**raw_state)
        self.generator, self.critic, self.opt_g, self.opt_c, self.rng = gen, critic, opt_g, opt_c, rng
        self.state, self.last_gp = state, last_gp
        self.best_generator_state = data.get("best_generator")
        return self


class StepLog:
    """Line-delimited JSON training log plus a wall-clock sidecar.

    Loss records are written to ``path`` and are reproducible under a fixed
    seed; per-step wall time goes to ``<path>.timing`` keyed by the same step.
    """

    def __init__(self, path, truncate_after_step=None):
        self.path = path
        self.timing_path = path + ".timing"
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        if truncate_after_step is None:
            for p in (self.path, self.timing_path):
                if os.path.exists(p):
                    os.remove(p)
        else:
            for p in (self.path, self.timing_path):
                _truncate_log(p, truncate_after_step)
        self.t0 = time.time()

    def write(self, record):
        with open(self.path, "a") as fh:
            fh.write(json.dumps(record, sort_keys=True) + "\n")
        with open(self.timing_path, "a") as fh:
            fh.write(json.dumps({"step": record.get("step"), "kind": record["kind"],
                                 "wall_time": round(time.time() - self.t0, 4)}) + "\n")


def _truncate_log(path, last_step):
    if not os.path.exists(path):
        return
    kept = []
    with open(path) as fh:
        for line in fh:
            rec = json.loads(line)
            if rec.get("step", 0) <= last_step:
                kept.append(line)
    with open(path + ".tmp", "w") as fh:
        fh.writelines(kept)
    os.replace(path + ".tmp", path)


def train(trainer, train_samples, val_samples, out_dir=None, validate_fn=None, log_path=None, resume=False,
          max_wall_seconds=None):
    """Run epochs until early stopping (or a step/epoch budget). Returns the final TrainState.

    Writes ``last.pt`` every epoch and ``best.pt`` whenever validation MCD
    improves. ``validate_fn(trainer) -> float`` replaces the MCD computation.
    """
    if not train_samples:
        raise TrainingError("training split is empty")
    if not val_samples and validate_fn is None:
        raise TrainingError("validation split is empty")
    cfg = trainer.config
    if log_path is None and out_dir is not None:
        log_path = os.path.join(out_dir, "train_log.jsonl")
    step_log = StepLog(log_path, trainer.state.step if resume else None) if log_path else None
    st = trainer.state

    def on_step(kind, bundle):
        if not step_log:
            return
        rec = {"step": st.step, "epoch": st.epoch, "kind": kind}
        rec.update({k: v for k, v in bundle.as_dict().items() if k != "side"})
        step_log.write(rec)

    started = time.time()
    while not st.stopped and st.epoch < cfg.max_epochs:
        trainer.generator.train()
        for batch in trainer.epoch_batches(train_samples):
            trainer.train_round(batch, on_step)
            if cfg.max_generator_steps and st.generator_steps >= cfg.max_generator_steps:
                break
        val = validate_fn(trainer) if validate_fn else trainer.validation_mcd(val_samples)
        if not math.isfinite(val):
            raise TrainingError(f"validation MCD is not finite at epoch {st.epoch}")
        improved = trainer.end_epoch(val)
        if step_log:
            step_log.write({"step": st.step, "epoch": st.epoch, "kind": "epoch", "val_mcd": val,
                            "best_val_mcd": st.best_val_mcd, "improved": improved,
                            "epochs_since_improvement": st.epochs_since_improvement})
        log.info("epoch %d val_mcd %.4f best %.4f", st.epoch, val, st.best_val_mcd)
        if out_dir:
            if improved:
                trainer.save(os.path.join(out_dir, "best.pt"))
            trainer.save(os.path.join(out_dir, "last.pt"))
        if cfg.max_generator_steps and st.generator_steps >= cfg.max_generator_steps:
            break
        if max_wall_seconds is not None and time.time() - started > max_wall_seconds:
            break
    return st


def load_trainer(path, builder):
    """Rebuild a trainer from a checkpoint via ``builder(run_config_dict) -> Trainer``."""
    data = load_checkpoint(path)
    trainer = builder(data["config"])
    return trainer.restore(data)
