"""Objective terms for WGAN-GP video-to-speech training."""

import math
from dataclasses import dataclass, asdict

import torch


@dataclass
class LossWeights:
    l1: float = 150.0
    tv: float = 120.0
    gp: float = 10.0
    perceptual: float = 70.0

    def __post_init__(self):
        for name, value in asdict(self).items():
            if value < 0:
                raise ValueError(f"loss weight {name} must be >= 0, got {value}")

    def to_dict(self):
        return asdict(self)


@dataclass
class LossBundle:
    """Scalar values of every term plus the weighted total.

    ``side`` is ``"generator"`` (total excludes the penalty) or ``"critic"``
    (total is the critic objective plus the weighted penalty).
    """

    adv: float
    gp: float
    perceptual: float
    l1: float
    tv: float
    total: float
    side: str = "generator"

    def as_dict(self):
        return asdict(self)

    def consistent(self, weights, tol=1e-6):
        if self.side == "critic":
            expected = self.adv + weights.gp * self.gp
        else:
            expected = self.adv + weights.l1 * self.l1 + weights.tv * self.tv + weights.perceptual * self.perceptual
        return abs(self.total - expected) <= tol * max(1.0, abs(expected))


def _scalar(x):
    return float(x.detach()) if torch.is_tensor(x) else float(x)


def adversarial_terms(score_real, score_fake):
    """Critic and generator objectives, both to be minimized.

    critic: -(mean D(real) - mean D(fake)); generator: -mean D(fake).
    """
    score_real = torch.as_tensor(score_real)
    score_fake = torch.as_tensor(score_fake)
    if score_real.numel() == 0 or score_fake.numel() == 0:
        raise ValueError("empty score batch")
    critic = score_fake.mean() - score_real.mean()
    generator = -score_fake.mean()
    return critic, generator


def gradient_penalty(critic, real, fake, generator=None):
    """Mean over the batch of (||grad D(x_hat)||_2 - 1)^2 at random interpolates.

    One interpolation weight is drawn per (real, fake) pair. ``critic`` maps a
    (B, L) tensor to (B,) scores; the penalty stays differentiable w.r.t. its
    parameters.
    """
    if real.shape != fake.shape:
        raise ValueError(f"real and fake clips differ in shape: {tuple(real.shape)} vs {tuple(fake.shape)}")
    eps = torch.rand(real.shape[0], *([1] * (real.ndim - 1)), generator=generator, dtype=real.dtype)
    x_hat = (eps * real.detach() + (1 - eps) * fake.detach()).requires_grad_(True)
    scores = critic(x_hat)
    if not torch.is_tensor(scores) or scores.reshape(-1).shape[0] != real.shape[0]:
        raise ValueError("critic must return one score per input")
    if scores.requires_grad:
        (grads,) = torch.autograd.grad(scores.sum(), x_hat, create_graph=True, allow_unused=True)
    else:
        grads = None
    if grads is None:
        # output independent of the input: zero gradient everywhere
        grads = torch.zeros_like(x_hat)
    if not torch.isfinite(grads).all():
        raise ValueError("critic gradient is not finite at the interpolates")
    norms = grads.reshape(grads.shape[0], -1).norm(2, dim=1)
    return ((norms - 1.0) ** 2).mean()


def perceptual_loss(phi, real, fake):
    """Mean absolute difference between frozen-encoder features of real and fake.

    Gradients flow into ``fake`` only; ``phi``'s parameters are never updated here.
    """
    if real.shape != fake.shape:
        raise ValueError(f"length mismatch: {tuple(real.shape)} vs {tuple(fake.shape)}")
    with torch.no_grad():
        target = phi(real)
    return (phi(fake) - target).abs().mean()


def l1_loss(real, fake):
    if real.shape != fake.shape:
        raise ValueError(f"length mismatch: {tuple(real.shape)} vs {tuple(fake.shape)}")
    return (real - fake).abs().mean()


def tv_loss(waveform):
    """(1/T) * sum_t |x[t+1] - x[t]| along the last axis, averaged over leading axes."""
    waveform = torch.as_tensor(waveform)
    t = waveform.shape[-1]
    if t < 2:
        raise ValueError("total variation needs at least 2 samples")
    return (waveform[..., 1:] - waveform[..., :-1]).abs().sum(-1).mean() / t


def total_generator_loss(terms, weights=None):
    """Weighted generator objective. ``terms`` maps adv/l1/tv/perceptual (and optionally gp) to scalars.

    Returns ``(total_tensor, LossBundle)``; the penalty is reported but not added.
    """
    weights = weights or LossWeights()
    for name in ("adv", "l1", "tv", "perceptual"):
        if not math.isfinite(_scalar(terms[name])):
            raise FloatingPointError(f"loss term {name} is not finite: {_scalar(terms[name])}")
    total = (terms["adv"] + weights.l1 * terms["l1"] + weights.tv * terms["tv"]
             + weights.perceptual * terms["perceptual"])
    values = {k: _scalar(terms[k]) for k in ("adv", "l1", "tv", "perceptual")}
    bundle = LossBundle(
        adv=values["adv"], gp=_scalar(terms.get("gp", 0.0)), perceptual=values["perceptual"],
        l1=values["l1"], tv=values["tv"],
        total=(values["adv"] + weights.l1 * values["l1"] + weights.tv * values["tv"]
               + weights.perceptual * values["perceptual"]),
        side="generator",
    )
    return total, bundle


def total_critic_loss(critic_objective, penalty, weights=None):
    weights = weights or LossWeights()
    total = critic_objective + weights.gp * penalty
    adv, gp = _scalar(critic_objective), _scalar(penalty)
    if not math.isfinite(adv + gp):
        raise FloatingPointError(f"critic loss is not finite: adv={adv} gp={gp}")
    bundle = LossBundle(adv=adv, gp=gp, perceptual=0.0, l1=0.0, tv=0.0, total=adv + weights.gp * gp,
                        side="critic")
    return total, bundle
