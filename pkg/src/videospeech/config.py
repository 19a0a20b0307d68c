"""Run configuration: one file of dotted keys (or nested sections) plus overrides."""

import copy
import dataclasses
from dataclasses import dataclass, field

import yaml

from .critic import CriticConfig
from .generator import GeneratorConfig
from .losses import LossWeights
from .trainer import TrainConfig


class ConfigError(ValueError):
    pass


@dataclass
class SpeechEncoderConfig:
    name: str = "frozen-mel-conv"
    weights: str = ""


@dataclass
class MetricsConfig:
    av_search_range: int = 10
    recognizer_cmd: str = ""
    pesq_cmd: str = ""


@dataclass
class DataConfig:
    channels: int = 1
    split_mode: str = "speaker_dependent"
    split_seed: int = 0
    assignment_file: str = ""
    mirror_augment: bool = True


# values filled in from the top level, never set per section
_INJECTED = {"generator": ("sample_rate", "fps", "channels"), "critic": ("sample_rate",)}

SECTIONS = {
    "data": DataConfig,
    "generator": GeneratorConfig,
    "critic": CriticConfig,
    "losses": LossWeights,
    "speech_encoder": SpeechEncoderConfig,
    "trainer": TrainConfig,
    "metrics": MetricsConfig,
}

PRESETS = {
    "full": {
        "sample_rate": 50000,
    },
    "desk": {
        "sample_rate": 8000,
        "generator.encoder_channels": [4, 8, 16, 32, 64],
        "generator.gru_hidden": 64,
        "generator.decoder_channels": 32,
        "critic.clip_seconds": 0.5,
        "critic.base_channels": 16,
        "critic.max_channels": 128,
        "trainer.batch_size": 4,
    },
}


def flatten(mapping, prefix=""):
    out = {}
    for key, value in mapping.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict) and key in SECTIONS and not prefix:
            out.update(flatten(value, name + "."))
        else:
            out[name] = value
    return out


def allowed_keys():
    keys = {"sample_rate", "fps", "preset"}
    for section, cls in SECTIONS.items():
        for f in dataclasses.fields(cls):
            if f.name not in _INJECTED.get(section, ()):
                keys.add(f"{section}.{f.name}")
    return keys


@dataclass
class RunConfig:
    sample_rate: int = 50000
    fps: int = 25
    data: DataConfig = field(default_factory=DataConfig)
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)
    critic: CriticConfig = field(default_factory=CriticConfig)
    losses: LossWeights = field(default_factory=LossWeights)
    speech_encoder: SpeechEncoderConfig = field(default_factory=SpeechEncoderConfig)
    trainer: TrainConfig = field(default_factory=TrainConfig)
    metrics: MetricsConfig = field(default_factory=MetricsConfig)

    @classmethod
    def from_flat(cls, flat):
        """Build from a flat ``{"section.key": value}`` mapping; unknown keys are rejected."""
        flat = dict(flat)
        preset = flat.pop("preset", None)
        merged = {}
        if preset is not None:
            if preset not in PRESETS:
                raise ConfigError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
            merged.update(PRESETS[preset])
        merged.update(flat)
        unknown = sorted(set(merged) - allowed_keys())
        if unknown:
            raise ConfigError(f"unknown configuration keys: {unknown}")
        sample_rate = int(merged.get("sample_rate", 50000))
        fps = int(merged.get("fps", 25))
        sections = {name: {} for name in SECTIONS}
        for key, value in merged.items():
            if "." in key:
                section, name = key.split(".", 1)
                sections[section][name] = value
        channels = sections["data"].get("channels", DataConfig.channels)
        sections["generator"].update(sample_rate=sample_rate, fps=fps, channels=channels)
        sections["critic"].update(sample_rate=sample_rate)
        built = {}
        for name, cls_ in SECTIONS.items():
            try:
                built[name] = cls_(**sections[name])
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"[{name}] {exc}") from exc
        if built["trainer"].betas is not None:
            built["trainer"].betas = tuple(built["trainer"].betas)
        return cls(sample_rate=sample_rate, fps=fps, **built)

    def to_flat(self):
        flat = {"sample_rate": self.sample_rate, "fps": self.fps}
        for section in SECTIONS:
            for key, value in dataclasses.asdict(getattr(self, section)).items():
                if key in _INJECTED.get(section, ()):
                    continue
                flat[f"{section}.{key}"] = list(value) if isinstance(value, tuple) else copy.deepcopy(value)
        return flat


def parse_override(text):
    if "=" not in text:
        raise ConfigError(f"override {text!r} is not of the form key=value")
    key, value = text.split("=", 1)
    return key.strip(), yaml.safe_load(value)


def load_config(path=None, overrides=(), preset=None):
    """Resolve a RunConfig from an optional YAML file, a preset name, and key=value overrides."""
    flat = {}
    if path:
        with open(path) as fh:
            raw = yaml.safe_load(fh) or {}
        if not isinstance(raw, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
        flat.update(flatten(raw))
    if preset is not None:
        flat.setdefault("preset", preset)
    for item in overrides:
        key, value = parse_override(item)
        flat[key] = value
    return RunConfig.from_flat(flat)
