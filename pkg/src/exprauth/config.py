"""Experiment configuration: sections, strict parsing, and presets.

A config is a single JSON document with one section per subsystem. All
defaults match the module-level defaults; unknown keys are rejected so
that typos fail loudly. Two presets ship: "paper" (the full-size
hyperparameter table) and "desk" (a small configuration that trains and
scores end-to-end on a laptop CPU).
"""

import json
from dataclasses import asdict, dataclass, field, fields, replace

from .errors import ConfigurationError
from .model import ModelConfig
from .scorer import GuidanceConfig, ScoringConfig
from .trainer import TrainConfig


@dataclass(frozen=True)
class ScheduleConfig:
    T: int = 1000
    beta_start: float = 1e-4
    beta_end: float = 0.02


@dataclass(frozen=True)
class SynthConfig:
    num_personas: int = 16
    clips_per_persona: int = 32
    noise_level: float = 0.05
    base_seed: int = 0


@dataclass(frozen=True)
class BenchmarkConfig:
    num_subjects: int = 4
    ref_clips: int = 8
    val_clips: int = 8
    test_real: int = 8
    test_fake: int = 8
    reference_seconds: float = 0.0     # 0 disables the duration knob
    sweep_kinds: tuple = ()
    sweep_severities: tuple = (0, 1, 2, 3, 4, 5)


_SECTIONS = {
    "model": ModelConfig,
    "schedule": ScheduleConfig,
    "training": TrainConfig,
    "scoring": ScoringConfig,
    "guidance": GuidanceConfig,
    "synth": SynthConfig,
    "benchmark": BenchmarkConfig,
}


@dataclass
class ExperimentConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    schedule: ScheduleConfig = field(default_factory=ScheduleConfig)
    training: TrainConfig = field(default_factory=TrainConfig)
    scoring: ScoringConfig = field(default_factory=ScoringConfig)
    guidance: GuidanceConfig = field(default_factory=GuidanceConfig)
    synth: SynthConfig = field(default_factory=SynthConfig)
    benchmark: BenchmarkConfig = field(default_factory=BenchmarkConfig)
    seed: int = 0
    out_dir: str = "runs"

    def to_dict(self):
        d = {name: asdict(getattr(self, name)) for name in _SECTIONS}
        d["seed"] = self.seed
        d["out_dir"] = self.out_dir
        return d

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise ConfigurationError("config root must be an object")
        known = set(_SECTIONS) | {"seed", "out_dir", "preset"}
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        base = preset(data["preset"]) if "preset" in data else cls()
        kwargs = {}
        for name, section_cls in _SECTIONS.items():
            section = getattr(base, name)
            if name in data:
                section = _parse_section(section_cls, data[name], name, section)
            kwargs[name] = section
        return cls(
            seed=int(data.get("seed", base.seed)),
            out_dir=str(data.get("out_dir", base.out_dir)),
            **kwargs,
        )

    @classmethod
    def load(cls, path):
        with open(path) as f:
            try:
                data = json.load(f)
            except ValueError as e:
                raise ConfigurationError(f"{path}: invalid JSON: {e}") from e
        return cls.from_dict(data)


def _parse_section(section_cls, data, name, base):
    if not isinstance(data, dict):
        raise ConfigurationError(f"config section {name!r} must be an object")
    valid = {f.name for f in fields(section_cls)}
    unknown = set(data) - valid
    if unknown:
        raise ConfigurationError(
            f"unknown keys in config section {name!r}: {sorted(unknown)}"
        )
    coerced = {
        k: tuple(v) if isinstance(v, list) else v for k, v in data.items()
    }
    try:
        return replace(base, **coerced)
    except (TypeError, ValueError) as e:
        raise ConfigurationError(f"invalid config section {name!r}: {e}") from e


def preset(name):
    """Named configurations: the full-size table and the desk-scale run."""
    if name == "paper":
        return ExperimentConfig(
            model=ModelConfig(),  # L=200, C=512, 8 heads, 8 layers
            training=TrainConfig(batch_size=256, learning_rate=4e-4, epochs=100),
        )
    if name == "desk":
        return ExperimentConfig(
            model=ModelConfig(
                L=50, model_dim=64, mlp_dim=128, num_heads=4, num_layers=2,
                audio_dim=16, adapter_tokens=8,
            ),
            training=TrainConfig(batch_size=64, learning_rate=1e-3, epochs=40),
            synth=SynthConfig(num_personas=16, clips_per_persona=32),
        )
    raise ConfigurationError(f"unknown preset {name!r}; expected 'paper' or 'desk'")
