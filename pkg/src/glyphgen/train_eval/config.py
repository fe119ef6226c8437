"""Training configuration: dataclass schema with a strict YAML loader.

Unknown keys are errors so typos cannot silently fall back to defaults.
The same loader serves any nested dataclass config in the package.
"""

from __future__ import annotations

import dataclasses
import types
import typing
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from glyphgen.errors import ConfigError
from glyphgen.glyph_losses import CA_NORM_MAX, CA_NORM_RAW, OCR_CROP_BBOX, OCR_CROP_MASK
from glyphgen.text_encoder.tokenizer import STRATEGIES, WHOLE_WORD


@dataclass
class ScheduleConfig:
    T: int = 200
    kind: str = "cosine"
    beta_start: float = 1e-4
    beta_end: float = 0.02


@dataclass
class ModelConfig:
    base_channels: int = 24
    channel_mults: tuple[int, ...] = (1, 2, 4)
    heads: int = 2
    embed_dim: int = 48
    encoder_depth: int = 2
    encoder_heads: int = 4
    max_seq_len: int = 24
    codec: str = "identity"  # or "tiny-autoencoder"


@dataclass
class LossConfig:
    lambda1: float = 0.4
    lambda2: float = 0.2
    enable_attn: bool = True
    enable_loc: bool = True
    enable_ocr: bool = True
    ca_normalization: str = CA_NORM_MAX
    attn_layers: list[str] | None = None  # None = every capture site
    loc_mask_threshold: float = 0.5
    ocr_crop: str = OCR_CROP_BBOX

    def __post_init__(self):
        if self.ca_normalization not in (CA_NORM_MAX, CA_NORM_RAW):
            raise ConfigError(f"ca_normalization must be max or raw, got {self.ca_normalization!r}")
        if self.ocr_crop not in (OCR_CROP_BBOX, OCR_CROP_MASK):
            raise ConfigError(f"ocr_crop must be bbox or mask, got {self.ocr_crop!r}")


@dataclass
class TrainConfig:
    dataset_dir: str
    out_dir: str
    ocr_checkpoint: str | None = None
    strategy: str = WHOLE_WORD
    losses: LossConfig = field(default_factory=LossConfig)
    schedule: ScheduleConfig = field(default_factory=ScheduleConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    lr: float = 2e-5
    warmup_steps: int = 100
    steps: int = 2000
    batch_size: int = 8
    seed: int = 0
    log_every: int = 50
    checkpoint_every: int = 0  # 0 = final checkpoint only
    bpe_merges: int = 24

    def __post_init__(self):
        if self.lr <= 0:
            raise ConfigError(f"learning rate must be > 0, got {self.lr}")
        if self.steps < 1:
            raise ConfigError(f"steps must be >= 1, got {self.steps}")
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"strategy must be one of {STRATEGIES}, got {self.strategy!r}")
        lw = self.losses
        # an enabled loss with zero weight is a silent no-op: reject it
        if lw.enable_attn and lw.lambda1 == 0:
            raise ConfigError("enable_attn requires lambda1 > 0")
        if lw.enable_loc and lw.lambda2 == 0:
            raise ConfigError("enable_loc requires lambda2 > 0")
        if lw.enable_ocr and (1.0 - lw.lambda1 - lw.lambda2) <= 0:
            raise ConfigError("enable_ocr requires 1 - lambda1 - lambda2 > 0")


def _unwrap_optional(tp):
    origin = typing.get_origin(tp)
    if origin in (typing.Union, types.UnionType):
        args = [a for a in typing.get_args(tp) if a is not type(None)]
        if len(args) == 1:
            return args[0], True
    return tp, False


def dataclass_from_dict(cls, data: dict, path: str = ""):
    """Build a dataclass from a plain dict, rejecting unknown keys."""
    if not isinstance(data, dict):
        raise ConfigError(f"{path or cls.__name__}: expected a mapping, got {type(data).__name__}")
    hints = typing.get_type_hints(cls)
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(data) - set(fields)
    if unknown:
        raise ConfigError(f"{path or cls.__name__}: unknown keys {sorted(unknown)}")
    kwargs = {}
    for name, f in fields.items():
        key_path = f"{path}.{name}" if path else name
        if name not in data:
            if f.default is dataclasses.MISSING and f.default_factory is dataclasses.MISSING:
                raise ConfigError(f"{key_path}: required key missing")
            continue
        value = data[name]
        tp, optional = _unwrap_optional(hints[name])
        if value is None and optional:
            kwargs[name] = None
            continue
        if dataclasses.is_dataclass(tp):
            kwargs[name] = dataclass_from_dict(tp, value, key_path)
        elif typing.get_origin(tp) is tuple:
            kwargs[name] = tuple(value)
        else:
            kwargs[name] = value
    return cls(**kwargs)


def config_to_dict(cfg) -> dict:
    """Dataclass to YAML/JSON-safe dict (tuples become lists)."""

    def convert(value):
        if dataclasses.is_dataclass(value) and not isinstance(value, type):
            return {f.name: convert(getattr(value, f.name)) for f in dataclasses.fields(value)}
        if isinstance(value, (tuple, list)):
            return [convert(v) for v in value]
        return value

    return convert(cfg)


def load_train_config(path: str | Path) -> TrainConfig:
    data = yaml.safe_load(Path(path).read_text())
    return dataclass_from_dict(TrainConfig, data)


def save_config(cfg, path: str | Path) -> None:
    Path(path).write_text(yaml.safe_dump(config_to_dict(cfg), sort_keys=True))
