"""Miniature denoising-diffusion stack with attention capture."""

from glyphgen.diffusion.codec import (
    IDENTITY,
    TINY_AE,
    CodecTrainConfig,
    IdentityCodec,
    TinyAutoencoder,
    train_codec,
)
from glyphgen.diffusion.ops import ALPHA_BAR_FLOOR, estimate_x0, mse_loss
from glyphgen.diffusion.sampler import sample, sampling_timesteps
from glyphgen.diffusion.schedule import (
    SCHEDULE_KINDS,
    NoiseSchedule,
    make_schedule,
    q_sample,
)
from glyphgen.diffusion.unet import (
    AttentionMaps,
    CrossAttention,
    DenoiserModel,
    ResBlock,
    predict_noise,
)

__all__ = [
    "ALPHA_BAR_FLOOR",
    "IDENTITY",
    "SCHEDULE_KINDS",
    "TINY_AE",
    "AttentionMaps",
    "CodecTrainConfig",
    "CrossAttention",
    "DenoiserModel",
    "IdentityCodec",
    "NoiseSchedule",
    "ResBlock",
    "TinyAutoencoder",
    "estimate_x0",
    "make_schedule",
    "mse_loss",
    "predict_noise",
    "q_sample",
    "sample",
    "sampling_timesteps",
    "train_codec",
]
