"""Ancestral DDPM sampling, optionally on a strided timestep subset.

Deterministic per seed: all noise comes from one explicitly seeded
generator. The final model call can capture attention maps, matching the
last-timestep visualization protocol.
"""

from __future__ import annotations

import torch

from glyphgen.diffusion.codec import IdentityCodec, TinyAutoencoder
from glyphgen.diffusion.ops import estimate_x0
from glyphgen.diffusion.schedule import NoiseSchedule
from glyphgen.diffusion.unet import AttentionMaps, DenoiserModel
from glyphgen.errors import InvalidT


def sampling_timesteps(T: int, steps: int) -> list[int]:
    """Strictly decreasing timesteps from T toward 1, `steps` of them."""
    if steps < 1 or steps > T:
        raise InvalidT(f"steps must be in [1, {T}], got {steps}")
    ts = torch.linspace(T, 1, steps).round().long().tolist()
    out = []
    for t in ts:
        if not out or t < out[-1]:
            out.append(int(t))
    return out


@torch.no_grad()
def sample(
    m: DenoiserModel,
    ctx: torch.Tensor,
    s: NoiseSchedule,
    steps: int | None = None,
    seed: int = 0,
    image_size: int = 64,
    batch: int = 1,
    ctx_pad: torch.Tensor | None = None,
    codec: IdentityCodec | TinyAutoencoder | None = None,
    capture_last: bool = False,
    value_range: tuple[float, float] = (0.0, 1.0),
) -> tuple[torch.Tensor, AttentionMaps | None]:
    """Generate images from pure noise under conditioning rows `ctx`.

    `ctx` may be (L, D) for a shared prompt or (B, L, D) per item. Returns
    images in `value_range`, shape (batch, C, H, W), plus the attention maps
    of the final denoising step when requested.
    """
    codec = codec or IdentityCodec()
    steps = steps or s.T
    if ctx.dim() == 2:
        ctx = ctx[None].expand(batch, -1, -1)
    if ctx.shape[0] != batch:
        raise ValueError(f"ctx batch {ctx.shape[0]} != batch {batch}")

    lo, hi = value_range
    latent_hw = image_size if codec.mode == "identity" else image_size // 2
    shape = (batch, codec.latent_channels, latent_hw, latent_hw)
    g = torch.Generator().manual_seed(seed)
    z = torch.randn(shape, generator=g)

    timesteps = sampling_timesteps(s.T, steps)
    maps: AttentionMaps | None = None
    for i, t_cur in enumerate(timesteps):
        t_prev = timesteps[i + 1] if i + 1 < len(timesteps) else 0
        is_last = t_prev == 0
        t_batch = torch.full((batch,), t_cur, dtype=torch.long)
        eps_hat, maps_i = m(z, t_batch, ctx, ctx_pad=ctx_pad, capture=capture_last and is_last)
        if maps_i is not None:
            maps = maps_i

        ab_cur = float(s.alpha_bar_at(t_cur))
        ab_prev = float(s.alpha_bar_at(t_prev))
        x0 = (z - (1.0 - ab_cur) ** 0.5 * eps_hat) / ab_cur**0.5
        x0 = x0.clamp(lo, hi) if codec.mode == "identity" else x0
        if is_last:
            z = x0
            break
        ratio = ab_cur / ab_prev  # signal retained across the jump
        var = (1.0 - ab_prev) * (1.0 - ratio) / (1.0 - ab_cur)
        mean = (
            ratio**0.5 * (1.0 - ab_prev) / (1.0 - ab_cur) * z
            + ab_prev**0.5 * (1.0 - ratio) / (1.0 - ab_cur) * x0
        )
        noise = torch.randn(shape, generator=g)
        z = mean + var**0.5 * noise

    images = codec.decode(z).clamp(lo, hi)
    return images, maps
