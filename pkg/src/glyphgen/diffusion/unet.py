"""Compact UNet denoiser with cross-attention conditioning.

Cross-attention sits at the two coarsest resolution levels plus the
bottleneck. Each site computes Softmax(Q K^T / sqrt(d)) over context tokens
per spatial position; the probability grids can be captured per call for the
attention losses, evaluation, and visualization. Capture is observational:
the predicted noise is identical with and without it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import torch
import torch.nn as nn
import torch.nn.functional as F

from glyphgen.errors import ShapeMismatch


@dataclass
class AttentionMaps:
    """Per-site attention grids: site name -> (B, heads, h'*w', seq_len)."""

    maps: dict[str, torch.Tensor] = field(default_factory=dict)
    resolutions: dict[str, tuple[int, int]] = field(default_factory=dict)

    def sites(self) -> list[str]:
        return list(self.maps)

    def at(self, site: str, batch_index: int | None = None) -> torch.Tensor:
        m = self.maps[site]
        return m if batch_index is None else m[batch_index]


def _timestep_embedding(t: torch.Tensor, dim: int) -> torch.Tensor:
    half = dim // 2
    freqs = torch.exp(-math.log(10_000.0) * torch.arange(half, dtype=torch.float32) / half)
    args = t.float()[:, None] * freqs[None, :]
    emb = torch.cat([torch.sin(args), torch.cos(args)], dim=1)
    if dim % 2 == 1:
        emb = F.pad(emb, (0, 1))
    return emb


def _groups(ch: int) -> int:
    return 8 if ch % 8 == 0 else math.gcd(ch, 4)


class ResBlock(nn.Module):
    def __init__(self, in_ch: int, out_ch: int, time_dim: int):
        super().__init__()
        self.norm1 = nn.GroupNorm(_groups(in_ch), in_ch)
        self.conv1 = nn.Conv2d(in_ch, out_ch, 3, padding=1)
        self.time_proj = nn.Linear(time_dim, out_ch)
        self.norm2 = nn.GroupNorm(_groups(out_ch), out_ch)
        self.conv2 = nn.Conv2d(out_ch, out_ch, 3, padding=1)
        self.skip = nn.Conv2d(in_ch, out_ch, 1) if in_ch != out_ch else nn.Identity()

    def forward(self, x: torch.Tensor, temb: torch.Tensor) -> torch.Tensor:
        h = self.conv1(F.silu(self.norm1(x)))
        h = h + self.time_proj(F.silu(temb))[:, :, None, None]
        h = self.conv2(F.silu(self.norm2(h)))
        return h + self.skip(x)


class CrossAttention(nn.Module):
    """Spatial queries attend over context token rows."""

    def __init__(self, channels: int, context_dim: int, heads: int):
        super().__init__()
        if channels % heads != 0:
            raise ValueError(f"{channels} channels not divisible by {heads} heads")
        self.heads = heads
        self.d = channels // heads
        self.norm = nn.GroupNorm(_groups(channels), channels)
        self.to_q = nn.Linear(channels, channels, bias=False)
        self.to_k = nn.Linear(context_dim, channels, bias=False)
        self.to_v = nn.Linear(context_dim, channels, bias=False)
        self.proj = nn.Linear(channels, channels)

    def attention_probs(
        self, x: torch.Tensor, ctx: torch.Tensor, ctx_pad: torch.Tensor | None
    ) -> tuple[torch.Tensor, torch.Tensor]:
        B, C, H, W = x.shape
        h = self.norm(x).flatten(2).transpose(1, 2)  # (B, HW, C)
        q = self.to_q(h).view(B, H * W, self.heads, self.d).transpose(1, 2)
        k = self.to_k(ctx).view(B, ctx.shape[1], self.heads, self.d).transpose(1, 2)
        v = self.to_v(ctx).view(B, ctx.shape[1], self.heads, self.d).transpose(1, 2)
        logits = q @ k.transpose(2, 3) / math.sqrt(self.d)  # (B, heads, HW, L)
        if ctx_pad is not None:
            logits = logits.masked_fill(ctx_pad[:, None, None, :], -1e9)
        probs = logits.softmax(dim=-1)
        return probs, v

    def forward(
        self,
        x: torch.Tensor,
        ctx: torch.Tensor,
        ctx_pad: torch.Tensor | None = None,
    ) -> tuple[torch.Tensor, torch.Tensor]:
        B, C, H, W = x.shape
        probs, v = self.attention_probs(x, ctx, ctx_pad)
        out = (probs @ v).transpose(1, 2).reshape(B, H * W, C)
        out = self.proj(out).transpose(1, 2).view(B, C, H, W)
        return x + out, probs


class DenoiserModel(nn.Module):
    """UNet predicting the noise added to a latent, conditioned on text rows."""

    def __init__(
        self,
        in_channels: int = 3,
        base_channels: int = 32,
        channel_mults: tuple[int, ...] = (1, 2, 4),
        context_dim: int = 64,
        heads: int = 2,
        attn_levels: tuple[int, ...] | None = None,
    ):
        super().__init__()
        n_levels = len(channel_mults)
        if attn_levels is None:
            attn_levels = tuple(range(max(0, n_levels - 2), n_levels))  # two coarsest
        self.in_channels = in_channels
        self.attn_levels = tuple(attn_levels)
        time_dim = base_channels * 4
        self.time_dim = time_dim
        self.time_mlp = nn.Sequential(
            nn.Linear(time_dim, time_dim), nn.SiLU(), nn.Linear(time_dim, time_dim)
        )

        chans = [base_channels * m for m in channel_mults]
        self.stem = nn.Conv2d(in_channels, base_channels, 3, padding=1)

        self.down_res = nn.ModuleList()
        self.down_attn = nn.ModuleDict()
        self.downsamples = nn.ModuleList()
        in_ch = base_channels
        for lvl, ch in enumerate(chans):
            self.down_res.append(ResBlock(in_ch, ch, time_dim))
            if lvl in self.attn_levels:
                self.down_attn[f"down{lvl}"] = CrossAttention(ch, context_dim, heads)
            if lvl < n_levels - 1:
                self.downsamples.append(nn.Conv2d(ch, ch, 3, stride=2, padding=1))
            in_ch = ch

        self.mid_res1 = ResBlock(chans[-1], chans[-1], time_dim)
        self.mid_attn = CrossAttention(chans[-1], context_dim, heads)
        self.mid_res2 = ResBlock(chans[-1], chans[-1], time_dim)

        self.up_res = nn.ModuleList()
        self.up_attn = nn.ModuleDict()
        self.upsamples = nn.ModuleList()
        for lvl in reversed(range(n_levels)):
            ch = chans[lvl]
            prev = chans[lvl + 1] if lvl < n_levels - 1 else chans[-1]
            self.up_res.append(ResBlock(prev + ch, ch, time_dim))
            if lvl in self.attn_levels:
                self.up_attn[f"up{lvl}"] = CrossAttention(ch, context_dim, heads)
            if lvl > 0:
                self.upsamples.append(nn.Conv2d(ch, ch, 3, padding=1))

        self.out_norm = nn.GroupNorm(_groups(base_channels * channel_mults[0]), base_channels * channel_mults[0])
        self.out_conv = nn.Conv2d(base_channels * channel_mults[0], in_channels, 3, padding=1)

    @property
    def attn_layers(self) -> list[str]:
        names = [f"down{lvl}" for lvl in self.attn_levels]
        names.append("mid")
        names += [f"up{lvl}" for lvl in sorted(self.attn_levels, reverse=True)]
        return names

    def forward(
        self,
        z_t: torch.Tensor,
        t: torch.Tensor,
        ctx: torch.Tensor,
        ctx_pad: torch.Tensor | None = None,
        capture: bool = False,
    ) -> tuple[torch.Tensor, AttentionMaps | None]:
        if z_t.dim() != 4 or z_t.shape[1] != self.in_channels:
            raise ShapeMismatch(f"expected (B, {self.in_channels}, H, W), got {tuple(z_t.shape)}")
        if ctx.dim() != 3 or ctx.shape[0] != z_t.shape[0]:
            raise ShapeMismatch("context rows must be (B, L, D) with matching batch")
        t = torch.as_tensor(t)
        if t.dim() == 0:
            t = t.expand(z_t.shape[0])
        temb = self.time_mlp(_timestep_embedding(t, self.time_dim))
        maps = AttentionMaps() if capture else None

        def run_attn(site: str, attn: CrossAttention, h: torch.Tensor) -> torch.Tensor:
            h, probs = attn(h, ctx, ctx_pad)
            if maps is not None:
                maps.maps[site] = probs
                maps.resolutions[site] = (h.shape[2], h.shape[3])
            return h

        h = self.stem(z_t)
        skips = []
        n_levels = len(self.down_res)
        for lvl in range(n_levels):
            h = self.down_res[lvl](h, temb)
            if f"down{lvl}" in self.down_attn:
                h = run_attn(f"down{lvl}", self.down_attn[f"down{lvl}"], h)
            skips.append(h)
            if lvl < n_levels - 1:
                h = self.downsamples[lvl](h)

        h = self.mid_res1(h, temb)
        h = run_attn("mid", self.mid_attn, h)
        h = self.mid_res2(h, temb)

        up_idx = 0
        for lvl in reversed(range(n_levels)):
            h = torch.cat([h, skips[lvl]], dim=1)
            h = self.up_res[n_levels - 1 - lvl](h, temb)
            if f"up{lvl}" in self.up_attn:
                h = run_attn(f"up{lvl}", self.up_attn[f"up{lvl}"], h)
            if lvl > 0:
                h = F.interpolate(h, scale_factor=2, mode="nearest")
                h = self.upsamples[up_idx](h)
                up_idx += 1

        eps_hat = self.out_conv(F.silu(self.out_norm(h)))
        return eps_hat, maps


def predict_noise(
    m: DenoiserModel,
    z_t: torch.Tensor,
    t: torch.Tensor,
    ctx: torch.Tensor,
    ctx_pad: torch.Tensor | None = None,
    capture: bool = False,
) -> tuple[torch.Tensor, AttentionMaps | None]:
    """Run the denoiser; with capture=True also return the attention maps."""
    return m(z_t, t, ctx, ctx_pad=ctx_pad, capture=capture)
