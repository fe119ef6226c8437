"""Noise schedule and the closed-form forward process.

Schedules are computed and stored in float64 so the cumulative-product
identity alpha_bar[t] / alpha_bar[t-1] == alpha[t] holds to accumulation
tolerance; consumers cast down as needed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch

from glyphgen.errors import InvalidT, ShapeMismatch

SCHEDULE_KINDS = ("linear-beta", "cosine")


@dataclass
class NoiseSchedule:
    T: int
    alpha: torch.Tensor  # (T,) float64, alpha[t-1] is the per-step retention at t
    alpha_bar: torch.Tensor  # (T,) float64 cumulative products
    kind: str

    def alpha_bar_at(self, t: int | torch.Tensor) -> torch.Tensor:
        """alpha_bar for timestep(s) t in [0, T]; t=0 extends to 1 (identity)."""
        t = torch.as_tensor(t, dtype=torch.long)
        if (t < 0).any() or (t > self.T).any():
            raise InvalidT(f"timesteps must lie in [0, {self.T}]")
        padded = torch.cat([torch.ones(1, dtype=torch.float64), self.alpha_bar])
        return padded[t]


def make_schedule(
    T: int,
    kind: str = "linear-beta",
    beta_start: float = 1e-4,
    beta_end: float = 0.02,
) -> NoiseSchedule:
    if T < 1:
        raise InvalidT(f"T must be >= 1, got {T}")
    if kind == "linear-beta":
        beta = torch.linspace(beta_start, beta_end, T, dtype=torch.float64)
        alpha = 1.0 - beta
    elif kind == "cosine":
        s = 0.008
        steps = torch.arange(T + 1, dtype=torch.float64)
        f = torch.cos((steps / T + s) / (1 + s) * math.pi / 2) ** 2
        bar = f / f[0]
        alpha = (bar[1:] / bar[:-1]).clamp(1.0 - 0.999, 1.0 - 1e-6)
    else:
        raise ValueError(f"kind must be one of {SCHEDULE_KINDS}, got {kind!r}")
    # cumprod of the stored alphas, so the product identity is exact
    alpha_bar = torch.cumprod(alpha, dim=0)
    return NoiseSchedule(T=T, alpha=alpha, alpha_bar=alpha_bar, kind=kind)


def q_sample(
    z0: torch.Tensor,
    t: int | torch.Tensor,
    eps: torch.Tensor,
    s: NoiseSchedule,
) -> torch.Tensor:
    """z_t = sqrt(alpha_bar_t) z0 + sqrt(1 - alpha_bar_t) eps, per item.

    `t` may be a scalar or a per-item (B,) tensor for batched z0.
    """
    if eps.shape != z0.shape:
        raise ShapeMismatch(f"eps shape {tuple(eps.shape)} != z0 shape {tuple(z0.shape)}")
    ab = s.alpha_bar_at(t).to(z0.dtype)
    if ab.dim() > 0 and ab.numel() > 1:
        if ab.shape[0] != z0.shape[0]:
            raise ShapeMismatch("per-item t length must match batch size")
        ab = ab.view(-1, *([1] * (z0.dim() - 1)))
    return torch.sqrt(ab) * z0 + torch.sqrt(1.0 - ab) * eps
