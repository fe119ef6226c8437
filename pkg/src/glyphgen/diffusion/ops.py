"""Training-objective primitives: the MSE loss and the one-shot x0 estimate."""

from __future__ import annotations

import torch

from glyphgen.diffusion.codec import IdentityCodec, TinyAutoencoder
from glyphgen.diffusion.schedule import NoiseSchedule
from glyphgen.errors import NumericalUnderflow, ShapeMismatch

ALPHA_BAR_FLOOR = 1e-8


def mse_loss(eps_hat: torch.Tensor, eps: torch.Tensor) -> torch.Tensor:
    """Mean of squared differences over all elements."""
    if eps_hat.shape != eps.shape:
        raise ShapeMismatch(f"{tuple(eps_hat.shape)} vs {tuple(eps.shape)}")
    return ((eps_hat - eps) ** 2).mean()


def estimate_x0(
    z_t: torch.Tensor,
    t: int | torch.Tensor,
    eps_hat: torch.Tensor,
    s: NoiseSchedule,
    codec: IdentityCodec | TinyAutoencoder | None = None,
) -> torch.Tensor:
    """Invert the forward marginal: z0' = (z_t - sqrt(1-ab) eps_hat) / sqrt(ab),
    then decode to image space. Differentiable through both steps.

    alpha_bar is floored at 1e-8 so the division cannot blow up at t near T.
    """
    if eps_hat.shape != z_t.shape:
        raise ShapeMismatch(f"{tuple(eps_hat.shape)} vs {tuple(z_t.shape)}")
    ab = s.alpha_bar_at(t).to(z_t.dtype)
    if not torch.isfinite(ab).all() or (ab <= 0).any():
        raise NumericalUnderflow(f"alpha_bar at t={t} is not a positive finite value")
    ab = ab.clamp_min(ALPHA_BAR_FLOOR)
    if ab.dim() > 0 and ab.numel() > 1:
        ab = ab.view(-1, *([1] * (z_t.dim() - 1)))
    z0 = (z_t - torch.sqrt(1.0 - ab) * eps_hat) / torch.sqrt(ab)
    if codec is None:
        return z0
    return codec.decode(z0)
