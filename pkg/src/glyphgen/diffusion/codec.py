"""Image <-> latent codec.

Default is the identity (pixel-space diffusion). A tiny learned autoencoder
is available as an optional mode for latent-space runs; its decode stays
differentiable so recognition gradients can pass through it.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

IDENTITY = "identity"
TINY_AE = "tiny-autoencoder"


class IdentityCodec:
    mode = IDENTITY
    latent_channels = 3

    def encode(self, x: torch.Tensor) -> torch.Tensor:
        return x

    def decode(self, z: torch.Tensor) -> torch.Tensor:
        return z


class TinyAutoencoder(nn.Module):
    """Stride-2 conv autoencoder; halves resolution, latent_channels deep."""

    mode = TINY_AE

    def __init__(self, image_channels: int = 3, hidden: int = 16, latent_channels: int = 4):
        super().__init__()
        self.latent_channels = latent_channels
        self.enc = nn.Sequential(
            nn.Conv2d(image_channels, hidden, 3, stride=2, padding=1),
            nn.SiLU(),
            nn.Conv2d(hidden, latent_channels, 3, padding=1),
        )
        self.dec = nn.Sequential(
            nn.Conv2d(latent_channels, hidden, 3, padding=1),
            nn.SiLU(),
            nn.Upsample(scale_factor=2, mode="nearest"),
            nn.Conv2d(hidden, image_channels, 3, padding=1),
        )

    def encode(self, x: torch.Tensor) -> torch.Tensor:
        return self.enc(x)

    def decode(self, z: torch.Tensor) -> torch.Tensor:
        return self.dec(z)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.decode(self.encode(x))


@dataclass
class CodecTrainConfig:
    steps: int = 400
    batch_size: int = 16
    lr: float = 2e-3
    seed: int = 0
    max_recon_error: float = 0.01  # mean squared error bound on held-out data


def train_codec(images: torch.Tensor, cfg: CodecTrainConfig) -> tuple[TinyAutoencoder, float]:
    """Fit the tiny autoencoder on (N, C, H, W) images in [0, 1].

    Returns the codec and its held-out reconstruction MSE; raises if the
    error bound is not met.
    """
    torch.manual_seed(cfg.seed)
    n_val = max(1, len(images) // 10)
    val, train = images[:n_val], images[n_val:]
    codec = TinyAutoencoder(image_channels=images.shape[1])
    opt = torch.optim.Adam(codec.parameters(), lr=cfg.lr)
    g = torch.Generator().manual_seed(cfg.seed)
    for _ in range(cfg.steps):
        idx = torch.randint(0, len(train), (cfg.batch_size,), generator=g)
        batch = train[idx]
        loss = F.mse_loss(codec(batch), batch)
        opt.zero_grad()
        loss.backward()
        opt.step()
    with torch.no_grad():
        err = float(F.mse_loss(codec(val), val))
    if err > cfg.max_recon_error:
        raise RuntimeError(f"codec held-out MSE {err:.4f} exceeds bound {cfg.max_recon_error}")
    return codec, err
