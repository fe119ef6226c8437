"""Convolutional-recurrent recognizer with CTC output.

Conv stack pools 32x128 inputs to a 16-frame horizontal sequence, a
bidirectional GRU contextualizes the frames, and a linear head emits
per-frame class log-probabilities. The time-pooled GRU output doubles as
the glyph feature vector used to embed words in the text encoder.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from glyphgen.dataforge.render import GlyphImage
from glyphgen.errors import UntrainedModel
from glyphgen.ocr.alphabet import Alphabet
from glyphgen.ocr.ctc import greedy_decode

OCR_CKPT_VERSION = 1


class OCRModel(nn.Module):
    height = 32
    width = 128

    def __init__(self, alphabet: Alphabet, conv_channels: tuple[int, ...] = (24, 32, 48), hidden: int = 48):
        super().__init__()
        self.alphabet = alphabet
        self.hidden = hidden
        self.trained = False

        layers: list[nn.Module] = []
        in_ch = 1
        for ch in conv_channels:
            layers += [
                nn.Conv2d(in_ch, ch, 3, padding=1),
                nn.GroupNorm(8, ch),
                nn.SiLU(),
                nn.MaxPool2d(2),
            ]
            in_ch = ch
        self.conv = nn.Sequential(*layers)
        pool = 2 ** len(conv_channels)
        self.frames = self.width // pool
        conv_feat = conv_channels[-1] * (self.height // pool)
        self.pre_rnn = nn.Linear(conv_feat, hidden)
        self.rnn = nn.GRU(hidden, hidden, batch_first=True, bidirectional=True)
        self.head = nn.Linear(2 * hidden, alphabet.num_classes)

    @property
    def feature_dim(self) -> int:
        return 2 * self.hidden

    def sequence_features(self, x: torch.Tensor) -> torch.Tensor:
        """(B, 1, 32, 128) -> (B, frames, feature_dim) recurrent features."""
        h = self.conv(x)  # (B, C, h', w')
        h = h.permute(0, 3, 1, 2).flatten(2)  # (B, w', C*h')
        h = F.silu(self.pre_rnn(h))
        out, _ = self.rnn(h)
        return out

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        """(B, 1, 32, 128) -> (B, frames, num_classes) log-probabilities."""
        return F.log_softmax(self.head(self.sequence_features(x)), dim=2)


def prepare_image(image: np.ndarray | torch.Tensor) -> torch.Tensor:
    """To a (1, 1, 32, 128) float tensor in [0, 1]; color inputs are averaged."""
    if isinstance(image, np.ndarray):
        t = torch.from_numpy(np.ascontiguousarray(image)).float()
    else:
        t = image.float()
    if t.dim() == 3:  # (h, w, 3) or (3, h, w)
        t = t.mean(dim=2) if t.shape[-1] == 3 else t.mean(dim=0)
    if t.dim() != 2:
        raise ValueError(f"expected a single image, got shape {tuple(t.shape)}")
    t = t[None, None]
    return resize_to_input(t)


def resize_to_input(t: torch.Tensor) -> torch.Tensor:
    """Squash a (B, 1, h, w) batch to recognizer geometry, keeping gradients."""
    if t.shape[-2:] == (OCRModel.height, OCRModel.width):
        return t
    return F.interpolate(
        t, size=(OCRModel.height, OCRModel.width), mode="bilinear", align_corners=False
    )


def recognize(m: OCRModel, image: np.ndarray | torch.Tensor) -> tuple[str, float]:
    """Greedy CTC decode of one image; confidence is mean frame certainty."""
    m.eval()
    with torch.no_grad():
        log_probs = m(prepare_image(image))[0]
    return greedy_decode(log_probs, m.alphabet)


def extract_features(m: OCRModel, g: GlyphImage) -> torch.Tensor:
    """Time-pooled penultimate activation for a rendered word, L2-normalized."""
    if not m.trained:
        raise UntrainedModel("extract_features requires a trained recognizer")
    m.eval()
    with torch.no_grad():
        seq = m.sequence_features(prepare_image(g.pixels))
        pooled = seq.mean(dim=1)[0]
        return pooled / pooled.norm().clamp_min(1e-12)


def save_ocr(m: OCRModel, path: str | Path) -> None:
    torch.save(
        {
            "format_version": OCR_CKPT_VERSION,
            "alphabet": m.alphabet.symbols,
            "hidden": m.hidden,
            "conv_channels": tuple(c[0].out_channels for c in _conv_blocks(m)),
            "trained": m.trained,
            "state_dict": m.state_dict(),
        },
        path,
    )


def _conv_blocks(m: OCRModel) -> list[nn.Sequential]:
    mods = list(m.conv)
    return [nn.Sequential(*mods[i : i + 4]) for i in range(0, len(mods), 4)]


def load_ocr(path: str | Path) -> OCRModel:
    ckpt = torch.load(path, map_location="cpu", weights_only=False)
    if ckpt.get("format_version") != OCR_CKPT_VERSION:
        raise ValueError(f"unsupported OCR checkpoint version {ckpt.get('format_version')}")
    m = OCRModel(
        Alphabet(ckpt["alphabet"]),
        conv_channels=tuple(ckpt["conv_channels"]),
        hidden=ckpt["hidden"],
    )
    m.load_state_dict(ckpt["state_dict"])
    m.trained = ckpt["trained"]
    m.eval()
    return m
