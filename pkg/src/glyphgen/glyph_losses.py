"""The three glyph-aware losses and the combined objective.

attention_alignment_loss pulls each glyph word's cross-attention map toward
its segmentation mask; local_mse_loss reweights the denoising residual
inside text regions by the image/text area ratio; ocr_recognition_loss runs
the frozen recognizer on the one-shot denoised estimate and scores the word
with CTC, weighted by alpha_bar at the sampled timestep.

All operations are pure functions of their inputs and accept single-sample
tensors; batch reduction is the caller's concern.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import torch
import torch.nn.functional as F

from glyphgen.dataforge.render import SegMask
from glyphgen.diffusion.unet import AttentionMaps
from glyphgen.errors import (
    AllMasksEmpty,
    EmptyMask,
    InvalidWeights,
    MissingMaps,
    UntrainedModel,
)
from glyphgen.ocr.ctc import ctc_loss_batch
from glyphgen.ocr.model import OCRModel, resize_to_input

logger = logging.getLogger(__name__)

CA_NORM_MAX = "max"
CA_NORM_RAW = "raw"
OCR_CROP_BBOX = "bbox"
OCR_CROP_MASK = "mask"


@dataclass(frozen=True)
class LossWeights:
    lambda1: float = 0.4  # attention alignment
    lambda2: float = 0.2  # local MSE; OCR gets 1 - lambda1 - lambda2

    def __post_init__(self):
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise InvalidWeights("lambda1 and lambda2 must be >= 0")
        if self.lambda1 + self.lambda2 > 1.0 + 1e-12:
            raise InvalidWeights("lambda1 + lambda2 must not exceed 1 (OCR weight >= 0)")

    @property
    def ocr_weight(self) -> float:
        return 1.0 - self.lambda1 - self.lambda2


@dataclass
class LossReport:
    total: torch.Tensor | float
    mse: torch.Tensor | float
    attn: torch.Tensor | float
    loc: torch.Tensor | float
    ocr: torch.Tensor | float
    per_word: list[tuple] = field(default_factory=list)  # (g_k, w_k, loc_k, ocr_k)

    def as_floats(self) -> dict[str, float]:
        out = {}
        for k in ("total", "mse", "attn", "loc", "ocr"):
            v = getattr(self, k)
            out[k] = float(v.detach()) if torch.is_tensor(v) else float(v)
        return out


def resize_mask_soft(mask: torch.Tensor | SegMask, size: tuple[int, int]) -> torch.Tensor:
    """Area-averaged (anti-aliased) downsampling of a binary mask to `size`."""
    m = mask.mask if isinstance(mask, SegMask) else mask
    t = torch.as_tensor(m, dtype=torch.float32)
    if t.shape == size:
        return t
    return F.adaptive_avg_pool2d(t[None, None], size)[0, 0]


def resize_mask_binary(
    mask: torch.Tensor | SegMask, size: tuple[int, int], threshold: float = 0.5
) -> torch.Tensor:
    """Soft-resize then re-threshold; used where masks gate pixels."""
    return (resize_mask_soft(mask, size) >= threshold).float()


def attention_alignment_loss(
    maps: AttentionMaps,
    masks: list[SegMask],
    glyph_token_index: list[list[int]],
    layers: list[str] | None = None,
    normalization: str = CA_NORM_MAX,
    batch_index: int = 0,
) -> torch.Tensor:
    """Mean squared distance between per-word attention maps and masks.

    Per word: head means of its token columns are averaged over the selected
    layers within each resolution, optionally max-normalized, and compared
    to the area-averaged mask at that resolution; resolutions and words are
    averaged uniformly.
    """
    if normalization not in (CA_NORM_MAX, CA_NORM_RAW):
        raise ValueError(f"normalization must be 'max' or 'raw', got {normalization!r}")
    n = len(masks)
    if n == 0:
        return torch.zeros(())
    if len(glyph_token_index) != n:
        raise ValueError("glyph_token_index must align with masks")
    for m in masks:
        if not m.mask.any():
            raise EmptyMask("attention alignment target mask has no set pixels")

    sites = layers if layers is not None else maps.sites()
    missing = [s for s in sites if s not in maps.maps]
    if missing or not sites:
        raise MissingMaps(f"attention maps missing for sites {missing or sites}")

    by_resolution: dict[tuple[int, int], list[torch.Tensor]] = {}
    for site in sites:
        grid = maps.maps[site]
        if grid.dim() == 4:
            grid = grid[batch_index]
        by_resolution.setdefault(maps.resolutions[site], []).append(grid)

    word_losses = []
    for k in range(n):
        positions = glyph_token_index[k]
        if not positions:
            raise MissingMaps(f"word {k} has no token positions")
        res_losses = []
        for res, grids in by_resolution.items():
            # mean over layers at this resolution, heads, and the word's tokens
            stacked = torch.stack([g[:, :, positions].mean(dim=2) for g in grids])
            word_map = stacked.mean(dim=(0, 1)).view(res)
            if normalization == CA_NORM_MAX:
                word_map = word_map / word_map.max().clamp_min(1e-8)
            target = resize_mask_soft(masks[k], res)
            res_losses.append(((word_map - target) ** 2).mean())
        word_losses.append(torch.stack(res_losses).mean())
    return torch.stack(word_losses).mean()


def _local_mse_terms(
    eps_hat: torch.Tensor, eps: torch.Tensor, masks: list[SegMask]
) -> tuple[torch.Tensor, list[tuple[int, float, torch.Tensor]]]:
    if eps_hat.shape != eps.shape:
        raise ValueError(f"shape mismatch {tuple(eps_hat.shape)} vs {tuple(eps.shape)}")
    if len(masks) == 0:
        return torch.zeros(()), []
    size = eps_hat.shape[-2:]
    area = size[0] * size[1]
    diff_sq = (eps_hat - eps) ** 2
    terms = []
    for k, m in enumerate(masks):
        binary = resize_mask_binary(m, size)
        mask_area = float(binary.sum())
        if mask_area == 0:
            logger.warning("word %d mask is empty at %s; skipped from local MSE", k, size)
            continue
        w_k = area / mask_area
        term = w_k * (binary[None] * diff_sq).mean()
        terms.append((k, w_k, term))
    if not terms:
        raise AllMasksEmpty(f"no mask survives resizing to {size}")
    loss = torch.stack([t for _, _, t in terms]).mean()
    return loss, terms


def local_mse_loss(
    eps_hat: torch.Tensor, eps: torch.Tensor, masks: list[SegMask]
) -> torch.Tensor:
    """(1/N) sum_k w_k * mean((M_k * (eps_hat - eps))^2), w_k = area ratio.

    A single full-image mask reduces this to the plain MSE loss exactly.
    Words whose resized mask is empty are skipped with a logged warning.
    """
    loss, _ = _local_mse_terms(eps_hat, eps, masks)
    return loss


def word_crops(
    x0_prime: torch.Tensor,
    masks: list[SegMask],
    glyph_words: list[str],
    crop: str = OCR_CROP_BBOX,
) -> list[tuple[int, torch.Tensor]]:
    """Recognizer-ready (1, 1, 32, 128) crops per word: (word index, crop).

    The region is the resized mask's bounding box; crop='mask' additionally
    zeroes pixels outside the ink mask. Words whose resized mask is empty
    are skipped with a logged warning.
    """
    if crop not in (OCR_CROP_BBOX, OCR_CROP_MASK):
        raise ValueError(f"crop must be 'bbox' or 'mask', got {crop!r}")
    if len(masks) != len(glyph_words):
        raise ValueError("masks and glyph_words must be index-aligned")
    size = x0_prime.shape[-2:]
    crops = []
    for k, m in enumerate(masks):
        binary = resize_mask_binary(m, size)
        if binary.sum() == 0:
            logger.warning("word %d mask is empty at %s; skipped from OCR loss", k, size)
            continue
        ys, xs = torch.nonzero(binary, as_tuple=True)
        y0, y1 = int(ys.min()), int(ys.max()) + 1
        x0, x1 = int(xs.min()), int(xs.max()) + 1
        region = x0_prime * binary[None] if crop == OCR_CROP_MASK else x0_prime
        patch = region[:, y0:y1, x0:x1]
        gray = patch.mean(dim=0, keepdim=True)[None]  # (1, 1, h, w)
        crops.append((k, resize_to_input(gray)))
    return crops


def _ocr_terms(
    x0_prime: torch.Tensor,
    masks: list[SegMask],
    glyph_words: list[str],
    ocr_model: OCRModel,
    alpha_bar_t: float,
    crop: str = OCR_CROP_BBOX,
) -> tuple[torch.Tensor, list[tuple[int, torch.Tensor]]]:
    if not ocr_model.trained:
        raise UntrainedModel("ocr_recognition_loss needs a trained recognizer")
    if len(masks) != len(glyph_words):
        raise ValueError("masks and glyph_words must be index-aligned")
    if len(masks) == 0 or alpha_bar_t == 0.0:
        return torch.zeros(()), []

    crops = word_crops(x0_prime, masks, glyph_words, crop)
    if not crops:
        raise AllMasksEmpty(f"no mask survives resizing to {x0_prime.shape[-2:]}")
    batch = torch.cat([c for _, c in crops])
    log_probs = ocr_model(batch)
    losses = ctc_loss_batch(log_probs, [glyph_words[k] for k, _ in crops], ocr_model.alphabet)
    terms = [(k, losses[i]) for i, (k, _) in enumerate(crops)]
    loss = alpha_bar_t / len(terms) * losses.sum()
    return loss, terms


def ocr_recognition_loss(
    x0_prime: torch.Tensor,
    masks: list[SegMask],
    glyph_words: list[str],
    ocr_model: OCRModel,
    alpha_bar_t: float,
    crop: str = OCR_CROP_BBOX,
) -> torch.Tensor:
    """(alpha_bar_t / N) sum_k CTC(recognizer(word region of x0'), g_k).

    The recognizer is frozen; gradient reaches x0_prime only. alpha_bar_t = 0
    short-circuits to zero: fully-noised steps contribute nothing. The word
    region is the resized mask's bounding box; crop='mask' additionally
    zeroes pixels outside the ink mask before recognition.
    """
    loss, _ = _ocr_terms(x0_prime, masks, glyph_words, ocr_model, alpha_bar_t, crop)
    return loss


def total_loss(
    mse: torch.Tensor | float,
    attn: torch.Tensor | float,
    loc: torch.Tensor | float,
    ocr: torch.Tensor | float,
    w: LossWeights,
    per_word: list[tuple] | None = None,
) -> LossReport:
    """Combine components: mse + l1*attn + l2*loc + (1-l1-l2)*ocr."""
    components = {"mse": mse, "attn": attn, "loc": loc, "ocr": ocr}
    for name, value in components.items():
        v = float(value.detach()) if torch.is_tensor(value) else float(value)
        if not (math.isfinite(v) and v >= 0.0):
            raise InvalidWeights(f"{name} component must be finite and >= 0, got {v}")
    total = mse + w.lambda1 * attn + w.lambda2 * loc + w.ocr_weight * ocr
    return LossReport(
        total=total, mse=mse, attn=attn, loc=loc, ocr=ocr, per_word=list(per_word or [])
    )
